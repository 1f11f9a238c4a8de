"""Energy functions minimized by the completion loop.

Images follow the repo-wide polarity: contour pixels are dark (near 0),
background is light (near 1). Norms are plain sums of squares over all
pixels and channels; the evaluation harness reports mean squared error
separately.
"""

from __future__ import annotations

from dataclasses import dataclass

from .autodiff import Tensor
from .errors import ConfigError, ShapeError

VARIANT_DSP = "dsp"
VARIANT_DIP_SELF_MASK = "dip_self_mask"
VARIANTS = (VARIANT_DSP, VARIANT_DIP_SELF_MASK)


@dataclass(frozen=True)
class EnergyConfig:
    alpha: float = 0.15
    variant: str = VARIANT_DSP

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0,1], got {self.alpha}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


def dip_energy(x: Tensor, target: Tensor, mask: Tensor) -> Tensor:
    """Masked reconstruction energy ||(x - target) * mask||^2."""
    if x.shape != target.shape or x.shape != mask.shape:
        raise ShapeError(
            f"dip_energy: shapes differ: x {x.shape}, target {target.shape}, mask {mask.shape}"
        )
    return ((x - target) * mask).sum_squares()


def dsp_energy(x: Tensor, target: Tensor, alpha: float) -> Tensor:
    """Maskless completion energy.

    alpha * ||(x - target) * target||^2 pins the light background
    (missing-region reconstruction), while
    (1 - alpha) * ||(1-x)*(1-target) - (1-target)*(1-target)||^2 pins the
    existing dark contours. Both terms vanish exactly at x == target.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0,1], got {alpha}")
    if x.shape != target.shape:
        raise ShapeError(f"dsp_energy: shapes differ: x {x.shape}, target {target.shape}")
    fill = ((x - target) * target).sum_squares()
    inv_t = 1.0 - target
    keep = ((1.0 - x) * inv_t - inv_t * inv_t).sum_squares()
    return fill.scalar_mul(alpha) + keep.scalar_mul(1.0 - alpha)


def dsp_self_mask_baseline(x: Tensor, target: Tensor) -> Tensor:
    """Baseline that reuses the incomplete image as its own mask."""
    return dip_energy(x, target, target)
