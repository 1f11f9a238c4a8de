"""Skip-connected hourglass generator.

The encoder halves the resolution at each level with a stride-2
convolution; the decoder doubles it with nearest-neighbor upsampling
followed by a convolution. 1x1 skip convolutions tap each intermediate
encoder level and are concatenated into the decoder at the matching
resolution. A final 1x1 convolution plus sigmoid produces the output
image in (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .autodiff import Tensor, channel_norm, concat_channels, conv2d, pad_reflect, upsample_nearest2x
from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class GeneratorConfig:
    depth: int = 5
    down_channels: int = 128
    up_channels: int = 128
    skip_channels: int = 64
    main_kernel: int = 3
    skip_kernel: int = 1
    noise_channels: int = 32
    output_channels: int = 1
    leaky_slope: float = 0.1
    normalize: bool = True
    pad_mode: str = "reflect"
    seed: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        for name in ("down_channels", "up_channels", "skip_channels", "noise_channels", "output_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("main_kernel", "skip_kernel"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"{name} must be odd and >= 1, got {k}")
        if not 0.0 <= self.leaky_slope < 1.0:
            raise ConfigError(f"leaky_slope must be in [0,1), got {self.leaky_slope}")
        if self.pad_mode not in ("zeros", "reflect"):
            raise ConfigError(f"pad_mode must be 'zeros' or 'reflect', got {self.pad_mode!r}")


class GeneratorParams:
    """Named parameter tensors in a stable enumeration order."""

    def __init__(self, config: GeneratorConfig, tensors: dict[str, Tensor]):
        self.config = config
        self._tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def names(self) -> Iterator[str]:
        return iter(self._tensors)

    def parameters(self) -> list[Tensor]:
        return list(self._tensors.values())

    def count(self) -> int:
        return sum(t.data.size for t in self._tensors.values())


def _layer_plan(cfg: GeneratorConfig) -> list[tuple[str, int, int, int]]:
    """(name, in_channels, out_channels, kernel) for every convolution."""
    plan = []
    for i in range(1, cfg.depth + 1):
        c_in = cfg.noise_channels if i == 1 else cfg.down_channels
        plan.append((f"down{i}", c_in, cfg.down_channels, cfg.main_kernel))
    for i in range(1, cfg.depth):
        plan.append((f"skip{i}", cfg.down_channels, cfg.skip_channels, cfg.skip_kernel))
    for i in range(cfg.depth, 0, -1):
        c_in = cfg.down_channels if i == cfg.depth else cfg.up_channels
        if i >= 2:
            c_in += cfg.skip_channels
        plan.append((f"up{i}", c_in, cfg.up_channels, cfg.main_kernel))
    plan.append(("out", cfg.up_channels, cfg.output_channels, 1))
    return plan


def init_generator(config: GeneratorConfig, rng_seed: int | None = None) -> GeneratorParams:
    """Draw fresh parameters: fan-in-scaled uniform weights, zero offsets.

    Hidden convolutions carry no additive bias when normalization is on
    (a bias preceding per-channel mean subtraction would be a dead
    parameter); the normalization's learned shift takes its place.
    """
    rng = np.random.default_rng(config.seed if rng_seed is None else rng_seed)
    tensors: dict[str, Tensor] = {}
    for name, c_in, c_out, k in _layer_plan(config):
        fan_in = c_in * k * k
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(c_out, c_in, k, k)).astype(np.float32)
        tensors[f"{name}.weight"] = Tensor(w, requires_grad=True)
        if name == "out" or not config.normalize:
            tensors[f"{name}.bias"] = Tensor(np.zeros(c_out, np.float32), requires_grad=True)
        else:
            tensors[f"{name}.norm_gain"] = Tensor(np.ones((c_out, 1, 1), np.float32), requires_grad=True)
            tensors[f"{name}.norm_bias"] = Tensor(np.zeros((c_out, 1, 1), np.float32), requires_grad=True)
    return GeneratorParams(config, tensors)


def make_noise(channels: int, height: int, width: int, rng_seed: int, depth: int | None = None) -> Tensor:
    """Fixed input noise: i.i.d. uniform on [0, 0.1], no gradient."""
    if depth is not None:
        step = 2 ** depth
        if height % step or width % step:
            raise ConfigError(
                f"noise size {height}x{width} must be divisible by 2^depth = {step}"
            )
    rng = np.random.default_rng(rng_seed)
    data = (rng.random(size=(channels, height, width)) * 0.1).astype(np.float32)
    return Tensor(data, requires_grad=False)


def _block(params: GeneratorParams, name: str, t: Tensor, kernel: int, stride: int) -> Tensor:
    cfg = params.config
    padding = (kernel - 1) // 2
    if padding and cfg.pad_mode == "reflect":
        t = pad_reflect(t, padding)
        padding = 0
    bias = None if cfg.normalize else params[f"{name}.bias"]
    t = conv2d(t, params[f"{name}.weight"], bias, stride, padding)
    if cfg.normalize:
        t = channel_norm(t, params[f"{name}.norm_gain"], params[f"{name}.norm_bias"])
    return t.leaky_relu(cfg.leaky_slope)


def forward(params: GeneratorParams, z: Tensor) -> Tensor:
    """Map the noise tensor to an output image of the same spatial size."""
    cfg = params.config
    if z.data.ndim != 3 or z.data.shape[0] != cfg.noise_channels:
        raise ShapeError(
            f"noise must be {cfg.noise_channels} x H x W, got {tuple(z.data.shape)}"
        )
    _, h, w = z.data.shape
    step = 2 ** cfg.depth
    if h % step or w % step:
        raise ShapeError(f"input size {h}x{w} must be divisible by 2^depth = {step}")

    encoded = []
    t = z
    for i in range(1, cfg.depth + 1):
        t = _block(params, f"down{i}", t, cfg.main_kernel, 2)
        encoded.append(t)
    x = encoded[-1]
    for i in range(cfg.depth, 0, -1):
        x = upsample_nearest2x(x)
        if i >= 2:
            s = _block(params, f"skip{i-1}", encoded[i - 2], cfg.skip_kernel, 1)
            x = concat_channels([x, s])
        x = _block(params, f"up{i}", x, cfg.main_kernel, 1)
    out = conv2d(x, params["out.weight"], params["out.bias"], 1, 0)
    return out.sigmoid()


def receptive_field_of_layers(layers: Iterable[tuple[int, float]]) -> int:
    """Compose (kernel, stride) layers: r += (k-1)*j and j *= s, from r = j = 1."""
    r = 1.0
    j = 1.0
    for k, s in layers:
        r += (k - 1) * j
        j *= s
    return int(round(r))


def receptive_field(config: GeneratorConfig) -> int:
    """Theoretical receptive field of one output pixel over the noise input."""
    layers: list[tuple[int, float]] = [(config.main_kernel, 2.0)] * config.depth
    for _ in range(config.depth):
        layers.append((1, 0.5))               # nearest-neighbor upsample
        layers.append((config.main_kernel, 1.0))
    layers.append((1, 1.0))                   # 1x1 output conv
    return receptive_field_of_layers(layers)
