"""Point-set scores that drive the stopping criterion.

All scores operate on the dark (contour) pixels of binarized images:
``reconstruction_score`` measures how much of the incomplete image the
output reproduces, ``overfit_score`` measures how much of the output is
novel, and ``dissimilarity`` combines the two into the selection target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .kdtree import KDTree


@dataclass(frozen=True)
class ScoreConfig:
    binarize_threshold: float = 0.5
    match_radius: float = 1.5
    gamma: float = 5.0

    def __post_init__(self):
        if not 0.0 < self.binarize_threshold < 1.0:
            raise ConfigError(f"binarize_threshold must be in (0,1), got {self.binarize_threshold}")
        if self.match_radius <= 0:
            raise ConfigError(f"match_radius must be positive, got {self.match_radius}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class GapStat:
    phi_gt: int
    phi_incomplete: int
    gap: float


class PointSet:
    """Dark-pixel coordinates of an image with a lazily built k-d tree index."""

    def __init__(self, points: np.ndarray, height: int, width: int):
        pts = np.asarray(points, dtype=np.intp)
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ShapeError(f"points must be (N, 2), got {pts.shape}")
        if len(pts) and (
            pts[:, 0].min() < 0 or pts[:, 0].max() >= height
            or pts[:, 1].min() < 0 or pts[:, 1].max() >= width
        ):
            raise ShapeError("point coordinates fall outside the image")
        self.points = pts
        self.height = int(height)
        self.width = int(width)
        self._tree: KDTree | None = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def tree(self) -> KDTree:
        if self._tree is None:
            self._tree = KDTree(self.points)
        return self._tree


def binarize(img: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Map an image in [0,1] to hard {0,1}: dark pixels (< threshold) become 0."""
    return np.where(np.asarray(img) < threshold, 0.0, 1.0).astype(np.float32)


def dark_pixel_count(img: np.ndarray, threshold: float = 0.5) -> int:
    return int(np.count_nonzero(np.asarray(img) < threshold))


def extract_points(img: np.ndarray, threshold: float = 0.5) -> PointSet:
    """Collect (row, col) coordinates of all pixels darker than ``threshold``."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ShapeError(f"expected an H x W image, got shape {arr.shape}")
    return PointSet(np.argwhere(arr < threshold), arr.shape[0], arr.shape[1])


def pair_scores(incomplete: PointSet, output_points: np.ndarray, match_radius: float) -> tuple[float, float]:
    """Compute (reconstruction_score, overfit_score) in one tree traversal.

    ``output_points`` are queried against the incomplete image's index: a
    query that matches nothing is a novel output point, and an incomplete
    point that no query reaches is unreconstructed.
    """
    n_out = len(output_points)
    if len(incomplete) == 0:
        rho = 100.0
        omega = 100.0 if n_out else 0.0
        return rho, omega
    if n_out == 0:
        return 0.0, 0.0
    matched, covered = incomplete.tree.mark_matches(output_points, match_radius)
    rho = 100.0 * float(covered.mean())
    omega = 100.0 * float(1.0 - matched.mean())
    return rho, omega


def _check_same_dims(a: np.ndarray, b: np.ndarray) -> None:
    if np.asarray(a).shape != np.asarray(b).shape:
        raise ShapeError(f"image dimensions differ: {np.asarray(a).shape} vs {np.asarray(b).shape}")


def reconstruction_score(output: np.ndarray, incomplete: np.ndarray, cfg: ScoreConfig) -> float:
    """Percentage of the incomplete image's points reproduced by the output."""
    _check_same_dims(output, incomplete)
    inc = extract_points(incomplete, cfg.binarize_threshold)
    out = extract_points(output, cfg.binarize_threshold)
    rho, _ = pair_scores(inc, out.points, cfg.match_radius)
    return rho


def overfit_score(output: np.ndarray, incomplete: np.ndarray, cfg: ScoreConfig) -> float:
    """Percentage of the output's points that are novel relative to the incomplete image."""
    _check_same_dims(output, incomplete)
    inc = extract_points(incomplete, cfg.binarize_threshold)
    out = extract_points(output, cfg.binarize_threshold)
    _, omega = pair_scores(inc, out.points, cfg.match_radius)
    return omega


def dissimilarity(rho: float, omega: float, gamma: float) -> float:
    """Distance of (rho, omega) from the ideal stopping point (100, gamma)."""
    return math.sqrt((rho - 100.0) ** 2 + (omega - gamma) ** 2)


def gap_metric(gt: np.ndarray, incomplete: np.ndarray, threshold: float = 0.5) -> GapStat:
    """Fraction of the ground truth's dark pixels missing from the incomplete image."""
    _check_same_dims(gt, incomplete)
    phi_gt = dark_pixel_count(gt, threshold)
    if phi_gt == 0:
        raise ValueError("gap_metric: ground truth has no dark pixels")
    phi_inc = dark_pixel_count(incomplete, threshold)
    return GapStat(phi_gt=phi_gt, phi_incomplete=phi_inc, gap=(phi_gt - phi_inc) / phi_gt)
