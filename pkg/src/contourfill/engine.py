"""Iterative completion loop: fit the generator to one incomplete image,
score every candidate output, and keep the best snapshot.

Selection is normally by minimum dissimilarity; the evaluation harness can
instead select by minimum error against a known ground truth to replicate
the oracle protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .autodiff import Tensor
from .energy import VARIANT_DSP, EnergyConfig, dsp_energy, dsp_self_mask_baseline
from .errors import ConfigError, DivergenceError
from .generator import GeneratorConfig, forward, init_generator, make_noise
from .optim import Adam
from .scores import ScoreConfig, binarize, dissimilarity, extract_points, overfit_score, pair_scores


@dataclass(frozen=True)
class RunConfig:
    generator: GeneratorConfig = GeneratorConfig()
    energy: EnergyConfig = EnergyConfig()
    scores: ScoreConfig = ScoreConfig()
    max_iterations: int = 2500
    learning_rate: float = 0.01
    score_every: int = 1
    snapshot_every: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.score_every < 1:
            raise ConfigError(f"score_every must be >= 1, got {self.score_every}")
        if self.snapshot_every < 0:
            raise ConfigError(f"snapshot_every must be >= 0, got {self.snapshot_every}")


class TraceRow(NamedTuple):
    iteration: int
    energy: float
    rho: float
    omega: float
    delta: float


@dataclass
class ScoreTrace:
    rows: list[TraceRow] = field(default_factory=list)
    best_iteration: int = 0
    best_delta: float = float("inf")
    best_output: np.ndarray | None = None
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)


def _validate_image(x_i: np.ndarray, depth: int) -> np.ndarray:
    arr = np.asarray(x_i, dtype=np.float32)
    if arr.ndim != 2:
        raise ConfigError(f"expected an H x W image, got shape {arr.shape}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ConfigError("image values must lie in [0, 1]")
    step = 2 ** depth
    if arr.shape[0] % step or arr.shape[1] % step:
        raise ConfigError(
            f"image size {arr.shape[0]}x{arr.shape[1]} must be divisible by 2^depth = {step}"
        )
    return arr


def _run(x_i: np.ndarray, cfg: RunConfig, oracle_gt: np.ndarray | None) -> tuple[np.ndarray, ScoreTrace]:
    gen_cfg = cfg.generator
    arr = _validate_image(x_i, gen_cfg.depth)
    h, w = arr.shape

    init_seed, noise_seed = (int(s) for s in np.random.SeedSequence(cfg.seed).generate_state(2))
    params = init_generator(gen_cfg, rng_seed=init_seed)
    z = make_noise(gen_cfg.noise_channels, h, w, rng_seed=noise_seed, depth=gen_cfg.depth)
    target = Tensor(np.broadcast_to(arr, (gen_cfg.output_channels, h, w)).copy())

    threshold = cfg.scores.binarize_threshold
    radius = cfg.scores.match_radius
    gamma = cfg.scores.gamma
    incomplete_pts = extract_points(arr, threshold)
    gt_binary = binarize(oracle_gt, threshold) if oracle_gt is not None else None

    opt = Adam(params.parameters(), cfg.learning_rate)
    trace = ScoreTrace()
    best_key = float("inf")

    for it in range(1, cfg.max_iterations + 1):
        opt.zero_grad()
        out = forward(params, z)
        if cfg.energy.variant == VARIANT_DSP:
            loss = dsp_energy(out, target, cfg.energy.alpha)
        else:
            loss = dsp_self_mask_baseline(out, target)
        value = float(loss.data)
        if not np.isfinite(value):
            raise DivergenceError(it, value)
        loss.backward()
        opt.step()

        if it % cfg.score_every == 0 or it == cfg.max_iterations:
            gray = out.data.mean(axis=0) if gen_cfg.output_channels > 1 else out.data[0]
            out_points = np.argwhere(gray < threshold)
            rho, omega = pair_scores(incomplete_pts, out_points, radius)
            delta = dissimilarity(rho, omega, gamma)
            trace.rows.append(TraceRow(it, value, rho, omega, delta))
            if gt_binary is None:
                key = delta
            else:
                diff = 255.0 * (binarize(gray, threshold) - gt_binary)
                key = float(np.mean(diff * diff))
            if key < best_key:
                best_key = key
                trace.best_iteration = it
                trace.best_delta = delta
                trace.best_output = binarize(gray, threshold)
        if cfg.snapshot_every and it % cfg.snapshot_every == 0:
            gray = out.data.mean(axis=0) if gen_cfg.output_channels > 1 else out.data[0]
            trace.snapshots.append((it, gray.copy()))

    assert trace.best_output is not None
    return trace.best_output, trace


def complete(x_i: np.ndarray, cfg: RunConfig) -> tuple[np.ndarray, ScoreTrace]:
    """Run the full loop and return the minimum-dissimilarity snapshot."""
    return _run(x_i, cfg, oracle_gt=None)


def complete_oracle_best(x_i: np.ndarray, x_gt: np.ndarray, cfg: RunConfig) -> tuple[np.ndarray, ScoreTrace]:
    """Same loop, but the snapshot minimizes MSE against the ground truth.

    Evaluation protocol only; never available in deployment.
    """
    gt = np.asarray(x_gt, dtype=np.float32)
    if gt.shape != np.asarray(x_i).shape:
        raise ConfigError(f"ground truth shape {gt.shape} differs from input {np.asarray(x_i).shape}")
    return _run(x_i, cfg, oracle_gt=gt)


def estimate_gamma(x_i: np.ndarray, gap_guess: float) -> float:
    """Map an estimated gap fraction to a target overfit score (gamma = 100 * gap)."""
    if not 0.0 <= gap_guess <= 1.0:
        raise ConfigError(f"gap_guess must be in [0,1], got {gap_guess}")
    return 100.0 * float(gap_guess)


def gamma_from_truth(x_gt: np.ndarray, x_i: np.ndarray, cfg: ScoreConfig) -> float:
    """Ideal stopping target when ground truth exists: the completed image's
    own novel-point percentage relative to the incomplete image."""
    return overfit_score(x_gt, x_i, cfg)
