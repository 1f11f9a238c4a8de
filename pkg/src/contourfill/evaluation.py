"""Experiment harness: method comparison, alpha sweep, gap correlation,
and the receptive-field study.

Heavy experiments fan samples out over a process pool
(CONTOURFILL_WORKERS controls the size); records are keyed by sample id
so aggregation is order-independent.
"""

from __future__ import annotations

import csv
import dataclasses
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import multiprocessing

import numpy as np

from .energy import VARIANT_DIP_SELF_MASK, VARIANT_DSP
from .engine import RunConfig, complete, complete_oracle_best, gamma_from_truth
from .errors import DivergenceError, ShapeError
from .generator import GeneratorConfig
from .scores import extract_points, gap_metric, overfit_score, reconstruction_score
from .shapes import CATEGORIES, DatasetSample, _degrade, _random_shape, _traces

WORKERS_ENV = "CONTOURFILL_WORKERS"

METHOD_RAW = "RAW"
METHOD_DIP = "DIP"
METHOD_DSP = "DSP"


@dataclass
class EvalRecord:
    sample_id: str
    method: str
    mse: float
    iou: float
    best_iteration: int
    wall_time_s: float


@dataclass
class SweepRecord:
    alpha: float
    mse: float
    iou: float
    iterations: float
    time_s: float
    n: int


@dataclass
class RFRecord:
    kernel: int
    gap: int
    success_rate: float
    trials: int


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Pixel-wise mean squared error on the 0-255 scale."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse: image dims differ: {a.shape} vs {b.shape}")
    diff = 255.0 * (a.astype(np.float64) - b.astype(np.float64))
    return float(np.mean(diff * diff))


def iou(a: np.ndarray, b: np.ndarray, threshold: float = 0.5) -> float:
    """Intersection over union of the dark-pixel sets."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"iou: image dims differ: {a.shape} vs {b.shape}")
    dark_a = a < threshold
    dark_b = b < threshold
    union = np.count_nonzero(dark_a | dark_b)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(dark_a & dark_b) / union)


# ----------------------------------------------------------------------
# worker pool


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _limit_blas_threads():
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = "1"


def _pool_map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(
        max_workers=min(workers, len(jobs)), mp_context=ctx, initializer=_limit_blas_threads
    ) as pool:
        return list(pool.map(fn, jobs))


# ----------------------------------------------------------------------
# method comparison (RAW / DIP / DSP)


def _comparison_job(job) -> tuple[str, list[EvalRecord], str | None]:
    sample_id, gt, degraded, cfg = job
    records = [
        EvalRecord(sample_id, METHOD_RAW, mse(degraded, gt), iou(degraded, gt), 0, 0.0)
    ]
    threshold = cfg.scores.binarize_threshold
    try:
        gamma = gamma_from_truth(gt, degraded, cfg.scores)
        dsp_cfg = replace(
            cfg,
            energy=replace(cfg.energy, variant=VARIANT_DSP),
            scores=replace(cfg.scores, gamma=gamma),
        )
        t0 = time.perf_counter()
        best, trace = complete(degraded, dsp_cfg)
        dt = time.perf_counter() - t0
        records.append(
            EvalRecord(sample_id, METHOD_DSP, mse(best, gt), iou(best, gt, threshold), trace.best_iteration, dt)
        )

        dip_cfg = replace(cfg, energy=replace(cfg.energy, variant=VARIANT_DIP_SELF_MASK))
        t0 = time.perf_counter()
        best, trace = complete_oracle_best(degraded, gt, dip_cfg)
        dt = time.perf_counter() - t0
        records.append(
            EvalRecord(sample_id, METHOD_DIP, mse(best, gt), iou(best, gt, threshold), trace.best_iteration, dt)
        )
    except DivergenceError as err:
        return sample_id, records, str(err)
    return sample_id, records, None


def run_comparison(
    samples: list[DatasetSample], cfg: RunConfig, workers: int | None = None
) -> tuple[list[EvalRecord], dict]:
    """Evaluate RAW, DSP (dissimilarity-selected) and the self-mask DIP
    baseline (oracle-selected, per the evaluation protocol) on every sample."""
    jobs = [(s.sample_id, s.ground_truth, s.degraded, cfg) for s in samples]
    results = _pool_map(_comparison_job, jobs, resolve_workers(workers))
    records: list[EvalRecord] = []
    failures: dict[str, str] = {}
    for sample_id, recs, err in results:
        records.extend(recs)
        if err is not None:
            failures[sample_id] = err
    records.sort(key=lambda r: (r.sample_id, r.method))
    summary = {"n_samples": len(samples), "failures": failures, "methods": {}}
    for method in (METHOD_RAW, METHOD_DIP, METHOD_DSP):
        rows = [r for r in records if r.method == method]
        if rows:
            summary["methods"][method] = {
                "mse": float(np.mean([r.mse for r in rows])),
                "iou": float(np.mean([r.iou for r in rows])),
                "iterations": float(np.mean([r.best_iteration for r in rows])),
                "time_s": float(np.mean([r.wall_time_s for r in rows])),
                "n": len(rows),
            }
    return records, summary


# ----------------------------------------------------------------------
# alpha sweep


def _alpha_job(job) -> tuple[float, str, EvalRecord | None]:
    alpha, sample_id, gt, degraded, cfg = job
    gamma = gamma_from_truth(gt, degraded, cfg.scores)
    run_cfg = replace(
        cfg,
        energy=replace(cfg.energy, alpha=alpha, variant=VARIANT_DSP),
        scores=replace(cfg.scores, gamma=gamma),
    )
    try:
        t0 = time.perf_counter()
        best, trace = complete(degraded, run_cfg)
        dt = time.perf_counter() - t0
    except DivergenceError:
        return alpha, sample_id, None
    rec = EvalRecord(
        sample_id,
        METHOD_DSP,
        mse(best, gt),
        iou(best, gt, cfg.scores.binarize_threshold),
        trace.best_iteration,
        dt,
    )
    return alpha, sample_id, rec


def sweep_alpha(
    samples: list[DatasetSample],
    alphas: list[float],
    iterations: int,
    cfg: RunConfig,
    workers: int | None = None,
) -> list[SweepRecord]:
    """Run the completion at each alpha over all samples and aggregate."""
    base = replace(cfg, max_iterations=iterations)
    jobs = [
        (float(a), s.sample_id, s.ground_truth, s.degraded, base)
        for a in alphas
        for s in samples
    ]
    results = _pool_map(_alpha_job, jobs, resolve_workers(workers))
    out = []
    for alpha in alphas:
        recs = [r for a, _, r in results if a == float(alpha) and r is not None]
        if not recs:
            continue
        out.append(
            SweepRecord(
                alpha=float(alpha),
                mse=float(np.mean([r.mse for r in recs])),
                iou=float(np.mean([r.iou for r in recs])),
                iterations=float(np.mean([r.best_iteration for r in recs])),
                time_s=float(np.mean([r.wall_time_s for r in recs])),
                n=len(recs),
            )
        )
    return out


# ----------------------------------------------------------------------
# gap / gamma correlation


def gamma_gap_correlation(samples: list[DatasetSample], score_cfg=None) -> tuple[float, int]:
    """Pearson correlation between the degraded image's novel-point score
    measured from ground truth and the gap fraction.

    Also checks that every ground truth fully reconstructs its degraded
    image (the degraded dark set is a subset, so the score must be 100).
    """
    from .scores import ScoreConfig

    cfg = score_cfg or ScoreConfig()
    omegas, gaps = [], []
    for s in samples:
        rho = reconstruction_score(s.ground_truth, s.degraded, cfg)
        if rho != 100.0:
            raise ValueError(f"sample {s.sample_id}: expected full reconstruction, got rho={rho}")
        omegas.append(overfit_score(s.ground_truth, s.degraded, cfg))
        gaps.append(gap_metric(s.ground_truth, s.degraded, cfg.binarize_threshold).gap)
    r = float(np.corrcoef(np.asarray(omegas), np.asarray(gaps))[0, 1])
    return r, len(samples)


# ----------------------------------------------------------------------
# receptive-field study


def _dilate8(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    h, w = mask.shape
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            src = mask[max(0, -dr) : h - max(0, dr), max(0, -dc) : w - max(0, dc)]
            out[max(0, dr) : h - max(0, -dr), max(0, dc) : w - max(0, -dc)] |= src
    return out


def _rf_success(best: np.ndarray, gt: np.ndarray, removed_segments, score_cfg) -> bool:
    """A trial succeeds when the output is close to the ground truth after
    allowing one pixel of stroke thickening, and every removed segment is at
    least half covered by output points."""
    threshold = score_cfg.binarize_threshold
    dark_gt = gt < threshold
    iou_dilated = iou(gt, np.where(_dilate8(dark_gt), 0.0, 1.0), threshold)
    if iou(best, gt, threshold) < 0.9 * iou_dilated:
        return False
    out_pts = extract_points(best, threshold)
    if len(out_pts) == 0:
        return False
    for seg in removed_segments:
        hit = out_pts.tree.has_within(seg, score_cfg.match_radius)
        if hit.mean() < 0.5:
            return False
    return True


def _rf_job(job) -> tuple[int, int, bool]:
    kernel, gap_px, trial_seed, canvas, cfg = job
    rng = np.random.default_rng(trial_seed)
    category = CATEGORIES[trial_seed % len(CATEGORIES)]
    for _ in range(20):
        try:
            spec = _random_shape(category, canvas, 1, 0.0, rng)
            sample = _degrade(spec, _traces(spec), (canvas, canvas), 2, gap_px, rng)
            break
        except ValueError:
            continue
    else:
        return kernel, gap_px, False
    gamma = gamma_from_truth(sample.ground_truth, sample.degraded, cfg.scores)
    run_cfg = replace(
        cfg,
        generator=replace(cfg.generator, main_kernel=kernel),
        scores=replace(cfg.scores, gamma=gamma),
        seed=trial_seed,
    )
    try:
        best, _ = complete(sample.degraded, run_cfg)
    except DivergenceError:
        return kernel, gap_px, False
    return kernel, gap_px, _rf_success(best, sample.ground_truth, sample.removed_segments, cfg.scores)


def sweep_receptive_field(
    gap_sizes: list[int],
    kernel_sizes: list[int],
    trials: int,
    cfg: RunConfig,
    canvas: int = 64,
    seed: int = 0,
    workers: int | None = None,
) -> list[RFRecord]:
    """Success fraction of completion per (kernel size, gap length) cell.

    Trials are paired: trial i uses the same shape and degradation for
    every kernel size, so the comparison across kernels is like for like.
    """
    for k in kernel_sizes:
        if k % 2 == 0:
            raise ShapeError(f"kernel sizes must be odd, got {k}")
    jobs = []
    for gap_px in gap_sizes:
        for t in range(trials):
            trial_seed = seed * 1_000_003 + gap_px * 1009 + t
            for k in kernel_sizes:
                jobs.append((k, gap_px, trial_seed, canvas, cfg))
    results = _pool_map(_rf_job, jobs, resolve_workers(workers))
    table = []
    for k in kernel_sizes:
        for gap_px in gap_sizes:
            wins = [ok for kk, gg, ok in results if kk == k and gg == gap_px]
            table.append(RFRecord(kernel=k, gap=gap_px, success_rate=float(np.mean(wins)), trials=len(wins)))
    return table


# ----------------------------------------------------------------------
# CSV round-trip


def write_comparison_csv(path: str | Path, records: list[EvalRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "method", "mse", "iou", "best_iteration", "wall_time_s"])
        for r in records:
            writer.writerow([r.sample_id, r.method, repr(r.mse), repr(r.iou), r.best_iteration, repr(r.wall_time_s)])


def read_comparison_csv(path: str | Path) -> list[EvalRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                EvalRecord(
                    row["id"],
                    row["method"],
                    float(row["mse"]),
                    float(row["iou"]),
                    int(row["best_iteration"]),
                    float(row["wall_time_s"]),
                )
            )
    return out


def write_alpha_csv(path: str | Path, records: list[SweepRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "mse", "iou", "iterations", "time"])
        for r in records:
            writer.writerow([repr(r.alpha), repr(r.mse), repr(r.iou), repr(r.iterations), repr(r.time_s)])


def read_alpha_csv(path: str | Path) -> list[SweepRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                SweepRecord(
                    float(row["alpha"]), float(row["mse"]), float(row["iou"]),
                    float(row["iterations"]), float(row["time"]), n=0,
                )
            )
    return out


def write_rf_csv(path: str | Path, records: list[RFRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kernel", "gap", "success_rate", "trials"])
        for r in records:
            writer.writerow([r.kernel, r.gap, repr(r.success_rate), r.trials])


def read_rf_csv(path: str | Path) -> list[RFRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(RFRecord(int(row["kernel"]), int(row["gap"]), float(row["success_rate"]), int(row["trials"])))
    return out


def records_to_dicts(records) -> list[dict]:
    return [dataclasses.asdict(r) for r in records]
