"""Completion loop: selection, traces, determinism, degenerate cases."""

import dataclasses

import numpy as np
import pytest

from contourfill.energy import EnergyConfig
from contourfill.engine import (
    RunConfig,
    complete,
    complete_oracle_best,
    estimate_gamma,
    gamma_from_truth,
)
from contourfill.errors import ConfigError
from contourfill.evaluation import iou, mse
from contourfill.scores import ScoreConfig, overfit_score
from contourfill.shapes import ShapeSpec, render_shape, generate_dataset

from conftest import tiny_generator_config


def small_run_config(**overrides):
    base = dict(
        generator=tiny_generator_config(down_channels=8, up_channels=8, skip_channels=4, noise_channels=8),
        max_iterations=60,
        seed=5,
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def ring_image():
    return render_shape(ShapeSpec("circle", center=(16.0, 16.0), scale=10.0), 32)


class TestComplete:
    def test_complete_image_reaches_full_reconstruction(self, ring_image):
        cfg = small_run_config(max_iterations=80)
        best, trace = complete(ring_image, cfg)
        final = trace.rows[-1]
        assert final.rho >= 99.0
        assert final.omega <= 1.0
        blank_iou = iou(np.ones_like(ring_image), ring_image)
        assert iou(best, ring_image) >= blank_iou

    def test_trace_rows_cover_every_iteration(self, ring_image):
        cfg = small_run_config(max_iterations=25)
        _, trace = complete(ring_image, cfg)
        assert [r.iteration for r in trace.rows] == list(range(1, 26))
        assert 1 <= trace.best_iteration <= 25
        assert trace.best_delta == min(r.delta for r in trace.rows)

    def test_best_output_is_binary(self, ring_image):
        best, _ = complete(ring_image, small_run_config(max_iterations=15))
        assert set(np.unique(best)) <= {0.0, 1.0}

    def test_reproducible_traces(self, ring_image):
        cfg = small_run_config(max_iterations=20)
        _, t1 = complete(ring_image, cfg)
        _, t2 = complete(ring_image, cfg)
        assert t1.rows == t2.rows
        assert t1.best_iteration == t2.best_iteration

    def test_energy_decreases_overall(self, ring_image):
        cfg = small_run_config(max_iterations=60)
        _, trace = complete(ring_image, cfg)
        assert trace.rows[-1].energy <= trace.rows[0].energy

    def test_omega_trends_down(self, ring_image):
        cfg = small_run_config(max_iterations=60)
        _, trace = complete(ring_image, cfg)
        omegas = [r.omega for r in trace.rows]
        q = len(omegas) // 4
        assert np.mean(omegas[-q:]) <= np.mean(omegas[:q])

    def test_score_every_thins_trace(self, ring_image):
        cfg = small_run_config(max_iterations=20, score_every=5)
        _, trace = complete(ring_image, cfg)
        assert [r.iteration for r in trace.rows] == [5, 10, 15, 20]

    def test_snapshots_collected(self, ring_image):
        cfg = small_run_config(max_iterations=20, snapshot_every=7)
        _, trace = complete(ring_image, cfg)
        assert [it for it, _ in trace.snapshots] == [7, 14]
        for _, frame in trace.snapshots:
            assert frame.shape == ring_image.shape

    def test_invalid_inputs_rejected(self, ring_image):
        with pytest.raises(ConfigError):
            complete(ring_image[:30, :], small_run_config())  # not divisible by 4
        with pytest.raises(ConfigError):
            complete(ring_image * 3.0, small_run_config())  # out of [0,1]
        with pytest.raises(ConfigError):
            RunConfig(max_iterations=0)
        with pytest.raises(ConfigError):
            RunConfig(learning_rate=-1.0)


class TestOracleSelection:
    def test_oracle_mse_not_worse_than_delta_pick(self):
        samples = generate_dataset("simple", 2, canvas=64, seed=21)
        s = samples[0]
        gamma = gamma_from_truth(s.ground_truth, s.degraded, ScoreConfig())
        cfg = small_run_config(
            max_iterations=50,
            scores=ScoreConfig(gamma=gamma),
        )
        best_delta, t_delta = complete(s.degraded, cfg)
        best_oracle, t_oracle = complete_oracle_best(s.degraded, s.ground_truth, cfg)
        assert mse(best_oracle, s.ground_truth) <= mse(best_delta, s.ground_truth)
        assert len(t_oracle.rows) == cfg.max_iterations
        assert t_oracle.best_iteration <= cfg.max_iterations

    def test_shape_mismatch_rejected(self, ring_image):
        with pytest.raises(ConfigError):
            complete_oracle_best(ring_image, ring_image[:16, :16], small_run_config())


class TestGamma:
    def test_linear_map(self):
        blank = np.ones((8, 8), np.float32)
        assert estimate_gamma(blank, 0.0) == 0.0
        assert estimate_gamma(blank, 0.23) == pytest.approx(23.0)
        with pytest.raises(ConfigError):
            estimate_gamma(blank, 1.5)

    def test_truth_gamma_equals_overfit_score(self):
        s = generate_dataset("simple", 1, canvas=64, seed=3)[0]
        cfg = ScoreConfig()
        assert gamma_from_truth(s.ground_truth, s.degraded, cfg) == overfit_score(
            s.ground_truth, s.degraded, cfg
        )

    def test_short_gap_dataset_has_smaller_gamma_than_long(self):
        cfg = ScoreConfig()
        simple = generate_dataset("simple", 12, canvas=96, seed=8)
        complex_ = generate_dataset("complex", 12, canvas=96, seed=8)
        g_simple = np.mean([gamma_from_truth(s.ground_truth, s.degraded, cfg) for s in simple])
        g_complex = np.mean([gamma_from_truth(s.ground_truth, s.degraded, cfg) for s in complex_])
        assert g_simple < g_complex
