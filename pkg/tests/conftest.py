"""Shared test helpers: finite-difference gradient oracle and tiny configs."""

import numpy as np
import pytest

from contourfill.autodiff import Tensor
from contourfill.generator import GeneratorConfig


def numeric_gradients(build_loss, arrays, h=1e-6):
    """Central finite differences of a scalar loss, element by element.

    ``build_loss`` takes a list of float64 numpy arrays and returns the
    scalar loss value computed by a fresh forward pass. Everything runs in
    float64 so the oracle stays well conditioned.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    grads = [np.zeros_like(a) for a in arrays]
    for ai, arr in enumerate(arrays):
        flat = arr.reshape(-1)
        g = grads[ai].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = build_loss(arrays)
            flat[i] = orig - h
            down = build_loss(arrays)
            flat[i] = orig
            g[i] = (up - down) / (2.0 * h)
    return grads


def max_relative_error(analytic, numeric, floor=1e-6):
    """Largest |a - n| / max(|n|, floor) over entries where |n| > floor."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a = np.asarray(a, dtype=np.float64)
        n = np.asarray(n, dtype=np.float64)
        mask = np.abs(n) > floor
        if not mask.any():
            continue
        rel = np.abs(a - n)[mask] / np.abs(n)[mask]
        worst = max(worst, float(rel.max()))
    return worst


def leaf(rng, shape, lo=0.2, hi=1.2):
    """A float64 requires_grad leaf bounded away from activation kinks."""
    data = rng.uniform(lo, hi, size=shape)
    sign = np.where(rng.random(size=shape) < 0.5, -1.0, 1.0)
    return Tensor(data * sign, requires_grad=True, dtype=np.float64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_generator_config(**overrides):
    base = dict(
        depth=2,
        down_channels=4,
        up_channels=4,
        skip_channels=3,
        main_kernel=3,
        skip_kernel=1,
        noise_channels=4,
        output_channels=1,
    )
    base.update(overrides)
    return GeneratorConfig(**base)


def desk_generator_config(**overrides):
    base = dict(
        depth=4,
        down_channels=32,
        up_channels=32,
        skip_channels=16,
        noise_channels=32,
    )
    base.update(overrides)
    return GeneratorConfig(**base)
