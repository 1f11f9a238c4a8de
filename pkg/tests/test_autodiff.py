"""Tensor engine: forward semantics and gradient correctness."""

import numpy as np
import pytest

from contourfill.autodiff import (
    Tensor,
    channel_norm,
    concat_channels,
    conv2d,
    upsample_nearest2x,
)
from contourfill.errors import ShapeError

from conftest import leaf, max_relative_error, numeric_gradients


def conv_reference(x, w, b, stride, padding):
    """Nested-loop cross-correlation oracle."""
    c_in, h, wd = x.shape
    c_out, _, k, _ = w.shape
    h_out = (h + 2 * padding - k) // stride + 1
    w_out = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((c_out, h_out, w_out), dtype=np.float64)
    for co in range(c_out):
        for oy in range(h_out):
            for ox in range(w_out):
                acc = 0.0
                for ci in range(c_in):
                    for ky in range(k):
                        for kx in range(k):
                            iy = oy * stride + ky - padding
                            ix = ox * stride + kx - padding
                            if 0 <= iy < h and 0 <= ix < wd:
                                acc += x[ci, iy, ix] * w[co, ci, ky, kx]
                out[co, oy, ox] = acc + (b[co] if b is not None else 0.0)
    return out


class TestConv2d:
    def test_identity_kernel(self, rng):
        x = Tensor(rng.random((1, 3, 3)))
        w = Tensor(np.ones((1, 1, 1, 1)))
        b = Tensor(np.zeros(1))
        out = conv2d(x, w, b, stride=1, padding=0)
        np.testing.assert_allclose(out.data, x.data)

    def test_all_ones_kernel_padding(self):
        x = Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        w = Tensor(np.ones((1, 1, 3, 3)))
        b = Tensor(np.zeros(1))
        out = conv2d(x, w, b, stride=1, padding=1)
        np.testing.assert_allclose(out.data[0], [[10.0, 10.0], [10.0, 10.0]])

    def test_strided_matches_loop_oracle(self, rng):
        x = rng.standard_normal((2, 4, 4))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        out = conv2d(
            Tensor(x, dtype=np.float64),
            Tensor(w, dtype=np.float64),
            Tensor(b, dtype=np.float64),
            stride=2,
            padding=1,
        )
        assert out.data.shape == (3, 2, 2)
        np.testing.assert_allclose(out.data, conv_reference(x, w, b, 2, 1), rtol=1e-12)

    def test_linearity(self, rng):
        w = Tensor(rng.standard_normal((3, 2, 3, 3)), dtype=np.float64)
        x = rng.standard_normal((2, 6, 6))
        y = rng.standard_normal((2, 6, 6))
        a, b = 1.7, -0.3
        combined = conv2d(Tensor(a * x + b * y, dtype=np.float64), w, None, 1, 1)
        separate = a * conv2d(Tensor(x, dtype=np.float64), w, None, 1, 1).data + b * conv2d(
            Tensor(y, dtype=np.float64), w, None, 1, 1
        ).data
        np.testing.assert_allclose(combined.data, separate, rtol=1e-10)

    def test_shape_errors_name_dimensions(self, rng):
        x = Tensor(rng.random((2, 4, 4)))
        w = Tensor(rng.random((3, 5, 3, 3)))
        with pytest.raises(ShapeError, match="5 input channels, input has 2"):
            conv2d(x, w, None)
        with pytest.raises(ShapeError, match="odd"):
            conv2d(x, Tensor(rng.random((3, 2, 2, 2))), None)

    def test_gradients_match_finite_differences(self, rng):
        x0 = rng.uniform(0.3, 1.0, (2, 5, 5))
        w0 = rng.uniform(-0.8, 0.8, (3, 2, 3, 3))
        b0 = rng.uniform(-0.5, 0.5, 3)

        def build(arrays):
            x, w, b = (Tensor(a, requires_grad=True, dtype=np.float64) for a in arrays)
            return float(conv2d(x, w, b, stride=2, padding=1).sum_squares().data)

        x = Tensor(x0, requires_grad=True, dtype=np.float64)
        w = Tensor(w0, requires_grad=True, dtype=np.float64)
        b = Tensor(b0, requires_grad=True, dtype=np.float64)
        conv2d(x, w, b, stride=2, padding=1).sum_squares().backward()
        numeric = numeric_gradients(build, [x0, w0, b0])
        assert max_relative_error([x.grad, w.grad, b.grad], numeric) < 1e-4


class TestUpsample:
    def test_block_replication(self):
        x = Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        out = upsample_nearest2x(x)
        expected = [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]]
        np.testing.assert_allclose(out.data[0], expected)

    def test_constant_stays_constant(self):
        x = np.full((2, 3, 3), 0.7, dtype=np.float32)
        out = upsample_nearest2x(Tensor(x))
        assert out.data.shape == (2, 6, 6)
        assert np.all(out.data == x[0, 0, 0])

    def test_backward_sums_blocks(self, rng):
        x0 = rng.standard_normal((1, 3, 3))
        x = Tensor(x0, requires_grad=True, dtype=np.float64)
        upsample_nearest2x(x).mean().scalar_mul(36.0).backward()  # all-ones upstream
        np.testing.assert_allclose(x.grad, np.full((1, 3, 3), 4.0))

        def build(arrays):
            t = Tensor(arrays[0], requires_grad=True, dtype=np.float64)
            return float(upsample_nearest2x(t).mean().scalar_mul(36.0).data)

        numeric = numeric_gradients(build, [x0])
        assert max_relative_error([x.grad], numeric) < 1e-4

    def test_followed_by_average_pool_is_identity(self, rng):
        x0 = rng.standard_normal((3, 4, 4))
        up = upsample_nearest2x(Tensor(x0, dtype=np.float64)).data
        pooled = up.reshape(3, 4, 2, 4, 2).mean(axis=(2, 4))
        np.testing.assert_allclose(pooled, x0)


class TestElementwise:
    def test_sum_squares(self):
        assert float(Tensor([3.0, 4.0]).sum_squares().data) == 25.0

    def test_leaky_relu_negative(self):
        out = Tensor([-2.0]).leaky_relu(0.1)
        np.testing.assert_allclose(out.data, [-0.2], rtol=1e-6)

    def test_sigmoid_derivative_at_zero(self):
        x = Tensor([0.0], requires_grad=True, dtype=np.float64)
        x.sigmoid().mean().backward()
        np.testing.assert_allclose(x.grad, [0.25], rtol=1e-12)

        def build(arrays):
            return float(Tensor(arrays[0], requires_grad=True, dtype=np.float64).sigmoid().mean().data)

        numeric = numeric_gradients(build, [np.array([0.0])])
        assert max_relative_error([x.grad], numeric) < 1e-8

    def test_shape_mismatch_raises(self):
        with pytest.raises(ShapeError):
            Tensor([1.0, 2.0]) + Tensor([1.0, 2.0, 3.0])
        with pytest.raises(ShapeError):
            Tensor([1.0, 2.0]) * Tensor(np.ones((2, 2)))

    def test_mean_and_scalar_ops(self, rng):
        x0 = rng.standard_normal((3, 3))
        x = Tensor(x0, requires_grad=True, dtype=np.float64)
        ((1.0 - x) * Tensor(x0 + 2.0, dtype=np.float64)).mean().backward()
        np.testing.assert_allclose(x.grad, -(x0 + 2.0) / 9.0, rtol=1e-12)


class TestBackward:
    def test_sum_squares_gradient(self):
        w = Tensor([1.0, 2.0], requires_grad=True)
        w.sum_squares().backward()
        np.testing.assert_allclose(w.grad, [2.0, 4.0])

    def test_linear_least_squares_closed_form(self, rng):
        x0 = rng.standard_normal(8)
        y0 = rng.standard_normal(8)
        w0 = rng.standard_normal(8)
        w = Tensor(w0, requires_grad=True, dtype=np.float64)
        x = Tensor(x0, dtype=np.float64)
        y = Tensor(y0, dtype=np.float64)
        residual = w * x - y
        (residual * residual).mean().backward()
        expected = 2.0 * (w0 * x0 - y0) * x0 / 8.0
        np.testing.assert_allclose(w.grad, expected, rtol=1e-12)

    def test_non_scalar_loss_rejected(self):
        with pytest.raises(ShapeError, match="scalar"):
            Tensor([1.0, 2.0], requires_grad=True).backward()

    def test_repeated_backward_accumulates(self):
        w = Tensor([3.0], requires_grad=True)
        loss = w.sum_squares()
        loss.backward()
        loss.backward()
        np.testing.assert_allclose(w.grad, [12.0])

    def test_grad_present_iff_requires_grad(self):
        assert Tensor([1.0]).grad is None
        t = Tensor([1.0], requires_grad=True)
        assert t.grad is not None and t.grad.shape == t.data.shape


class TestChannelNorm:
    def test_normalizes_each_channel(self, rng):
        x = Tensor(rng.standard_normal((3, 4, 4)) * 5 + 2, dtype=np.float64)
        gain = Tensor(np.ones((3, 1, 1)), dtype=np.float64)
        bias = Tensor(np.zeros((3, 1, 1)), dtype=np.float64)
        out = channel_norm(x, gain, bias).data
        np.testing.assert_allclose(out.mean(axis=(1, 2)), 0.0, atol=1e-10)
        np.testing.assert_allclose(out.std(axis=(1, 2)), 1.0, atol=1e-4)

    def test_gradients_match_finite_differences(self, rng):
        x0 = rng.standard_normal((2, 3, 3))
        g0 = rng.uniform(0.5, 1.5, (2, 1, 1))
        b0 = rng.standard_normal((2, 1, 1))
        mix = rng.standard_normal((2, 3, 3))

        def build(arrays):
            x, g, b = (Tensor(a, requires_grad=True, dtype=np.float64) for a in arrays)
            return float((channel_norm(x, g, b) * Tensor(mix, dtype=np.float64)).sum_squares().data)

        x = Tensor(x0, requires_grad=True, dtype=np.float64)
        g = Tensor(g0, requires_grad=True, dtype=np.float64)
        b = Tensor(b0, requires_grad=True, dtype=np.float64)
        (channel_norm(x, g, b) * Tensor(mix, dtype=np.float64)).sum_squares().backward()
        numeric = numeric_gradients(build, [x0, g0, b0])
        assert max_relative_error([x.grad, g.grad, b.grad], numeric) < 1e-5


class TestConcat:
    def test_forward_and_backward_split(self, rng):
        a0 = rng.standard_normal((2, 3, 3))
        b0 = rng.standard_normal((1, 3, 3))
        a = Tensor(a0, requires_grad=True, dtype=np.float64)
        b = Tensor(b0, requires_grad=True, dtype=np.float64)
        out = concat_channels([a, b])
        assert out.data.shape == (3, 3, 3)
        mix = rng.standard_normal((3, 3, 3))
        (out * Tensor(mix, dtype=np.float64)).sum_squares().backward()

        def build(arrays):
            ta = Tensor(arrays[0], requires_grad=True, dtype=np.float64)
            tb = Tensor(arrays[1], requires_grad=True, dtype=np.float64)
            return float((concat_channels([ta, tb]) * Tensor(mix, dtype=np.float64)).sum_squares().data)

        numeric = numeric_gradients(build, [a0, b0])
        # floor excludes near-zero entries where central differencing is noise
        assert max_relative_error([a.grad, b.grad], numeric, floor=1e-4) < 1e-4


def random_graph_loss(arrays, plan):
    """Rebuild the same random op graph from leaf arrays (used for FD checks)."""
    pool = [Tensor(a, requires_grad=True, dtype=np.float64) for a in arrays]
    leaves = list(pool)
    for op, idx in plan:
        t = pool[idx % len(pool)]
        if op == "leaky":
            pool.append(t.leaky_relu(0.1))
        elif op == "sigmoid":
            pool.append(t.sigmoid())
        elif op == "add":
            other = pool[(idx + 1) % len(pool)]
            if other.data.shape == t.data.shape:
                pool.append(t + other)
        elif op == "mul":
            other = pool[(idx + 2) % len(pool)]
            if other.data.shape == t.data.shape:
                pool.append(t * other)
        elif op == "scale":
            pool.append(t.scalar_mul(0.7))
        elif op == "upsample" and t.data.ndim == 3:
            pool.append(upsample_nearest2x(t))
    total = pool[-1].sum_squares()
    for t in pool[len(leaves) : -1]:
        total = total + t.mean().sum_squares()
    return leaves, total


def test_random_graphs_match_finite_differences(rng):
    ops = ["leaky", "sigmoid", "add", "mul", "scale", "upsample"]
    for trial in range(20):
        shape = (2, 3, 3)
        arrays = [np.asarray(leaf(rng, shape).data) for _ in range(3)]
        plan = [(ops[int(rng.integers(len(ops)))], int(rng.integers(10))) for _ in range(6)]

        def build(arrs, plan=plan):
            _, loss = random_graph_loss(arrs, plan)
            return float(loss.data)

        leaves, loss = random_graph_loss(arrays, plan)
        loss.backward()
        numeric = numeric_gradients(build, arrays)
        err = max_relative_error([t.grad for t in leaves], numeric)
        assert err < 1e-4, f"trial {trial}: rel error {err}"


def test_forward_determinism(rng):
    x0 = rng.standard_normal((2, 4, 4))
    w0 = rng.standard_normal((2, 2, 3, 3))

    def run():
        out = conv2d(Tensor(x0), Tensor(w0), None, 1, 1)
        return out.sigmoid().data.tobytes()

    assert run() == run()
