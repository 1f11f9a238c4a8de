"""Dense tensors with reverse-mode automatic differentiation.

The engine is deliberately small: it provides exactly the operations the
convolutional generator and its training loop need (2D convolution,
nearest-neighbor upsampling, channel concatenation, per-channel
normalization, pointwise arithmetic, activations, scalar reductions) and
nothing else. A fresh tape is recorded on every forward pass; calling
``backward()`` on a scalar walks the tape in reverse and accumulates
gradients into every tensor that requires them.

Arrays default to float32. Passing float64 data keeps the graph in
float64, which the test suite uses for high-precision gradient checks.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeError


def _as_float_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if arr.dtype == np.float64 or arr.dtype == np.float32:
        return arr
    return arr.astype(np.float32)


class Tensor:
    """N-dimensional float array participating in gradient computation.

    ``grad`` is allocated (zero-filled, same shape) iff ``requires_grad``
    is set. Backward passes accumulate into it; repeated backward calls
    without a reset keep accumulating.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _as_float_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = any(p.requires_grad for p in parents)
        out.grad = np.zeros_like(data) if out.requires_grad else None
        if out.requires_grad:
            out._parents = tuple(p for p in parents if p.requires_grad)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={tuple(self.data.shape)}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    # ------------------------------------------------------------------
    # backward pass

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every requires_grad tensor on the tape.

        Only valid on single-element tensors.
        """
        if self.data.size != 1:
            raise ShapeError(
                f"backward() requires a scalar loss, got shape {tuple(self.data.shape)}"
            )
        if not self.requires_grad:
            return
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        # op outputs are working buffers: reset them so each backward call
        # deposits the same gradient into the leaves (which do accumulate)
        for node in topo:
            if node._backward is not None:
                node.grad[...] = 0.0
        self.grad += np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # ------------------------------------------------------------------
    # pointwise arithmetic (shapes must match exactly; no broadcasting)

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.full_like(self.data, float(other)))

    def _check_same_shape(self, other: "Tensor", op: str) -> None:
        if self.data.shape != other.data.shape:
            raise ShapeError(
                f"{op}: shapes {tuple(self.data.shape)} and {tuple(other.data.shape)} differ"
            )

    def __add__(self, other) -> "Tensor":
        other = self._coerce(other)
        self._check_same_shape(other, "add")

        def backward(g):
            if self.requires_grad:
                self.grad += g
            if other.requires_grad:
                other.grad += g

        return Tensor._from_op(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        other = self._coerce(other)
        self._check_same_shape(other, "sub")

        def backward(g):
            if self.requires_grad:
                self.grad += g
            if other.requires_grad:
                other.grad -= g

        return Tensor._from_op(self.data - other.data, (self, other), backward)

    def __rsub__(self, other) -> "Tensor":
        return self._coerce(other).__sub__(self)

    def __mul__(self, other) -> "Tensor":
        if not isinstance(other, Tensor):
            return self.scalar_mul(other)
        self._check_same_shape(other, "mul")

        def backward(g):
            if self.requires_grad:
                self.grad += g * other.data
            if other.requires_grad:
                other.grad += g * self.data

        return Tensor._from_op(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self.scalar_mul(-1.0)

    def scalar_mul(self, scalar: float) -> "Tensor":
        scalar = float(scalar)

        def backward(g):
            if self.requires_grad:
                self.grad += g * scalar

        return Tensor._from_op(self.data * scalar, (self,), backward)

    # ------------------------------------------------------------------
    # activations

    def leaky_relu(self, slope: float = 0.1) -> "Tensor":
        slope = float(slope)
        data = self.data

        def backward(g):
            if self.requires_grad:
                self.grad += g * np.where(data > 0, 1.0, slope).astype(data.dtype)

        return Tensor._from_op(np.where(data > 0, data, data * slope), (self,), backward)

    def sigmoid(self) -> "Tensor":
        x = self.data
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)

        def backward(g):
            if self.requires_grad:
                self.grad += g * out * (1.0 - out)

        return Tensor._from_op(out, (self,), backward)

    # ------------------------------------------------------------------
    # reductions

    def mean(self) -> "Tensor":
        n = self.data.size

        def backward(g):
            if self.requires_grad:
                self.grad += g / n

        return Tensor._from_op(np.asarray(self.data.mean(), dtype=self.data.dtype), (self,), backward)

    def sum_squares(self) -> "Tensor":
        data = self.data

        def backward(g):
            if self.requires_grad:
                self.grad += (2.0 * g) * data

        return Tensor._from_op(np.asarray(np.sum(data * data), dtype=data.dtype), (self,), backward)


# ----------------------------------------------------------------------
# spatial operations


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Cross-correlate a C_in x H x W input with C_out x C_in x k x k filters.

    Implemented as im2col plus one matrix product so both directions run
    on BLAS. Gradients flow to the input, the weights, and the bias.
    """
    xd, wd = x.data, weight.data
    if xd.ndim != 3:
        raise ShapeError(f"conv2d input must be C x H x W, got shape {tuple(xd.shape)}")
    if wd.ndim != 4:
        raise ShapeError(f"conv2d weight must be C_out x C_in x k x k, got {tuple(wd.shape)}")
    c_in, h, w = xd.shape
    c_out, c_w, kh, kw = wd.shape
    if kh != kw:
        raise ShapeError(f"conv2d kernel must be square, got {kh}x{kw}")
    k = kh
    if k % 2 == 0:
        raise ShapeError(f"conv2d kernel size must be odd, got {k}")
    if c_w != c_in:
        raise ShapeError(f"conv2d weight expects {c_w} input channels, input has {c_in}")
    if bias is not None and bias.data.shape != (c_out,):
        raise ShapeError(
            f"conv2d bias must have shape ({c_out},), got {tuple(bias.data.shape)}"
        )
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d stride/padding out of range: {stride}, {padding}")
    h_out = (h + 2 * padding - k) // stride + 1
    w_out = (w + 2 * padding - k) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(
            f"conv2d output would be empty: input {h}x{w}, kernel {k}, "
            f"stride {stride}, padding {padding}"
        )

    xp = np.pad(xd, ((0, 0), (padding, padding), (padding, padding))) if padding else xd
    cols = np.empty((c_in, k, k, h_out, w_out), dtype=xd.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, i : i + stride * h_out : stride, j : j + stride * w_out : stride]
    mat = cols.reshape(c_in * k * k, h_out * w_out)
    out = wd.reshape(c_out, -1) @ mat
    if bias is not None:
        out += bias.data[:, None]
    out = out.reshape(c_out, h_out, w_out)

    def backward(g):
        g2 = g.reshape(c_out, -1)
        if weight.requires_grad:
            weight.grad += (g2 @ mat.T).reshape(wd.shape)
        if bias is not None and bias.requires_grad:
            bias.grad += g2.sum(axis=1)
        if x.requires_grad:
            dcols = (wd.reshape(c_out, -1).T @ g2).reshape(c_in, k, k, h_out, w_out)
            dxp = np.zeros_like(xp)
            for i in range(k):
                for j in range(k):
                    dxp[:, i : i + stride * h_out : stride, j : j + stride * w_out : stride] += dcols[:, i, j]
            if padding:
                x.grad += dxp[:, padding : padding + h, padding : padding + w]
            else:
                x.grad += dxp

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, parents, backward)


def pad_reflect(x: Tensor, pad: int) -> Tensor:
    """Reflect-pad the spatial dims of a C x H x W tensor.

    The backward pass folds gradient mass from the mirrored margins back
    onto the interior pixels they were copied from.
    """
    if x.data.ndim != 3:
        raise ShapeError(f"pad_reflect input must be C x H x W, got {tuple(x.data.shape)}")
    if pad < 0:
        raise ShapeError(f"pad must be >= 0, got {pad}")
    if pad == 0:
        return x
    c, h, w = x.data.shape
    if pad >= h or pad >= w:
        raise ShapeError(f"pad {pad} too large for input {h}x{w}")
    out = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)), mode="reflect")

    def fold(g, n, axis):
        idx = lambda s: tuple(s if a == axis else slice(None) for a in range(g.ndim))
        rev = idx(slice(None, None, -1))
        core = g[idx(slice(pad, pad + n))].copy()
        core[idx(slice(1, pad + 1))] += g[idx(slice(0, pad))][rev]
        core[idx(slice(n - pad - 1, n - 1))] += g[idx(slice(pad + n, pad + n + pad))][rev]
        return core

    def backward(g):
        if x.requires_grad:
            x.grad += fold(fold(g, h, 1), w, 2)

    return Tensor._from_op(out, (x,), backward)


def upsample_nearest2x(x: Tensor) -> Tensor:
    """Replicate every pixel of a C x H x W tensor into a 2x2 block."""
    if x.data.ndim != 3:
        raise ShapeError(f"upsample input must be C x H x W, got shape {tuple(x.data.shape)}")
    c, h, w = x.data.shape
    out = np.repeat(np.repeat(x.data, 2, axis=1), 2, axis=2)

    def backward(g):
        if x.requires_grad:
            x.grad += g.reshape(c, h, 2, w, 2).sum(axis=(2, 4))

    return Tensor._from_op(out, (x,), backward)


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate C_i x H x W tensors along the channel axis."""
    if not parts:
        raise ShapeError("concat_channels needs at least one tensor")
    hw = parts[0].data.shape[1:]
    for p in parts:
        if p.data.ndim != 3 or p.data.shape[1:] != hw:
            raise ShapeError(
                "concat_channels operands must share spatial dims, got "
                + ", ".join(str(tuple(q.data.shape)) for q in parts)
            )
    out = np.concatenate([p.data for p in parts], axis=0)
    edges = np.cumsum([0] + [p.data.shape[0] for p in parts])

    def backward(g):
        for p, a, b in zip(parts, edges[:-1], edges[1:]):
            if p.requires_grad:
                p.grad += g[a:b]

    return Tensor._from_op(out, tuple(parts), backward)


def channel_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each channel map to zero mean / unit variance, then scale and shift.

    Statistics are taken over the spatial dimensions of each channel
    independently, so the operation does not depend on any batch. ``gain``
    and ``bias`` have shape (C, 1, 1).
    """
    xd = x.data
    if xd.ndim != 3:
        raise ShapeError(f"channel_norm input must be C x H x W, got {tuple(xd.shape)}")
    c = xd.shape[0]
    if gain.data.shape != (c, 1, 1) or bias.data.shape != (c, 1, 1):
        raise ShapeError(
            f"channel_norm affine params must have shape ({c},1,1), got "
            f"{tuple(gain.data.shape)} and {tuple(bias.data.shape)}"
        )
    mu = xd.mean(axis=(1, 2), keepdims=True)
    centered = xd - mu
    var = np.mean(centered * centered, axis=(1, 2), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        if bias.requires_grad:
            bias.grad += g.sum(axis=(1, 2), keepdims=True)
        if gain.requires_grad:
            gain.grad += (g * xhat).sum(axis=(1, 2), keepdims=True)
        if x.requires_grad:
            gh = g * gain.data
            m1 = gh.mean(axis=(1, 2), keepdims=True)
            m2 = (gh * xhat).mean(axis=(1, 2), keepdims=True)
            x.grad += inv * (gh - m1 - xhat * m2)

    return Tensor._from_op(out, (x, gain, bias), backward)
