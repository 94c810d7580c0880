"""Minimal reverse-mode automatic differentiation over numpy arrays.

Tensors wrap a numpy array and, when gradient tracking is on, a record of
the op that produced them. Calling :func:`backward` on a scalar loss walks
the graph in reverse topological order and accumulates gradients into every
tracked tensor. Gradients accumulate across calls; callers zero them
explicitly between optimizer steps.

Ops that never see a tracked input skip graph construction entirely, so
inference runs without bookkeeping overhead.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Tensor:
    """N-dimensional value container with optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # Operator sugar; every dunder routes through the module-level ops.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul_scalar(_as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other), mul_scalar(self, -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return mul_scalar(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return mul_scalar(self, 1.0 / float(other))
        raise TypeError("tensor/tensor division is not supported")

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value, parents, backward_fn) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(value, requires_grad=True, _parents=parents, _backward=backward_fn)
    return Tensor(value)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce gradient g to the given operand shape after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_val = a.data + b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(out_val, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_val = a.data * b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(out_val, (a, b), backward_fn)


def mul_scalar(a, s: float) -> Tensor:
    a = _as_tensor(a)
    out_val = a.data * s

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g * s)

    return _make(out_val, (a,), backward_fn)


def matmul(a, b) -> Tensor:
    """Batched matrix product with broadcasting over leading axes."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(
            f"matmul inner dims disagree: {a.data.shape} @ {b.data.shape}"
        )
    out_val = np.matmul(a.data, b.data)

    def backward_fn(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a._accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b._accumulate(_unbroadcast(gb, b.data.shape))

    return _make(out_val, (a, b), backward_fn)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(shape)
    out_val = a.data.reshape(shape)

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return _make(out_val, (a,), backward_fn)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    inv = np.argsort(axes)
    out_val = np.transpose(a.data, axes)

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(np.transpose(g, inv))

    return _make(out_val, (a,), backward_fn)


def softmax_lastdim(x) -> Tensor:
    """Softmax over the last axis, stabilized by max subtraction."""
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_val = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(g):
        if x.requires_grad:
            dot = (g * out_val).sum(axis=-1, keepdims=True)
            x._accumulate((g - dot) * out_val)

    return _make(out_val, (x,), backward_fn)


def layer_norm(x, gamma, beta, eps: float = 1e-6) -> Tensor:
    """Normalize over the last axis to zero mean, unit variance, then affine."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    d = x.data.shape[-1]
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out_val = gamma.data * xhat + beta.data

    def backward_fn(g):
        gg = g * gamma.data
        if x.requires_grad:
            s1 = gg.sum(axis=-1, keepdims=True)
            s2 = (gg * xhat).sum(axis=-1, keepdims=True)
            x._accumulate(inv / d * (d * gg - s1 - xhat * s2))
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if beta.requires_grad:
            beta._accumulate(g.reshape(-1, d).sum(axis=0))

    return _make(out_val, (x, gamma, beta), backward_fn)


def gelu(x) -> Tensor:
    """Exact error-function GELU: x * Phi(x)."""
    x = _as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out_val = x.data * cdf

    def backward_fn(g):
        if x.requires_grad:
            pdf = np.exp(-0.5 * x.data**2) * _INV_SQRT2PI
            x._accumulate(g * (cdf + x.data * pdf))

    return _make(out_val, (x,), backward_fn)


def huber(x) -> Tensor:
    """Elementwise Huber with unit knee: x^2/2 inside |x|<1, |x|-1/2 outside."""
    x = _as_tensor(x)
    absx = np.abs(x.data)
    out_val = np.where(absx < 1.0, 0.5 * x.data**2, absx - 0.5)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * np.clip(x.data, -1.0, 1.0))

    return _make(out_val, (x,), backward_fn)


def mean_all(x) -> Tensor:
    """Mean over all elements, producing a scalar tensor."""
    x = _as_tensor(x)
    n = x.data.size
    out_val = np.asarray(x.data.mean())

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(np.full_like(x.data, g / n))

    return _make(out_val, (x,), backward_fn)


def sum_all(x) -> Tensor:
    x = _as_tensor(x)
    out_val = np.asarray(x.data.sum())

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(np.full_like(x.data, g))

    return _make(out_val, (x,), backward_fn)


def unfold3x3(x) -> Tensor:
    """Gather the zero-padded 3x3 neighborhood of every spatial cell.

    (..., H, W, C) -> (..., H, W, 9, C) where index k = 3*dy + dx enumerates
    offsets (dy, dx) in {0,1,2}^2 of the padded window.
    """
    x = _as_tensor(x)
    *lead, H, W, C = x.data.shape
    pad_width = [(0, 0)] * len(lead) + [(1, 1), (1, 1), (0, 0)]
    xp = np.pad(x.data, pad_width)
    cols = np.empty((*lead, H, W, 9, C), dtype=x.data.dtype)
    for dy in range(3):
        for dx in range(3):
            cols[..., 3 * dy + dx, :] = xp[..., dy : dy + H, dx : dx + W, :]

    def backward_fn(g):
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for dy in range(3):
                for dx in range(3):
                    gxp[..., dy : dy + H, dx : dx + W, :] += g[..., 3 * dy + dx, :]
            x._accumulate(gxp[..., 1 : 1 + H, 1 : 1 + W, :])

    return _make(cols, (x,), backward_fn)


def conv2d_same(x, kernel, bias=None) -> Tensor:
    """3x3 cross-correlation with zero padding 1; spatial dims preserved.

    x: (..., H, W, Cin), kernel: (3, 3, Cin, Cout), bias: (Cout,) or None.
    """
    kernel = _as_tensor(kernel)
    if kernel.data.shape[:2] != (3, 3):
        raise ValueError(f"kernel must be 3x3, got {kernel.data.shape}")
    x = _as_tensor(x)
    if x.data.shape[-1] != kernel.data.shape[2]:
        raise ValueError(
            f"input channels {x.data.shape[-1]} != kernel Cin {kernel.data.shape[2]}"
        )
    cin, cout = kernel.data.shape[2], kernel.data.shape[3]
    cols = unfold3x3(x)
    *lead, H, W, _, _ = cols.data.shape
    flat = reshape(cols, (*lead, H, W, 9 * cin))
    out = matmul(flat, reshape(kernel, (9 * cin, cout)))
    if bias is not None:
        out = add(out, bias)
    return out


def pixel_shuffle(x, upscale: int) -> Tensor:
    """Rearrange (..., h, w, C*P^2) to (..., h*P, w*P, C); pure index shuffle.

    out[..., y*P + i, x*P + j, c] = in[..., y, x, c*P^2 + i*P + j].
    """
    x = _as_tensor(x)
    P = int(upscale)
    *lead, h, w, cp2 = x.data.shape
    if cp2 % (P * P) != 0:
        raise ValueError(f"channel count {cp2} not divisible by P^2={P * P}")
    C = cp2 // (P * P)
    out_val = _shuffle_forward(x.data, P, C)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(_shuffle_backward(g, P, C))

    return _make(out_val, (x,), backward_fn)


def pixel_unshuffle(x, downscale: int) -> Tensor:
    """Exact inverse of :func:`pixel_shuffle`."""
    x = _as_tensor(x)
    P = int(downscale)
    *lead, H, W, C = x.data.shape
    if H % P != 0 or W % P != 0:
        raise ValueError(f"spatial dims ({H}, {W}) not divisible by P={P}")
    out_val = _shuffle_backward(x.data, P, C)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(_shuffle_forward(g, P, C))

    return _make(out_val, (x,), backward_fn)


def _shuffle_forward(data: np.ndarray, P: int, C: int) -> np.ndarray:
    *lead, h, w, _ = data.shape
    n = len(lead)
    # (..., h, w, C, P, P) -> (..., h, Pi, w, Pj, C)
    r = data.reshape(*lead, h, w, C, P, P)
    perm = tuple(range(n)) + (n, n + 3, n + 1, n + 4, n + 2)
    return np.ascontiguousarray(r.transpose(perm)).reshape(*lead, h * P, w * P, C)


def _shuffle_backward(data: np.ndarray, P: int, C: int) -> np.ndarray:
    *lead, H, W, _ = data.shape
    n = len(lead)
    h, w = H // P, W // P
    r = data.reshape(*lead, h, P, w, P, C)
    # (..., h, Pi, w, Pj, C) -> (..., h, w, C, Pi, Pj)
    perm = tuple(range(n)) + (n, n + 2, n + 4, n + 1, n + 3)
    return np.ascontiguousarray(r.transpose(perm)).reshape(*lead, h, w, C * P * P)


def index_lastdim(table, idx: np.ndarray) -> Tensor:
    """Gather table[..., idx]; backward scatter-adds into the table."""
    table = _as_tensor(table)
    idx = np.asarray(idx)
    out_val = table.data[..., idx]

    def backward_fn(g):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            lead = table.data.shape[:-1]
            lead_idx = np.ix_(*[np.arange(s) for s in lead]) if lead else ()
            if lead:
                expanded = tuple(
                    ax.reshape(ax.shape + (1,) * idx.ndim) for ax in lead_idx
                )
                np.add.at(gt, expanded + (idx,), g)
            else:
                np.add.at(gt, idx, g)
            table._accumulate(gt)

    return _make(out_val, (table,), backward_fn)


def backward(loss: Tensor) -> None:
    """Populate .grad with d(loss)/d(tensor) for every tracked leaf tensor.

    Walks the graph loss-first in reverse topological order, so every node
    has received all of its children's contributions before its own backward
    runs. Intermediate grads are freed on the way; leaf grads accumulate
    until explicitly zeroed.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        raise ValueError("loss is not connected to any tracked tensor")

    order = _toposort(loss)
    loss._accumulate(np.ones_like(loss.data))
    for node in order:
        if node._backward is None:
            continue
        g = node.grad
        if g is None:
            continue
        node._backward(g)
        node.grad = None


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def finite_diff_check(f, x: Tensor, h: float = 1e-4, sample: int | None = None,
                      rng: np.random.Generator | None = None) -> float:
    """Max relative error between autodiff and central-difference gradients.

    f maps the tensor to a scalar Tensor. With sample set, only that many
    randomly chosen coordinates are probed (seeded via rng).
    """
    x.zero_grad()
    loss = f(x)
    backward(loss)
    analytic = x.grad.reshape(-1).copy()

    n = x.data.size
    if sample is not None and sample < n:
        if rng is None:
            rng = np.random.default_rng(0)
        coords = rng.choice(n, size=sample, replace=False)
    else:
        coords = np.arange(n)

    worst = 0.0
    for i in coords:
        idx = np.unravel_index(i, x.data.shape)
        orig = x.data[idx]
        x.data[idx] = orig + h
        fp = float(f(x).data)
        x.data[idx] = orig - h
        fm = float(f(x).data)
        x.data[idx] = orig
        numeric = (fp - fm) / (2.0 * h)
        rel = abs(analytic[i] - numeric) / (abs(analytic[i]) + abs(numeric) + 1e-8)
        worst = max(worst, rel)
    return worst
