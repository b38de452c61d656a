"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

Every operation records an entry on a module-global, append-only tape while
gradients are enabled. ``backward`` walks the tape in reverse (execution order
is already topological) and deposits gradients on leaf tensors. Shapes must
match exactly in binary ops; the only broadcasts supported are python scalars
and the explicit bias-add helpers.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


# ---------------------------------------------------------------------------
# Tape machinery


class _TapeEntry:
    __slots__ = ("out", "inputs", "backward_fn")

    def __init__(self, out, inputs, backward_fn):
        self.out = out
        self.inputs = inputs
        self.backward_fn = backward_fn


_tape: list[_TapeEntry] = []
_grad_enabled: bool = True


class no_grad:
    """Context manager disabling tape recording (inference / data prep)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def reset_tape() -> None:
    """Drop all recorded operations. Call between training steps."""
    _tape.clear()


def tape_size() -> int:
    return len(_tape)


class Tensor:
    """Shape-tagged dense float64 array with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; scalars only on the non-tensor side
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)


def _record(out: Tensor, inputs: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    if _grad_enabled and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _tape.append(_TapeEntry(out, tuple(inputs), backward_fn))
    return out


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every leaf tensor reachable from ``loss``.

    Repeated calls without zeroing accumulate. ``loss`` must be scalar.
    """
    if loss.data.shape != ():
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
    holders: dict[int, Tensor] = {id(loss): loss}
    produced = {id(e.out) for e in _tape}
    for entry in reversed(_tape):
        g = grads.pop(id(entry.out), None)
        holders.pop(id(entry.out), None)
        if g is None:
            continue
        input_grads = entry.backward_fn(g)
        for inp, ig in zip(entry.inputs, input_grads):
            if ig is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + ig
            else:
                grads[key] = ig
                holders[key] = inp
    # whatever is left was never produced on the tape: a leaf
    for key, g in grads.items():
        leaf = holders[key]
        if id(leaf) in produced:
            continue
        leaf.grad = g if leaf.grad is None else leaf.grad + g


# ---------------------------------------------------------------------------
# Elementwise ops


def _as_scalar(x) -> float | None:
    if isinstance(x, (int, float)):
        return float(x)
    return None


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.data.shape != b.data.shape:
        for axis, (da, db) in enumerate(zip(a.data.shape, b.data.shape)):
            if da != db:
                raise ShapeError(f"{op}: axis {axis} mismatch ({da} vs {db}); shapes {a.shape} vs {b.shape}")
        raise ShapeError(f"{op}: rank mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b) -> Tensor:
    s = _as_scalar(b)
    if s is not None:
        out = Tensor(a.data + s)
        return _record(out, (a,), lambda g: (g,))
    _check_same_shape("add", a, b)
    out = Tensor(a.data + b.data)
    return _record(out, (a, b), lambda g: (g, g))


def sub(a: Tensor, b) -> Tensor:
    s = _as_scalar(b)
    if s is not None:
        out = Tensor(a.data - s)
        return _record(out, (a,), lambda g: (g,))
    _check_same_shape("sub", a, b)
    out = Tensor(a.data - b.data)
    return _record(out, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b) -> Tensor:
    s = _as_scalar(b)
    if s is not None:
        out = Tensor(a.data * s)
        return _record(out, (a,), lambda g: (g * s,))
    _check_same_shape("mul", a, b)
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data
    return _record(out, (a, b), lambda g: (g * bd, g * ad))


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    return _record(out, (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    """Elementwise a**exponent with a float exponent."""
    p = float(exponent)
    out = Tensor(a.data ** p)
    ad = a.data
    return _record(out, (a,), lambda g: (g * p * ad ** (p - 1.0),))


def silu(a: Tensor) -> Tensor:
    """x * sigmoid(x); smooth, so finite-difference checks stay tight."""
    sig = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(a.data * sig)
    ad = a.data
    return _record(out, (a,), lambda g: (g * sig * (1.0 + ad * (1.0 - sig)),))


def softmax_last(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return ((g - dot) * y,)

    return _record(Tensor(y), (a,), bwd)


# ---------------------------------------------------------------------------
# Bias broadcasts (the only non-scalar broadcasting allowed)


def bias_add_channel(x: Tensor, bias: Tensor) -> Tensor:
    """Add a per-channel bias [C] onto an [N,C,H,W] map."""
    if x.data.ndim != 4 or bias.data.shape != (x.data.shape[1],):
        raise ShapeError(f"bias_add_channel: x {x.shape} needs bias ({x.data.shape[1] if x.data.ndim == 4 else '?'},), got {bias.shape}")
    out = Tensor(x.data + bias.data[None, :, None, None])
    return _record(out, (x, bias), lambda g: (g, g.sum(axis=(0, 2, 3))))


def bias_add_last(x: Tensor, bias: Tensor) -> Tensor:
    """Add a bias [K] onto the last axis of x [..., K]."""
    if bias.data.shape != (x.data.shape[-1],):
        raise ShapeError(f"bias_add_last: x {x.shape} needs bias ({x.data.shape[-1]},), got {bias.shape}")
    out = Tensor(x.data + bias.data)
    axes = tuple(range(x.data.ndim - 1))
    return _record(out, (x, bias), lambda g: (g, g.sum(axis=axes)))


# ---------------------------------------------------------------------------
# Shape ops


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.data.shape
    out = Tensor(a.data.reshape(shape))
    return _record(out, (a,), lambda g: (g.reshape(orig),))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = Tensor(a.data.transpose(axes))
    return _record(out, (a,), lambda g: (g.transpose(inv),))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    sizes = [t.data.shape[axis] for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(out, tuple(tensors), bwd)


def tile_leading(a: Tensor, n: int) -> Tensor:
    """Stack n copies of a along a new leading axis; backward sums them."""
    out = Tensor(np.broadcast_to(a.data, (n,) + a.data.shape).copy())
    return _record(out, (a,), lambda g: (g.sum(axis=0),))


# ---------------------------------------------------------------------------
# Reductions


def sum_all(a: Tensor) -> Tensor:
    shape = a.data.shape
    out = Tensor(a.data.sum())
    return _record(out, (a,), lambda g: (np.full(shape, float(g)),))


def mean_all(a: Tensor) -> Tensor:
    shape = a.data.shape
    n = a.data.size
    out = Tensor(a.data.mean())
    return _record(out, (a,), lambda g: (np.full(shape, float(g) / n),))


# ---------------------------------------------------------------------------
# Linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D (M,K)@(K,N) or batched 3-D (B,M,K)@(B,K,N) matrix product."""
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: inner axis mismatch ({ad.shape[1]} vs {bd.shape[0]})")
        out = Tensor(ad @ bd)
        return _record(out, (a, b), lambda g: (g @ bd.T, ad.T @ g))
    if ad.ndim == 3 and bd.ndim == 3:
        if ad.shape[0] != bd.shape[0]:
            raise ShapeError(f"matmul: batch axis mismatch ({ad.shape[0]} vs {bd.shape[0]})")
        if ad.shape[2] != bd.shape[1]:
            raise ShapeError(f"matmul: inner axis mismatch ({ad.shape[2]} vs {bd.shape[1]})")
        out = Tensor(ad @ bd)
        return _record(out, (a, b), lambda g: (g @ bd.transpose(0, 2, 1), ad.transpose(0, 2, 1) @ g))
    raise ShapeError(f"matmul: unsupported ranks {ad.ndim} and {bd.ndim}")


def embedding_lookup(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Gather rows of a [V,D] table; backward scatter-adds."""
    idx = np.asarray(ids, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise IndexError(f"embedding_lookup: id out of range for table with {table.data.shape[0]} rows")
    out = Tensor(table.data[idx])
    vshape = table.data.shape

    def bwd(g):
        gt = np.zeros(vshape, dtype=np.float64)
        np.add.at(gt, idx, g)
        return (gt,)

    return _record(out, (table,), bwd)


# ---------------------------------------------------------------------------
# Convolution and pooling


def _im2col(xd: np.ndarray, kh: int, kw: int, stride: int, padding: int):
    b, c, h, w = xd.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} too large for input {h}x{w} with padding {padding}")
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    s = xp.strides
    win = np.lib.stride_tricks.as_strided(
        xp,
        shape=(b, c, ho, wo, kh, kw),
        strides=(s[0], s[1], s[2] * stride, s[3] * stride, s[2], s[3]),
        writeable=False,
    )
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * wo, c * kh * kw)
    return np.ascontiguousarray(cols), ho, wo


def _col2im(gcols: np.ndarray, xshape, kh, kw, stride, padding, ho, wo):
    b, c, h, w = xshape
    gxp = np.zeros((b, c, h + 2 * padding, w + 2 * padding), dtype=np.float64)
    gwin = gcols.reshape(b, ho, wo, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    for ki in range(kh):
        for kj in range(kw):
            gxp[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride] += gwin[:, :, :, :, ki, kj]
    if padding:
        return gxp[:, :, padding:-padding, padding:-padding]
    return gxp


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution (cross-correlation) of [B,Cin,H,W] with [Cout,Cin,kh,kw]."""
    xd, wd = x.data, weight.data
    if xd.ndim != 4:
        raise ShapeError(f"conv2d: input must be 4-D [B,Cin,H,W], got {x.shape}")
    if wd.ndim != 4:
        raise ShapeError(f"conv2d: weight must be 4-D [Cout,Cin,kh,kw], got {weight.shape}")
    cout, cin, kh, kw = wd.shape
    if xd.shape[1] != cin:
        raise ShapeError(f"conv2d: channel axis mismatch (input Cin={xd.shape[1]}, weight Cin={cin})")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d: kernel sides must be odd, got {kh}x{kw}")
    if bias.data.shape != (cout,):
        raise ShapeError(f"conv2d: bias must be ({cout},), got {bias.shape}")
    if padding < 0 or stride < 1:
        raise ShapeError(f"conv2d: bad stride/padding ({stride},{padding})")

    cols, ho, wo = _im2col(xd, kh, kw, stride, padding)
    wmat = wd.reshape(cout, cin * kh * kw)
    y = cols @ wmat.T + bias.data
    b = xd.shape[0]
    out = Tensor(y.reshape(b, ho, wo, cout).transpose(0, 3, 1, 2))
    xshape = xd.shape

    def bwd(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(b * ho * wo, cout)
        gw = (g2.T @ cols).reshape(cout, cin, kh, kw)
        gb = g2.sum(axis=0)
        gcols = g2 @ wmat
        gx = _col2im(gcols, xshape, kh, kw, stride, padding, ho, wo)
        return (gx, gw, gb)

    return _record(out, (x, weight, bias), bwd)


def avg_pool2d(x: Tensor, k: int) -> Tensor:
    """Non-overlapping k x k average pooling; spatial dims must divide by k."""
    b, c, h, w = x.data.shape
    if h % k or w % k:
        raise ShapeError(f"avg_pool2d: spatial dims {h}x{w} not divisible by {k}")
    y = x.data.reshape(b, c, h // k, k, w // k, k).mean(axis=(3, 5))
    out = Tensor(y)

    def bwd(g):
        gx = np.repeat(np.repeat(g, k, axis=2), k, axis=3) / (k * k)
        return (gx,)

    return _record(out, (x,), bwd)


def upsample_nearest2x(x: Tensor) -> Tensor:
    y = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
    out = Tensor(y)
    b, c, h, w = x.data.shape

    def bwd(g):
        return (g.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5)),)

    return _record(out, (x,), bwd)


# ---------------------------------------------------------------------------
# Attention


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """softmax(q k^T / sqrt(d)) v for [B,Lq,d], [B,Lk,d], [B,Lk,dv] inputs.

    Rows of the attention matrix sum to 1. Composed from taped primitives, so
    it is differentiable without a bespoke backward rule.
    """
    if q.data.ndim != 3 or k.data.ndim != 3 or v.data.ndim != 3:
        raise ShapeError("attention: q,k,v must be 3-D [batch, length, dim]")
    if q.data.shape[2] != k.data.shape[2]:
        raise ShapeError(f"attention: query dim {q.data.shape[2]} != key dim {k.data.shape[2]}")
    if k.data.shape[1] != v.data.shape[1]:
        raise ShapeError(f"attention: key length {k.data.shape[1]} != value length {v.data.shape[1]}")
    d = q.data.shape[2]
    scores = mul(matmul(q, transpose(k, (0, 2, 1))), 1.0 / math.sqrt(d))
    return matmul(softmax_last(scores), v)


def finite(t: Tensor) -> bool:
    return bool(np.isfinite(t.data).all())
