"""Reverse-mode automatic differentiation on a flat tape of numpy ops.

The op set is exactly what the rollout, controller and loss need, nothing
more. Every recorded node stores its op kind, parent indices and the cached
locals its backward rule needs; values live in one buffer, adjoints in a
parallel buffer filled by a single reverse sweep.

Subgradient conventions (pinned by tests):
  * relu'(0) = 0 (the mask is x > 0, strictly)
  * minimum/maximum route the adjoint entirely to the attaining argument,
    first argument on ties
  * reduce_min routes to the first attaining index in C order

All functions below accept either `Node`s or plain numpy arrays / scalars and
broadcast like numpy. With plain inputs they compute values only, so the same
model code serves both simulation and training.
"""

from __future__ import annotations

import numpy as np

_TINY = 1e-12  # safe_div denominator floor


class TapeError(RuntimeError):
    """Reverse sweep produced a non-finite adjoint; message names the node."""


class Node:
    """Handle to one tape entry. Supports +, -, *, / against Nodes or arrays."""

    __slots__ = ("tape", "idx")
    __array_ufunc__ = None  # force numpy to defer to our reflected operators

    def __init__(self, tape: "Tape", idx: int):
        self.tape = tape
        self.idx = idx

    @property
    def value(self) -> np.ndarray:
        return self.tape.vals[self.idx]

    @property
    def shape(self):
        return self.tape.vals[self.idx].shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Node(idx={self.idx}, value={self.value!r})"


class Tape:
    """Append-only op record; parents always precede children."""

    def __init__(self):
        self.kinds: list[str] = []
        self.parents: list[tuple] = []
        self.aux: list = []
        self.vals: list[np.ndarray] = []
        self.adj: list = []

    def __len__(self) -> int:
        return len(self.vals)

    def leaf(self, value) -> Node:
        return self._rec("leaf", (), None, np.asarray(value, dtype=float))

    def _rec(self, kind: str, parents: tuple, aux, val: np.ndarray) -> Node:
        self.kinds.append(kind)
        self.parents.append(parents)
        self.aux.append(aux)
        self.vals.append(val)
        return Node(self, len(self.vals) - 1)

    def backward(self, root: Node, check_finite: bool = False) -> None:
        """Fill the adjoint buffer by one reverse sweep from `root`.

        With check_finite=True every visited adjoint is tested and the first
        non-finite one aborts the sweep; the checked mode exists to locate
        the source after a cheap unchecked sweep came back non-finite.
        """
        if root.tape is not self:
            raise ValueError("root node belongs to a different tape")
        n = len(self.vals)
        adj = [None] * n
        adj[root.idx] = np.ones_like(self.vals[root.idx])
        kinds, parents, aux, vals = self.kinds, self.parents, self.aux, self.vals
        rules = _BACKWARD
        for i in range(root.idx, -1, -1):
            g = adj[i]
            if g is None:
                continue
            if check_finite and not np.all(np.isfinite(g)):
                raise TapeError(
                    f"non-finite adjoint at node {i} (op '{kinds[i]}') "
                    f"in reverse sweep from node {root.idx}"
                )
            if kinds[i] == "leaf":
                continue
            rules[kinds[i]](g, parents[i], aux[i], vals, adj)
        self.adj = adj

    def grad(self, node: Node) -> np.ndarray:
        g = self.adj[node.idx]
        return np.zeros_like(self.vals[node.idx]) if g is None else g


def value(x):
    """Plain numpy value of a Node, or x itself."""
    return x.value if isinstance(x, Node) else x


def _tape_of(*xs) -> Tape | None:
    for x in xs:
        if isinstance(x, Node):
            return x.tape
    return None


def _val(x) -> np.ndarray:
    return x.value if isinstance(x, Node) else np.asarray(x, dtype=float)


def _idx(x):
    return x.idx if isinstance(x, Node) else None


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape` by summing expanded axes."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    keep = tuple(ax for ax, s in enumerate(shape) if s == 1 and g.shape[ax] != 1)
    if keep:
        g = g.sum(axis=keep, keepdims=True)
    return g


def _acc(adj, vals, idx, g):
    if idx is None:
        return
    cur = adj[idx]
    if cur is None:
        adj[idx] = np.zeros_like(vals[idx])
        cur = adj[idx]
    cur += _unbroadcast(np.asarray(g), vals[idx].shape)


# ---------------------------------------------------------------- primitives


def add(a, b):
    t = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    if t is None:
        return va + vb
    return t._rec("add", (_idx(a), _idx(b)), None, va + vb)


def sub(a, b):
    t = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    if t is None:
        return va - vb
    return t._rec("sub", (_idx(a), _idx(b)), None, va - vb)


def mul(a, b):
    t = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    if t is None:
        return va * vb
    return t._rec("mul", (_idx(a), _idx(b)), (va, vb), va * vb)


def div(a, b):
    """Plain division; denominators must stay away from zero."""
    t = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    if t is None:
        return va / vb
    return t._rec("div", (_idx(a), _idx(b)), (va, vb), va / vb)


def safe_div(a, b, tiny: float = _TINY):
    """a / b with |denominator| floored at `tiny`.

    The floor keeps forward values finite where a surrounding gate is exactly
    zero anyway; the backward rule treats the floored region as constant in b,
    which is the a.e. derivative of the clamped function.
    """
    t = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    live = np.abs(vb) >= tiny
    bhat = np.where(live, vb, np.where(vb < 0, -tiny, tiny))
    out = va / bhat
    if t is None:
        return out
    return t._rec("safe_div", (_idx(a), _idx(b)), (va, bhat, live), out)


def neg(a):
    t = _tape_of(a)
    va = _val(a)
    if t is None:
        return -va
    return t._rec("neg", (_idx(a),), None, -va)


def sin(a):
    t = _tape_of(a)
    va = _val(a)
    if t is None:
        return np.sin(va)
    return t._rec("sin", (_idx(a),), va, np.sin(va))


def relu(a):
    t = _tape_of(a)
    va = _val(a)
    out = np.maximum(va, 0.0)
    if t is None:
        return out
    return t._rec("relu", (_idx(a),), va > 0, out)


def sigmoid(a):
    t = _tape_of(a)
    va = _val(a)
    out = _sigmoid_val(va)
    if t is None:
        return out
    return t._rec("sigmoid", (_idx(a),), out, out)


def _sigmoid_val(x: np.ndarray) -> np.ndarray:
    pos = x >= 0
    ex = np.exp(np.where(pos, -x, x))  # exp of a non-positive number, stable
    return np.where(pos, 1.0 / (1.0 + ex), ex / (1.0 + ex))


def softplus(a):
    t = _tape_of(a)
    va = _val(a)
    out = np.maximum(va, 0.0) + np.log1p(np.exp(-np.abs(va)))
    if t is None:
        return out
    return t._rec("softplus", (_idx(a),), va, out)


def tanh(a):
    t = _tape_of(a)
    va = _val(a)
    out = np.tanh(va)
    if t is None:
        return out
    return t._rec("tanh", (_idx(a),), out, out)


def square(a):
    t = _tape_of(a)
    va = _val(a)
    if t is None:
        return va * va
    return t._rec("square", (_idx(a),), va, va * va)


def minimum(a, b):
    t = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    take = va <= vb  # first argument wins ties
    out = np.where(take, va, vb)
    if t is None:
        return out
    return t._rec("minimum", (_idx(a), _idx(b)), (take, va.shape, vb.shape), out)


def maximum(a, b):
    t = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    take = va >= vb  # first argument wins ties
    out = np.where(take, va, vb)
    if t is None:
        return out
    return t._rec("maximum", (_idx(a), _idx(b)), (take, va.shape, vb.shape), out)


def matvec(mat: np.ndarray, x):
    """x @ mat.T for a constant matrix (equals mat @ x on 1-d input).

    Batches over leading axes of x: (..., k) -> (..., r) for mat (r, k).
    """
    t = _tape_of(x)
    vx = _val(x)
    out = vx @ mat.T
    if t is None:
        return out
    return t._rec("matvec", (_idx(x),), mat, out)


def sum_all(a):
    t = _tape_of(a)
    va = _val(a)
    if t is None:
        return va.sum()
    return t._rec("sum_all", (_idx(a),), va.shape, np.asarray(va.sum()))


def rowsum(a):
    """Sum over the last axis."""
    t = _tape_of(a)
    va = _val(a)
    if t is None:
        return va.sum(axis=-1)
    return t._rec("rowsum", (_idx(a),), va.shape, va.sum(axis=-1))


def reduce_min(a):
    """Scalar minimum of an array; adjoint goes to the first attaining entry."""
    t = _tape_of(a)
    va = _val(a)
    k = int(np.argmin(va))
    out = np.asarray(va.reshape(-1)[k])
    if t is None:
        return out
    return t._rec("reduce_min", (_idx(a),), k, out)


def expand_last(a):
    """Append a trailing length-1 axis (x[..., None])."""
    t = _tape_of(a)
    va = _val(a)
    if t is None:
        return va[..., None]
    return t._rec("expand_last", (_idx(a),), None, va[..., None])


def cumsum_last(a):
    t = _tape_of(a)
    va = _val(a)
    out = np.cumsum(va, axis=-1)
    if t is None:
        return out
    return t._rec("cumsum_last", (_idx(a),), None, out)


def diff_keepfirst(a):
    """out[..., 0] = a[..., 0]; out[..., j] = a[..., j] - a[..., j-1]."""
    t = _tape_of(a)
    va = _val(a)
    out = np.empty_like(va)
    out[..., 0] = va[..., 0]
    out[..., 1:] = va[..., 1:] - va[..., :-1]
    if t is None:
        return out
    return t._rec("diff_keepfirst", (_idx(a),), None, out)


def pad_zero_first(a):
    """Prepend a zero column along the last axis: (..., k) -> (..., k+1)."""
    t = _tape_of(a)
    va = _val(a)
    shape = va.shape[:-1] + (va.shape[-1] + 1,)
    out = np.zeros(shape, dtype=float)
    out[..., 1:] = va
    if t is None:
        return out
    return t._rec("pad_zero_first", (_idx(a),), None, out)


# ------------------------------------------------------------ backward rules


def _bk_add(g, par, aux, vals, adj):
    ia, ib = par
    if ia is not None:
        _acc(adj, vals, ia, g)
    if ib is not None:
        _acc(adj, vals, ib, g)


def _bk_sub(g, par, aux, vals, adj):
    ia, ib = par
    if ia is not None:
        _acc(adj, vals, ia, g)
    if ib is not None:
        _acc(adj, vals, ib, -g)


def _bk_mul(g, par, aux, vals, adj):
    ia, ib = par
    va, vb = aux
    if ia is not None:
        _acc(adj, vals, ia, g * vb)
    if ib is not None:
        _acc(adj, vals, ib, g * va)


def _bk_div(g, par, aux, vals, adj):
    ia, ib = par
    va, vb = aux
    if ia is not None:
        _acc(adj, vals, ia, g / vb)
    if ib is not None:
        _acc(adj, vals, ib, -g * va / (vb * vb))


def _bk_safe_div(g, par, aux, vals, adj):
    ia, ib = par
    va, bhat, live = aux
    if ia is not None:
        _acc(adj, vals, ia, g / bhat)
    if ib is not None:
        _acc(adj, vals, ib, np.where(live, -g * va / (bhat * bhat), 0.0))


def _bk_neg(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], -g)


def _bk_sin(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], g * np.cos(aux))


def _bk_relu(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], g * aux)


def _bk_sigmoid(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], g * aux * (1.0 - aux))


def _bk_softplus(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], g * _sigmoid_val(aux))


def _bk_tanh(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], g * (1.0 - aux * aux))


def _bk_square(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], g * 2.0 * aux)


def _bk_minmax(g, par, aux, vals, adj):
    ia, ib = par
    take = aux[0]
    if ia is not None:
        _acc(adj, vals, ia, np.where(take, g, 0.0))
    if ib is not None:
        _acc(adj, vals, ib, np.where(take, 0.0, g))


def _bk_matvec(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], g @ aux)


def _bk_sum_all(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], np.broadcast_to(g, aux))


def _bk_rowsum(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], np.broadcast_to(np.asarray(g)[..., None], aux))


def _bk_reduce_min(g, par, aux, vals, adj):
    full = np.zeros_like(vals[par[0]])
    full.reshape(-1)[aux] = g
    _acc(adj, vals, par[0], full)


def _bk_expand_last(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], np.asarray(g)[..., 0])


def _bk_cumsum_last(g, par, aux, vals, adj):
    rev = np.flip(np.cumsum(np.flip(g, axis=-1), axis=-1), axis=-1)
    _acc(adj, vals, par[0], rev)


def _bk_diff_keepfirst(g, par, aux, vals, adj):
    gx = np.array(g, dtype=float, copy=True)
    gx[..., :-1] -= g[..., 1:]
    _acc(adj, vals, par[0], gx)


def _bk_pad_zero_first(g, par, aux, vals, adj):
    _acc(adj, vals, par[0], np.asarray(g)[..., 1:])


_BACKWARD = {
    "add": _bk_add,
    "sub": _bk_sub,
    "mul": _bk_mul,
    "div": _bk_div,
    "safe_div": _bk_safe_div,
    "neg": _bk_neg,
    "sin": _bk_sin,
    "relu": _bk_relu,
    "sigmoid": _bk_sigmoid,
    "softplus": _bk_softplus,
    "tanh": _bk_tanh,
    "square": _bk_square,
    "minimum": _bk_minmax,
    "maximum": _bk_minmax,
    "matvec": _bk_matvec,
    "sum_all": _bk_sum_all,
    "rowsum": _bk_rowsum,
    "reduce_min": _bk_reduce_min,
    "expand_last": _bk_expand_last,
    "cumsum_last": _bk_cumsum_last,
    "diff_keepfirst": _bk_diff_keepfirst,
    "pad_zero_first": _bk_pad_zero_first,
}
