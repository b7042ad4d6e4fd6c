"""Finite-difference checks of every tape op plus the pinned subgradient
conventions: relu'(0) = 0, min/max route ties to the first argument,
reduce_min routes to the first attaining index.
"""

import numpy as np
import pytest

from swingctl import tape as tp
from swingctl.tape import Node, Tape, TapeError, value


def fd_grad(fn, x, h=1e-6):
    """Central finite differences of scalar fn at array x."""
    g = np.zeros_like(x, dtype=float)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = fn(x)
        flat[i] = keep - h
        dn = fn(x)
        flat[i] = keep
        gf[i] = (up - dn) / (2 * h)
    return g


def tape_grad(build, x):
    """Gradient of scalar build(leaf) w.r.t. x through the tape."""
    t = Tape()
    leaf = t.leaf(x)
    loss = build(leaf)
    t.backward(loss)
    return t.grad(leaf), float(value(loss))


UNARY = {
    "neg": (tp.neg, (-2.0, 2.0)),
    "sin": (tp.sin, (-2.0, 2.0)),
    "relu": (tp.relu, (0.05, 2.0)),  # stay off the kink; the kink is tested below
    "sigmoid": (tp.sigmoid, (-3.0, 3.0)),
    "softplus": (tp.softplus, (-3.0, 3.0)),
    "tanh": (tp.tanh, (-2.0, 2.0)),
    "square": (tp.square, (-2.0, 2.0)),
    "cumsum_last": (tp.cumsum_last, (-1.0, 1.0)),
    "diff_keepfirst": (tp.diff_keepfirst, (-1.0, 1.0)),
    "pad_zero_first": (tp.pad_zero_first, (-1.0, 1.0)),
    "expand_last": (tp.expand_last, (-1.0, 1.0)),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_ops_match_fd(name):
    op, (lo, hi) = UNARY[name]
    rng = np.random.default_rng(hash(name) % 2**32)
    x = rng.uniform(lo, hi, size=(2, 3))
    if name == "relu":
        x *= rng.choice([-1.0, 1.0], size=x.shape)  # both sides, away from 0
    w = rng.normal(size=np.asarray(value(op(x))).shape)  # random projection

    def scalar(a):
        return float(np.sum(np.asarray(value(op(a))) * w))

    g, _ = tape_grad(lambda leaf: tp.sum_all(op(leaf) * w), x.copy())
    assert np.abs(g - fd_grad(scalar, x.copy())).max() < 1e-6


BINARY = {
    "add": tp.add,
    "sub": tp.sub,
    "mul": tp.mul,
    "div": tp.div,
    "minimum": tp.minimum,
    "maximum": tp.maximum,
}


@pytest.mark.parametrize("name", sorted(BINARY))
@pytest.mark.parametrize("shapes", [((2, 3), (2, 3)), ((2, 3), (3,)), ((2, 3), ())])
def test_binary_ops_match_fd(name, shapes):
    op = BINARY[name]
    rng = np.random.default_rng(abs(hash((name, shapes))) % 2**32)
    a = rng.uniform(0.5, 2.0, size=shapes[0])
    b = rng.uniform(0.5, 2.0, size=shapes[1]) + (0.5 if name == "div" else 0.0)
    if name in ("minimum", "maximum"):
        b = b + 0.05  # keep the selector away from exact ties for FD
    w = rng.normal(size=np.broadcast_shapes(*shapes))

    for side in (0, 1):
        x0 = (a, b)[side]

        def scalar(x):
            args = (x, b) if side == 0 else (a, x)
            return float(np.sum(np.asarray(value(op(*args))) * w))

        def build(leaf):
            args = (leaf, b) if side == 0 else (a, leaf)
            return tp.sum_all(op(*args) * w)

        g, _ = tape_grad(build, np.asarray(x0, dtype=float).copy())
        ref = fd_grad(scalar, np.asarray(x0, dtype=float).copy())
        assert np.abs(g - ref).max() < 1e-6, f"{name} arg {side} shapes {shapes}"


def test_matvec_value_and_grad():
    rng = np.random.default_rng(5)
    mat = rng.normal(size=(4, 3))
    x = rng.normal(size=3)
    assert np.allclose(value(tp.matvec(mat, x)), mat @ x)
    xb = rng.normal(size=(5, 3))
    assert np.allclose(value(tp.matvec(mat, xb)), xb @ mat.T)
    w = rng.normal(size=(5, 4))
    g, _ = tape_grad(lambda leaf: tp.sum_all(tp.matvec(mat, leaf) * w), xb.copy())
    ref = fd_grad(lambda v: float(np.sum((v @ mat.T) * w)), xb.copy())
    assert np.abs(g - ref).max() < 1e-6


def test_rowsum_reduce_min_sum_all_grads():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(3, 4))
    w = rng.normal(size=3)
    g, _ = tape_grad(lambda leaf: tp.sum_all(tp.rowsum(leaf) * w), x.copy())
    assert np.allclose(g, np.tile(w[:, None], (1, 4)))
    g, lo = tape_grad(lambda leaf: tp.reduce_min(leaf), x.copy())
    assert lo == x.min()
    expect = np.zeros_like(x)
    expect.reshape(-1)[np.argmin(x)] = 1.0
    assert np.array_equal(g, expect)


def test_quadratic_toy():
    g, loss = tape_grad(lambda leaf: tp.square(leaf), np.array(3.0))
    assert loss == 9.0
    assert g == 6.0


def test_relu_subgradient_zero_at_kink():
    g, _ = tape_grad(lambda leaf: tp.sum_all(tp.relu(leaf)), np.array([0.0, -1.0, 2.0]))
    assert np.array_equal(g, [0.0, 0.0, 1.0])


def test_min_max_tie_first_argument():
    a = np.array([1.0, 2.0])
    b = np.array([1.0, 2.0])
    for op in (tp.minimum, tp.maximum):
        t = Tape()
        la, lb = t.leaf(a), t.leaf(b)
        t.backward(tp.sum_all(op(la, lb)))
        assert np.array_equal(t.grad(la), [1.0, 1.0])
        assert np.array_equal(t.grad(lb), [0.0, 0.0])


def test_reduce_min_tie_first_index():
    x = np.array([[2.0, 1.0], [1.0, 3.0]])  # min 1.0 attained twice; index 1 first
    g, _ = tape_grad(lambda leaf: tp.reduce_min(leaf), x.copy())
    assert np.array_equal(g, [[0.0, 1.0], [0.0, 0.0]])


def test_safe_div_floor_and_gradient():
    # exact zero denominator: finite forward value, denominator treated constant
    t = Tape()
    num = t.leaf(np.array([1.0, 1.0]))
    den = t.leaf(np.array([0.0, 2.0]))
    out = tp.safe_div(num, den)
    assert np.allclose(value(out), [1e12, 0.5])
    t.backward(tp.sum_all(out))
    assert np.all(np.isfinite(t.grad(num)))
    assert t.grad(den)[0] == 0.0  # floored region is constant in the denominator
    assert abs(t.grad(den)[1] + 0.25) < 1e-12
    # away from the floor it is plain division
    rng = np.random.default_rng(2)
    x = rng.uniform(0.5, 1.5, size=4)
    g, _ = tape_grad(lambda leaf: tp.sum_all(tp.safe_div(1.0, leaf)), x.copy())
    assert np.abs(g + 1.0 / x**2).max() < 1e-9


def test_plain_array_dispatch_matches_tape_values():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(2, 3))
    for op in (tp.sin, tp.relu, tp.sigmoid, tp.softplus, tp.tanh, tp.square):
        t = Tape()
        node = op(t.leaf(x))
        assert isinstance(node, Node)
        assert np.array_equal(value(node), op(x))


def test_operator_overloads_and_mixed_args():
    t = Tape()
    a = t.leaf(np.array([1.0, 2.0]))
    out = (a + 1.0) * np.array([2.0, 3.0]) - a / 2.0
    assert np.allclose(value(out), [3.5, 8.0])
    t.backward(tp.sum_all(out))
    assert np.allclose(t.grad(a), [1.5, 2.5])


def test_grad_of_unused_leaf_is_zero():
    t = Tape()
    a = t.leaf(np.array([1.0, 2.0]))
    b = t.leaf(np.array([3.0]))
    t.backward(tp.sum_all(tp.square(a)))
    assert np.array_equal(t.grad(b), [0.0])


def test_backward_rejects_foreign_root():
    t1, t2 = Tape(), Tape()
    a = t1.leaf(np.array([1.0]))
    with pytest.raises(ValueError, match="different tape"):
        t2.backward(tp.sum_all(a))


def test_non_finite_adjoint_diagnostic():
    t = Tape()
    x = t.leaf(np.array([0.0]))
    with np.errstate(divide="ignore"):
        loss = tp.sum_all(tp.div(1.0, x))
        t.backward(loss)
        assert not np.isfinite(t.grad(x)).all()
        with pytest.raises(TapeError, match="non-finite adjoint at node"):
            t.backward(loss, check_finite=True)
