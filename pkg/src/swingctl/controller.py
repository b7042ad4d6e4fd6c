"""Structured frequency-control policies with built-in stability and safety.

The learned controller composes, per bus:

  * a trainable dead-zone response f_i built from ReLU units whose biases are
    constrained non-positive, so f_i is exactly zero while the measured
    frequency sits between the bus's trained thresholds;
  * class-K barrier functions (strictly increasing, zero at zero) whose
    weights come from positive partial sums and whose biases are
    non-increasing with the first pinned at zero;
  * trainable thresholds mapped by a sigmoid so they always sit strictly
    between the synchronous frequency and the hard safety bounds;
  * a budget vector b = L_sub @ xi built from the unit-weight Laplacian of the
    subgraph of buses currently outside their dead zones. Column sums of
    L_sub vanish, so sum(b) = 0 exactly, and b_i = 0 for any bus inside its
    dead zone. |xi| is capped so that the per-bus budget never exceeds the
    damping margin at the thresholds.

The assembled control is

  u_i = relu(w_i - whi_i) * (f_i - relu(f_i - ub_i))
      + relu(wlo_i - w_i) * (f_i + relu(lb_i - f_i))

with ub = min(stability cap, upper safety barrier) and lb the mirrored max.
This form is differentiable almost everywhere and exactly zero inside the
dead zone, but because the ReLU gates scale rather than select, the raw
output can exceed [lb, ub] for states far from a threshold or when a cap goes
negative; `constraint_check` reports that per bus and `project_control`
clamps it, which is how certified evaluation runs are produced.

Everything here runs on plain numpy arrays or on autodiff tape nodes; see
`tape` for the dispatch rules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import Equilibrium
from .netgraph import Incidence, PowerNetwork
from .tape import (
    cumsum_last,
    diff_keepfirst,
    expand_last,
    matvec,
    maximum,
    minimum,
    pad_zero_first,
    reduce_min,
    relu,
    rowsum,
    safe_div,
    sigmoid,
    sin,
    softplus,
    square,
    tanh,
    value,
)

WEIGHT_FLOOR = 1e-4  # epsilon added to softplus partial sums

# Trainable parameter keys in their fixed init/draw/update order.
PARAM_KEYS = (
    "barrier_hi_wp",
    "barrier_hi_wm",
    "barrier_hi_bp",
    "barrier_hi_bm",
    "barrier_lo_wp",
    "barrier_lo_wm",
    "barrier_lo_bp",
    "barrier_lo_bm",
    "thr_lo",
    "thr_hi",
    "dz_wp",
    "dz_wm",
    "dz_bp",
    "dz_bm",
    "budget_raw",
)

MONO_KEYS = ("resp_wp", "resp_wm", "resp_bp", "resp_bm")


class PolicyError(ValueError):
    """A structural invariant of the policy parameterization failed."""


@dataclass(frozen=True)
class SafetySpec:
    """Hard per-bus frequency bounds (Hz deviation from nominal)."""

    omega_min: np.ndarray
    omega_max: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.omega_min, dtype=float))
        hi = np.atleast_1d(np.asarray(self.omega_max, dtype=float))
        if lo.shape != hi.shape:
            raise PolicyError("omega_min and omega_max must share shape")
        if np.any(lo >= hi):
            raise PolicyError("omega_min must be strictly below omega_max")
        if np.any(lo >= 0.0) or np.any(hi <= 0.0):
            raise PolicyError("the band must contain the nominal frequency strictly")
        object.__setattr__(self, "omega_min", lo)
        object.__setattr__(self, "omega_max", hi)

    @staticmethod
    def band(lo: float, hi: float, n: int) -> "SafetySpec":
        return SafetySpec(np.full(n, float(lo)), np.full(n, float(hi)))


def param_shapes(n: int, m_hidden: int) -> dict[str, tuple]:
    """Shapes of the raw trainable arrays for the constrained policy."""
    k = {}
    for name in PARAM_KEYS:
        if name in ("thr_lo", "thr_hi", "budget_raw"):
            k[name] = (n,)
        elif name.endswith(("_bp", "_bm")) and name.startswith("barrier"):
            k[name] = (n, m_hidden - 1)
        else:
            k[name] = (n, m_hidden)
    return k


def mono_param_shapes(n: int, m_hidden: int) -> dict[str, tuple]:
    return {
        "resp_wp": (n, m_hidden),
        "resp_wm": (n, m_hidden),
        "resp_bp": (n, m_hidden - 1),
        "resp_bm": (n, m_hidden - 1),
    }


@dataclass
class PolicyParams:
    """Raw (unconstrained) trainables plus fixed structure choices.

    dtilde_frac fixes the damping share kept by the stability cap,
    D_tilde = dtilde_frac * D, with 0 < frac < 1. It is not trained.
    """

    raw: dict[str, np.ndarray]
    m_hidden: int
    dtilde_frac: np.ndarray

    kind = "constrained"


@dataclass
class MonotoneParams:
    """Raw trainables of the decentralized monotone baseline."""

    raw: dict[str, np.ndarray]
    m_hidden: int

    kind = "monotone"


def init_policy_params(
    n: int,
    m_hidden: int,
    rng: np.random.Generator,
    scale: float = 0.1,
    dtilde_frac: float = 0.5,
) -> PolicyParams:
    """Uniform +/-scale init, drawn in PARAM_KEYS order (reproducible)."""
    if not 0.0 < dtilde_frac < 1.0:
        raise PolicyError("dtilde_frac must lie in (0, 1)")
    shapes = param_shapes(n, m_hidden)
    raw = {k: rng.uniform(-scale, scale, shapes[k]) for k in PARAM_KEYS}
    return PolicyParams(raw=raw, m_hidden=m_hidden, dtilde_frac=np.full(n, dtilde_frac))


def init_monotone_params(
    n: int, m_hidden: int, rng: np.random.Generator, scale: float = 0.1
) -> MonotoneParams:
    shapes = mono_param_shapes(n, m_hidden)
    raw = {k: rng.uniform(-scale, scale, shapes[k]) for k in MONO_KEYS}
    return MonotoneParams(raw=raw, m_hidden=m_hidden)


# ------------------------------------------------------- reparameterizations


def class_k_weights(w_raw_pos, w_raw_neg):
    """Map raw arrays to unit weights with signed positive/negative partial sums.

    Partial sums of the returned arrays along the last axis equal
    +/-(WEIGHT_FLOOR + softplus(raw)), so every prefix sum of the plus branch
    is strictly positive and of the minus branch strictly negative, which is
    what makes the piecewise-linear map strictly increasing.
    """
    sp = WEIGHT_FLOOR + softplus(w_raw_pos)
    sm = -WEIGHT_FLOOR - softplus(w_raw_neg)
    return diff_keepfirst(sp), diff_keepfirst(sm)


def class_k_biases(b_raw_pos, b_raw_neg):
    """Non-increasing biases, first entry pinned to zero.

    Biases are cumulative sums of the non-positive increments -(raw^2), with
    a zero prepended; raw of all zeros gives all-zero biases.
    """
    bp = pad_zero_first(cumsum_last(-square(b_raw_pos)))
    bm = pad_zero_first(cumsum_last(-square(b_raw_neg)))
    return bp, bm


def class_k_eval(wp, wm, bp, bm, s):
    """Evaluate the class-K network at s: wp.relu(s + bp) + wm.relu(-s + bm).

    Parameters are (n, m); s is (n,) or batched (..., n). Strictly increasing
    in s and exactly zero at s = 0 whenever the weight/bias constraints hold.
    """
    se = expand_last(s)
    return rowsum(wp * relu(se + bp)) + rowsum(wm * relu(bm - se))


def threshold_map(thr_lo_raw, thr_hi_raw, omega_sync, omega_min, omega_max):
    """Sigmoid-squash raw thresholds strictly between sync frequency and bounds."""
    wlo = (omega_sync - omega_min) * sigmoid(thr_lo_raw) + omega_min
    whi = (omega_sync - omega_max) * sigmoid(thr_hi_raw) + omega_max
    return wlo, whi


def budget_potentials(budget_raw, wlo, whi, omega_sync, dtilde, row_l1):
    """Bounded budget potentials xi and the scalar cap applied to them.

    The cap is min over buses of D_tilde_i * min((whi_i - sync)^2,
    (wlo_i - sync)^2) / ||row i of the unit Laplacian||_1, so any xi with
    |xi| <= cap keeps every per-bus budget within its damping margin.
    """
    margin = minimum(square(whi - omega_sync), square(wlo - omega_sync))
    cap = reduce_min(dtilde * margin / row_l1)
    return cap * tanh(budget_raw), cap


def deadzone_weights(raw: dict, prefix: str = "dz"):
    """Dead-zone unit weights (free) and non-positive biases -(raw^2).

    The squared form keeps biases at most zero (zero itself reachable) while
    starting near zero for small raw values, so units engage as soon as the
    frequency leaves the dead zone instead of only far beyond it.
    """
    return (
        raw[f"{prefix}_wp"],
        raw[f"{prefix}_wm"],
        -square(raw[f"{prefix}_bp"]),
        -square(raw[f"{prefix}_bm"]),
    )


def deadzone_eval(wp, wm, bp, bm, wlo, whi, omega):
    """Trainable response, exactly zero for omega in [wlo, whi] when bp,bm <= 0."""
    shi = expand_last(omega - whi)
    slo = expand_last(omega - wlo)
    return rowsum(wp * relu(shi + bp)) + rowsum(wm * relu(bm - slo))


# ------------------------------------------------------------ assembled policy


@dataclass(frozen=True)
class PolicyConsts:
    """Per-network constants the policy closes over."""

    damping: np.ndarray
    dtilde: np.ndarray
    by_mat: np.ndarray
    bu_mat: np.ndarray
    bu_mat_t: np.ndarray
    row_l1: np.ndarray
    edge_ends: np.ndarray
    omega_sync: float
    omega_min: np.ndarray
    omega_max: np.ndarray


def make_policy_consts(
    params: PolicyParams,
    spec: SafetySpec,
    net: PowerNetwork,
    inc: Incidence,
    eq: Equilibrium,
) -> PolicyConsts:
    n = net.n_bus
    lo = np.broadcast_to(spec.omega_min, (n,)).astype(float)
    hi = np.broadcast_to(spec.omega_max, (n,)).astype(float)
    if np.any(lo >= eq.omega_sync) or np.any(hi <= eq.omega_sync):
        raise PolicyError("safety band must contain the synchronous frequency strictly")
    return PolicyConsts(
        damping=net.damping,
        dtilde=params.dtilde_frac * net.damping,
        by_mat=inc.by_mat,
        bu_mat=inc.b_mat,
        bu_mat_t=inc.b_mat.T,
        row_l1=inc.row_l1,
        edge_ends=inc.edge_ends,
        omega_sync=eq.omega_sync,
        omega_min=lo,
        omega_max=hi,
    )


@dataclass
class PolicyReady:
    """State-independent tensors computed once per rollout from the raws."""

    wlo: object
    whi: object
    xi: object
    xi_cap: object
    hi_wp: object
    hi_wm: object
    hi_bp: object
    hi_bm: object
    lo_wp: object
    lo_wm: object
    lo_bp: object
    lo_bm: object
    dz_wp: object
    dz_wm: object
    dz_bp: object
    dz_bm: object
    wlo_val: np.ndarray = None  # plain values for the dead-zone mask
    whi_val: np.ndarray = None


def policy_precompute(raw: dict, consts: PolicyConsts) -> PolicyReady:
    hi_wp, hi_wm = class_k_weights(raw["barrier_hi_wp"], raw["barrier_hi_wm"])
    hi_bp, hi_bm = class_k_biases(raw["barrier_hi_bp"], raw["barrier_hi_bm"])
    lo_wp, lo_wm = class_k_weights(raw["barrier_lo_wp"], raw["barrier_lo_wm"])
    lo_bp, lo_bm = class_k_biases(raw["barrier_lo_bp"], raw["barrier_lo_bm"])
    wlo, whi = threshold_map(
        raw["thr_lo"], raw["thr_hi"], consts.omega_sync, consts.omega_min, consts.omega_max
    )
    xi, xi_cap = budget_potentials(
        raw["budget_raw"], wlo, whi, consts.omega_sync, consts.dtilde, consts.row_l1
    )
    dz_wp, dz_wm, dz_bp, dz_bm = deadzone_weights(raw)
    return PolicyReady(
        wlo=wlo,
        whi=whi,
        xi=xi,
        xi_cap=xi_cap,
        hi_wp=hi_wp,
        hi_wm=hi_wm,
        hi_bp=hi_bp,
        hi_bm=hi_bm,
        lo_wp=lo_wp,
        lo_wm=lo_wm,
        lo_bp=lo_bp,
        lo_bm=lo_bm,
        dz_wp=dz_wp,
        dz_wm=dz_wm,
        dz_bp=dz_bp,
        dz_bm=dz_bm,
        wlo_val=np.asarray(value(wlo), dtype=float),
        whi_val=np.asarray(value(whi), dtype=float),
    )


def active_mask(ready: PolicyReady, omega) -> np.ndarray:
    """Boolean per-bus mask: outside the trained dead zone (plain values)."""
    w = np.asarray(value(omega), dtype=float)
    return (w < ready.wlo_val) | (w > ready.whi_val)


def budget_vector(consts: PolicyConsts, active: np.ndarray, xi):
    """b = L_sub @ xi without forming L_sub: gate edge differences of xi.

    `active` may be batched (..., n); the result matches its leading shape.
    """
    on = active[..., consts.edge_ends[:, 0]] & active[..., consts.edge_ends[:, 1]]
    edge_diff = matvec(consts.bu_mat_t, xi)
    return matvec(consts.bu_mat, on.astype(float) * edge_diff)


def feedforward_term(consts: PolicyConsts, lam, omega, p):
    """Local injection mismatch q = D w + (B Yb sin lam) - p from measurements."""
    return consts.damping * omega + matvec(consts.by_mat, sin(lam)) - p


def stability_cap(consts: PolicyConsts, omega, b):
    """Damping-budget cap D_tilde dev + b / dev, dev = omega - sync."""
    dev = omega - consts.omega_sync
    return consts.dtilde * dev + safe_div(b, dev)


def policy_bounds(ready: PolicyReady, consts: PolicyConsts, omega, q, b):
    """Upper and lower admissible-control bounds at the measured state."""
    cap = stability_cap(consts, omega, b)
    alpha_hi = class_k_eval(
        ready.hi_wp, ready.hi_wm, ready.hi_bp, ready.hi_bm, consts.omega_max - omega
    )
    alpha_lo = class_k_eval(
        ready.lo_wp, ready.lo_wm, ready.lo_bp, ready.lo_bm, consts.omega_min - omega
    )
    ub = minimum(cap, safe_div(alpha_hi, omega - ready.whi) + q)
    lb = maximum(cap, safe_div(alpha_lo, ready.wlo - omega) + q)
    return ub, lb


def gated_control(gate_hi, gate_lo, f, ub, lb):
    """The assembled control described in the module docstring."""
    return gate_hi * (f - relu(f - ub)) + gate_lo * (f + relu(lb - f))


@dataclass
class PolicyOutputs:
    u: object
    budgets: object
    active: np.ndarray
    upper: object
    lower: object


def policy_forward(ready: PolicyReady, consts: PolicyConsts, lam, omega, p) -> PolicyOutputs:
    """Full policy at one measured state. Works on arrays or tape nodes."""
    active = active_mask(ready, omega)
    b = budget_vector(consts, active, ready.xi)
    q = feedforward_term(consts, lam, omega, p)
    ub, lb = policy_bounds(ready, consts, omega, q, b)
    f = deadzone_eval(
        ready.dz_wp, ready.dz_wm, ready.dz_bp, ready.dz_bm, ready.wlo, ready.whi, omega
    )
    gate_hi = relu(omega - ready.whi)
    gate_lo = relu(ready.wlo - omega)
    u = gated_control(gate_hi, gate_lo, f, ub, lb)
    return PolicyOutputs(u=u, budgets=b, active=active, upper=ub, lower=lb)


def project_control(out: PolicyOutputs, ready: PolicyReady, omega) -> np.ndarray:
    """Clamp the raw policy output into the admissible interval (values only)."""
    w = np.asarray(value(omega), dtype=float)
    u = np.asarray(value(out.u), dtype=float)
    ub = np.asarray(value(out.upper), dtype=float)
    lb = np.asarray(value(out.lower), dtype=float)
    above = w > ready.whi_val
    below = w < ready.wlo_val
    proj = np.where(above, np.minimum(u, ub), np.where(below, np.maximum(u, lb), 0.0))
    return proj


# ------------------------------------------------------------------ checking


@dataclass
class ConstraintReport:
    """Per-bus admissibility of a control against the branch bounds.

    branch: +1 above the upper threshold, -1 below the lower one, 0 inside.
    slack: distance to the binding bound (>= 0 means satisfied); inside the
    dead zone the slack is -|u|, so any nonzero u shows up as a violation.
    """

    ok: bool
    branch: np.ndarray
    slack: np.ndarray
    violations: list[int]


def constraint_check(
    params: PolicyParams,
    spec: SafetySpec,
    net: PowerNetwork,
    inc: Incidence,
    eq: Equilibrium,
    lam: np.ndarray,
    omega: np.ndarray,
    p: np.ndarray,
    u: np.ndarray,
    tol: float = 1e-9,
) -> ConstraintReport:
    consts = make_policy_consts(params, spec, net, inc, eq)
    ready = policy_precompute(params.raw, consts)
    out = policy_forward(ready, consts, lam, omega, p)
    w = np.asarray(omega, dtype=float)
    u = np.asarray(u, dtype=float)
    above = w > ready.whi_val
    below = w < ready.wlo_val
    branch = np.where(above, 1, np.where(below, -1, 0)).astype(np.int8)
    slack = np.where(
        above,
        np.asarray(value(out.upper)) - u,
        np.where(below, u - np.asarray(value(out.lower)), -np.abs(u)),
    )
    bad = np.nonzero(slack < -tol)[0]
    return ConstraintReport(ok=bad.size == 0, branch=branch, slack=slack, violations=bad.tolist())


def validate_policy(ready: PolicyReady, consts: PolicyConsts, atol: float = 1e-12) -> None:
    """Assert the structural invariants of the constrained tensors (values)."""
    for wp, wm, tag in (
        (ready.hi_wp, ready.hi_wm, "barrier_hi"),
        (ready.lo_wp, ready.lo_wm, "barrier_lo"),
    ):
        pp = np.cumsum(np.asarray(value(wp)), axis=-1)
        pm = np.cumsum(np.asarray(value(wm)), axis=-1)
        if not np.all(pp > 0):
            raise PolicyError(f"{tag}: a positive-branch partial sum is not > 0")
        if not np.all(pm < 0):
            raise PolicyError(f"{tag}: a negative-branch partial sum is not < 0")
    for bias, tag in (
        (ready.hi_bp, "barrier_hi_bp"),
        (ready.hi_bm, "barrier_hi_bm"),
        (ready.lo_bp, "barrier_lo_bp"),
        (ready.lo_bm, "barrier_lo_bm"),
    ):
        bv = np.asarray(value(bias))
        if not np.all(bv[..., 0] == 0.0):
            raise PolicyError(f"{tag}: first bias entry not pinned to zero")
        if np.any(np.diff(bv, axis=-1) > 0):
            raise PolicyError(f"{tag}: biases increase along the units")
    for bias, tag in ((ready.dz_bp, "dz_bp"), (ready.dz_bm, "dz_bm")):
        if np.any(np.asarray(value(bias)) > 0):
            raise PolicyError(f"{tag}: dead-zone bias above zero")
    wlo, whi = ready.wlo_val, ready.whi_val
    if np.any(wlo <= consts.omega_min) or np.any(wlo >= consts.omega_sync):
        raise PolicyError("lower threshold escaped (omega_min, omega_sync)")
    if np.any(whi <= consts.omega_sync) or np.any(whi >= consts.omega_max):
        raise PolicyError("upper threshold escaped (omega_sync, omega_max)")
    xi = np.asarray(value(ready.xi))
    margin = consts.dtilde * np.minimum(
        (whi - consts.omega_sync) ** 2, (wlo - consts.omega_sync) ** 2
    )
    if np.any(consts.row_l1 * np.abs(xi).max() > margin + atol):
        raise PolicyError("budget potentials exceed the damping margin bound")


# --------------------------------------------------------------- controllers


@dataclass
class ControlDecision:
    """What a controller returns to the simulator each step."""

    u: np.ndarray
    budgets: np.ndarray
    active: np.ndarray


def make_zero_controller(n: int):
    zero = np.zeros(n)
    off = np.zeros(n, dtype=bool)

    def control(lam, omega, p) -> ControlDecision:
        return ControlDecision(u=zero, budgets=zero, active=off)

    return control


def make_policy_controller(
    params: PolicyParams,
    spec: SafetySpec,
    net: PowerNetwork,
    inc: Incidence,
    eq: Equilibrium,
    projection: bool = False,
):
    """Bind a constrained policy to a network for simulation use."""
    consts = make_policy_consts(params, spec, net, inc, eq)
    ready = policy_precompute(params.raw, consts)
    validate_policy(ready, consts)

    def control(lam, omega, p) -> ControlDecision:
        out = policy_forward(ready, consts, lam, omega, p)
        u = project_control(out, ready, omega) if projection else np.asarray(out.u, dtype=float)
        return ControlDecision(u=u, budgets=np.asarray(out.budgets, dtype=float), active=out.active)

    return control


def make_analytic_safe_controller(
    spec: SafetySpec,
    net: PowerNetwork,
    inc: Incidence,
    eq: Equilibrium,
    threshold: float = 0.1,
    gain: float = 2.0,
):
    """Fixed-form safe baseline: barrier with slope `gain`, thresholds +/-threshold.

    Above +threshold it emits min(0, gain*(omega_max - w)/(w - threshold) + q),
    mirrored below -threshold, zero inside. Signs force u to oppose the local
    deviation, which keeps the dissipation inequality while the barrier keeps
    the band, at the price of tracking the full feedforward q.
    """
    n = net.n_bus
    lo = np.broadcast_to(spec.omega_min, (n,)).astype(float)
    hi = np.broadcast_to(spec.omega_max, (n,)).astype(float)
    consts_d = net.damping
    by = inc.by_mat

    def control(lam, omega, p) -> ControlDecision:
        w = np.asarray(omega, dtype=float)
        q = consts_d * w + by @ np.sin(np.asarray(lam, dtype=float)) - p
        above = w > threshold
        below = w < -threshold
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.minimum(0.0, gain * (hi - w) / np.where(above, w - threshold, 1.0) + q)
            dn = np.maximum(0.0, gain * (lo - w) / np.where(below, -threshold - w, 1.0) + q)
        u = np.where(above, up, np.where(below, dn, 0.0))
        return ControlDecision(u=u, budgets=np.zeros(n), active=above | below)

    return control


def monotone_precompute(raw: dict):
    wp, wm = class_k_weights(raw["resp_wp"], raw["resp_wm"])
    bp, bm = class_k_biases(raw["resp_bp"], raw["resp_bm"])
    return wp, wm, bp, bm


def monotone_eval(ready, omega):
    """Decentralized response u_i(w_i): strictly decreasing, zero at zero."""
    wp, wm, bp, bm = ready
    return -class_k_eval(wp, wm, bp, bm, omega)


def make_monotone_controller(params: MonotoneParams, n: int):
    ready = monotone_precompute(params.raw)
    zero = np.zeros(n)
    off = np.zeros(n, dtype=bool)

    def control(lam, omega, p) -> ControlDecision:
        return ControlDecision(u=monotone_eval(ready, omega), budgets=zero, active=off)

    return control


# ------------------------------------------------------------ train adapters


class ConstrainedAdapter:
    """Uniform training interface over the constrained policy."""

    kind = "constrained"

    def __init__(
        self,
        params: PolicyParams,
        spec: SafetySpec,
        net: PowerNetwork,
        inc: Incidence,
        eq: Equilibrium,
    ):
        self.params = params
        self.spec = spec
        self.consts = make_policy_consts(params, spec, net, inc, eq)

    @property
    def raw(self) -> dict:
        return self.params.raw

    @property
    def keys(self) -> tuple:
        return PARAM_KEYS

    def precompute(self, raw_like: dict) -> PolicyReady:
        return policy_precompute(raw_like, self.consts)

    def control(self, ready: PolicyReady, lam, omega, p):
        out = policy_forward(ready, self.consts, lam, omega, p)
        return out.u

    def validate(self, ready: PolicyReady) -> None:
        validate_policy(ready, self.consts)

    def rebuild(self, raw: dict) -> PolicyParams:
        return PolicyParams(raw=raw, m_hidden=self.params.m_hidden, dtilde_frac=self.params.dtilde_frac)


class MonotoneAdapter:
    """Training interface over the monotone decentralized baseline."""

    kind = "monotone"

    def __init__(self, params: MonotoneParams):
        self.params = params

    @property
    def raw(self) -> dict:
        return self.params.raw

    @property
    def keys(self) -> tuple:
        return MONO_KEYS

    def precompute(self, raw_like: dict):
        return monotone_precompute(raw_like)

    def control(self, ready, lam, omega, p):
        return monotone_eval(ready, omega)

    def validate(self, ready) -> None:
        wp, wm, bp, bm = ready
        pp = np.cumsum(np.asarray(value(wp)), axis=-1)
        pm = np.cumsum(np.asarray(value(wm)), axis=-1)
        if not (np.all(pp > 0) and np.all(pm < 0)):
            raise PolicyError("monotone response lost its sign-definite partial sums")

    def rebuild(self, raw: dict) -> MonotoneParams:
        return MonotoneParams(raw=raw, m_hidden=self.params.m_hidden)
