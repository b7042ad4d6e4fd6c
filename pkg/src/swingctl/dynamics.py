"""Swing dynamics: vector field, explicit stepping, scenarios, rollouts.

States are (lam, omega) with lam the per-edge angle differences (so lam stays
in the row space of the incidence transpose by construction) and omega the
per-bus frequency deviation in Hz. Controls and injections enter the omega
equation only.

The simulator steps with explicit Euler, matching the discretization the
trainer differentiates through; an RK4 mode exists for cross-checks and is
excluded from training. Controls are zero-order held over a step in both
modes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import Equilibrium, energy, in_region
from .netgraph import Incidence, PowerNetwork
from .tape import matvec, sin


class IntegrationError(RuntimeError):
    """State left the representable range (non-finite entries) mid-run."""


@dataclass(frozen=True)
class Disturbance:
    """Step change in injection at one bus over the half-open window (t0, t1]."""

    bus: int
    dp: float
    t0: float
    t1: float

    def active(self, t: float) -> bool:
        return self.t0 < t <= self.t1


@dataclass(frozen=True)
class Scenario:
    """Evaluation protocol: horizon, step, events, and sampling ranges.

    init_omega_range: initial per-bus frequency drawn uniform in +/-range (Hz).
    init_p_frac: initial angles come from the equilibrium of injections scaled
        per bus by uniform factors in [1-frac, 1+frac].
    noise_bound: measurement noise on the frequency the controller sees,
        uniform in +/-bound (Hz). The true state is never noised.
    """

    horizon: float
    dt: float
    disturbances: tuple[Disturbance, ...] = ()
    init_omega_range: float = 0.1
    init_p_frac: float = 0.1
    noise_bound: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.horizon <= 0 or self.dt <= 0:
            raise ValueError("horizon and dt must be positive")
        if self.noise_bound < 0:
            raise ValueError("noise_bound must be nonnegative")
        object.__setattr__(self, "disturbances", tuple(self.disturbances))
        for d in self.disturbances:
            if d.bus < 0:
                raise ValueError(f"disturbance bus index {d.bus} out of range")
            if not 0.0 <= d.t0 < d.t1 <= self.horizon:
                raise ValueError(
                    f"disturbance window ({d.t0:g}, {d.t1:g}] must lie inside (0, {self.horizon:g}]"
                )

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


def injection_at(net: PowerNetwork, scenario: Scenario, t: float) -> np.ndarray:
    p = net.p_nom.copy()
    for d in scenario.disturbances:
        if d.active(t):
            p[d.bus] += d.dp
    return p


def swing_rhs(net: PowerNetwork, inc: Incidence, lam, omega, u, p):
    """Time derivatives (dlam, domega); accepts arrays or tape nodes."""
    dlam = matvec(inc.b_mat.T, omega)
    domega = (u + p - net.damping * omega - matvec(inc.by_mat, sin(lam))) / net.inertia
    return dlam, domega


def euler_step(net: PowerNetwork, inc: Incidence, lam, omega, u, p, dt: float):
    dlam, domega = swing_rhs(net, inc, lam, omega, u, p)
    return lam + dt * dlam, omega + dt * domega


def rk4_step(net: PowerNetwork, inc: Incidence, lam, omega, u, p, dt: float):
    """Classic RK4 with u and p held constant over the step. Values only."""
    k1l, k1w = swing_rhs(net, inc, lam, omega, u, p)
    k2l, k2w = swing_rhs(net, inc, lam + 0.5 * dt * k1l, omega + 0.5 * dt * k1w, u, p)
    k3l, k3w = swing_rhs(net, inc, lam + 0.5 * dt * k2l, omega + 0.5 * dt * k2w, u, p)
    k4l, k4w = swing_rhs(net, inc, lam + dt * k3l, omega + dt * k3w, u, p)
    lam2 = lam + dt / 6.0 * (k1l + 2 * k2l + 2 * k3l + k4l)
    omega2 = omega + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
    return lam2, omega2


def sample_initial_state(
    net: PowerNetwork,
    inc: Incidence,
    scenario: Scenario,
    rng: np.random.Generator,
):
    """Draw (lam0, omega0) per the scenario ranges.

    Draw order (fixed for reproducibility): the omega vector first, then the
    per-bus injection scale factors. Angles come from the equilibrium of the
    scaled injections, so lam0 always lies in the incidence row space.
    """
    from .equilibrium import solve_equilibrium

    omega0 = rng.uniform(-scenario.init_omega_range, scenario.init_omega_range, net.n_bus)
    if scenario.init_p_frac > 0:
        factors = rng.uniform(1.0 - scenario.init_p_frac, 1.0 + scenario.init_p_frac, net.n_bus)
    else:
        factors = np.ones(net.n_bus)
    eq0 = solve_equilibrium(net, inc, factors * net.p_nom)
    return eq0.lam_eq.copy(), omega0


@dataclass
class Trajectory:
    """Time-indexed record of one closed-loop run.

    Row k holds the state at t = k*dt and the control evaluated at that state
    (including the final row). Per-row loss columns store
    gamma*||omega - sync||^2 and ||u||^2; the run cost averages the first
    n_steps rows. `lam` and `active` are in-memory extras that a CSV
    round-trip does not preserve.
    """

    t: np.ndarray
    omega: np.ndarray
    u: np.ndarray
    budgets: np.ndarray
    v_energy: np.ndarray
    loss_freq: np.ndarray
    loss_ctrl: np.ndarray
    dt: float
    gamma: float
    lam: np.ndarray | None = None
    active: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_bus(self) -> int:
        return self.omega.shape[1]

    @property
    def n_steps(self) -> int:
        return self.omega.shape[0] - 1

    def cost(self, window: float | None = None) -> float:
        """Average running cost over the first `window` seconds (default all)."""
        k = self.n_steps if window is None else min(self.n_steps, int(round(window / self.dt)))
        if k <= 0:
            return 0.0
        return float((self.loss_freq[:k] + self.loss_ctrl[:k]).sum() / k)


def rollout(
    net: PowerNetwork,
    inc: Incidence,
    eq: Equilibrium,
    controller,
    scenario: Scenario,
    seed: int = 0,
    lam0: np.ndarray | None = None,
    omega0: np.ndarray | None = None,
    integrator: str = "euler",
    beta: float = 1.0,
    gamma: float = 40.0,
) -> Trajectory:
    """Simulate the closed loop over the scenario horizon.

    The controller is any callable (lam, omega, p) -> ControlDecision; it sees
    the measured frequency (true plus per-step uniform noise when the scenario
    carries a noise bound) and the true injections. Draw order per run:
    initial state first (when not supplied), then one noise vector per row.

    Warns if the initial state falls outside the invariant energy region for
    the given beta; raises IntegrationError (with the step index) if the state
    goes non-finite.
    """
    if integrator not in ("euler", "rk4"):
        raise ValueError(f"unknown integrator {integrator!r}")
    rng = np.random.Generator(np.random.Philox(seed))
    if lam0 is None or omega0 is None:
        lam0, omega0 = sample_initial_state(net, inc, scenario, rng)
    lam = np.asarray(lam0, dtype=float).copy()
    omega = np.asarray(omega0, dtype=float).copy()
    if not in_region(net, inc, eq, lam, omega, beta):
        warnings.warn("initial state outside the invariant energy region", RuntimeWarning)

    n, k_end = net.n_bus, scenario.n_steps
    step = euler_step if integrator == "euler" else rk4_step
    tgrid = np.arange(k_end + 1) * scenario.dt
    rec_omega = np.empty((k_end + 1, n))
    rec_lam = np.empty((k_end + 1, inc.b_mat.shape[1]))
    rec_u = np.empty((k_end + 1, n))
    rec_b = np.empty((k_end + 1, n))
    rec_act = np.zeros((k_end + 1, n), dtype=bool)
    rec_v = np.empty(k_end + 1)
    rec_lf = np.empty(k_end + 1)
    rec_lc = np.empty(k_end + 1)

    for k in range(k_end + 1):
        t = tgrid[k]
        p = injection_at(net, scenario, t)
        measured = omega
        if scenario.noise_bound > 0:
            measured = omega + rng.uniform(-scenario.noise_bound, scenario.noise_bound, n)
        dec = controller(lam, measured, p)
        rec_omega[k] = omega
        rec_lam[k] = lam
        rec_u[k] = dec.u
        rec_b[k] = dec.budgets
        rec_act[k] = dec.active
        rec_v[k] = energy(net, inc, eq, lam, omega)
        dev = omega - eq.omega_sync
        rec_lf[k] = gamma * float(dev @ dev)
        rec_lc[k] = float(np.dot(dec.u, dec.u))
        if k < k_end:
            lam, omega = step(net, inc, lam, omega, dec.u, p, scenario.dt)
            if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(omega))):
                raise IntegrationError(f"non-finite state after step {k + 1} (t={t + scenario.dt:g})")

    return Trajectory(
        t=tgrid,
        omega=rec_omega,
        u=rec_u,
        budgets=rec_b,
        v_energy=rec_v,
        loss_freq=rec_lf,
        loss_ctrl=rec_lc,
        dt=scenario.dt,
        gamma=gamma,
        lam=rec_lam,
        active=rec_act,
        meta={"seed": seed, "integrator": integrator, "label": scenario.label},
    )
