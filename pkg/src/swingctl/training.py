"""Training loop: discretized rollouts, loss, exact gradients, Adam.

The trainer unrolls the same explicit-Euler step the simulator uses, records
every operation on the autodiff tape, and backpropagates through the whole
rollout. A batch is carried as a leading axis on the state arrays, so one
tape serves the entire episode and gradient accumulation order is fixed by
construction (numpy's reduction order per parameter entry), making training
bit-reproducible for a given seed.

Loss per episode (averaged over the batch):

    (1/K) sum_k [ gamma ||omega(k) - sync||^2 + ||u(k)||^2 ]
  + (rho/(K-1)) sum_k ||u(k) - u(k-1)||^2

The second term penalizes step-to-step control variation; with rho > 0 the
learned policy responds more smoothly to measurement noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .dynamics import Scenario, euler_step, injection_at
from .equilibrium import Equilibrium
from .netgraph import Incidence, PowerNetwork
from .tape import Tape, square, sum_all, value


class TrainingError(RuntimeError):
    """Training diverged or produced a non-finite loss; carries the curve."""

    def __init__(self, msg: str, curve: list | None = None):
        super().__init__(msg)
        self.curve = curve or []


@dataclass
class TrainConfig:
    """Hyperparameters. Loss/optimizer defaults follow the reference protocol;
    steps/dt default to the desk scale (10 s at 5 ms)."""

    gamma: float = 40.0
    rho: float = 0.0
    lr: float = 0.05
    episodes: int = 150
    batch: int = 50
    steps: int = 2000
    dt: float = 5e-3
    m_hidden: int = 20
    seed: int = 0
    init_scale: float = 0.1
    dtilde_frac: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    divergence_factor: float = 1e3

    def to_dict(self) -> dict:
        return asdict(self)


def episode_loss(
    adapter,
    net: PowerNetwork,
    inc: Incidence,
    eq: Equilibrium,
    raw_like: dict,
    lam0,
    omega0,
    p_steps: np.ndarray,
    noise: np.ndarray | None,
    gamma: float,
    rho: float,
    dt: float,
):
    """Rollout loss for one episode. `raw_like` holds tape leaves or arrays.

    lam0/omega0 may be single states (m,)/(n,) or batches (B, m)/(B, n);
    p_steps is (K, n); noise is (K, n) or (K, B, n) or None. Returns
    (loss, parts) where parts are the frequency/control/variation terms;
    both are tape nodes when raw_like holds leaves, plain scalars otherwise.
    """
    omega0 = np.asarray(omega0, dtype=float)
    lam0 = np.asarray(lam0, dtype=float)
    n_batch = omega0.shape[0] if omega0.ndim == 2 else 1
    k_steps = p_steps.shape[0]
    if k_steps == 0:
        return 0.0, (0.0, 0.0, 0.0)

    ready = adapter.precompute(raw_like)
    lam, omega = lam0, omega0
    freq_acc = 0.0
    ctrl_acc = 0.0
    lip_acc = 0.0
    u_prev = None
    for k in range(k_steps):
        measured = omega if noise is None else omega + noise[k]
        u = adapter.control(ready, lam, measured, p_steps[k])
        dev = omega - eq.omega_sync
        freq_acc = freq_acc + sum_all(square(dev))
        ctrl_acc = ctrl_acc + sum_all(square(u))
        if u_prev is not None:
            lip_acc = lip_acc + sum_all(square(u - u_prev))
        u_prev = u
        lam, omega = euler_step(net, inc, lam, omega, u, p_steps[k], dt)

    freq_term = gamma * freq_acc * (1.0 / (k_steps * n_batch))
    ctrl_term = ctrl_acc * (1.0 / (k_steps * n_batch))
    if rho > 0 and k_steps > 1:
        lip_term = rho * lip_acc * (1.0 / ((k_steps - 1) * n_batch))
    else:
        lip_term = 0.0
    loss = freq_term + ctrl_term + lip_term
    return loss, (freq_term, ctrl_term, lip_term)


def forward_loss(adapter, net, inc, eq, raw_values, lam0, omega0, p_steps, noise, gamma, rho, dt) -> float:
    """Value-only episode loss (no tape); used by finite-difference checks."""
    loss, _ = episode_loss(
        adapter, net, inc, eq, raw_values, lam0, omega0, p_steps, noise, gamma, rho, dt
    )
    return float(value(loss))


def loss_and_grad(adapter, net, inc, eq, raw_values, lam0, omega0, p_steps, noise, gamma, rho, dt):
    """Episode loss plus exact gradients for every raw parameter array.

    An empty horizon yields zero loss and zero gradients. A non-finite
    gradient triggers a second, checked reverse sweep that names the first
    offending tape node.
    """
    if p_steps.shape[0] == 0:
        zero = {k: np.zeros_like(raw_values[k]) for k in adapter.keys}
        return 0.0, (0.0, 0.0, 0.0), zero
    tp = Tape()
    leaves = {k: tp.leaf(raw_values[k]) for k in adapter.keys}
    loss, parts = episode_loss(
        adapter, net, inc, eq, leaves, lam0, omega0, p_steps, noise, gamma, rho, dt
    )
    tp.backward(loss)
    grads = {k: tp.grad(leaves[k]) for k in adapter.keys}
    if any(not np.all(np.isfinite(g)) for g in grads.values()):
        tp.backward(loss, check_finite=True)  # raises TapeError at the source
        raise TrainingError("non-finite gradient with finite adjoints")
    part_vals = tuple(float(value(p)) for p in parts)
    return float(value(loss)), part_vals, grads


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @staticmethod
    def fresh(raw: dict) -> "AdamState":
        return AdamState(
            m={k: np.zeros_like(v) for k, v in raw.items()},
            v={k: np.zeros_like(v) for k, v in raw.items()},
            t=0,
        )


def adam_step(raw: dict, grads: dict, state: AdamState, cfg: TrainConfig, keys) -> dict:
    """One Adam update; returns new raw dict, mutates the moment state."""
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    state.t += 1
    corr1 = 1.0 - b1**state.t
    corr2 = 1.0 - b2**state.t
    out = {}
    for k in keys:
        g = grads[k]
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * g
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g
        m_hat = state.m[k] / corr1
        v_hat = state.v[k] / corr2
        out[k] = raw[k] - cfg.lr * m_hat / (np.sqrt(v_hat) + eps)
    return out


@dataclass
class TrainResult:
    params: object
    curve: np.ndarray  # columns: episode, loss, loss_freq, loss_ctrl, loss_lip
    config: TrainConfig
    final_loss: float = field(default=np.nan)


def _sample_batch(net, inc, scenario: Scenario, batch: int, rng: np.random.Generator):
    """Batch initial states; per rollout: omega vector, then injection factors."""
    from .dynamics import sample_initial_state

    lam0 = np.empty((batch, inc.b_mat.shape[1]))
    omega0 = np.empty((batch, net.n_bus))
    for b in range(batch):
        lam0[b], omega0[b] = sample_initial_state(net, inc, scenario, rng)
    return lam0, omega0


def train(
    adapter,
    net: PowerNetwork,
    inc: Incidence,
    eq: Equilibrium,
    scenario: Scenario,
    cfg: TrainConfig,
    progress=None,
) -> TrainResult:
    """Run the episode loop and return trained parameters plus the curve.

    Per episode (all randomness from one counter-based stream, in this order):
    batch initial states, then the per-step measurement noise block. The
    structural invariants of the parameterization are re-validated every
    episode; a loss above divergence_factor times the first episode's (or a
    non-finite one) aborts with the partial curve attached.
    """
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    p_steps = np.stack([injection_at(net, scenario, k * cfg.dt) for k in range(cfg.steps)])
    raw = {k: np.array(v, dtype=float) for k, v in adapter.raw.items()}
    state = AdamState.fresh(raw)
    curve_rows = []
    first_loss = None

    for ep in range(cfg.episodes):
        lam0, omega0 = _sample_batch(net, inc, scenario, cfg.batch, rng)
        noise = None
        if scenario.noise_bound > 0:
            noise = rng.uniform(
                -scenario.noise_bound, scenario.noise_bound, (cfg.steps, cfg.batch, net.n_bus)
            )
        loss, parts, grads = loss_and_grad(
            adapter, net, inc, eq, raw, lam0, omega0, p_steps, noise, cfg.gamma, cfg.rho, cfg.dt
        )
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at episode {ep}", curve_rows)
        if first_loss is None:
            first_loss = loss
        elif loss > cfg.divergence_factor * max(first_loss, 1e-12):
            raise TrainingError(
                f"divergence at episode {ep}: loss {loss:.6g} vs initial {first_loss:.6g}",
                curve_rows,
            )
        raw = adam_step(raw, grads, state, cfg, adapter.keys)
        adapter.validate(adapter.precompute(raw))
        curve_rows.append((float(ep), loss, parts[0], parts[1], parts[2]))
        if progress is not None:
            progress(ep, loss, parts)

    curve = np.asarray(curve_rows, dtype=float).reshape(-1, 5)
    final = curve[-1, 1] if curve_rows else np.nan
    return TrainResult(params=adapter.rebuild(raw), curve=curve, config=cfg, final_loss=final)
