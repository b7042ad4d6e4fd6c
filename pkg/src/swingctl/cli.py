"""Command-line front end: simulate / train / verify / compare.

Every artifact embeds the effective configuration (file values after flag
overrides), so a command line plus a seed pins the output bytes. Usage
errors exit 2 (argparse), domain failures exit 1 with a one-line structured
message on stderr, success exits 0. The verify subcommand also exits 1 when
any check fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from .controller import (
    PolicyError,
    SafetySpec,
    init_monotone_params,
    init_policy_params,
    ConstrainedAdapter,
    MonotoneAdapter,
    make_analytic_safe_controller,
    make_monotone_controller,
    make_policy_controller,
    make_zero_controller,
)
from .dynamics import IntegrationError, rollout
from .equilibrium import EquilibriumError, solve_equilibrium
from .netgraph import GraphError, build_incidence
from .training import TrainConfig, TrainingError, train
from .verify import run_checks
from . import scenario_io as sio

DOMAIN_ERRORS = (
    sio.SchemaError,
    GraphError,
    EquilibriumError,
    PolicyError,
    TrainingError,
    IntegrationError,
    ValueError,
    OSError,
)


def _band_spec(arg: str, n: int) -> SafetySpec:
    try:
        lo, hi = (float(v) for v in arg.split(","))
    except ValueError:
        raise ValueError(f"--band must be 'lo,hi', got {arg!r}") from None
    return SafetySpec.band(lo, hi, n)


def _load_spec(args, n: int) -> SafetySpec:
    if args.spec is not None:
        return sio.load_safety_spec(args.spec)
    return _band_spec(args.band, n)


def _build_controller(value: str, net, inc, eq, spec, projection: bool):
    """zero | safe | path to a checkpoint."""
    if value == "zero":
        return make_zero_controller(net.n_bus)
    if value == "safe":
        return make_analytic_safe_controller(spec, net, inc, eq)
    params, _ = sio.load_checkpoint(value)
    if params.kind == "constrained":
        return make_policy_controller(params, spec, net, inc, eq, projection=projection)
    return make_monotone_controller(params, net.n_bus)


def _scenario_with_overrides(args, net):
    scenario = sio.load_scenario(args.scenario, net)
    patch = {}
    if getattr(args, "dt", None) is not None:
        patch["dt"] = args.dt
    if getattr(args, "noise", None) is not None:
        patch["noise_bound"] = args.noise
    if getattr(args, "horizon", None) is not None:
        patch["horizon"] = args.horizon
    return dataclasses.replace(scenario, **patch) if patch else scenario


def _cmd_simulate(args) -> int:
    net = sio.load_network(args.net)
    inc = build_incidence(net)
    eq = solve_equilibrium(net, inc)
    spec = _load_spec(args, net.n_bus)
    scenario = _scenario_with_overrides(args, net)
    projection = args.projection == "on"
    controller = _build_controller(args.controller, net, inc, eq, spec, projection)
    traj = rollout(
        net,
        inc,
        eq,
        controller,
        scenario,
        seed=args.seed,
        integrator=args.integrator,
        beta=args.beta,
        gamma=args.gamma,
    )
    echo = {
        "command": "simulate",
        "net": args.net,
        "scenario": args.scenario,
        "scenario_label": scenario.label,
        "controller": args.controller,
        "projection": args.projection,
        "integrator": args.integrator,
        "seed": args.seed,
        "horizon": scenario.horizon,
        "noise_bound": scenario.noise_bound,
        "beta": args.beta,
    }
    sio.save_trajectory(args.out, traj, echo)
    report = run_checks(traj, spec, eq, beta=args.beta, tol=args.tol)
    sio.save_report(args.report, report)
    print(f"wrote {args.out} and {args.report}")
    for v in report.verdicts:
        print(f"  {v.name}: {'pass' if v.passed else 'FAIL'} (margin {v.margin:.3g})")
    return 0


def _cmd_train(args) -> int:
    net = sio.load_network(args.net)
    inc = build_incidence(net)
    eq = solve_equilibrium(net, inc)
    scenario = _scenario_with_overrides(args, net)
    cfg = sio.load_train_config(args.config) if args.config else TrainConfig()
    overrides = {
        name: getattr(args, name)
        for name in ("gamma", "rho", "lr", "episodes", "batch", "steps", "dt", "m_hidden", "seed", "init_scale")
        if getattr(args, name) is not None
    }
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    spec = _load_spec(args, net.n_bus)
    rng = np.random.default_rng(np.random.Philox(cfg.seed))
    if args.policy == "constrained":
        params = init_policy_params(net.n_bus, cfg.m_hidden, rng, cfg.init_scale, cfg.dtilde_frac)
        adapter = ConstrainedAdapter(params, spec, net, inc, eq)
    else:
        params = init_monotone_params(net.n_bus, cfg.m_hidden, rng, cfg.init_scale)
        adapter = MonotoneAdapter(params)
    scenario = dataclasses.replace(scenario, dt=cfg.dt, horizon=cfg.steps * cfg.dt)

    def progress(ep, loss, parts):
        if args.quiet:
            return
        print(f"episode {ep}: loss {loss:.6g}")

    result = train(adapter, net, inc, eq, scenario, cfg, progress=progress)
    sio.save_checkpoint(args.out, result.params, cfg)
    echo = {
        "command": "train",
        "net": args.net,
        "scenario": args.scenario,
        "policy": args.policy,
        "config_hash": sio.config_hash(cfg.to_dict()),
        **cfg.to_dict(),
    }
    sio.save_curve(args.curve, result.curve, echo)
    print(f"wrote {args.out} and {args.curve} (final loss {result.final_loss:.6g})")
    return 0


def _cmd_verify(args) -> int:
    traj = sio.load_trajectory(args.traj)
    net = sio.load_network(args.net)
    inc = build_incidence(net)
    eq = solve_equilibrium(net, inc)
    spec = _load_spec(args, net.n_bus)
    report = run_checks(traj, spec, eq, beta=args.beta, tol=args.tol)
    if args.report:
        sio.save_report(args.report, report)
    for v in report.verdicts:
        print(f"{v.name}: {'pass' if v.passed else 'FAIL'} (margin {v.margin:.3g})")
    return 0 if report.all_pass else 1


def _cmd_compare(args) -> int:
    net = sio.load_network(args.net)
    inc = build_incidence(net)
    eq = solve_equilibrium(net, inc)
    spec = _load_spec(args, net.n_bus)
    scenario = _scenario_with_overrides(args, net)
    projection = args.projection == "on"
    entries = []
    for item in args.controller:
        label, _, value = item.partition("=")
        if not value:
            label, value = item, item
        entries.append((label, _build_controller(value, net, inc, eq, spec, projection)))
    summaries, _ = sio.compare(
        entries,
        net,
        inc,
        eq,
        spec,
        scenario,
        seed=args.seed,
        gamma=args.gamma,
        beta=args.beta,
        train_window=args.train_window,
    )
    echo = {
        "command": "compare",
        "net": args.net,
        "scenario": args.scenario,
        "seed": args.seed,
        "projection": args.projection,
        "controllers": list(args.controller),
    }
    sio.save_comparison(args.out, summaries, echo)
    print(f"wrote {args.out}")
    for s in summaries:
        print(
            f"  {s.label}: stability {'pass' if s.stability_ok else 'FAIL'},"
            f" safety {'pass' if s.safety_ok else 'FAIL'}, cost {s.cost:.6g}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swingctl",
        description="Simulate, train, and certify frequency controllers on swing-equation networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--net", required=True, help="network JSON")
        p.add_argument("--spec", default=None, help="safety-spec JSON (default: --band)")
        p.add_argument("--band", default="-0.2,0.2", help="fallback band 'lo,hi' in Hz")
        p.add_argument("--beta", type=float, default=1.0, help="region shrink factor")

    p_sim = sub.add_parser("simulate", help="roll out one scenario and certify it")
    add_common(p_sim)
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--controller", default="zero", help="zero | safe | checkpoint path")
    p_sim.add_argument("--projection", choices=("on", "off"), default="on")
    p_sim.add_argument("--integrator", choices=("euler", "rk4"), default="euler")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--dt", type=float, default=None, help="override scenario dt")
    p_sim.add_argument("--noise", type=float, default=None, help="override measurement noise bound")
    p_sim.add_argument("--horizon", type=float, default=None, help="override scenario horizon")
    p_sim.add_argument("--gamma", type=float, default=40.0)
    p_sim.add_argument("--tol", type=float, default=1e-3, help="convergence check tolerance")
    p_sim.add_argument("--out", default="traj.csv")
    p_sim.add_argument("--report", default="verdicts.json")
    p_sim.set_defaults(func=_cmd_simulate)

    p_tr = sub.add_parser("train", help="train a policy and write a checkpoint")
    add_common(p_tr)
    p_tr.add_argument("--scenario", required=True)
    p_tr.add_argument("--policy", choices=("constrained", "monotone"), default="constrained")
    p_tr.add_argument("--config", default=None, help="train-config JSON")
    p_tr.add_argument("--gamma", type=float, default=None)
    p_tr.add_argument("--rho", type=float, default=None)
    p_tr.add_argument("--lr", type=float, default=None)
    p_tr.add_argument("--episodes", type=int, default=None)
    p_tr.add_argument("--batch", type=int, default=None)
    p_tr.add_argument("--steps", type=int, default=None)
    p_tr.add_argument("--dt", type=float, default=None)
    p_tr.add_argument("--m-hidden", dest="m_hidden", type=int, default=None)
    p_tr.add_argument("--init-scale", dest="init_scale", type=float, default=None)
    p_tr.add_argument("--seed", type=int, default=None)
    p_tr.add_argument("--noise", type=float, default=None, help="override measurement noise bound")
    p_tr.add_argument("--quiet", action="store_true")
    p_tr.add_argument("--out", default="ckpt.json")
    p_tr.add_argument("--curve", default="curve.csv")
    p_tr.set_defaults(func=_cmd_train)

    p_ver = sub.add_parser("verify", help="re-run all checks on a trajectory CSV")
    add_common(p_ver)
    p_ver.add_argument("--traj", required=True)
    p_ver.add_argument("--tol", type=float, default=1e-3)
    p_ver.add_argument("--report", default=None, help="also write verdict JSON here")
    p_ver.set_defaults(func=_cmd_verify)

    p_cmp = sub.add_parser("compare", help="run several controllers on one scenario")
    add_common(p_cmp)
    p_cmp.add_argument("--scenario", required=True)
    p_cmp.add_argument(
        "--controller",
        action="append",
        required=True,
        help="zero | safe | ckpt path, optionally label=value; repeatable",
    )
    p_cmp.add_argument("--projection", choices=("on", "off"), default="on")
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--dt", type=float, default=None)
    p_cmp.add_argument("--noise", type=float, default=None)
    p_cmp.add_argument("--horizon", type=float, default=None)
    p_cmp.add_argument("--gamma", type=float, default=40.0)
    p_cmp.add_argument("--train-window", dest="train_window", type=float, default=None)
    p_cmp.add_argument("--out", default="comparison.csv")
    p_cmp.set_defaults(func=_cmd_compare)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DOMAIN_ERRORS as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
