"""Command line front end.

    erlangcev verify   --config cfg.json
    erlangcev solve    --config cfg.json --grid 200 --out psi.csv
    erlangcev value    --config cfg.json --t 0 --x 2 --s 1 --phase 1
    erlangcev strategy --config cfg.json --t 1 --s 1
    erlangcev simulate --config cfg.json --paths 100000 --dt 1e-3 --seed 7
    erlangcev sweep    --config cfg.json --kind value --var t --start 0 --stop 2 --points 41

Exit status: 0 on success, 2 when no verification condition holds, 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import optimal_amount, solve, validate, verify_conditions
from .model import ModelConfig, load_config
from .simulate import PathState, estimate_utility, optimal_strategy, zero_strategy

EXIT_OK, EXIT_ERROR, EXIT_CONDITIONS = 0, 1, 2


def _config(args) -> ModelConfig:
    doc = load_config(args.config).to_dict()
    for item in args.set or []:
        key, _, raw = item.partition("=")
        if key == "lambdas":
            doc[key] = [float(v) for v in raw.split(",")]
        elif key in ("mu", "r", "sigma", "beta", "c", "m", "T"):
            doc[key] = float(raw)
        else:
            raise SystemExit(f"--set supports model scalars and lambdas, not {key!r}")
    return ModelConfig.from_dict(doc)


def _writer(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _emit(path, header, rows):
    fh, close = _writer(path)
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    finally:
        if close:
            fh.close()


def cmd_verify(args) -> int:
    cfg = _config(args)
    print(validate(cfg.params, cfg.claim, cfg.phases))
    report = verify_conditions(cfg.params)
    print(report)
    return EXIT_OK if report.holds else EXIT_CONDITIONS


def solve_grid(cfg: ModelConfig, points: int, n_steps: int = 2000):
    """``(t, psi_1..psi_n)`` rows on a uniform grid of ``points`` intervals."""
    sol = solve(cfg.params, cfg.phases, cfg.claim, n_steps=max(n_steps, points))
    ts = np.linspace(0.0, cfg.params.T, points + 1)
    return [[t, *sol.psi_vector(float(t))] for t in ts]


def cmd_solve(args) -> int:
    cfg = _config(args)
    rows = solve_grid(cfg, args.grid, args.steps)
    _emit(args.out, ["t"] + [f"psi_{i}" for i in range(1, cfg.phases.n + 1)], rows)
    return EXIT_OK


def cmd_value(args) -> int:
    cfg = _config(args)
    sol = solve(cfg.params, cfg.phases, cfg.claim, n_steps=args.steps)
    print(repr(sol.value(args.t, args.x, args.s, args.phase)))
    return EXIT_OK


def cmd_strategy(args) -> int:
    cfg = _config(args)
    print(repr(optimal_amount(cfg.params, args.t, args.s)))
    return EXIT_OK


def _strategy_from(name: str, params):
    if name == "optimal":
        return optimal_strategy(params)
    if name == "zero":
        return zero_strategy()
    if name.startswith("scaled:"):
        k = float(name.split(":", 1)[1])
        return optimal_strategy(params).scaled(k)
    raise SystemExit(f"unknown strategy {name!r}; use optimal, zero or scaled:K")


def cmd_simulate(args) -> int:
    cfg = _config(args)
    strat = _strategy_from(args.strategy, cfg.params)
    init = PathState(args.t, args.x, args.s, args.phase)
    res = estimate_utility(cfg.params, cfg.phases, cfg.claim, strat, init, args.dt, args.paths, args.seed)
    sol = solve(cfg.params, cfg.phases, cfg.claim)
    analytic = sol.value(args.t, args.x, args.s, args.phase)
    summary = res.summary()
    summary["analytic_value"] = analytic
    summary["z_score"] = (res.mean - analytic) / res.se if res.se > 0 else float("nan")
    for k, v in summary.items():
        print(f"{k}: {v}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(summary))
            w.writerow([v if isinstance(v, str) else repr(v) for v in summary.values()])
    if args.per_path:
        res.write_csv(args.per_path, per_path=True)
    return EXIT_OK


def sweep_rows(cfg: ModelConfig, kind: str, var: str, start: float, stop: float, points: int,
               t: float = 1.0, x: float = 2.0, s: float = 1.0, s_points: int = 0,
               s_start: float = 0.5, s_stop: float = 3.0, n_steps: int = 2000):
    """Header and rows of a sensitivity sweep.

    ``kind`` is ``strategy`` or ``value``; ``var`` is the swept coordinate
    (``t``, ``s`` or ``x``). A strategy sweep over ``t`` with ``s_points > 0``
    becomes the ``(t, s, a*)`` surface.
    """
    p = cfg.params
    grid = np.linspace(start, stop, points)
    if var == "t" and (grid.min() < 0 or grid.max() > p.T):
        raise ValueError(f"t range must lie in [0, {p.T}]")
    if var == "s" and grid.min() <= 0:
        raise ValueError("s range must be positive")
    point = {"t": t, "x": x, "s": s}

    if kind == "strategy":
        if var == "x":
            raise ValueError("the optimal amount does not depend on x; sweep t or s")
        if var == "t" and s_points:
            s_grid = np.linspace(s_start, s_stop, s_points)
            rows = [[tt, ss, optimal_amount(p, tt, ss)] for tt in grid for ss in s_grid]
            return ["t", "s", "a_star"], rows
        rows = []
        for v in grid:
            args = dict(point, **{var: v})
            rows.append([v, optimal_amount(p, args["t"], args["s"])])
        return [var, "a_star"], rows

    if kind == "value":
        sol = solve(p, cfg.phases, cfg.claim, n_steps=n_steps)
        n = cfg.phases.n
        rows = []
        for v in grid:
            args = dict(point, **{var: v})
            rows.append([v] + [sol.value(args["t"], args["x"], args["s"], i) for i in range(1, n + 1)])
        return [var] + [f"V_{i}" for i in range(1, n + 1)], rows
    raise ValueError(f"unknown sweep kind {kind!r}")


def cmd_sweep(args) -> int:
    cfg = _config(args)
    header, rows = sweep_rows(cfg, args.kind, args.var, args.start, args.stop, args.points,
                              t=args.t, x=args.x, s=args.s, s_points=args.s_points,
                              s_start=args.s_start, s_stop=args.s_stop, n_steps=args.steps)
    _emit(args.out, header, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erlangcev", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON model configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry, e.g. --set r=0 or --set lambdas=1,2")
        p.add_argument("--steps", type=int, default=2000, help="time steps of the Picard grid")

    p = sub.add_parser("verify", help="check assumptions and verification conditions")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve", help="write psi on a uniform grid as CSV")
    common(p)
    p.add_argument("--grid", type=int, default=200, help="number of grid intervals")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("value", help="evaluate the value function")
    common(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--x", type=float, default=2.0)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--phase", type=int, default=1)
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("strategy", help="evaluate the optimal amount invested")
    common(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--s", type=float, default=1.0)
    p.set_defaults(func=cmd_strategy)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of expected utility")
    common(p)
    p.add_argument("--strategy", default="optimal", help="optimal, zero or scaled:K")
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--x", type=float, default=2.0)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--phase", type=int, default=1)
    p.add_argument("--out", help="aggregate CSV")
    p.add_argument("--per-path", help="per-path CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="sensitivity sweep as CSV")
    common(p)
    p.add_argument("--kind", choices=["strategy", "value"], required=True)
    p.add_argument("--var", choices=["t", "s", "x"], required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--t", type=float, default=1.0, help="fixed t when not swept")
    p.add_argument("--x", type=float, default=2.0, help="fixed x when not swept")
    p.add_argument("--s", type=float, default=1.0, help="fixed s when not swept")
    p.add_argument("--s-points", type=int, default=0, help="with --var t: emit the (t, s) surface")
    p.add_argument("--s-start", type=float, default=0.5)
    p.add_argument("--s-stop", type=float, default=3.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
