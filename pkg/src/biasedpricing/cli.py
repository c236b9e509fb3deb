"""Command-line front end.

Configuration files are JSON. A file holds either a bare environment block
or an object with any of the sections "env", "kernel", "scheme" and "grid":

    {
      "env": {"theta0": 0, "theta1": 1, "h1": 0, "h2": 1, "c1": 0, "c2": 1,
              "kernel": {"kind": "mix_dirac", "lambda": 0.5}},
      "scheme": {"kind": "quadratic", "A": 4, "B": 0}
    }

A top-level "kernel" section overrides the env's kernel. Tables are CSV
with a header row and 9 significant digits.

Exit status: 0 on success, 1 when an input or a hypothesis is rejected, 2
when two independent computations disagree.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .block_tariff import lambda_sweep
from .comparative_statics import efficiency_grid_to_csv, sweep, sweep_to_csv
from .consumer import best_response, simulate_dynamics
from .errors import ConfigError, OracleDisagreementError, PricingError
from .market import MarketEnv, env_from_config, expected_profit, expected_welfare, max_quantity
from .perception import BetaMix
from .quadratic_optimum import numeric_quadratic_search, optimal_profit_scheme, optimal_welfare_scheme
from .tariffs import PriceScheme, scheme_from_config
from .variational import VariationalProblem, residual_profile, transversality_check

__all__ = ["main", "build_parser", "parse_grid", "load_config"]

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_DISAGREEMENT = 2

ORACLE_COEF_TOL = 1e-4
ORACLE_VALUE_RTOL = 1e-7


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def parse_grid(text: str, where: str = "grid") -> list[float]:
    """'lo:hi:n' (n evenly spaced points, ends included) or a single number."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) != 3:
            raise ValueError
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"expected lo:hi:n or a number, got {text!r}", where) from None
    if n < 1:
        raise ConfigError(f"need n >= 1, got {n}", where)
    if n == 1:
        return [lo]
    return [float(x) for x in np.linspace(lo, hi, n)]


def load_config(path: str) -> dict:
    """Read a JSON config; parse errors report the line and column."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object", path)
    return doc


def _env_from_doc(doc: dict, where: str) -> MarketEnv:
    if "env" in doc:
        block = dict(doc["env"]) if isinstance(doc["env"], dict) else doc["env"]
        where = f"{where}:env"
    else:
        block = {k: v for k, v in doc.items() if k not in ("scheme", "grid", "kernel")}
    if "kernel" in doc and isinstance(block, dict):
        block["kernel"] = doc["kernel"]
    return env_from_config(block, where)


def _scheme_from_doc(doc: dict, where: str) -> PriceScheme:
    if "scheme" in doc:
        return scheme_from_config(doc["scheme"], f"{where}:scheme")
    return scheme_from_config(doc, where)


def _load_env(args) -> MarketEnv:
    if args.env is None:
        return MarketEnv.quadratic()
    return _env_from_doc(load_config(args.env), args.env)


def _load_scheme(args) -> PriceScheme:
    path = args.scheme or args.env
    if path is None:
        raise ConfigError("a scheme is required (--scheme file or a 'scheme' section in --env)", "scheme")
    return _scheme_from_doc(load_config(path), path)


def _writer(out):
    return csv.writer(out, lineterminator="\n")


# ---------------------------------------------------------------------------
# commands


def cmd_optimize(args, out) -> int:
    env = _load_env(args)
    closed = (optimal_profit_scheme if args.objective == "profit" else optimal_welfare_scheme)(env)
    rows = [closed]
    status = EXIT_OK
    if args.oracle:
        oracle = numeric_quadratic_search(env, args.objective)
        rows.append(oracle)
        close_coef = abs(oracle.A - closed.A) <= ORACLE_COEF_TOL and abs(oracle.B - closed.B) <= ORACLE_COEF_TOL
        close_value = abs(oracle.value - closed.value) <= ORACLE_VALUE_RTOL * max(1.0, abs(closed.value))
        if not (close_coef and close_value):
            status = EXIT_DISAGREEMENT
    w = _writer(out)
    w.writerow(["A", "B", "q_star", "value", "source"])
    for r in rows:
        w.writerow([_fmt(r.A), _fmt(r.B), _fmt(r.q_star), _fmt(r.value), r.source])
    if status == EXIT_DISAGREEMENT:
        print("error: oracle search disagrees with the closed form", file=sys.stderr)
    return status


def cmd_welfare(args, out) -> int:
    env = _load_env(args)
    scheme = _load_scheme(args)
    profit = expected_profit(env, scheme, method=args.method)
    welfare = expected_welfare(env, scheme, method=args.method)
    w = _writer(out)
    w.writerow(["q_star", "profit", "welfare", "surplus"])
    w.writerow([_fmt(max_quantity(env, scheme)), _fmt(profit), _fmt(welfare), _fmt(welfare - profit)])
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    env = _load_env(args)
    rows = sweep(env, parse_grid(args.a1, "--a1"), parse_grid(args.p, "--p"), seed=args.seed)
    out.write(efficiency_grid_to_csv(rows) if args.efficiency_grid else sweep_to_csv(rows))
    return EXIT_OK


def cmd_el_check(args, out) -> int:
    env = _load_env(args).with_kernel(BetaMix(args.beta))
    scheme = _load_scheme(args)
    problem = VariationalProblem(env, scheme)
    w = _writer(out)
    w.writerow(["q", "residual"])
    for q, r in residual_profile(problem, n=args.n):
        w.writerow([_fmt(q), _fmt(r)])
    gap, markup = transversality_check(problem)
    w.writerow(["gap_top", _fmt(gap)])
    w.writerow(["markup_at_top", _fmt(markup)])
    return EXIT_OK


def cmd_block_compare(args, out) -> int:
    env = _load_env(args)
    report = lambda_sweep(env, args.p1, args.p2, args.p3, args.qbar, parse_grid(args.lambda_grid, "--lambda-grid"))
    report.to_csv(out)
    return EXIT_OK


def cmd_dynamics(args, out) -> int:
    env = _load_env(args)
    scheme = _load_scheme(args)
    traj = simulate_dynamics(
        env.prefs, env.kernel, scheme, args.theta, args.q0, gain=args.gain, step=args.step, max_steps=args.max_steps
    )
    target = best_response(env.prefs, env.kernel, scheme, args.theta, q_max=env.q_cap)
    traj.to_csv(out)
    if abs(traj.terminal - target) > 1e-6 * max(1.0, target):
        print(f"error: dynamics settled at {traj.terminal:.9g}, best response is {target:.9g}", file=sys.stderr)
        return EXIT_DISAGREEMENT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biasedpricing", description="Nonlinear pricing with biased price perception.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--env", help="JSON config with the environment (and optionally other sections)")
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
        return p

    p = common(sub.add_parser("optimize", help="optimal quadratic tariff"))
    p.add_argument("--objective", choices=("profit", "welfare"), default="profit")
    p.add_argument("--oracle", action="store_true", help="also run the numerical search")
    p.set_defaults(func=cmd_optimize)

    p = common(sub.add_parser("welfare", help="profit, welfare and surplus of a tariff"))
    p.add_argument("--scheme", help="JSON file with the tariff (default: the env file's scheme section)")
    p.add_argument("--method", choices=("auto", "closed_form", "quadrature"), default="auto")
    p.set_defaults(func=cmd_welfare)

    p = common(sub.add_parser("sweep", help="shape functions over an (a1, p) grid"))
    p.add_argument("--a1", default="0:0.6:13", help="lo:hi:n")
    p.add_argument("--p", default="0:4:9", help="lo:hi:n")
    p.add_argument("--efficiency-grid", action="store_true", help="emit (a1, p, G) triplets only")
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("el-check", help="Euler-Lagrange residuals of a tariff"))
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--scheme", help="JSON file with the tariff")
    p.add_argument("--n", type=int, default=50, help="number of interior points")
    p.set_defaults(func=cmd_el_check)

    p = common(sub.add_parser("block-compare", help="flat versus two-tier consumption"))
    for name in ("--p1", "--p2", "--p3", "--qbar"):
        p.add_argument(name, type=float, required=True)
    p.add_argument("--lambda-grid", default="0:1:3", help="lo:hi:n")
    p.set_defaults(func=cmd_block_compare)

    p = common(sub.add_parser("dynamics", help="consumption adjustment path of one type"))
    p.add_argument("--scheme", help="JSON file with the tariff")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--q0", type=float, required=True)
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.set_defaults(func=cmd_dynamics)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    buffer = io.StringIO()
    try:
        status = args.func(args, buffer)
    except OracleDisagreementError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISAGREEMENT
    except PricingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    if args.out:
        Path(args.out).write_text(buffer.getvalue())
    else:
        sys.stdout.write(buffer.getvalue())
    return status


if __name__ == "__main__":
    sys.exit(main())
