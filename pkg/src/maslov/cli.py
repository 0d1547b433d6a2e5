"""Command-line front end.

Subcommands: ``run`` (single index computation with a report), ``trace``
(per-step CSV of det X and the branch values, for plotting), ``sweep``
(index over a grid of spectral parameters, CSV), and ``verify`` (the
oracle/invariant suite). Options may come from flags or from a JSON config
file; flags win. Exit codes: 0 success, 1 usage error, 2 classified
numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from ._backend import BACKEND_NAME
from .errors import MaslovError
from .examples import example1_problem, example2_problem
from .integrate import IntegratorConfig
from .problem import Problem, load_tabulated
from .tracker import Evolution, MaslovResult, maslov_index, sweep
from .verification import check_names, run_checks

USAGE_ERROR = 1
NUMERICAL_ERROR = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; keep 2 for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _add_problem_flags(p: _Parser):
    p.add_argument("--problem", choices=["example1", "example2"], help="built-in problem")
    p.add_argument("--potential-csv", help="tabulated potential CSV (header x,v11,v12,...)")
    p.add_argument("--c", type=float, help="coupling parameter of example2")
    p.add_argument("--lambda", dest="lam", type=float, help="spectral parameter")


def _add_integrator_flags(p: _Parser):
    p.add_argument("--domain-half-width", type=float, help="truncation half-width L")
    p.add_argument("--step", type=float, help="base step size h")
    p.add_argument("--method", choices=["fixed", "adaptive"], help="stepper (default fixed)")
    p.add_argument("--tol", type=float, help="adaptive local error tolerance")


def _build_parser() -> _Parser:
    top = _Parser(prog="maslov", description="Maslov index from Riccati singularities")
    sub = top.add_subparsers(dest="command", required=True)

    for name, desc in [
        ("run", "compute one Maslov index and print a report"),
        ("trace", "CSV of x, det X, branch values along the integration"),
        ("sweep", "CSV of Maslov indices over a lambda grid"),
    ]:
        cmd = sub.add_parser(name, description=desc)
        _add_problem_flags(cmd)
        _add_integrator_flags(cmd)
        cmd.add_argument("--config", help="JSON config file; flags override its values")
        cmd.add_argument("--out", help="output path (default stdout)")
        if name == "sweep":
            cmd.add_argument("--lambda-from", dest="lambda_from", type=float)
            cmd.add_argument("--lambda-to", dest="lambda_to", type=float)
            cmd.add_argument("--lambda-step", dest="lambda_step", type=float)

    ver = sub.add_parser("verify", description="run the oracle and invariant suite")
    ver.add_argument("--list", action="store_true", help="list checks without running")
    ver.add_argument("--only", action="append", help="run only the named check (repeatable)")
    _add_integrator_flags(ver)
    ver.add_argument("--config", help="JSON config file; flags override its values")
    return top


def _apply_config_file(args: argparse.Namespace) -> argparse.Namespace:
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config {path}: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR) from None
    mapping = {
        "problem": "problem",
        "potential_csv": "potential_csv",
        "c": "c",
        "lambda": "lam",
        "lambda_from": "lambda_from",
        "lambda_to": "lambda_to",
        "lambda_step": "lambda_step",
        "domain_half_width": "domain_half_width",
        "step": "step",
        "method": "method",
        "tol": "tol",
        "out": "out",
    }
    for key, value in data.items():
        dest = mapping.get(key)
        if dest is None:
            print(f"error: unknown config key '{key}' in {path}", file=sys.stderr)
            raise SystemExit(USAGE_ERROR)
        if not hasattr(args, dest) or getattr(args, dest) is None:
            setattr(args, dest, value)
    return args


def _build_problem(args) -> tuple[Problem, str]:
    sources = [s for s in (args.problem, args.potential_csv) if s]
    if len(sources) != 1:
        print("error: exactly one of --problem or --potential-csv is required", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    if args.potential_csv:
        return load_tabulated(args.potential_csv).as_problem(), f"table:{args.potential_csv}"
    if args.problem == "example1":
        return example1_problem(), "example1"
    if args.c is None:
        print("error: example2 requires --c", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    return example2_problem(args.c), f"example2(c={args.c:g})"


def _build_config(args) -> IntegratorConfig:
    return IntegratorConfig().with_overrides(
        half_width=getattr(args, "domain_half_width", None),
        h=getattr(args, "step", None),
        method=getattr(args, "method", None),
        tol=getattr(args, "tol", None),
    )


def _require_lambda(args) -> float:
    if args.lam is None:
        print("error: --lambda is required", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    return float(args.lam)


def _open_out(args):
    if getattr(args, "out", None):
        return open(args.out, "w", encoding="utf-8", newline="\n")
    return sys.stdout


def _fmt(v: float) -> str:
    return repr(float(v))


def _result_report(label: str, lam: float, r: MaslovResult) -> str:
    lines = [
        f"problem: {label}",
        f"lambda: {lam:g}",
        f"backend: {r.diagnostics.backend}",
        f"Maslov index: {r.index}",
        f"crossings ({len(r.crossings)}):",
    ]
    for c in r.crossings:
        limits = ", ".join(
            f"{'+inf' if left > 0 else '-inf'} -> {'+inf' if right > 0 else '-inf'}"
            for left, right in zip(c.left_limits, c.right_limits)
        )
        lines.append(
            f"  x0 = {c.x0:+.9f}   k = {c.k}   signature = {c.signature:+d}   mu: {limits}"
        )
    d = r.diagnostics
    lines += [
        "diagnostics:",
        f"  max Lagrangian residual: {d.lagrangian_residual_max:.3e}",
        f"  endpoint mismatch vs asymptotic frame: {d.endpoint_mismatch:.3e}",
        f"  transverse to vertical plane at both ends: {'yes' if d.transverse_to_vertical else 'NO'}",
        f"  transverse to stable plane at +infinity: {'yes' if d.transverse_to_stable else 'NO'}",
        f"  reference-plane correction verified zero: {'yes' if d.hormander_zero_verified else 'NO'}",
        f"  potential tail gap at -L, +L: {d.tail_mismatch[0]:.3e}, {d.tail_mismatch[1]:.3e}",
    ]
    for w in d.warnings:
        lines.append(f"  warning: {w}")
    return "\n".join(lines)


def _result_json(lam: float, r: MaslovResult) -> dict:
    d = r.diagnostics
    return {
        "lambda": lam,
        "index": r.index,
        "crossings": [
            {
                "x0": c.x0,
                "k": c.k,
                "signature": c.signature,
                "branch_signs": list(c.branch_signs),
                "left_limits": list(c.left_limits),
                "right_limits": list(c.right_limits),
                "pole_constants": list(c.pole_constants),
            }
            for c in r.crossings
        ],
        "diagnostics": {
            "lagrangian_residual_max": d.lagrangian_residual_max,
            "endpoint_mismatch": d.endpoint_mismatch,
            "transverse_to_vertical": d.transverse_to_vertical,
            "transverse_to_stable": d.transverse_to_stable,
            "hormander_zero_verified": d.hormander_zero_verified,
            "tail_mismatch": list(d.tail_mismatch),
            "backend": d.backend,
            "accepted_steps": d.accepted_steps,
            "warnings": list(d.warnings),
        },
    }


def cmd_run(args) -> int:
    p, label = _build_problem(args)
    lam = _require_lambda(args)
    cfg = _build_config(args)
    result = maslov_index(p, lam, cfg)
    print(_result_report(label, lam, result))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(_result_json(lam, result), fh, indent=2)
            fh.write("\n")
    return 0


def write_trace_csv(rec, n: int, out) -> None:
    """Per-step trace rows; branch values at guarded (singular) points are
    left empty so plotting tools show gaps at the poles."""
    cols = ["x", "det_x"] + [f"mu_{j + 1}" for j in range(n)] + [f"nu_{j + 1}" for j in range(n)]
    out.write(",".join(cols) + "\n")
    for i in range(rec.n_steps + 1):
        row = [_fmt(rec.xs[i]), _fmt(rec.det[i])]
        row += ["" if not np.isfinite(v) else _fmt(v) for v in rec.mu[i]]
        row += [_fmt(v) for v in rec.nu[i]]
        out.write(",".join(row) + "\n")


def cmd_trace(args) -> int:
    p, _ = _build_problem(args)
    lam = _require_lambda(args)
    cfg = _build_config(args)
    evo = Evolution.run(p, lam, cfg)
    out = _open_out(args)
    try:
        write_trace_csv(evo.record, p.n, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _sweep_lambdas(args) -> list[float]:
    if args.lam is not None:
        return [float(args.lam)]
    if args.lambda_from is None or args.lambda_to is None or args.lambda_step is None:
        print(
            "error: sweep needs --lambda or all of --lambda-from/--lambda-to/--lambda-step",
            file=sys.stderr,
        )
        raise SystemExit(USAGE_ERROR)
    if args.lambda_step <= 0:
        print("error: --lambda-step must be positive", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    count = int(np.floor((args.lambda_to - args.lambda_from) / args.lambda_step + 1e-12)) + 1
    if count < 1:
        print("error: empty lambda grid", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    return [args.lambda_from + i * args.lambda_step for i in range(count)]


def cmd_sweep(args) -> int:
    p, _ = _build_problem(args)
    cfg = _build_config(args)
    entries = sweep(p, _sweep_lambdas(args), cfg)
    out = _open_out(args)
    try:
        out.write("lambda,maslov_index,crossing_count,status\n")
        for e in entries:
            if e.ok:
                out.write(f"{_fmt(e.lam)},{e.result.index},{len(e.result.crossings)},ok\n")
            else:
                out.write(f"{_fmt(e.lam)},,,{e.error}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_verify(args) -> int:
    if args.list:
        for name in check_names():
            print(name)
        return 0
    if args.only:
        unknown = set(args.only) - set(check_names())
        if unknown:
            print(f"error: unknown checks {sorted(unknown)}", file=sys.stderr)
            raise SystemExit(USAGE_ERROR)
    cfg = _build_config(args)
    results = run_checks(cfg, names=args.only)
    failed = 0
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
        failed += 0 if r.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else NUMERICAL_ERROR


def _setup_logging():
    level = os.environ.get("MASLOV_LOG", "").strip().lower()
    mapping = {"debug": logging.DEBUG, "info": logging.INFO, "quiet": logging.CRITICAL + 10}
    logging.basicConfig(
        level=mapping.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv=None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    args = _apply_config_file(args)
    handlers = {"run": cmd_run, "trace": cmd_trace, "sweep": cmd_sweep, "verify": cmd_verify}
    try:
        return handlers[args.command](args)
    except MaslovError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
