"""Command-line interface.

Exit status: 0 success, 1 the solver neither closed its bracket nor found a
certified singular perturbation (or a reproduce check failed), 2 input
error.  Errors are written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from .core import PolysingError
from .documents import (
    DocumentError,
    PolynomialDocument,
    load_polynomial,
    load_report,
    report_from_result,
    save_report,
    write_trace,
)
from .fixtures import FIXTURES
from .flow import FlowOptions
from .kernel import kernel_residual, solve_kernel_distance
from .outer import SolverConfig, solve_distance, verify_singularity
from .structures import FixedIndices, Palindromic, structure_from_descriptor

__all__ = ["main", "run_cli", "build_parser"]


class InputError(PolysingError, ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _add_solver_flags(p):
    p.add_argument("--input", required=True, help="polynomial document (JSON)")
    p.add_argument("--structure", help="structure name, overrides the document")
    p.add_argument("--fixed", help="comma-separated coefficient indices kept fixed")
    p.add_argument("--tol1", type=float, help="singularity threshold (default d*1e-6)")
    p.add_argument("--tol2", type=float, default=1e-7, help="bracket width (default 1e-7)")
    p.add_argument("--max-outer", type=int, default=20, help="outer iterations (default 20)")
    p.add_argument("--max-inner", type=int, default=FlowOptions.max_steps,
                   help="inner steps per outer iteration")
    p.add_argument("--rho", type=float, help="sample point radius")
    p.add_argument("--points", type=int, help="number of sample points (default dn+1)")
    p.add_argument("--scheme", choices=("roots", "chebyshev"), default="roots")
    p.add_argument("--trace", help="write the outer trace as CSV")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    p = _Parser(prog="polysing", description="Distance to singular matrix polynomials.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_solver_flags(sub.add_parser("distance", help="nearest singular polynomial"))
    k = sub.add_parser("kernel-distance", help="nearest polynomial with a common kernel")
    _add_solver_flags(k)
    k.add_argument("--side", choices=("right", "left"), default="right")
    v = sub.add_parser("verify", help="re-check a report against its polynomial")
    v.add_argument("--input", required=True, help="polynomial document")
    v.add_argument("--report", required=True, help="report document")
    v.add_argument("--points", type=int, help="number of check points")
    v.add_argument("--seed", type=int, default=0)
    r = sub.add_parser("reproduce", help="run the embedded reference problems")
    r.add_argument("--only", action="append", help="fixture name (repeatable)")
    r.add_argument("--output", help="write a JSON summary here")
    r.add_argument("--export", help="write fixture documents to this directory")
    r.add_argument("--seed", type=int, default=0)
    return p


def _structure(args, doc):
    desc = args.structure if args.structure is not None else doc.structure
    try:
        S = structure_from_descriptor(desc, doc.degree)
        if args.fixed:
            if isinstance(S, (FixedIndices, Palindromic)):
                raise ValueError(f"--fixed cannot be combined with {type(S).__name__}")
            idx = frozenset(int(x) for x in args.fixed.split(",") if x.strip())
            if max(idx, default=-1) > doc.degree:
                raise ValueError(f"fixed index exceeds degree {doc.degree}")
            if len(idx) == doc.degree + 1:
                raise ValueError("at least one coefficient must be free")
            S = FixedIndices(idx, S)
    except (ValueError, TypeError) as exc:
        raise InputError(f"structure: {exc}") from None
    return S


def _config(args):
    try:
        return SolverConfig(tol1=args.tol1, tol2=args.tol2, k_max=args.max_outer,
                            rho=args.rho, n_points=args.points, scheme=args.scheme,
                            seed=args.seed, flow=FlowOptions(max_steps=args.max_inner))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _config_echo(cfg: SolverConfig, S, d):
    return {"tol1": cfg.resolved_tol1(d), "tol2": cfg.tol2, "k_max": cfg.k_max,
            "rho": cfg.rho, "n_points": cfg.n_points, "scheme": cfg.scheme,
            "seed": cfg.seed, "flow": dataclasses.asdict(cfg.flow),
            "structure": S.describe()}


def _emit(report, args, out):
    text = report.dumps()
    if args.output:
        save_report(args.output, report)
        summary = {"eps_star": report.eps_star, "certified": report.certified,
                   "converged": report.converged, "output": args.output}
        out.write(json.dumps(summary) + "\n")
    else:
        out.write(text)


def _solve(args, out, err):
    P, _, doc = load_polynomial(args.input)
    S = _structure(args, doc)
    cfg = _config(args)
    if args.points is not None and args.points < P.degree * P.size + 1:
        raise InputError(f"--points must be at least d*n+1 = {P.degree * P.size + 1}")
    t0 = time.perf_counter()
    if args.command == "distance":
        res = solve_distance(P, S, cfg)
    else:
        res = solve_kernel_distance(P, S, args.side, cfg)
    elapsed = time.perf_counter() - t0
    report = report_from_result(res, _config_echo(cfg, S, P.degree), timing=elapsed)
    if args.trace:
        write_trace(res.outer_trace, args.trace)
    _emit(report, args, out)
    if not (res.converged or res.certified):
        err.write(json.dumps({"error": "convergence",
                              "message": "bracket not closed and no certified perturbation",
                              "eps_star": res.eps_star}) + "\n")
        return 1
    return 0


def _verify(args, out, err):
    P, _, _ = load_polynomial(args.input)
    rep = load_report(args.report)
    if rep.delta.shape != P.coeffs.shape:
        raise InputError("report and polynomial shapes differ")
    delta = rep.delta_stack()
    tol1 = rep.config.get("tol1") or P.degree * 1e-6
    if rep.mode == "kernel":
        resid = kernel_residual(P, delta, rep.eps_star, rep.kernel_vector, rep.side or "right")
    else:
        resid = verify_singularity(P, delta, rep.eps_star, args.points, args.seed,
                                   rep.config.get("rho"))
    ok = resid <= 10 * tol1
    out.write(json.dumps({"mode": rep.mode, "eps_star": rep.eps_star, "residual": resid,
                          "threshold": 10 * tol1, "ok": ok}) + "\n")
    return 0 if ok else 1


def _reproduce(args, out, err):
    names = args.only or list(FIXTURES)
    unknown = [n for n in names if n not in FIXTURES]
    if unknown:
        raise InputError(f"unknown fixture(s): {', '.join(unknown)}")
    if args.export:
        d = Path(args.export)
        d.mkdir(parents=True, exist_ok=True)
        for n in names:
            f = FIXTURES[n]
            doc = PolynomialDocument.from_polynomial(
                f.polynomial, f.structure,
                {"name": f.name, "source": "embedded fixture", "mode": f.mode,
                 "expected": repr(f.expected), "tol": repr(f.tol)})
            (d / f"{n}.json").write_text(doc.dumps())
    rows = []
    out.write(f"{'fixture':<18} {'mode':<11} {'expected':>12} {'eps_star':>12} "
              f"{'abs diff':>10} {'tol':>7}  result\n")
    for n in names:
        f = FIXTURES[n]
        cfg = dataclasses.replace(f.config, seed=args.seed)
        if f.mode == "kernel":
            res = solve_kernel_distance(f.polynomial, f.structure, "right", cfg)
        else:
            res = solve_distance(f.polynomial, f.structure, cfg)
        ok = f.check(res.eps_star, res.certified)
        diff = abs(res.eps_star - f.expected)
        out.write(f"{n:<18} {f.mode:<11} {f.expected:>12.10g} {res.eps_star:>12.10g} "
                  f"{diff:>10.3e} {f.tol:>7.0e}  {'PASS' if ok else 'FAIL'}\n")
        rows.append({"fixture": n, "mode": f.mode, "expected": f.expected, "tol": f.tol,
                     "eps_star": res.eps_star, "certified": res.certified,
                     "iterations": res.iterations, "pass": ok})
    if args.output:
        Path(args.output).write_text(json.dumps({"seed": args.seed, "results": rows},
                                                indent=1) + "\n")
    return 0 if all(r["pass"] for r in rows) else 1


def run_cli(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.command in ("distance", "kernel-distance"):
            return _solve(args, out, err)
        if args.command == "verify":
            return _verify(args, out, err)
        return _reproduce(args, out, err)
    except (InputError, DocumentError) as exc:
        err.write(json.dumps({"error": "input", "type": type(exc).__name__,
                              "message": str(exc)}) + "\n")
        return 2
    except PolysingError as exc:
        err.write(json.dumps({"error": "solver", "type": type(exc).__name__,
                              "message": str(exc)}) + "\n")
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
