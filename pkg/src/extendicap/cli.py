"""Command-line interface.

Subcommands:
    bound         capacity upper-bound sweep over an epsilon grid
    extend-check  k-(PPT-)extendibility of a POVM
    nshot         reduced n-shot bound, optionally cross-checked
    verify-coding randomized verification of the coding identities

Exit codes: 0 success, 2 validation error, 3 solver non-convergence,
4 infeasible when feasibility was the question.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import channels as chn
from . import coding
from . import extendibility as ext
from . import qlinalg as ql
from .capacity import (
    CSV_HEADER,
    CapacityQuery,
    bound_curve,
    capacity_bound,
    curve_to_csv,
)
from .errors import DimensionCapError, SolverFailure, ValidationError
from .sdpcore import SolveOptions
from .symmetry import reduced_capacity_bound

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_INFEASIBLE = 4


def _parse_grid(spec: str):
    """Either a single value or start:stop:step (stop inclusive up to fp slop)."""
    if ":" not in spec:
        return [float(spec)]
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValidationError(f"grid spec must be start:stop:step, got {spec!r}")
    start, stop, step = (float(p) for p in parts)
    if not (0.0 <= start <= stop < 1.0) or step <= 0.0:
        raise ValidationError(
            f"grid requires 0 <= start <= stop < 1 and step > 0, got {spec!r}"
        )
    out = []
    x = start
    while x <= stop + 1e-12:
        out.append(round(x, 12))
        x += step
    return out


def _load_povm(spec: str) -> ext.Povm:
    import os

    if os.path.exists(spec):
        with open(spec) as fh:
            return ext.povm_from_json(json.load(fh))
    if spec.startswith("bell_noise:"):
        d = int(spec.split(":")[1])
        return ext.bell_noise_povm(d)[0]
    raise ValidationError(f"unknown POVM {spec!r} (expected a file or bell_noise:d)")


def _solve_options(args) -> SolveOptions:
    return SolveOptions(gap_tol=args.gap_tol, feas_tol=args.feas_tol)


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_bound(args) -> int:
    channel = chn.load_channel(args.channel)
    if args.figure1:
        grid = _parse_grid(args.eps_grid) if args.eps_grid else [0.05, 0.1, 0.2]
        configs = [(1, True), (2, True)]
    else:
        grid = _parse_grid(args.eps_grid) if args.eps_grid else [args.eps]
        configs = [(k, args.ppt) for k in args.k]
    cells = bound_curve(channel, grid, configs, opts=_solve_options(args),
                        reduce_labels=args.reduce_labels)
    _emit(curve_to_csv(cells), args.out)
    bad = [c for c in cells if c.result is None or c.result.status != "optimal"]
    if bad:
        sys.stderr.write(
            json.dumps({"error": "solver", "cells": [
                {"eps": c.eps, "k": c.k,
                 "status": c.error or c.result.status} for c in bad
            ]}) + "\n"
        )
        return EXIT_SOLVER
    return EXIT_OK


def cmd_extend_check(args) -> int:
    povm = _load_povm(args.povm)
    results = {}
    worst_feasible = True
    for k in args.k:
        if args.ppt:
            feasible, info = ext.is_k_ppt_extendible(povm, k, opts=_solve_options(args))
        else:
            feasible, info = ext.is_k_extendible(povm, k, opts=_solve_options(args))
        results[k] = {
            "k": k,
            "ppt": args.ppt,
            "feasible": bool(feasible),
            "slack": float(info.slack),
        }
        worst_feasible = worst_feasible and feasible
    text = json.dumps({"povm": args.povm, "results": list(results.values())},
                      indent=2) + "\n"
    _emit(text, args.out)
    return EXIT_OK if worst_feasible else EXIT_INFEASIBLE


def cmd_nshot(args) -> int:
    channel = chn.load_channel(args.channel)
    reduced = reduced_capacity_bound(channel, args.n, args.eps, k=args.k[0],
                                     ppt=args.ppt, opts=_solve_options(args))
    payload = {
        "n": args.n,
        "k": args.k[0],
        "eps": args.eps,
        "ppt": args.ppt,
        "lambda": reduced.lambda_star,
        "bound_bits": reduced.bound_bits,
        "bits_per_shot": reduced.bound_bits / args.n,
        "status": reduced.status,
        "variables": reduced.ncoord,
    }
    code = EXIT_OK if reduced.status == "optimal" else EXIT_SOLVER
    if args.cross_check:
        power = chn.tensor_power(channel, args.n)
        direct = capacity_bound(
            CapacityQuery(channel=power, epsilon=args.eps, k=args.k[0],
                          ppt=args.ppt),
            opts=_solve_options(args),
        )
        payload["direct_lambda"] = direct.lambda_star
        payload["cross_check_diff"] = abs(direct.lambda_star - reduced.lambda_star)
        payload["cross_check_ok"] = bool(
            direct.status == "optimal" and payload["cross_check_diff"] <= 1e-5
        )
        if not payload["cross_check_ok"]:
            code = EXIT_SOLVER
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return code


def cmd_verify_coding(args) -> int:
    rng = np.random.default_rng(args.seed)
    channel = chn.load_channel(args.channel)
    d = channel.dim_in
    worst_dev = 0.0
    for _ in range(args.trials):
        m_count = int(rng.integers(2, 5))
        states = []
        for _ in range(m_count):
            a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            rho = a @ a.conj().T
            states.append(ql.Operator(ql.layout(("A", d)), rho / np.trace(rho).real))
        parts = []
        for _ in range(m_count):
            a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            parts.append(a @ a.conj().T)
        total = sum(parts)
        w, v = np.linalg.eigh(total)
        inv = (v / np.sqrt(w)) @ v.conj().T
        decoder = ext.make_povm(
            ql.layout(("B", channel.dim_out)),
            [(m, inv @ p @ inv) for m, p in enumerate(parts)],
        )
        code = coding.make_code(states, decoder)
        a = rng.normal(size=(channel.dim_out,) * 2) + 1j * rng.normal(size=(channel.dim_out,) * 2)
        sig = a @ a.conj().T
        sigma = ql.Operator(ql.layout(("B", channel.dim_out)), sig / np.trace(sig).real)
        rep = coding.verify_bound_chain(code, channel, sigma)
        worst_dev = max(worst_dev, rep.identity_channel_residual,
                        rep.identity_replace_residual)
    payload = {"trials": args.trials, "max_identity_residual": worst_dev,
               "ok": worst_dev <= 1e-10}
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return EXIT_OK if payload["ok"] else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extendicap",
        description="Extendible-measurement SDP bounds on classical capacity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--gap-tol", type=float, default=1e-8)
        p.add_argument("--feas-tol", type=float, default=1e-8)
        p.add_argument("--seed", type=int, default=7)

    p_bound = sub.add_parser("bound", help="capacity bound sweep (CSV)")
    p_bound.add_argument("--channel", required=True)
    p_bound.add_argument("--k", type=int, nargs="+", default=[1])
    p_bound.add_argument("--ppt", dest="ppt", action="store_true", default=True)
    p_bound.add_argument("--no-ppt", dest="ppt", action="store_false")
    p_bound.add_argument("--eps", type=float, default=0.1)
    p_bound.add_argument("--eps-grid", default=None, help="start:stop:step")
    p_bound.add_argument("--figure1", action="store_true",
                         help="preset: example29 with k in {1, 2}, PPT on")
    p_bound.add_argument("--reduce-labels", action="store_true",
                         help="solve with sorted-outcome variable reduction")
    common(p_bound)

    p_ext = sub.add_parser("extend-check", help="k-extendibility feasibility")
    p_ext.add_argument("--povm", required=True, help="JSON file or bell_noise:d")
    p_ext.add_argument("--k", type=int, nargs="+", default=[2])
    p_ext.add_argument("--ppt", dest="ppt", action="store_true", default=False)
    p_ext.add_argument("--no-ppt", dest="ppt", action="store_false")
    common(p_ext)

    p_nshot = sub.add_parser("nshot", help="reduced n-shot bound")
    p_nshot.add_argument("--channel", required=True)
    p_nshot.add_argument("--n", type=int, required=True)
    p_nshot.add_argument("--k", type=int, nargs="+", default=[1])
    p_nshot.add_argument("--ppt", dest="ppt", action="store_true", default=True)
    p_nshot.add_argument("--no-ppt", dest="ppt", action="store_false")
    p_nshot.add_argument("--eps", type=float, default=0.1)
    p_nshot.add_argument("--cross-check", action="store_true")
    common(p_nshot)

    p_code = sub.add_parser("verify-coding", help="coding-identity checks")
    p_code.add_argument("--channel", default="identity:2")
    p_code.add_argument("--trials", type=int, default=20)
    common(p_code)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "bound": cmd_bound,
        "extend-check": cmd_extend_check,
        "nshot": cmd_nshot,
        "verify-coding": cmd_verify_coding,
    }
    try:
        return handlers[args.command](args)
    except (ValidationError, DimensionCapError) as exc:
        sys.stderr.write(json.dumps({"error": "validation", "message": str(exc)}) + "\n")
        return EXIT_VALIDATION
    except SolverFailure as exc:
        sys.stderr.write(json.dumps({"error": "solver", "message": str(exc)}) + "\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
