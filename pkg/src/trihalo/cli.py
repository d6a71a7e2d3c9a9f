"""Command-line front end: verify, converge, bench, dump."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import csr, harness, schemes, taylor
from .errors import TrihaloError
from .geometry import AXES, HALVES, SIDES, DEFAULT_UNKNOWNS, FaceConfig
from .schemes import SCHEMES


def _add_face_flags(sub, default_p=(4,), multi_p=False):
    if multi_p:
        sub.add_argument("--p", type=int, nargs="+", default=list(default_p), help="cells per patch axis")
    else:
        sub.add_argument("--p", type=int, default=default_p[0], help="cells per patch axis")
    sub.add_argument("--k", type=int, default=3, help="halo depth in cells")
    sub.add_argument("--u", type=int, default=DEFAULT_UNKNOWNS, help="unknowns per cell")
    sub.add_argument("--normal", choices=AXES, default="x", help="face normal axis")
    sub.add_argument("--side", choices=SIDES, default="negative", help="side holding the coarse patch")
    sub.add_argument("--segment", type=int, default=4, help="fine patch segment, 0..8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trihalo",
        description="Interpolation/restriction operators for 3:1 AMR halo exchange",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the degree-one oracle and operator consistency checks")
    v.add_argument("--schemes", nargs="+", choices=SCHEMES, default=list(SCHEMES))
    v.add_argument("--p", type=int, nargs="+", default=[1, 3, 4, 6])
    v.add_argument("--k", type=int, nargs="+", default=[1, 3])
    v.add_argument("--u", type=int, default=4)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-11)
    v.add_argument("--matrix-tol", type=float, default=1e-13)
    v.add_argument("--json", default=None, help="write per-case results as JSON")

    c = sub.add_parser("converge", help="error vs h study against the analytic field")
    c.add_argument("--schemes", nargs="+", choices=SCHEMES, required=True)
    c.add_argument("--role", choices=("interpolate", "restrict"), default="interpolate")
    _add_face_flags(c)
    group = c.add_mutually_exclusive_group(required=True)
    group.add_argument("--h-list", type=float, nargs="+", help="explicit spacings")
    group.add_argument("--h-geom", type=float, nargs=3, metavar=("H_MAX", "H_MIN", "COUNT"),
                       help="geometric ladder from H_MAX down to H_MIN")
    c.add_argument("--plateau-threshold", type=float, default=harness.PLATEAU_THRESHOLD)
    c.add_argument("--output", default="-")
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("bench", help="time repeated applications without reallocation")
    b.add_argument("--schemes", nargs="+", choices=SCHEMES, required=True)
    b.add_argument("--role", choices=("interpolate", "restrict"), default="interpolate")
    _add_face_flags(b, multi_p=True)
    b.add_argument("--half", choices=HALVES, default="inner")
    b.add_argument("--reps", type=int, default=100)
    b.add_argument("--include-construction", action="store_true",
                   help="also time operator construction (cache bypassed)")
    b.add_argument("--output", default="-")
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--seed", type=int, default=0)

    d = sub.add_parser("dump", help="write one operator in the textual triplet format")
    d.add_argument("--scheme", choices=[s for s in SCHEMES if s != "tensor_linear"], required=True)
    d.add_argument("--role", choices=("interpolate", "restrict"), default="interpolate")
    d.add_argument("--p", type=int, default=4)
    d.add_argument("--k", type=int, default=3)
    sel = d.add_mutually_exclusive_group()
    sel.add_argument("--segment", type=int, default=None)
    sel.add_argument("--half", choices=HALVES, default=None)
    d.add_argument("--output", default="-")

    return parser


def _out_stream(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _cmd_verify(args) -> int:
    threads = int(os.environ.get("TRIHALO_THREADS", "1"))
    cache = taylor.OperatorCache()
    summary = harness.run_unit_oracle(
        which_schemes=args.schemes,
        ps=tuple(args.p),
        ks=tuple(args.k),
        tol=args.tol,
        matrix_tol=args.matrix_tol,
        u=args.u,
        seed=args.seed,
        cache=cache,
        threads=threads,
    )
    consistency = harness.run_consistency_suite(
        which_schemes=[s for s in args.schemes if s != "tensor_linear"],
        ps=tuple(args.p),
        ks=tuple(args.k),
        u=args.u,
        seed=args.seed,
        cache=cache,
    )
    print(summary.format_table())
    bad = [c for c in consistency if c.status == "fail"]
    ran = [c for c in consistency if c.status != "skipped"]
    print(f"consistency checks: {len(ran) - len(bad)} passed, {len(bad)} failed, "
          f"{len(consistency) - len(ran)} skipped")
    for c in bad:
        print(f"FAIL {c.scheme} {c.role} p={c.p} k={c.k} {c.check}: {c.value:.3e} {c.detail}")
    if args.json:
        import json

        payload = {
            "oracle": [vars(c) for c in summary.cases],
            "consistency": [vars(c) for c in consistency],
        }
        with open(args.json, "w", encoding="utf-8") as fp:
            json.dump(payload, fp, indent=2)
    return 0 if summary.all_pass and not bad else 1


def _cmd_converge(args) -> int:
    if args.h_geom is not None:
        h_max, h_min, count = args.h_geom
        h_list = np.geomspace(h_max, h_min, int(count)).tolist()
    else:
        h_list = args.h_list
    cfg = FaceConfig(args.normal, args.side, args.segment, args.p, args.k, args.u)
    cache = taylor.OperatorCache()
    reports = [
        harness.run_convergence(scheme, args.role, cfg, h_list,
                                plateau_threshold=args.plateau_threshold, cache=cache)
        for scheme in args.schemes
    ]
    fp, close = _out_stream(args.output)
    try:
        if args.format == "csv":
            harness.write_convergence_csv(reports, fp)
        else:
            harness.write_convergence_json(reports, fp)
    finally:
        if close:
            fp.close()
    for rep in reports:
        print(
            f"# {rep.scheme} {rep.role}: fitted order max-norm {rep.fitted_order_max:.3f}, "
            f"l2-norm {rep.fitted_order_l2:.3f}"
            + ("" if rep.fit_reliable else " (unreliable: fewer than 3 points above threshold)"),
            file=sys.stderr,
        )
    return 0


def _cmd_bench(args) -> int:
    cache = taylor.OperatorCache()
    reports = []
    for scheme in args.schemes:
        for p in args.p:
            cfg = FaceConfig(args.normal, args.side, args.segment, p, args.k, args.u)
            reports.append(harness.run_bench(scheme, args.role, cfg, repetitions=args.reps,
                                             half=args.half, cache=cache, seed=args.seed))
            if args.include_construction:
                reports.append(harness.run_bench(scheme, args.role, cfg, repetitions=args.reps,
                                                 include_construction=True, cache=cache))
    fp, close = _out_stream(args.output)
    try:
        if args.format == "csv":
            harness.write_bench_csv(reports, fp)
        else:
            harness.write_bench_json(reports, fp)
    finally:
        if close:
            fp.close()
    return 0


def _cmd_dump(args) -> int:
    op = schemes.build_reference_operator(
        args.scheme, args.role, args.p, args.k,
        segment=args.segment, half=args.half,
    )
    fp, close = _out_stream(args.output)
    try:
        csr.dump_operator(op, fp)
    finally:
        if close:
            fp.close()
    return 0


_COMMANDS = {
    "verify": _cmd_verify,
    "converge": _cmd_converge,
    "bench": _cmd_bench,
    "dump": _cmd_dump,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except TrihaloError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
