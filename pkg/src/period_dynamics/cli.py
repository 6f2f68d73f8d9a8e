"""Command-line entry point.

Exit codes: 0 success (or ergodic), 2 invalid input, 3 closed orbit,
4 no generators at the requested height, 5 step budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import metadata
from pathlib import Path

from . import connectivity, dynamics, monodromy
from .fujiki import NotFujikiForm, polynomial_evaluator, recover_bbf
from .lattice import DEFAULT_HEIGHT, EPS, LatticeError, QuadraticLattice
from .period import PlaneError, dimension_report, plane_distance
from .serialize import dump_json, fmt, load_json, plane_from_dict, plane_to_dict

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CLOSED = 3
EXIT_NO_GENERATORS = 4
EXIT_BUDGET = 5


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.1.0"


class UsageError(Exception):
    pass


def _config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out") and v is not None}
    cfg["tool_version"] = tool_version()
    return cfg


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    # fixed newline so outputs are byte-identical across platforms
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _lattice(args, check: bool = True) -> QuadraticLattice:
    if not args.lattice:
        raise UsageError("--lattice is required")
    return QuadraticLattice.load(args.lattice, check=check)


def cmd_lattice_info(args) -> int:
    lat = _lattice(args)
    p, m, z = lat.signature
    rep = dimension_report(lat.rank)
    c = lat.fujiki_constant
    report = {
        "rank": lat.rank,
        "signature": [p, m],
        "determinant": lat.determinant,
        "fujiki_constant": f"{c.numerator}/{c.denominator}",
        "half_dim": lat.half_dim,
        "dimension_report": rep.to_dict(),
    }
    print(f"rank {lat.rank}")
    print(f"signature ({p}, {m})")
    print(f"determinant {lat.determinant}")
    print(f"fujiki_constant {report['fujiki_constant']}")
    for key, value in rep.to_dict().items():
        print(f"{key} {value}")
    out = _out_dir(args)
    if out is not None:
        _write(out / "lattice_info.json", dump_json({"config": _config(args), "report": report}))
    return EXIT_OK


def cmd_classify(args) -> int:
    lat = _lattice(args)
    if not args.period:
        raise UsageError("--period is required")
    plane = plane_from_dict(lat, load_json(args.period))
    verdict = dynamics.classify_point(lat, plane, args.height_bound, args.epsilon)
    print(f"{verdict.kind} ns_rank {verdict.ns_rank} ({verdict.certainty})")
    out = _out_dir(args)
    if out is not None:
        _write(out / "verdict.json", dump_json({"config": _config(args), "verdict": verdict.to_dict()}))
    return EXIT_CLOSED if verdict.kind == "closed_orbit" else EXIT_OK


def cmd_walk(args) -> int:
    lat = _lattice(args)
    if args.steps is None or args.steps < 0:
        raise UsageError("--steps must be a non-negative integer")
    if args.checkpoint_every < 1:
        raise UsageError("--checkpoint-every must be >= 1")
    if args.cover_radius <= 0:
        raise UsageError("--cover-radius must be positive")
    radius = None if args.chart_radius <= 0 else args.chart_radius
    gens = monodromy.build_generators(lat, args.generator_height)
    if args.start:
        start = plane_from_dict(lat, load_json(args.start))
    else:
        start = dynamics.sample_reference_chart(lat, 1, args.coefficient_bound, args.seed, radius)[0]
    refs = dynamics.sample_reference_chart(lat, args.references, args.coefficient_bound, args.seed + 1, radius)
    trajs = dynamics.run_walkers(lat, gens, start, args.steps, args.seed, args.walkers,
                                 args.checkpoint_every, radius)
    traj = dynamics.merge_trajectories(trajs)
    cov = dynamics.coverage(traj, refs, args.cover_radius)
    print(f"covered_fraction {fmt(cov.covered_fraction)} after {args.steps} steps "
          f"({traj.accepted} accepted moves)")
    out = _out_dir(args)
    if out is not None:
        cfg = _config(args)
        _write(out / "trajectory.csv", "# " + json.dumps(cfg, sort_keys=True) + "\n" + traj.to_csv())
        body = {"config": cfg, "coverage": cov.to_dict(), "accepted": traj.accepted,
                "generators": len(gens), "start": plane_to_dict(start)}
        _write(out / "coverage.json", dump_json(body))
    return EXIT_OK


def cmd_chain(args) -> int:
    lat = _lattice(args)
    if not args.endpoints:
        raise UsageError("--endpoints is required")
    data = load_json(args.endpoints)
    if not isinstance(data, dict) or "p1" not in data or "p2" not in data:
        raise UsageError("endpoints file needs 'p1' and 'p2'")
    p1 = plane_from_dict(lat, data["p1"])
    p2 = plane_from_dict(lat, data["p2"])
    steps = 32 if args.steps is None else args.steps
    if steps < 0:
        raise UsageError("--steps must be >= 0")
    chain = connectivity.connect(lat, p1, p2, args.ball_radius, steps, args.seed, args.height_bound, args.epsilon)
    print(f"steps {len(chain.steps)} final_distance {fmt(chain.final_distance)}"
          + ("" if chain.complete else f" incomplete: {chain.diagnostic}"))
    out = _out_dir(args)
    if out is not None:
        body = {"config": _config(args), "chain": chain.to_dict(),
                "distance": fmt(plane_distance(p1, p2))}
        _write(out / "chain.json", dump_json(body))
    return EXIT_OK if chain.complete else EXIT_BUDGET


def cmd_fujiki_recover(args) -> int:
    if args.polynomial is None:
        raise UsageError("--polynomial is required")
    expr = args.polynomial
    if expr.startswith("@"):
        expr = Path(expr[1:]).read_text()
    F = polynomial_evaluator(expr, args.rank)
    gram, c = recover_bbf(F, args.rank, args.n)
    report = {"gram": [list(r) for r in gram], "fujiki_constant": f"{c.numerator}/{c.denominator}"}
    print("gram " + json.dumps(report["gram"]))
    print(f"fujiki_constant {report['fujiki_constant']}")
    out = _out_dir(args)
    if out is not None:
        lattice = {"rank": args.rank, "gram": report["gram"], "fujiki_constant": report["fujiki_constant"],
                   "half_dim": args.n}
        _write(out / "fujiki.json", dump_json({"config": _config(args), "lattice": lattice}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="period-dynamics", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=tool_version())
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--lattice", help="lattice JSON file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--height-bound", type=int, default=DEFAULT_HEIGHT)
        p.add_argument("--epsilon", type=float, default=EPS)
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("lattice-info", help="rank, signature, determinant and dimension formulas")
    common(p, seed=False)
    p.set_defaults(func=cmd_lattice_info)

    p = sub.add_parser("classify", help="ergodic / closed-orbit verdict for a period point")
    common(p, seed=False)
    p.add_argument("--period", help="period JSON file ({'re','im'} or {'basis'})")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("walk", help="random monodromy walk and reference coverage")
    common(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--start", help="period JSON file; default: a random chart plane")
    p.add_argument("--checkpoint-every", type=int, default=dynamics.DEFAULT_CHECKPOINT)
    p.add_argument("--generator-height", type=int, default=1)
    p.add_argument("--references", type=int, default=1000)
    p.add_argument("--coefficient-bound", type=float, default=1.0)
    p.add_argument("--cover-radius", type=float, default=0.15)
    p.add_argument("--chart-radius", type=float, default=dynamics.DEFAULT_CHART_RADIUS,
                   help="<= 0 disables the chart restriction")
    p.add_argument("--walkers", type=int, default=1)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("chain", help="twistor chain between two period planes")
    common(p)
    p.add_argument("--endpoints", help="JSON file with planes 'p1' and 'p2'")
    p.add_argument("--steps", type=int, help="step budget (default 32)")
    p.add_argument("--ball-radius", type=float, default=0.5)
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("fujiki-recover", help="recover (q, c) from a Fujiki polynomial")
    p.add_argument("--polynomial", help="polynomial in v1..vN, or @file")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="half the degree")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_fujiki_recover)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except monodromy.EmptyGeneratorSet as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NO_GENERATORS
    except (UsageError, LatticeError, PlaneError, NotFujikiForm, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
