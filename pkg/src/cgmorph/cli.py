"""Command line entry point: ``cgmorph list | describe | run | sweep``."""

from __future__ import annotations

import argparse
import json
import sys

from . import catalog
from .errors import GeometryError
from .scenario import SWEEP_AXES, ConfigError, dumps, load, run, sweep, sweep_csv


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _overrides(args) -> dict:
    return {"samples": args.samples, "seed": args.seed, "tol": args.tol}


def cmd_list(args) -> int:
    for e in catalog.catalog():
        print(f"{e.id:28s} {e.description}")
    print()
    print("charts: " + ", ".join(sorted(catalog.CHARTS)))
    return 0


def cmd_describe(args) -> int:
    try:
        e = catalog.entry(args.entry)
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    phi = e.make()
    info = {
        "id": e.id,
        "description": e.description,
        "defaults": e.defaults,
        "domain": {"chart": phi.domain.name, "dim": phi.domain.dim, "bounds": [list(b) for b in phi.domain.bounds]},
        "codomain": {"chart": phi.codomain.name, "dim": phi.codomain.dim},
        "declared_flags": e.declared(),
    }
    if args.self_test:
        info["self_test"] = catalog.self_test(e.id)
    print(json.dumps(info, indent=2, sort_keys=True, default=str))
    return 0


def cmd_run(args) -> int:
    try:
        sc = load(args.file, _overrides(args))
    except ConfigError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return 2
    try:
        report, code = run(sc, stable=args.stable)
    except GeometryError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return 2
    _write(dumps(report), args.out)
    print(f"{sc.name}: {report['aggregate']} (exit {code})", file=sys.stderr)
    return code


def cmd_sweep(args) -> int:
    try:
        sc = load(args.file, _overrides(args))
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
        if not grid:
            raise ConfigError("empty grid", "--grid")
        rows = sweep(sc, args.axis, grid)
    except ValueError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return 2
    _write(sweep_csv(rows), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgmorph", description="Verify lifted harmonic morphisms on tangent bundles.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list catalog maps and charts").set_defaults(func=cmd_list)

    p = sub.add_parser("describe", help="show a catalog entry")
    p.add_argument("entry")
    p.add_argument("--self-test", action="store_true", help="measure the declared flags")
    p.set_defaults(func=cmd_describe)

    def common(p):
        p.add_argument("file", help="scenario JSON file")
        p.add_argument("--samples", type=int, help="override the sample count")
        p.add_argument("--seed", type=int, help="override the RNG seed")
        p.add_argument("--tol", type=float, help="override the identity tolerance")
        p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("run", help="run a scenario and write a JSON report")
    common(p)
    p.add_argument("--stable", action="store_true", help="omit the runtime so reports are byte-identical")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="tabulate deviation along a parameter axis")
    common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--grid", required=True, help="comma separated values")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
