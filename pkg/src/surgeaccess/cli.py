"""Command-line interface.

Subcommands: validate a bundle, run a scenario, generate a synthetic
fixture, and compare two result directories. Exit codes separate the
failure families: 0 success, 2 usage (argparse), 3 validation failure,
4 runtime/domain failure, 5 file I/O failure. Every config value has a
matching flag; flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .errors import SurgeAccessError, ValidationError
from .fragility import default_table
from .network import HORIZONS
from .scenario_io import (
    BundlePaths,
    SyntheticFixtureSpec,
    generate_fixture,
    load_bundle,
    override_config,
    read_results,
    write_results,
)
from .simulate import run_scenario

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4
EXIT_IO = 5


def _bundle_paths(args: argparse.Namespace) -> BundlePaths:
    paths = BundlePaths.in_dir(args.data)
    if getattr(args, "config", None):
        paths = BundlePaths(
            network=paths.network,
            bridges=paths.bridges,
            surge=paths.surge,
            supplies=paths.supplies,
            demands=paths.demands,
            config=Path(args.config),
        )
    return paths


def _cmd_validate(args: argparse.Namespace) -> int:
    bundle = load_bundle(_bundle_paths(args))
    graph = bundle.graph
    print(f"bundle ok: {args.data}")
    print(
        f"  nodes={len(graph.nodes)} edges={len(graph.edges)} bridges={len(graph.bridges)}"
        f" components={graph.component_count}"
    )
    print(f"  supplies={len(bundle.supplies)} demands={len(bundle.demands)} surge_samples={len(bundle.config.surge)}")
    print(f"  storm={bundle.config.storm} crs={bundle.crs} datum={bundle.datum}")
    return EXIT_OK


def _parse_horizons(raw: str | None) -> tuple[str, ...] | None:
    if raw is None:
        return None
    return tuple(part.strip() for part in raw.split(",") if part.strip())


def _cmd_run(args: argparse.Namespace) -> int:
    bundle = load_bundle(_bundle_paths(args))
    config = override_config(
        bundle.config,
        samples=args.samples,
        seed=args.seed,
        d0_minutes=args.d0,
        horizons=_parse_horizons(args.horizons),
        workers=args.workers,
    )
    result = run_scenario(config, bundle.graph, bundle.bridges, bundle.supplies, bundle.demands)
    written = write_results(result, bundle, args.out)
    print(
        f"storm={result.storm} seed={result.seed} samples={result.samples}"
        f" d0={result.d0_minutes} workers={config.workers}"
    )
    print(f"{'horizon':<8} {'avg_score':>10} {'avg_cov':>8} {'no_access':>9} {'converged_at':>12}")
    for horizon, hres in result.horizons.items():
        converged = hres.converged_at if hres.converged_at is not None else "-"
        print(
            f"{horizon:<8} {hres.group_averages['overall']:>10.4f} {hres.average_cov:>8.4f}"
            f" {hres.no_access_fraction:>9.4f} {converged:>12}"
        )
    print(f"wrote {len(written)} file(s) to {Path(args.out)}")
    return EXIT_OK


def _cmd_fixture(args: argparse.Namespace) -> int:
    try:
        gw, gh = (int(part) for part in args.grid.lower().split("x"))
    except ValueError:
        print(f"error: --grid expects WIDTHxHEIGHT, got {args.grid!r}", file=sys.stderr)
        return EXIT_RUNTIME
    spec = SyntheticFixtureSpec(
        seed=args.seed,
        grid_width=gw,
        grid_height=gh,
        spacing_m=args.spacing,
        bridge_count=args.bridges,
        demand_count=args.demands,
        supply_count=args.supplies,
        storm=args.storm,
        surge_peak_m=args.peak,
        surge_decay_m=args.decay,
        d0_minutes=args.d0,
        samples=args.samples,
    )
    paths = generate_fixture(spec, args.out)
    print(f"fixture written to {Path(args.out)} ({len(paths.all_files())} files)")
    return EXIT_OK


_QUARTILE_ORDER = {"Q1": 1, "Q2": 2, "Q3": 3, "Q4": 4}


def _cmd_report(args: argparse.Namespace) -> int:
    try:
        base = read_results(args.base)
        other = read_results(args.other)
    except (KeyError, json.JSONDecodeError) as exc:
        print(f"error: malformed results directory ({exc})", file=sys.stderr)
        return EXIT_RUNTIME
    base_storm = base["manifest"]["storm"]
    other_storm = other["manifest"]["storm"]
    print(f"base:  {base_storm} ({args.base})")
    print(f"other: {other_storm} ({args.other})")

    shared = [h for h in base["horizons"] if h in other["horizons"]]
    rows: list[dict[str, object]] = []
    for horizon in shared:
        b_sum = base["manifest"]["summary"][horizon]
        o_sum = other["manifest"]["summary"][horizon]
        drops = 0
        for demand_id, props in base["horizons"][horizon].items():
            o_props = other["horizons"][horizon].get(demand_id)
            if o_props is None:
                continue
            if _QUARTILE_ORDER[o_props["quartile"]] < _QUARTILE_ORDER[props["quartile"]]:
                drops += 1
            rows.append(
                {
                    "demand_id": demand_id,
                    "horizon": horizon,
                    "base_mean": props["mean_score"],
                    "other_mean": o_props["mean_score"],
                    "delta": o_props["mean_score"] - props["mean_score"],
                    "base_quartile": props["quartile"],
                    "other_quartile": o_props["quartile"],
                }
            )
        print(f"[{horizon}]")
        print(f"  avg_score {b_sum['average_score']:.4f} -> {o_sum['average_score']:.4f}")
        print(f"  no_access {b_sum['no_access_fraction']:.4f} -> {o_sum['no_access_fraction']:.4f}")
        print(f"  quartile drops: {drops}")

    # Within-run horizon contrast. Flagged, not hidden: demands with no
    # access at all pull these averages in ways a plain difference hides.
    for label, res in (("base", base), ("other", other)):
        summary = res["manifest"]["summary"]
        if all(h in summary for h in HORIZONS):
            delta = summary[HORIZONS[1]]["average_score"] - summary[HORIZONS[0]]["average_score"]
            print(
                f"{label} {HORIZONS[1]}-vs-{HORIZONS[0]} avg_score delta: {delta:.4f}"
                " [caution: cross-horizon deltas are biased where access drops to zero]"
            )

    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh,
                fieldnames=[
                    "demand_id", "horizon", "base_mean", "other_mean",
                    "delta", "base_quartile", "other_quartile",
                ],
                lineterminator="\n",
            )
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote per-demand deltas to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surgeaccess", description=__doc__)
    parser.add_argument(
        "--version",
        action="version",
        version=f"surgeaccess {__version__} fragility-table {default_table().checksum()}",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate a scenario bundle")
    p_validate.add_argument("--data", required=True, help="bundle directory")
    p_validate.add_argument("--config", help="alternate config file")
    p_validate.set_defaults(func=_cmd_validate)

    p_run = sub.add_parser("run", help="run a Monte Carlo scenario")
    p_run.add_argument("--data", required=True, help="bundle directory")
    p_run.add_argument("--config", help="alternate config file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p_run.add_argument("--seed", type=int, help="master random seed")
    p_run.add_argument("--d0", type=float, help="catchment radius in minutes")
    p_run.add_argument("--horizons", help="comma list, e.g. short,long")
    p_run.add_argument("--workers", type=int, help="parallel workers for network evaluation")
    p_run.set_defaults(func=_cmd_run)

    p_fixture = sub.add_parser("fixture", help="generate a synthetic bundle")
    p_fixture.add_argument("--out", required=True, help="output directory")
    p_fixture.add_argument("--storm", default="storm-1-like", help="storm preset or custom label")
    p_fixture.add_argument("--seed", type=int, default=42)
    p_fixture.add_argument("--grid", default="89x23", help="grid size as WIDTHxHEIGHT")
    p_fixture.add_argument("--spacing", type=float, default=300.0, help="grid spacing in meters")
    p_fixture.add_argument("--bridges", type=int, default=88)
    p_fixture.add_argument("--demands", type=int, default=121)
    p_fixture.add_argument("--supplies", type=int, default=1021)
    p_fixture.add_argument("--samples", type=int, default=1000)
    p_fixture.add_argument("--d0", type=float, default=50.0)
    p_fixture.add_argument("--peak", type=float, help="peak storm tide (m) for custom storms")
    p_fixture.add_argument("--decay", type=float, help="surge decay distance (m) for custom storms")
    p_fixture.set_defaults(func=_cmd_fixture)

    p_report = sub.add_parser("report", help="compare two result directories")
    p_report.add_argument("base", help="baseline results directory")
    p_report.add_argument("other", help="comparison results directory")
    p_report.add_argument("--out", help="write per-demand deltas to this CSV")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation failed ({len(exc.errors)} error(s)):", file=sys.stderr)
        for message in exc.errors:
            print(f"  - {message}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SurgeAccessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
