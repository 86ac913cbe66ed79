"""Command line interface: simulate scenarios, classify and extend systems.

Exit codes: 0 success, 1 usage error, 2 numeric failure, 3 classification
precondition failure.  Set EQF_LOG=info or EQF_LOG=debug for diagnostics.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .classify import classify_invariance, decompose, reduce_group_affine_extension
from .errors import (
    EqfError,
    NotGroupAffineError,
    NotInvariantError,
    NumericBlowupError,
    RankInstabilityError,
    ScenarioError,
    UnknownSystemError,
)
from .scenario import (
    bundled_scenario_path,
    load_scenario,
    run,
    write_records_csv,
    write_report_json,
)
from .systems import get_system, registry

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_PRECONDITION = 3

log = logging.getLogger("eqf")


class _Parser(argparse.ArgumentParser):
    # usage problems must exit with code 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _configure_logging():
    level = os.environ.get("EQF_LOG", "off").lower()
    if level == "debug":
        logging.basicConfig(level=logging.DEBUG)
    elif level == "info":
        logging.basicConfig(level=logging.INFO)
    else:
        logging.disable(logging.CRITICAL)


def _build_parser() -> _Parser:
    parser = _Parser(prog="eqf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run a scenario and write records.csv/report.json")
    sim.add_argument("--scenario", required=True, help="scenario TOML path or bundled name")
    sim.add_argument("--out", default=".", help="output directory")
    sim.add_argument("--runs", type=int, default=1, help="Monte Carlo repetitions")

    for name, helptext in (
        ("classify", "print invariance flags and the type decomposition"),
        ("extend", "print the finite input-extension summary"),
    ):
        cmd = sub.add_parser(name, help=helptext)
        cmd.add_argument("--system", required=True)
        cmd.add_argument("--alpha", type=float, default=None)
        cmd.add_argument("--n", type=int, default=None)
        cmd.add_argument("--samples", type=int, default=50 if name == "classify" else 40)
        cmd.add_argument("--tol", type=float, default=1e-8)
        cmd.add_argument("--seed", type=int, default=42)

    sub.add_parser("list-systems", help="print the registry of built-in systems")
    return parser


def _system_from_args(args):
    params = {}
    if args.alpha is not None:
        params["alpha"] = args.alpha
    if args.n is not None:
        params["n"] = args.n
    return get_system(args.system, **params)


def _resolve_scenario(raw: str) -> Path:
    path = Path(raw)
    if path.exists():
        return path
    if not raw.endswith(".toml"):
        bundled = bundled_scenario_path(raw)
        if bundled.exists():
            return bundled
    raise FileNotFoundError(f"scenario file not found: {raw}")


def _cmd_sim(args) -> int:
    path = _resolve_scenario(args.scenario)
    scenario = load_scenario(path)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.runs < 1:
        raise ScenarioError("--runs must be at least 1")
    failed = False
    summaries = []
    for i in range(args.runs):
        current = scenario if args.runs == 1 else scenario.with_seed(scenario.seed + i)
        log.info("running %s (seed %d)", current.name, current.seed)
        report = run(current)
        csv_name = "records.csv" if args.runs == 1 else f"records_{i:03d}.csv"
        if report.records:
            write_records_csv(report, out_dir / csv_name)
        summaries.append({"seed": current.seed, "records": csv_name, **report.summary()})
        failed = failed or report.failed
        log.info(
            "run %d: rmse_tail=%.6g final_err=%.6g wall=%.3fs",
            i,
            report.rmse_tail,
            report.final_err,
            report.wall_time,
        )
        if args.runs == 1:
            write_report_json(report, current, out_dir / "report.json")
    if args.runs > 1:
        payload = {"scenario": scenario.name, "base_seed": scenario.seed, "runs": summaries}
        (out_dir / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
    return EXIT_NUMERIC if failed else EXIT_OK


def _cmd_classify(args) -> int:
    system = _system_from_args(args)
    report = classify_invariance(system, samples=args.samples, tol=args.tol, seed=args.seed)
    out = {"system": args.system, "invariance": report.to_dict()}
    try:
        dec = decompose(system, samples=args.samples, tol=args.tol, seed=args.seed)
        out["decomposition"] = {
            "dims": list(dec.dims),
            "residual": dec.residual,
            "v0_basis": dec.v0_basis.tolist(),
            "v1_perp_basis": dec.v1_perp_basis.tolist(),
            "v2_perp_basis": dec.v2_perp_basis.tolist(),
        }
    except NotInvariantError as err:
        out["decomposition"] = None
        out["not_invariant"] = str(err)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_extend(args) -> int:
    system = _system_from_args(args)
    red = reduce_group_affine_extension(
        system, samples=args.samples, tol=args.tol, seed=args.seed
    )
    out = {
        "system": args.system,
        "original_dim": red.original_dim,
        "typeI_span_dim": red.typeI_span_basis.shape[1],
        "perp_dim": red.perp_dim,
        "extended_dim": red.extended_system.input_dim,
        "typeI_span_basis": red.typeI_span_basis.tolist(),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_list_systems() -> int:
    for entry in registry():
        system = entry.build()
        flags = ", ".join(k for k, v in entry.expected.items() if v) or "none"
        print(
            f"{entry.label:16s} group={entry.group:4s} inputs={system.input_dim}  "
            f"[{flags}]  {entry.doc}"
        )
    return EXIT_OK


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sim":
            return _cmd_sim(args)
        if args.command == "classify":
            return _cmd_classify(args)
        if args.command == "extend":
            return _cmd_extend(args)
        return _cmd_list_systems()
    except (FileNotFoundError, ScenarioError, UnknownSystemError) as err:
        print(f"eqf: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (NotGroupAffineError, NotInvariantError, RankInstabilityError) as err:
        print(f"eqf: classification precondition failed: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericBlowupError as err:
        print(f"eqf: numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except EqfError as err:
        print(f"eqf: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
