"""Command-line interface: gen, check, measure, sweep-pgo."""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from . import astgen, bench, codegen, grammar

CONTAINER_CHOICES = {
    "array": "array",
    "sortedlist": "sortedList",
    "scalar": "scalar",
}


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("generation parameters")
    group.add_argument("--seed", type=int, default=0,
                       help="operand planner seed (default 0)")
    group.add_argument("--generations", type=int, default=4,
                       help="rewrite iterations applied to the axiom (default 4)")
    group.add_argument("--container", choices=sorted(CONTAINER_CHOICES), default="array",
                       help="behavior of the generated containers (default array)")
    group.add_argument("--backend", choices=("c", "go"), default="c",
                       help="code emission backend (default c)")
    group.add_argument("--split-files", action="store_true",
                       help="emit one file per generated function")
    group.add_argument("--trip-count", type=int, default=2,
                       help="iterations per LOOP (default 2)")
    group.add_argument("--value-range", type=int, default=1000,
                       help="operand values are drawn from [0, N) (default 1000)")
    group.add_argument("--out", default="out", metavar="DIR",
                       help="directory for sources, manifest, and reports (default ./out)")
    return common


def _plan_from_args(args: argparse.Namespace) -> astgen.OperandPlan:
    return astgen.OperandPlan(
        seed=args.seed,
        value_range=args.value_range,
        trip_count=args.trip_count,
        container_kind=CONTAINER_CHOICES[args.container],
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsysbench",
        description="Grow compiler benchmarks from L-system grammars, check them "
                    "against a reference interpreter, and measure toolchains on them.",
    )
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", parents=[common],
                           help="derive a spec and emit compilable sources + manifest")
    p_gen.add_argument("spec", help="L-system spec file")
    p_gen.add_argument("--debug-trace", action="store_true",
                       help="bake the trace on by default in the emitted program")

    p_check = sub.add_parser("check", parents=[common],
                             help="compile emitted sources and diff traces against the oracle")
    p_check.add_argument("spec", help="L-system spec file used for gen")
    p_check.add_argument("--cc", required=True, metavar="TEMPLATE",
                         help="compile command with {in} and {out} placeholders, "
                              "e.g. 'gcc -std=c99 -O0 {in} -o {out}'")
    p_check.add_argument("--paths", type=_int_list, default=[0, 1], metavar="P1,P2,...",
                         help="PATH values to run (default 0,1)")
    p_check.add_argument("--seeds", type=_int_list, default=None, metavar="S1,S2,...",
                         help="extra planner seeds to regenerate and check "
                              "(default: the manifest's seed, using the on-disk sources)")
    p_check.add_argument("--checksum-only", action="store_true",
                         help="compare only the CHECKSUM line instead of full traces")
    p_check.add_argument("--report", metavar="FILE",
                         help="also write the per-run results as JSON lines")

    p_measure = sub.add_parser("measure", parents=[common],
                               help="measure compile time, run time, and binary size")
    p_measure.add_argument("spec", help="L-system spec file used for gen")
    p_measure.add_argument("--cc", required=True, metavar="TEMPLATE",
                           help="compile command with {in}, {out}, and {flags} placeholders")
    p_measure.add_argument("--flags", action="append", default=None, metavar="FLAGS",
                           help="one flag set per occurrence; values starting with a "
                                "dash need the = form, e.g. --flags=-O2 "
                                "(default: one empty set)")
    p_measure.add_argument("--repetitions", type=int, default=10,
                           help="timed repetitions per flag set (default 10)")
    p_measure.add_argument("--warmups", type=int, default=3,
                           help="discarded warm-up runs (default 3)")
    p_measure.add_argument("--path", type=int, default=1,
                           help="PATH value for the timed runs (default 1)")
    p_measure.add_argument("--size-cmd", metavar="TEMPLATE",
                           help="command with {bin} whose first output line is a byte "
                                "count, recorded as textBytes")
    p_measure.add_argument("--no-oracle-check", action="store_true",
                           help="skip comparing the binary's checksum to the oracle")
    p_measure.add_argument("--csv", metavar="FILE", help="write rows as CSV")
    p_measure.add_argument("--json", metavar="FILE", help="write rows as JSON lines")

    p_sweep = sub.add_parser("sweep-pgo", parents=[common],
                             help="compare baseline vs profile-trained binaries over a PATH sweep")
    p_sweep.add_argument("spec", help="L-system spec file used for gen")
    p_sweep.add_argument("--cc-base", required=True, metavar="TEMPLATE",
                         help="baseline compile command ({in}/{out})")
    p_sweep.add_argument("--cc-train", required=True, metavar="TEMPLATE",
                         help="instrumented compile command ({in}/{out})")
    p_sweep.add_argument("--cc-opt", required=True, metavar="TEMPLATE",
                         help="profile-consuming compile command ({in}/{out})")
    p_sweep.add_argument("--train-path", type=int, default=1,
                         help="PATH value for the training run (default 1)")
    p_sweep.add_argument("--bits", type=_int_list, default=None, metavar="I1,I2,...",
                         help="bit counts i; each runs PATH = 2^i - 1 "
                              "(default 1,2,4,8,16,32,63)")
    p_sweep.add_argument("--repetitions", type=int, default=10,
                         help="timed repetitions per binary and path (default 10)")
    p_sweep.add_argument("--warmups", type=int, default=3,
                         help="discarded warm-up runs (default 3)")
    p_sweep.add_argument("--csv", metavar="FILE", help="write the ratio table as CSV")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            emit_cfg = codegen.EmitConfig(
                backend=args.backend,
                split_files=args.split_files,
                debug_trace=args.debug_trace,
            )
            bench.cmd_gen(args.spec, args.out, args.generations, _plan_from_args(args), emit_cfg)
            return 0
        if args.command == "check":
            ok = bench.cmd_check(
                args.spec, args.out, args.cc,
                paths=args.paths,
                seeds=args.seeds,
                checksum_only=args.checksum_only,
                report_path=args.report,
            )
            return 0 if ok else 1
        if args.command == "measure":
            results = bench.cmd_measure(
                args.spec, args.out, args.cc,
                flag_sets=args.flags if args.flags else [""],
                repetitions=args.repetitions,
                warmups=args.warmups,
                path=args.path,
                size_cmd=args.size_cmd,
                oracle_check=not args.no_oracle_check,
                csv_path=args.csv,
                json_path=args.json,
            )
            return 1 if any(m.failed for m in results) else 0
        if args.command == "sweep-pgo":
            sweep = bench.SweepConfig(args.bits) if args.bits else bench.SweepConfig()
            bench.cmd_sweep_pgo(
                args.spec, args.out, args.cc_base, args.cc_train, args.cc_opt,
                sweep=sweep,
                train_path=args.train_path,
                repetitions=args.repetitions,
                warmups=args.warmups,
                csv_path=args.csv,
            )
            return 0
    except (grammar.SpecError, bench.BenchError, codegen.BackendError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    parser.error(f"unknown command: {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
