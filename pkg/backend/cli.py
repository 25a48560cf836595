import argparse
import logging
import sys
from pathlib import Path

from config import config
from errors import Inconclusive
from models import FixtureResult, Report
from system_file import split_names
from tasks import RunOptions
from toolkit import Toolkit

logger = logging.getLogger(__name__)

VERBS = ("analyze", "sfl", "quotient", "subconnection", "cascade", "corpus-check")


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="goursat-toolkit",
        description="Geometric tests and cascade linearization of nonlinear control systems.",
        epilog=(
            "subconnection and cascade compute the trivialization only for an abelian symmetry "
            "algebra; for other groups supply map and subconnection blocks and no symmetry block."
        ),
    )
    parser.add_argument("verb", choices=VERBS, help="What to compute")
    parser.add_argument(
        "file",
        nargs="*",
        help="System file; for corpus-check, optional fixture names to run",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help=f"Probe seed (default: {config.SEED})"
    )
    parser.add_argument(
        "--degree-budget",
        type=int,
        default=None,
        help=(
            "Highest polynomial degree tried in integral searches"
            f" (default: {config.DEGREE_BUDGET})"
        ),
    )
    parser.add_argument(
        "--mode",
        choices=["exact", "bound"],
        default=None,
        help=f"Prolongation plan (default: {config.MODE})",
    )
    parser.add_argument("--split", default=None, help="Variables to reduce along, e.g. w1,w2")
    parser.add_argument(
        "--refine", action="store_true", help="Tighten a bound plan to the smallest working orders"
    )
    parser.add_argument("--json", type=Path, default=None, help="Also write the report here")
    parser.add_argument("--workers", type=int, default=None, help="Threads for corpus-check")
    parser.add_argument("--verbose", action="store_true", help="Log pipeline milestones")
    return parser.parse_args(argv)


def exit_code(report: Report) -> int:
    if report.condition == Inconclusive.condition:
        return 2
    return 1 if report.error else 0


def run_corpus(toolkit: Toolkit, names: list[str], args: argparse.Namespace) -> int:
    try:
        results = toolkit.corpus_check(names or None, workers=args.workers)
    except ValueError as err:
        print(f"[error] {err}")
        return 1
    if args.json:
        payload = "[" + ",\n".join(r.model_dump_json(indent=2) for r in results) + "]\n"
        args.json.write_text(payload, encoding="utf-8")
    failed: list[FixtureResult] = [r for r in results if not r.passed]
    for result in results:
        print(f"{'PASS' if result.passed else 'FAIL'} {result.name} ({result.elapsed:.1f}s)")
        for mismatch in result.mismatches:
            print(f"  - {mismatch}")
    print(f"[corpus-check] {len(results) - len(failed)}/{len(results)} fixtures pass")
    if any(r.condition == Inconclusive.condition for r in failed):
        return 2
    return 1 if failed else 0


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else config.LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    toolkit = Toolkit(config)

    if args.verb == "corpus-check":
        return run_corpus(toolkit, args.file, args)

    if len(args.file) != 1:
        print(f"[error] {args.verb} takes exactly one system file")
        return 1
    options = RunOptions(
        seed=args.seed,
        degree_budget=args.degree_budget,
        mode=args.mode,
        split=split_names(args.split) if args.split else None,
        refine=args.refine,
    )
    report = toolkit.run(args.verb, args.file[0], options)
    payload = report.model_dump_json(indent=2)
    print(payload)
    if args.json:
        args.json.write_text(payload + "\n", encoding="utf-8")
    code = exit_code(report)
    if code:
        logger.warning("%s stopped: %s", args.verb, report.condition or report.error)
    return code


if __name__ == "__main__":
    sys.exit(main())
