import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from corpus import FIXTURES, Fixture, compare
from errors import Inconclusive, ToolkitError
from models import FixtureResult, LocusRecord, Report
from probes import ProbeSession, use_session
from system_file import SystemFile, SystemFileParser
from tasks import (
    AnalyzeTask,
    CascadeTask,
    QuotientTask,
    RunOptions,
    SflTask,
    SubconnectionTask,
    TaskContext,
    TaskManager,
)

logger = logging.getLogger(__name__)

PACKAGED_CORPUS = Path(__file__).resolve().parent.parent / "corpus"


class Toolkit:
    """Main orchestrator: reads system files and runs the toolkit verbs on them"""

    def __init__(self, config):
        self.config = config

        # Initialize core components
        self.parser = SystemFileParser()
        self.task_manager = TaskManager()

        # Register verbs; later stages reuse the earlier ones
        quotient = QuotientTask()
        subconnection = SubconnectionTask(quotient)
        for task in (AnalyzeTask(), SflTask(), quotient, subconnection, CascadeTask(subconnection)):
            self.task_manager.register_task(task)

    def verbs(self) -> list[str]:
        return [d["name"] for d in self.task_manager.get_task_definitions()]

    def load(self, file_path: str) -> SystemFile:
        return self.parser.parse_file(file_path)

    def resolve(self, options: RunOptions, spec: SystemFile) -> RunOptions:
        """Fill unset options from the file's options block, then from the configuration"""
        return replace(
            options,
            seed=_first(options.seed, spec.int_option("seed"), self.config.SEED),
            degree_budget=_first(
                options.degree_budget, spec.int_option("degree_budget"), self.config.DEGREE_BUDGET
            ),
            mode=_first(options.mode, spec.option("mode"), self.config.MODE),
        )

    def run(self, verb: str, source, options: RunOptions | None = None) -> Report:
        """
        Run one verb on a system file.

        Args:
            verb: analyze, sfl, quotient, subconnection or cascade
            source: path of a system file, or an already parsed SystemFile
            options: per-run overrides

        Returns:
            The report; errors are recorded in it rather than raised
        """
        start = time.perf_counter()
        options = options or RunOptions()
        report = Report(
            schema_version=self.config.SCHEMA_VERSION,
            task=verb,
            system=str(source) if not isinstance(source, SystemFile) else source.name,
            seed=_first(options.seed, self.config.SEED),
        )
        try:
            spec = source if isinstance(source, SystemFile) else self.load(source)
            options = self.resolve(options, spec)
        except (ToolkitError, OSError, ValueError) as exc:
            _record_error(report, exc)
            report.elapsed = round(time.perf_counter() - start, 3)
            return report
        except Exception as exc:
            logger.exception("loading %s failed", source)
            _record_error(report, exc)
            report.elapsed = round(time.perf_counter() - start, 3)
            return report

        report.system = spec.name
        report.seed = options.seed
        session = ProbeSession(seed=options.seed)
        with use_session(session):
            try:
                self.task_manager.execute_task(verb, TaskContext(spec, options, report))
            except (ToolkitError, ValueError) as exc:
                _record_error(report, exc)
            except Exception as exc:
                logger.exception("%s on %s raised", verb, spec.name)
                _record_error(report, exc)
        report.loci = [LocusRecord(expr=locus.expr, origin=locus.origin) for locus in session.loci]
        report.elapsed = round(time.perf_counter() - start, 3)
        logger.info("%s on %s finished in %.2fs", verb, spec.name, report.elapsed)
        return report

    def corpus_dir(self) -> Path:
        configured = Path(self.config.CORPUS_PATH)
        return configured if configured.is_dir() else PACKAGED_CORPUS

    def check_fixture(self, fixture: Fixture) -> FixtureResult:
        """Run one fixture and diff its report against the expected values"""
        start = time.perf_counter()
        path = self.corpus_dir() / fixture.file
        report = self.run(fixture.verb, str(path), fixture.run_options())
        condition = report.condition
        try:
            mismatches = compare(fixture, report)
        except Inconclusive as exc:
            logger.warning("fixture %s: inconclusive comparison: %s", fixture.name, exc)
            mismatches = [f"{exc.condition}: {exc}"]
            condition = exc.condition
        result = FixtureResult(
            name=fixture.name,
            passed=not mismatches and report.error is None,
            mismatches=mismatches,
            elapsed=round(time.perf_counter() - start, 3),
            error=report.error,
            condition=condition,
        )
        logger.info("fixture %s: %s", fixture.name, "pass" if result.passed else "FAIL")
        return result

    def corpus_check(
        self, names: list[str] | None = None, workers: int | None = None
    ) -> list[FixtureResult]:
        """Run the bundled fixtures in a thread pool, one probe session per fixture"""
        fixtures = [f for f in FIXTURES if not names or f.name in names]
        unknown = set(names or ()) - {f.name for f in fixtures}
        if unknown:
            raise ValueError(f"unknown fixtures {sorted(unknown)}")
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.check_fixture, fixtures))


def _first(*values):
    return next(v for v in values if v is not None)


def _record_error(report: Report, exc: Exception):
    report.error = str(exc)
    report.condition = getattr(exc, "condition", None)
    if isinstance(exc, Inconclusive):
        logger.warning("inconclusive zero test: %s", exc)
    else:
        logger.error("%s failed: %s", report.task, exc)
