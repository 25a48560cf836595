"""Tests for the toolkit orchestrator, its verbs and the bundled corpus."""

import pytest
import sympy as sp

from corpus import (
    CHARLET,
    FIXTURES,
    HSM,
    MARINO,
    PVTOL_GALILEAN,
    TVTOL,
    compare,
    equal_up_to_renaming,
    fixture,
    proportional_in_time,
    same_span,
)
from errors import Inconclusive, ParseError
from exprcore import is_zero
from models import Report, Verdict
from system_file import SystemFileParser, read_expr
from tasks import RunOptions

x1, x2, x4, t = sp.symbols("x1 x2 x4 t")

DOUBLE_INTEGRATOR = """
system double
states x1 x2
controls u
dynamics
  x1' = x2
  x2' = u
end
"""


def _disagreeing(*args):
    raise Inconclusive("normal form and probes differ")


@pytest.fixture
def double_integrator_file(tmp_path):
    path = tmp_path / "double.sys"
    path.write_text(DOUBLE_INTEGRATOR, encoding="utf-8")
    return str(path)


class TestToolkit:
    """Test suite for Toolkit configuration and option handling."""

    def test_verbs(self, toolkit):
        assert toolkit.verbs() == ["analyze", "sfl", "quotient", "subconnection", "cascade"]

    def test_file_options_fill_unset_values(self, toolkit, sample_system_text):
        """Test that the options block overrides the configuration."""
        spec = SystemFileParser().parse(sample_system_text)
        options = toolkit.resolve(RunOptions(), spec)
        assert options.seed == 7
        assert options.mode == "bound"
        assert options.degree_budget == 4

    def test_run_options_override_file(self, toolkit, sample_system_text):
        """Test that per-run options win over the file."""
        spec = SystemFileParser().parse(sample_system_text)
        options = toolkit.resolve(RunOptions(seed=3, mode="exact", degree_budget=2), spec)
        assert (options.seed, options.mode, options.degree_budget) == (3, "exact", 2)

    def test_corpus_dir(self, toolkit, corpus_dir):
        assert toolkit.corpus_dir().resolve() == corpus_dir.resolve()

    def test_corpus_dir_fallback(self, toolkit, tmp_path, corpus_dir):
        """Test that a missing configured directory falls back to the packaged corpus."""
        toolkit.config.CORPUS_PATH = str(tmp_path / "missing")
        assert toolkit.corpus_dir().resolve() == corpus_dir.resolve()


class TestRun:
    """Test suite for running verbs."""

    def test_analyze(self, toolkit, double_integrator_file):
        """Test the derived flag invariants of the double integrator."""
        report = toolkit.run("analyze", double_integrator_file)
        assert report.error is None
        assert report.task == "analyze"
        assert report.system == "double"
        assert report.signatures["ranks"] == "[2, 3, 4]"
        assert report.signatures["vel"] == "<1,1>"
        assert report.signatures["decel"] == "<0,1>"
        assert report.verdict("goursat").holds
        assert report.verdict("derived type").refined_type == [[2, 0], [3, 1, 1], [4, 4]]

    def test_sfl(self, toolkit, double_integrator_file):
        """Test that the fundamental function of the double integrator is x1."""
        report = toolkit.run("sfl", double_integrator_file)
        assert report.verdict("sfl").holds
        assert report.signatures["kappa"] == "<0,1>"
        assert list(report.transformations["fundamental"].values()) == ["x1"]

    def test_parsed_source(self, toolkit):
        """Test that an already parsed file can be run."""
        spec = SystemFileParser().parse(DOUBLE_INTEGRATOR)
        report = toolkit.run("analyze", spec)
        assert report.system == "double"
        assert report.error is None

    def test_seed_is_recorded(self, toolkit, double_integrator_file):
        """Test that reruns with the same seed reproduce the report."""
        first = toolkit.run("analyze", double_integrator_file, RunOptions(seed=11))
        second = toolkit.run("analyze", double_integrator_file, RunOptions(seed=11))
        assert first.seed == second.seed == 11
        assert first.model_dump(exclude={"elapsed"}) == second.model_dump(exclude={"elapsed"})

    def test_non_sfl_system_stops(self, toolkit, corpus_dir):
        """Test that a failed SFL test is a verdict, not an error."""
        report = toolkit.run("sfl", str(corpus_dir / "charlet.sys"))
        assert report.error is None
        assert not report.verdict("sfl").holds
        assert "kappa" not in report.signatures
        assert "contact" not in report.transformations

    def test_quotient(self, toolkit, corpus_dir):
        """Test the Charlet quotient by its translation symmetry."""
        report = toolkit.run("quotient", str(corpus_dir / "charlet.sys"))
        assert report.error is None
        assert report.verdict("control admissible").holds
        assert report.signatures["relative"] == "<1,1>"
        assert report.verdict("quotient sfl").holds
        assert set(report.systems["quotient"]) == {"q1'", "q2'", "q3'"}


class TestRunErrors:
    """Test suite for errors recorded in reports."""

    def test_missing_file(self, toolkit, tmp_path):
        report = toolkit.run("analyze", str(tmp_path / "absent.sys"))
        assert report.error is not None
        assert report.condition is None
        assert report.verdicts == []

    def test_parse_error(self, toolkit, tmp_path):
        """Test that a parse error carries its condition and position."""
        path = tmp_path / "broken.sys"
        path.write_text("states x1\ncontrols u\ndynamics\n  x1' = y\nend\n", encoding="utf-8")
        report = toolkit.run("sfl", str(path))
        assert report.condition == ParseError.condition
        assert "line 4" in report.error

    def test_unknown_verb(self, toolkit, double_integrator_file):
        report = toolkit.run("frobnicate", double_integrator_file)
        assert report.error == "Task 'frobnicate' not found"

    def test_quotient_without_symmetry(self, toolkit, double_integrator_file):
        report = toolkit.run("quotient", double_integrator_file)
        assert "declares no symmetry block" in report.error

    def test_unknown_fixture(self, toolkit):
        with pytest.raises(ValueError, match="unknown fixtures"):
            toolkit.corpus_check(["nope"])

    def test_unexpected_exception_is_recorded(self, toolkit, double_integrator_file, monkeypatch):
        """Test that an exception outside the toolkit hierarchy becomes an error report."""

        def broken(system):
            raise KeyError("x9")

        monkeypatch.setattr("tasks.sfl_test", broken)
        report = toolkit.run("sfl", double_integrator_file)
        assert report.error == "'x9'"
        assert report.condition is None

    def test_unexpected_exception_while_loading(self, toolkit, tmp_path, monkeypatch):
        def broken(self, path):
            raise ZeroDivisionError("division by zero")

        monkeypatch.setattr("toolkit.Toolkit.load", broken)
        report = toolkit.run("sfl", str(tmp_path / "any.sys"))
        assert report.error == "division by zero"


class TestInconclusive:
    """Test suite for disagreeing zero tests."""

    def test_cascade_reports_inconclusive(self, toolkit, corpus_dir, monkeypatch):
        """Test that the reduction search surfaces the disagreement rather than a verdict."""
        monkeypatch.setattr("cascade.sfl_test", _disagreeing)
        report = toolkit.run("cascade", str(corpus_dir / "charlet.sys"))
        assert report.condition == Inconclusive.condition
        assert report.verdict("cascade") is None
        assert report.verdict("reduced sfl") is None

    def test_compare_propagates_inconclusive(self, monkeypatch):
        monkeypatch.setattr("corpus.is_zero", _disagreeing)
        report = Report(
            schema_version="1.0",
            task="quotient",
            system="marino",
            seed=1,
            systems={"quotient": {"q1'": "q1", "q2'": "q2", "q3'": "q4", "q4'": "v2"}},
        )
        with pytest.raises(Inconclusive):
            compare(MARINO, report)

    def test_fixture_records_inconclusive(self, toolkit, monkeypatch):
        """Test that an inconclusive comparison fails the fixture with its condition."""
        monkeypatch.setattr("corpus.is_zero", _disagreeing)
        result = toolkit.check_fixture(MARINO)
        assert not result.passed
        assert result.condition == Inconclusive.condition


class TestCorpusComparison:
    """Test suite for comparing reports with expected values."""

    def test_fixture_names_are_unique(self):
        names = [f.name for f in FIXTURES]
        assert len(names) == len(set(names))
        assert fixture("charlet") is CHARLET
        with pytest.raises(KeyError):
            fixture("nope")

    def test_missing_sections(self):
        """Test that an SFL verdict without contact coordinates is reported."""
        report = Report(
            schema_version="1.0",
            task="sfl",
            system="hsm",
            seed=1,
            verdicts=[
                Verdict(name="sfl", holds=True, refined_type=[[3, 0], [5, 2, 2], [7, 4, 5], [8, 8]])
            ],
            signatures={"kappa": "<0,1,1>"},
        )
        mismatches = compare(HSM, report)
        assert len(mismatches) == 7
        assert all(m.endswith("missing") for m in mismatches)

    def test_wrong_verdict_and_error(self):
        report = Report(
            schema_version="1.0",
            task="quotient",
            system="marino",
            seed=1,
            verdicts=[Verdict(name="control admissible", holds=False)],
            error="stopped",
        )
        mismatches = compare(MARINO, report)
        assert "run failed: stopped" in mismatches
        assert "verdict control admissible: expected True, got False" in mismatches
        assert "verdict quotient sfl: expected True, got None" in mismatches

    def test_expressions_compared_by_value(self):
        """Test that printed forms need not match textually."""
        report = Report(
            schema_version="1.0",
            task="quotient",
            system="marino",
            seed=1,
            verdicts=[
                Verdict(name="control admissible", holds=True),
                Verdict(name="quotient sfl", holds=True),
            ],
            systems={
                "quotient": {
                    "q1'": "q2 + q4 - q1**2 - q1*q2*q4",
                    "q2'": "v1 - q1*q2 - q2**2*q4",
                    "q3'": "q4",
                    "q4'": "v2",
                }
            },
        )
        assert compare(MARINO, report) == []

    def test_proportional_in_time(self):
        """Test that a factor in t is allowed but a factor in the coordinates is not."""
        f = sp.Function("f")
        scale = sp.Derivative(f(t), (t, 2))
        assert proportional_in_time(x1 + x2, (t**2 + 1) * (x1 + x2))
        assert proportional_in_time(x1 - x4, (x1 - x4) / scale)
        assert not proportional_in_time(x1, x1 * x2)
        assert not proportional_in_time(x1, x2)

    def test_equal_up_to_renaming(self):
        """Test that solutions match after swapping the names of their arbitrary functions."""
        f, h, f1, f2 = (sp.Function(n) for n in ("f", "h", "f1", "f2"))
        expected = {"x1": f(t), "x3": sp.Derivative(h(t), t) / (1 - sp.Derivative(f(t), (t, 2)))}
        actual = {"x1": f2(t), "x3": sp.Derivative(f1(t), t) / (1 - sp.Derivative(f2(t), (t, 2)))}
        assert equal_up_to_renaming(expected, actual)
        actual["x3"] = sp.Derivative(f1(t), t)
        assert not equal_up_to_renaming(expected, actual)

    def test_same_span(self):
        assert same_span([x1, x4], [x1 + x4, x1**3])
        assert not same_span([x1, x4], [x1, x2])


@pytest.mark.integration
class TestCorpusFixtures:
    """Test suite for the bundled worked examples."""

    @pytest.mark.parametrize(
        "name",
        [pytest.param(f.name, marks=pytest.mark.slow) if f.slow else f.name for f in FIXTURES],
    )
    def test_fixture_passes(self, toolkit, name):
        result = toolkit.check_fixture(fixture(name))
        assert result.passed, result.mismatches

    @pytest.mark.slow
    @pytest.mark.parametrize("fx", [TVTOL, PVTOL_GALILEAN], ids=lambda f: f.name)
    def test_time_dependent_trivialization(self, toolkit, corpus_dir, fx):
        """Test the sub-connection of a group whose coordinates depend on time."""
        report = toolkit.run("subconnection", str(corpus_dir / fx.file), fx.run_options())
        assert report.error is None
        lambdas = report.transformations["lambda"]
        for key, text in fx.expected["equal"]["lambda"].items():
            assert is_zero(read_expr(lambdas[key]) - read_expr(text)), key
        assert t in read_expr(report.transformations["trivialization"]["eps2"]).free_symbols

    @pytest.mark.slow
    def test_corpus_check_in_threads(self, toolkit):
        """Test that concurrent fixtures keep their own probe sessions."""
        results = toolkit.corpus_check(["hsm", "marino"], workers=2)
        assert [r.name for r in results] == ["hsm", "marino"]
        assert all(r.passed for r in results)
