"""Worked examples shipped with the toolkit and the values their reports must contain.

Expressions are compared with exact zero tests, never as strings. Flat outputs are only
determined up to reparametrisation and are compared by span. Fundamental functions of a
reduction carry an arbitrary nonzero factor in t, and explicit solutions an arbitrary naming
of their functions, so those comparisons allow exactly that freedom.
"""

from dataclasses import dataclass, field
from itertools import permutations
from typing import Any

import sympy as sp
from sympy.core.function import AppliedUndef

from errors import Inconclusive, ToolkitError
from exprcore import arbitrary_functions, diff, is_zero, normalize
from linalg import generic_rank
from models import Report
from system_file import read_expr
from tasks import RunOptions


@dataclass
class Fixture:
    name: str
    file: str  # relative to the corpus directory
    verb: str
    expected: dict[str, Any] = field(default_factory=dict)
    options: dict[str, Any] = field(default_factory=dict)  # RunOptions overrides
    slow: bool = False

    def run_options(self) -> RunOptions:
        return RunOptions(**self.options)


HSM = Fixture(
    name="hsm",
    file="hsm.sys",
    verb="sfl",
    expected={
        "verdicts": {"sfl": True},
        "refined_type": {"sfl": [[3, 0], [5, 2, 2], [7, 4, 5], [8, 8]]},
        "signatures": {"kappa": "<0,1,1>"},
        "equal": {
            "contact": {
                "z1": "x4",
                "z1_1": "x5 + x4**3 - x1**10",
                "z1_2": "u2 + 3*x4**2*(x5 + x4**3 - x1**10) - 10*x1**9*sin(x2)",
                "z2": "x1",
                "z2_1": "sin(x2)",
                "z2_2": "cos(x2)*sin(x3)",
                "z2_3": "-sin(x2)*sin(x3)**2 + (x4**3 + u1)*cos(x2)*cos(x3)",
            }
        },
    },
)

CHARLET = Fixture(
    name="charlet",
    file="charlet.sys",
    verb="cascade",
    expected={
        "verdicts": {
            "control admissible": True,
            "relative goursat": True,
            "quotient sfl": True,
            "trivialization": True,
            "reduced sfl": True,
            "prolonged sfl": True,
            "augmented sfl": True,
            "cascade": True,
        },
        "signatures": {
            "relative": "<1,1>",
            "kappa": "<1,1>",
            "kappa_bar": "<0,1>",
            "kappa_prime": "<0,1,1>",
        },
        "equal": {
            "lambda": {"eps": "z*(1 - w2)"},
            "compensator": {"u1": "y1", "u2": "W1"},
        },
        "plan": {"mode": "exact", "orders": {"w": 3}, "nu_prime": "<0,0,1>", "k_bar": 2},
        "flat_outputs": ["x1", "x4"],
        "renamed": {
            "solution": {
                "x1": "f(t)",
                "x2": "D(f,1)(t)",
                "x3": "D(h,1)(t)/(1 - D(f,2)(t))",
                "x4": "h(t)",
                "u1": "D(f,2)(t)",
                "u2": "D(h,2)(t)/(1 - D(f,2)(t)) + D(h,1)(t)*D(f,3)(t)/(1 - D(f,2)(t))**2",
            }
        },
    },
)

MARINO = Fixture(
    name="marino",
    file="marino.sys",
    verb="quotient",
    expected={
        "verdicts": {"control admissible": True, "quotient sfl": True},
        "equal": {
            "quotient": {
                "q1'": "-(q1*q2*q4 + q1**2 - q2 - q4)",
                "q2'": "-(q2**2*q4 + q1*q2 - v1)",
                "q3'": "q4",
                "q4'": "v2",
            }
        },
    },
)

FOUR_INPUT = Fixture(
    name="four-input",
    file="four_input.sys",
    verb="cascade",
    expected={
        "verdicts": {"reduced sfl": True, "prolonged sfl": True},
        "signatures": {
            "kappa": "<1,2,1>",
            "kappa_bar": "<0,0,1,1>",
            "kappa_prime": "<0,0,1,1,0,1,0,1>",
        },
        "plan": {
            "mode": "exact",
            "orders": {"w1": 8, "w2": 6},
            "nu_prime": "<0,0,0,0,0,1,0,1>",
            "dimensions_ok": True,
        },
        "scaled": {
            "reduced fundamental": {
                "zbar1": "D(f2,3)(t)/D(f1,3)(t)*(D(f1,2)(t)*z2 - eps2) + eps3 - D(f2,2)(t)*z2",
                "zbar2": "eps1 - D(f1,4)(t)*z1 + D(f1,3)(t)*z1_1 - D(f1,2)(t)*z1_2",
            }
        },
    },
    slow=True,
)

TVTOL = Fixture(
    name="tvtol",
    file="tvtol.sys",
    verb="cascade",
    expected={
        "verdicts": {"control admissible": True, "quotient sfl": True, "cascade": True},
        "signatures": {"kappa_bar": "<0,0,0,1>", "kappa_prime": "<0,0,0,1,0,1>"},
        "equal": {
            "quotient": {"q1'": "v2*q2 + v1 - 1", "q2'": "q3", "q3'": "v2"},
            "lambda": {
                "eps1": "w2*(w**2 + 1) - w*(z1 + 1)",
                "eps2": "1 - t*(w2*(w**2 + 1) - w*(z1 + 1))",
                "eps3": "z",
            },
            "compensator": {"u1": "W1", "u2": "y1 + x1*x2*W1"},
        },
        "plan": {"mode": "bound", "orders": {"w": 6}, "refined": True},
        "flat_outputs": ["x1", "x5"],
    },
    slow=True,
)

PVTOL_GALILEAN = Fixture(
    name="pvtol-galilean",
    file="pvtol_galilean.sys",
    verb="cascade",
    expected={
        "verdicts": {
            "control admissible": True,
            "relative goursat": True,
            "reduced sfl": True,
            "prolonged sfl": True,
            "augmented sfl": True,
        },
        "signatures": {
            "relative": "<1,1>",
            "kappa_bar": "<0,0,0,1>",
            "bound nu'": "<0,0,0,0,0,0,0,0,1>",
            "kappa_prime": "<0,0,0,1,0,1>",
        },
        "equal": {
            "lambda": {
                "eps1": "-((n1 + 1)*sin(m) - h*m2)/cos(m)",
                "eps2": "t*((n1 + 1)*sin(m) - h*m2)/cos(m)",
                "eps3": "n",
            },
            "compensator": {"u1": "W1", "u2": "y1"},
        },
        "plan": {"mode": "bound", "orders": {"m": 6}, "refined": True, "k_bar": 4},
    },
    slow=True,
)

PVTOL_SUPPLIED_MAP = Fixture(
    name="pvtol-map",
    file="pvtol.sys",
    verb="subconnection",
    expected={
        "verdicts": {"trivialization": True},
        "signatures": {"kappa": "<0,2>"},
        "equal": {
            "lambda": {
                "eps1": "-(1 + z1)/w1",
                "eps2": "(w1*(z - w1) + w*(1 + z1))/w1",
            },
            "trivialization": {
                "w": "x - h*sin(theta)",
                "w2": "(h*theta1**2 - u1)*sin(theta)",
                "eps1": "1 - cot(theta)",
            },
        },
    },
)

PVTOL = Fixture(
    name="pvtol",
    file="pvtol.sys",
    verb="cascade",
    expected={
        "verdicts": {"trivialization": True, "reduced sfl": True, "augmented sfl": True},
        "signatures": {"kappa_bar": "<0,0,0,1>", "kappa_prime": "<0,0,0,2>"},
        "equal": {"compensator": {"u1": "h*theta1**2 - y1/sin(theta)", "u2": "W1"}},
        "plan": {"orders": {"w": 4}},
        "flat_outputs": ["x - h*sin(theta)", "z + h*cos(theta)"],
    },
    slow=True,
)

FIXTURES = [HSM, CHARLET, MARINO, FOUR_INPUT, TVTOL, PVTOL_GALILEAN, PVTOL_SUPPLIED_MAP, PVTOL]


def fixture(name: str) -> Fixture:
    for f in FIXTURES:
        if f.name == name:
            return f
    raise KeyError(name)


def _sections(report: Report) -> dict[str, dict[str, str]]:
    sections = dict(report.transformations)
    sections.update(report.systems)
    if report.compensator is not None:
        sections["compensator"] = report.compensator
    if report.solution is not None:
        sections["solution"] = report.solution
    return sections


def same_span(expected: list[sp.Expr], actual: list[sp.Expr]) -> bool:
    """Both lists are independent and each is a function of the other"""
    symbols = sorted(
        set().union(*(e.free_symbols for e in expected + actual)), key=sp.default_sort_key
    )
    grads = [[diff(e, s) for s in symbols] for e in expected + actual]
    n = len(expected)
    return (
        len(actual) == n
        and generic_rank(grads[:n], len(symbols)) == n
        and generic_rank(grads, len(symbols)) == n
    )


def proportional_in_time(a: sp.Expr, b: sp.Expr) -> bool:
    """a = c(t) b for a nonzero factor c depending on t alone"""
    if is_zero(b):
        return is_zero(a)
    ratio = normalize(a / b)
    if is_zero(ratio):
        return False
    return all(is_zero(diff(ratio, s)) for s in ratio.free_symbols - {sp.Symbol("t")})


def equal_up_to_renaming(expected: dict[str, sp.Expr], actual: dict[str, sp.Expr]) -> bool:
    """Entrywise equality after some bijective renaming of the arbitrary functions"""
    ours = sorted(set().union(*map(arbitrary_functions, expected.values())), key=str)
    theirs = sorted(set().union(*map(arbitrary_functions, actual.values())), key=str)
    if len(ours) != len(theirs):
        return False
    for image in permutations(theirs):
        rename = dict(zip(ours, image, strict=True))

        def renamed(e: sp.Expr) -> sp.Expr:
            return e.replace(
                lambda a: isinstance(a, AppliedUndef) and a.func in rename,
                lambda a: rename[a.func](*a.args),
            )

        if all(is_zero(renamed(expected[k]) - actual[k]) for k in expected):
            return True
    return False


def compare(fx: Fixture, report: Report) -> list[str]:
    """Differences between a report and a fixture's expected values"""
    expected = fx.expected
    mismatches = []
    if report.error:
        mismatches.append(f"run failed: {report.error}")
    for name, holds in expected.get("verdicts", {}).items():
        verdict = report.verdict(name)
        if verdict is None or verdict.holds != holds:
            found = None if verdict is None else verdict.holds
            mismatches.append(f"verdict {name}: expected {holds}, got {found}")
    for name, lists in expected.get("refined_type", {}).items():
        verdict = report.verdict(name)
        if verdict is None or verdict.refined_type != lists:
            found = None if verdict is None else verdict.refined_type
            mismatches.append(f"refined type of {name}: expected {lists}, got {found}")
    for key, value in expected.get("signatures", {}).items():
        if report.signatures.get(key) != value:
            found = report.signatures.get(key)
            mismatches.append(f"signature {key}: expected {value}, got {found}")
    sections = _sections(report)
    tests = (
        ("equal", lambda a, b: is_zero(a - b)),
        ("scaled", proportional_in_time),
    )
    for kind, test in tests:
        for section, entries in expected.get(kind, {}).items():
            found = sections.get(section, {})
            for key, text in entries.items():
                if key not in found:
                    mismatches.append(f"{section}[{key}] missing")
                    continue
                try:
                    ok = test(read_expr(text), read_expr(found[key]))
                except Inconclusive:
                    raise
                except ToolkitError as exc:
                    ok = False
                    mismatches.append(f"{section}[{key}]: {exc.condition}")
                if not ok:
                    mismatches.append(f"{section}[{key}]: expected {text}, got {found[key]}")
    plan = expected.get("plan")
    if plan:
        if report.plan is None:
            mismatches.append("no prolongation plan")
        else:
            recorded = report.plan.model_dump()
            for key, value in plan.items():
                if recorded.get(key) != value:
                    mismatches.append(f"plan {key}: expected {value}, got {recorded.get(key)}")
    outputs = expected.get("flat_outputs")
    if outputs:
        actual = [read_expr(e) for e in report.flat_outputs]
        if not same_span([read_expr(e) for e in outputs], actual):
            mismatches.append(f"flat outputs: expected {outputs}, got {report.flat_outputs}")
    for section, entries in expected.get("renamed", {}).items():
        found = sections.get(section, {})
        missing = [k for k in entries if k not in found]
        if missing:
            mismatches.append(f"{section} lacks {missing}")
            continue
        try:
            ours = {k: read_expr(text) for k, text in entries.items()}
            theirs = {k: read_expr(found[k]) for k in entries}
            ok = equal_up_to_renaming(ours, theirs)
        except Inconclusive:
            raise
        except ToolkitError as exc:
            ok = False
            mismatches.append(f"{section}: {exc.condition}")
        if not ok:
            mismatches.append(f"{section}: expected {entries}, got {[found[k] for k in entries]}")
    return mismatches
