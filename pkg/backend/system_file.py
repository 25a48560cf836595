"""Line-oriented system description files.

A file declares a chart, the drift equations and, optionally, a symmetry algebra with its
invariants and group coordinates, a contact sub-connection, a supplied trivialization map,
first-integral candidates and task options::

    system charlet
    states x1 x2 x3 x4
    controls u1 u2
    dynamics
      x1' = x2
      ...
    end
    symmetry
      X1 = x4: 1
    end

Expressions use SymPy syntax (``^`` is read as a power). The k-th derivative of a declared
arbitrary function f is written ``D(f,k)(t)``.
"""

import logging
import re
from dataclasses import dataclass, field
from tokenize import TokenError

import sympy as sp
from sympy.core.function import AppliedUndef, UndefinedFunction
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations
from sympy.printing.str import StrPrinter

from errors import ParseError
from flags import Signature
from geometry import ControlSystem
from goursat import jet_name
from symmetry import SubConnection, SymmetryAlgebra, build_subconnection

logger = logging.getLogger(__name__)

TRANSFORMATIONS = standard_transformations + (convert_xor,)

# Names an expression may use besides declared symbols
BUILTINS = {
    name: getattr(sp, name)
    for name in (
        "Symbol",
        "Function",
        "Integer",
        "Rational",
        "Float",
        "sin",
        "cos",
        "tan",
        "cot",
        "sec",
        "csc",
        "exp",
        "sqrt",
        "pi",
    )
}

BLOCKS = (
    "dynamics",
    "symmetry",
    "invariants",
    "epsilon",
    "subconnection",
    "map",
    "candidates",
    "options",
)
LISTS = ("constants", "functions", "states", "controls", "names")


class ExprPrinter(StrPrinter):
    """sstr that prints arbitrary-function jets as D(f,k)(t)"""

    def _print_Derivative(self, expr):
        inner = expr.expr
        if isinstance(inner, AppliedUndef) and len(inner.args) == 1:
            variables = set(expr.variables)
            if variables == {inner.args[0]}:
                return f"D({inner.func.__name__},{expr.derivative_count})({inner.args[0]})"
        return super()._print_Derivative(expr)


def format_expr(expr) -> str:
    """Print an expression in the surface syntax read back by the parser"""
    return ExprPrinter().doprint(sp.sympify(expr))


def split_names(text: str) -> list[str]:
    return [s for s in re.split(r"[\s,]+", text.strip()) if s]


@dataclass
class SystemFile:
    """Parsed contents of a system description file"""

    name: str = "system"
    path: str | None = None
    time: str = "t"
    constants: list[str] = field(default_factory=list)
    functions: list[str] = field(default_factory=list)  # arbitrary functions of time
    states: list[str] = field(default_factory=list)
    controls: list[str] = field(default_factory=list)
    dynamics: dict[str, sp.Expr] = field(default_factory=dict)  # state -> drift
    generators: dict[str, dict[str, sp.Expr]] = field(default_factory=dict)
    invariants: dict[str, sp.Expr] = field(default_factory=dict)  # quotient name -> function
    epsilon: dict[str, sp.Expr] = field(default_factory=dict)  # group name -> function on M
    names: list[str] = field(default_factory=list)  # contact variable names, ascending order
    jets: dict[str, int] = field(default_factory=dict)  # sub-connection variable -> order
    group: list[str] = field(default_factory=list)
    lambdas: dict[str, sp.Expr] = field(default_factory=dict)
    map: dict[str, sp.Expr] = field(default_factory=dict)  # trivialization components
    candidates: list[sp.Expr] = field(default_factory=list)
    options: dict[str, str] = field(default_factory=dict)

    @property
    def has_system(self) -> bool:
        return bool(self.states)

    @property
    def has_symmetry(self) -> bool:
        return bool(self.generators)

    @property
    def has_subconnection(self) -> bool:
        return bool(self.jets)

    def system(self) -> ControlSystem:
        if not self.has_system:
            raise ValueError(f"{self.name} declares no control system")
        return ControlSystem.from_equations(
            [sp.Symbol(x) for x in self.states],
            [sp.Symbol(u) for u in self.controls],
            [self.dynamics[x] for x in self.states],
            time=sp.Symbol(self.time),
            name=self.name,
            constants=[sp.Symbol(c) for c in self.constants],
        )

    def symmetry_algebra(self, C: ControlSystem) -> SymmetryAlgebra | None:
        if not self.has_symmetry:
            return None
        fields = [
            C.chart.field({sp.Symbol(k): v for k, v in components.items()})
            for components in self.generators.values()
        ]
        return SymmetryAlgebra(fields, list(self.generators))

    def jet_names(self) -> list[str]:
        """Sub-connection variables in ascending chain order"""
        return sorted(self.jets, key=self.jets.get)

    def subconnection(self) -> SubConnection:
        if not self.has_subconnection:
            raise ValueError(f"{self.name} declares no sub-connection")
        names = self.jet_names()
        return build_subconnection(
            Signature.from_orders(self.jets[v] for v in names),
            names,
            self.group,
            [self.lambdas[g] for g in self.group],
            [sp.Symbol(c) for c in self.constants],
            name=f"{self.name}:H_G",
        )

    def option(self, key: str, default: str | None = None) -> str | None:
        return self.options.get(key, default)

    def split(self) -> list[str] | None:
        value = self.option("split")
        return split_names(value) if value else None

    def int_option(self, key: str) -> int | None:
        value = self.option(key)
        return int(value) if value is not None else None

    def flag(self, key: str) -> bool:
        return (self.option(key) or "").lower() in ("1", "true", "yes", "on")


class SystemFileParser:
    """Reads system description files into SystemFile records"""

    def read_file(self, file_path: str) -> str:
        """Read content from file with UTF-8 encoding"""
        try:
            with open(file_path, encoding="utf-8") as file:
                return file.read()
        except UnicodeDecodeError:
            # If UTF-8 fails, try with error handling
            with open(file_path, encoding="utf-8", errors="ignore") as file:
                return file.read()

    def parse_file(self, file_path: str) -> SystemFile:
        return self.parse(self.read_file(file_path), file_path)

    def parse(self, text: str, path: str | None = None) -> SystemFile:
        """Parse the text of a system file.

        Raises:
            ParseError: on malformed lines, undeclared symbols or missing equations
        """
        spec = SystemFile(path=path)
        block: str | None = None
        opened = 0
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            indent = len(line) - len(line.lstrip())
            line = line.strip()
            if block is None:
                head, _, rest = line.partition(" ")
                if head in BLOCKS:
                    if rest.strip():
                        raise ParseError(f"unexpected text after {head}", number, len(head) + 2)
                    block, opened = head, number
                elif head == "system":
                    spec.name = rest.strip() or spec.name
                elif head == "time":
                    spec.time = rest.strip()
                elif head in LISTS:
                    getattr(spec, head).extend(split_names(rest))
                else:
                    raise ParseError(f"unknown directive {head!r}", number, indent + 1)
            elif line == "end":
                block = None
            else:
                self._block_line(spec, block, line, number, indent)
        if block is not None:
            raise ParseError(f"block {block} is not closed", opened, 1)
        self._check(spec)
        logger.info("parsed %s from %s", spec.name, path or "text")
        return spec

    # Namespaces

    def _names(self, spec: SystemFile, jets: bool = False) -> dict:
        symbols = [spec.time] + spec.constants
        if jets:
            for v, order in spec.jets.items():
                symbols += [jet_name(v, s) for s in range(order + 1)]
            symbols += spec.group
        else:
            symbols += spec.states + spec.controls
        names = {s: sp.Symbol(s) for s in symbols}
        names.update({f: sp.Function(f) for f in spec.functions})
        names["D"] = _jet_operator
        return names

    def expression(self, text: str, names: dict, number: int = 0, column: int = 1) -> sp.Expr:
        """Parse one expression against the declared names.

        Raises:
            ParseError: on syntax errors, undeclared symbols or inexact numbers
        """
        try:
            expr = parse_expr(
                text,
                local_dict=dict(names),
                global_dict={"__builtins__": {}, **BUILTINS},
                transformations=TRANSFORMATIONS,
            )
        except SyntaxError as exc:
            offset = (exc.offset or 1) - 1
            raise ParseError(f"invalid expression {text!r}", number, column + offset) from exc
        except (TokenError, TypeError, ValueError, NameError, AttributeError) as exc:
            raise ParseError(f"invalid expression {text!r}: {exc}", number, column) from exc
        expr = sp.sympify(expr)
        declared = {v for v in names.values() if isinstance(v, sp.Symbol)}
        functions = {v for v in names.values() if isinstance(v, UndefinedFunction)}
        unknown = sorted(s.name for s in expr.free_symbols - declared)
        unknown += sorted(
            {a.func.__name__ for a in expr.atoms(AppliedUndef) if a.func not in functions}
        )
        if unknown:
            match = re.search(rf"\b{re.escape(unknown[0])}\b", text)
            where = column + (match.start() if match else 0)
            raise ParseError(f"undeclared symbol {unknown[0]!r}", number, where)
        if expr.atoms(sp.Float):
            raise ParseError(f"inexact number in {text!r}; write rationals as p/q", number, column)
        return expr

    def _assignment(self, line: str, number: int, indent: int) -> tuple[str, str, int]:
        if "=" not in line:
            raise ParseError("expected 'name = expression'", number, indent + 1)
        lhs, rhs = line.split("=", 1)
        column = indent + len(lhs) + 2 + (len(rhs) - len(rhs.lstrip()))
        return lhs.strip(), rhs.strip(), column

    def _block_line(self, spec: SystemFile, block: str, line: str, number: int, indent: int):
        if block == "options":
            key, value, _ = self._assignment(line, number, indent)
            spec.options[key] = value
            return
        if block == "candidates":
            spec.candidates.append(self.expression(line, self._names(spec), number, indent + 1))
            return
        if block == "subconnection":
            self._subconnection_line(spec, line, number, indent)
            return
        lhs, rhs, column = self._assignment(line, number, indent)
        names = self._names(spec)
        if block == "dynamics":
            state = lhs.rstrip("'")
            if not lhs.endswith("'") or state not in spec.states:
                raise ParseError(f"{lhs!r} is not the derivative of a state", number, indent + 1)
            if state in spec.dynamics:
                raise ParseError(f"second equation for {state}", number, indent + 1)
            spec.dynamics[state] = self.expression(rhs, names, number, column)
        elif block == "symmetry":
            spec.generators[lhs] = self._generator(rhs, names, number, column)
        elif block == "invariants":
            spec.invariants[lhs] = self.expression(rhs, names, number, column)
        elif block == "epsilon":
            spec.epsilon[lhs] = self.expression(rhs, names, number, column)
        elif block == "map":
            spec.map[lhs] = self.expression(rhs, names, number, column)

    def _generator(self, text: str, names: dict, number: int, column: int) -> dict:
        """Components written as 'x: expr; y: expr'"""
        components = {}
        offset = 0
        for part in text.split(";"):
            if part.strip():
                coordinate, sep, value = part.partition(":")
                coordinate = coordinate.strip()
                if not sep or not isinstance(names.get(coordinate), sp.Symbol):
                    raise ParseError(f"bad generator component {part.strip()!r}", number, column)
                lead = len(value) - len(value.lstrip())
                start = column + offset + part.index(":") + 1 + lead
                components[coordinate] = self.expression(value.strip(), names, number, start)
            offset += len(part) + 1
        return components

    def _subconnection_line(self, spec: SystemFile, line: str, number: int, indent: int):
        head, _, rest = line.partition(" ")
        if head == "jets":
            for item in split_names(rest):
                variable, sep, order = item.partition(":")
                if not sep or not order.isdigit() or int(order) < 1:
                    raise ParseError(f"bad jet declaration {item!r}", number, indent + 1)
                spec.jets[variable] = int(order)
        elif head == "group":
            spec.group.extend(split_names(rest))
        else:
            lhs, rhs, column = self._assignment(line, number, indent)
            group = lhs.rstrip("'")
            if not lhs.endswith("'") or group not in spec.group:
                raise ParseError(f"{lhs!r} is not a group coordinate rate", number, indent + 1)
            names = self._names(spec, jets=True)
            spec.lambdas[group] = self.expression(rhs, names, number, column)

    def _check(self, spec: SystemFile):
        missing = [x for x in spec.states if x not in spec.dynamics]
        if missing:
            raise ParseError(f"no equation for {', '.join(missing)}")
        declared = [spec.time] + spec.constants + spec.states + spec.controls + spec.functions
        if len(set(declared)) != len(declared):
            raise ParseError("a name is declared twice")
        if spec.has_subconnection:
            absent = [g for g in spec.group if g not in spec.lambdas]
            if absent:
                raise ParseError(f"no rate for group coordinate {', '.join(absent)}")


def _jet_operator(F, k):
    """D(f,k)(t): the k-th derivative of f at t"""
    k = int(k)

    def at(arg):
        return F(arg) if k == 0 else sp.Derivative(F(arg), (arg, k))

    return at


def read_expr(text: str) -> sp.Expr:
    """Parse a printed expression, declaring every name it uses.

    Names applied to arguments, or passed to D, are arbitrary functions; the rest are symbols.
    """
    reserved = set(BUILTINS) | {"D"}
    called = set(re.findall(r"\b([A-Za-z_]\w*)\(", text)) | set(re.findall(r"\bD\((\w+)", text))
    identifiers = set(re.findall(r"\b[A-Za-z_]\w*", text)) - reserved
    names = {n: sp.Symbol(n) for n in identifiers - called}
    names.update({n: sp.Function(n) for n in (called & identifiers)})
    names["D"] = _jet_operator
    return _reader.expression(text, names)


_reader = SystemFileParser()
