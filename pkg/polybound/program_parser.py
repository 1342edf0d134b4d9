"""
Reader and printer for the ``.pp`` polynomial-program format.

Example::

    # PP1
    problem pp1;
    minimize 5 x2 + x3 + x1^2 - 2 x1 x2 - 3 x1 x3 + 5 x2 x3 - x3^2 + x1 x2 x3;
    subject to {
        cap: 4 x1 + 3 x2 + x3 <= 20;
        x1 + 2 x2 + x3 >= 1;
    }
    var x1 in [2, 5];
    var x2 in {0.625, 0.6875, ..., 1};
    var x3 in [4, 8] step 0.5;
    const pi = 3.14159;

Statements may come in any order. Products can be written with ``*`` or by
juxtaposition, ``/`` only divides by constants, and ``^`` takes a
non-negative integer literal.
"""

import re
from typing import Dict, List, NamedTuple, Optional

from .polynomial import (
    Constraint,
    Polynomial,
    PolynomialProgram,
    VariableSpec,
    format_coefficient,
)

KEYWORDS = {"minimize", "maximize", "subject", "to", "var", "const", "problem", "in", "step"}
STATEMENT_KEYWORDS = {"minimize", "maximize", "subject", "var", "const", "problem"}

# relative tolerance for "evenly spaced" discrete sets
SPACING_TOL = 1e-9

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<newline>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\.\.\.|<=|>=|[-+*/^()\[\]{},;:=])
    """,
    re.VERBOSE,
)


class ProgramSyntaxError(ValueError):
    """Malformed program source, with the 1-based position of the problem."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(f"{where}{message}")


class FractionalProgramError(ProgramSyntaxError):
    """Division by an expression that is not a constant."""


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    column: int


def tokenize(src: str) -> List[Token]:
    """Split source text into tokens, dropping whitespace and comments."""
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(src):
        match = _TOKEN_RE.match(src, pos)
        if match is None:
            raise ProgramSyntaxError(
                f"unexpected character {src[pos]!r}", line, pos - line_start + 1
            )
        kind = match.lastgroup
        if kind == "newline":
            line, line_start = line + 1, match.end()
        elif kind not in ("ws", "comment"):
            if kind == "name" and match.group() in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, match.group(), line, pos - line_start + 1))
        pos = match.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class ProgramParser:
    """Recursive-descent parser producing a PolynomialProgram."""

    def __init__(self, src: str):
        self.tokens = tokenize(src)
        self.pos = 0
        self.name = ""
        self.objective: Optional[Polynomial] = None
        self.maximize = False
        self.constraints: List[Constraint] = []
        self.variables: Dict[str, VariableSpec] = {}
        # first use of every name inside an expression, for error positions
        self.uses: Dict[str, Token] = {}

    # ----------------------------------------
    # TOKEN STREAM
    # ----------------------------------------

    @property
    def token(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.token
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None, cls=ProgramSyntaxError):
        tok = tok or self.token
        return cls(message, tok.line, tok.column)

    def at(self, text: str) -> bool:
        return self.token.kind in ("op", "keyword") and self.token.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.token.text or "end of input"
            raise self.error(f"expected '{text}', found '{found}'")
        return self.advance()

    def expect_name(self) -> Token:
        if self.token.kind != "name":
            found = self.token.text or "end of input"
            raise self.error(f"expected a name, found '{found}'")
        return self.advance()

    # ----------------------------------------
    # STATEMENTS
    # ----------------------------------------

    def parse(self) -> PolynomialProgram:
        while self.token.kind != "eof":
            tok = self.token
            if self.at("minimize") or self.at("maximize"):
                self.parse_objective()
            elif self.at("subject"):
                self.parse_constraints()
            elif self.at("var"):
                self.parse_variable()
            elif self.at("const"):
                self.parse_const()
            elif self.at("problem"):
                self.advance()
                self.name = self.expect_name().text
                self.expect(";")
            else:
                raise self.error(f"expected a statement, found '{tok.text}'")

        if self.objective is None:
            raise self.error("program has no objective (minimize or maximize)")
        for name, tok in self.uses.items():
            if name not in self.variables:
                raise self.error(f"undeclared variable '{name}'", tok)
        return PolynomialProgram(
            variables=list(self.variables.values()),
            objective=self.objective,
            constraints=self.constraints,
            name=self.name,
            maximize=self.maximize,
        )

    def parse_objective(self):
        tok = self.advance()
        if self.objective is not None:
            raise self.error("a program has exactly one objective", tok)
        expr = self.parse_expr()
        self.expect(";")
        self.maximize = tok.text == "maximize"
        self.objective = -expr if self.maximize else expr

    def parse_constraints(self):
        self.advance()
        self.expect("to")
        if self.at("{"):
            self.advance()
            while not self.at("}"):
                if self.token.kind == "eof":
                    raise self.error("unterminated 'subject to' block")
                self.parse_constraint()
            self.advance()
            return
        while self.token.kind != "eof" and not (
            self.token.kind == "keyword" and self.token.text in STATEMENT_KEYWORDS
        ):
            self.parse_constraint()

    def parse_constraint(self):
        label = ""
        if self.token.kind == "name" and self.peek().kind == "op" and self.peek().text == ":":
            label = self.advance().text
            self.advance()
        lhs = self.parse_expr()
        rel = self.token
        if not (self.at("<=") or self.at(">=") or self.at("=")):
            raise self.error(f"expected '<=', '>=' or '=', found '{rel.text}'")
        self.advance()
        rhs = self.parse_expr()
        self.expect(";")

        diff = lhs - rhs
        bound = -diff.constant_term or 0.0
        self.constraints.append(Constraint(diff + bound, rel.text, bound, label))

    def declare(self, spec: VariableSpec, tok: Token):
        if spec.name in self.variables:
            raise self.error(f"variable '{spec.name}' declared twice", tok)
        self.variables[spec.name] = spec

    def parse_variable(self):
        self.advance()
        tok = self.expect_name()
        self.expect("in")
        try:
            if self.at("["):
                self.advance()
                lo = self.parse_number()
                self.expect(",")
                hi = self.parse_number()
                self.expect("]")
                if self.at("step"):
                    self.advance()
                    step_tok = self.token
                    step = self.parse_number()
                    if step <= 0:
                        raise self.error("step must be positive", step_tok)
                    spec = VariableSpec.discrete(tok.text, lo, hi, step)
                else:
                    spec = VariableSpec.continuous(tok.text, lo, hi)
            elif self.at("{"):
                spec = self.parse_discrete_set(tok.text)
            else:
                raise self.error("expected '[' or '{' after 'in'")
        except ValueError as exc:
            if isinstance(exc, ProgramSyntaxError):
                raise
            raise self.error(str(exc), tok) from None
        self.expect(";")
        self.declare(spec, tok)

    def parse_discrete_set(self, name: str) -> VariableSpec:
        start = self.expect("{")
        values: List[float] = []
        ellipsis_at = None
        while True:
            if self.at("..."):
                if ellipsis_at is not None or len(values) < 2:
                    raise self.error("'...' needs two leading values and may appear once")
                ellipsis_at = len(values)
                self.advance()
            else:
                values.append(self.parse_number())
            if self.at("}"):
                break
            self.expect(",")
        self.advance()

        if ellipsis_at is not None:
            if ellipsis_at == len(values):
                raise self.error("'...' must be followed by a last value", start)
            first, second, last = values[0], values[1], values[-1]
            step = second - first
            count = (last - first) / step if step else -1
            if step <= 0 or abs(count - round(count)) > SPACING_TOL * max(1.0, abs(count)):
                raise self.error(
                    f"set of {name} does not form an increasing progression", start
                )
            values = [first + k * step for k in range(int(round(count)))] + [last]

        values = sorted(values)
        if len(values) == 1:
            return VariableSpec.fixed(name, values[0])
        step = values[1] - values[0]
        for a, b in zip(values, values[1:]):
            if abs((b - a) - step) > SPACING_TOL * max(1.0, abs(step)) or step <= 0:
                raise self.error(f"values of {name} are not evenly spaced", start)
        return VariableSpec.discrete(name, values[0], values[-1], step)

    def parse_const(self):
        self.advance()
        tok = self.expect_name()
        self.expect("=")
        value = self.parse_number()
        self.expect(";")
        self.declare(VariableSpec.fixed(tok.text, value), tok)

    def parse_number(self) -> float:
        sign = 1.0
        while self.at("-") or self.at("+"):
            if self.advance().text == "-":
                sign = -sign
        if self.token.kind != "number":
            found = self.token.text or "end of input"
            raise self.error(f"expected a number, found '{found}'")
        return sign * float(self.advance().text)

    # ----------------------------------------
    # EXPRESSIONS
    # ----------------------------------------

    def parse_expr(self) -> Polynomial:
        negate = False
        if self.at("-") or self.at("+"):
            negate = self.advance().text == "-"
        result = self.parse_term()
        if negate:
            result = -result
        while self.at("+") or self.at("-"):
            op = self.advance().text
            term = self.parse_term()
            result = result + term if op == "+" else result - term
        return result

    def starts_factor(self) -> bool:
        tok = self.token
        return tok.kind in ("number", "name") or (tok.kind == "op" and tok.text == "(")

    def parse_term(self) -> Polynomial:
        result = self.parse_factor()
        while True:
            if self.at("*"):
                self.advance()
                result = result * self.parse_factor()
            elif self.at("/"):
                tok = self.advance()
                divisor = self.parse_factor()
                if not divisor.is_constant:
                    raise self.error(
                        f"division by '{divisor}' is not polynomial", tok, FractionalProgramError
                    )
                if divisor.is_zero:
                    raise self.error("division by zero", tok)
                result = result * (1.0 / divisor.constant_term)
            elif self.starts_factor():
                result = result * self.parse_factor()
            else:
                return result

    def parse_factor(self) -> Polynomial:
        if self.at("-"):
            self.advance()
            return -self.parse_factor()
        base = self.parse_primary()
        if self.at("^"):
            self.advance()
            tok = self.token
            if tok.kind != "number":
                raise self.error("exponent must be a non-negative integer literal")
            value = float(self.advance().text)
            if not value.is_integer():
                raise self.error(f"exponent {tok.text} is not an integer", tok)
            base = base ** int(value)
        return base

    def parse_primary(self) -> Polynomial:
        tok = self.token
        if tok.kind == "number":
            self.advance()
            return Polynomial.constant(float(tok.text))
        if tok.kind == "name":
            self.advance()
            self.uses.setdefault(tok.text, tok)
            return Polynomial.variable(tok.text)
        if self.at("("):
            self.advance()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        found = tok.text or "end of input"
        raise self.error(f"expected an expression, found '{found}'")


def parse_program(src: str) -> PolynomialProgram:
    """
    Parse program source text.

    Raises:
        ProgramSyntaxError: malformed source, uneven discrete set, bad
            exponent or undeclared variable (with line and column)
        FractionalProgramError: division by a non-constant expression
    """
    return ProgramParser(src).parse()


def read_program(path) -> PolynomialProgram:
    """Parse a ``.pp`` file."""
    with open(path, "r", encoding="utf-8") as f:
        return parse_program(f.read())


# ----------------------------------------
# PRINTING
# ----------------------------------------


def _format_bound(value: float) -> str:
    text = format_coefficient(abs(value))
    return f"-{text}" if value < 0 else text


def print_program(pp: PolynomialProgram) -> str:
    """
    Program source that parses back to an equal program.

    Substituted constants are listed as comments since they no longer take
    part in the program.
    """
    lines = []
    if pp.name:
        lines.append(f"problem {pp.name};")
    if pp.maximize:
        lines.append(f"maximize {-pp.objective};")
    else:
        lines.append(f"minimize {pp.objective};")
    if pp.constraints:
        lines.append("subject to {")
        for con in pp.constraints:
            label = f"{con.name}: " if con.name else ""
            lines.append(f"    {label}{con.body} {con.relation} {_format_bound(con.rhs)};")
        lines.append("}")
    for spec in pp.variables:
        lo, hi = _format_bound(spec.lower), _format_bound(spec.upper)
        if spec.kind == "fixed":
            lines.append(f"const {spec.name} = {lo};")
        elif spec.is_discrete:
            lines.append(f"var {spec.name} in [{lo}, {hi}] step {_format_bound(spec.step)};")
        else:
            lines.append(f"var {spec.name} in [{lo}, {hi}];")
    for name, value in pp.constants:
        lines.append(f"# const {name} = {_format_bound(value)} (substituted)")
    return "\n".join(lines) + "\n"

