"""The .pde system-description language: parser, validation, pretty-printer.

Line-oriented sections with ``#`` comments; a section header starts at column
zero, continuation lines are indented.  Expressions use conventional infix
with ``^`` powers, rationals written with ``/``, jets in suffix notation
(``u_txx``), and function application ``H(x)``.  The exact grammar is
documented in docs/pde_format.md; parse/print round-trip on normalized files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import sympy

from .coverings import ConservationLaw
from .exprs import Constant, Context, Expr, ExprError, FunctionSymbol, normalize
from .operators import TotalDiffOp
from .printer import format_expr, format_operator
from .systems import KovalevskayaData, MultiIndex, PdeSystem
from .variational import Lagrangian, Symmetry


class SyslangError(ValueError):
    """Syntax or validation error with a source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, col {col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


@dataclass
class SystemFile:
    """A parsed and validated .pde file."""

    context: Context
    system: PdeSystem
    decl_constants: list[Constant] = field(default_factory=list)
    decl_functions: list[FunctionSymbol] = field(default_factory=list)
    positive_jets: list[str] = field(default_factory=list)
    nonlocal_vars: list[str] = field(default_factory=list)
    lagrangian: Lagrangian | None = None
    operators: dict[str, TotalDiffOp] = field(default_factory=dict)
    symmetries: dict[str, Symmetry] = field(default_factory=dict)
    conservation_laws: dict[str, ConservationLaw] = field(default_factory=dict)
    kovalevskaya_hints: list[tuple[str, int]] = field(default_factory=list)
    name: str = ""

    def operator(self, name: str) -> TotalDiffOp:
        """Named operator; ``identity`` is built in for square systems."""
        if name in self.operators:
            return self.operators[name]
        if name == "identity":
            return TotalDiffOp.identity(self.context, len(self.context.dependent))
        raise SyslangError(f"no operator named {name!r} in this file")


# -- tokenizer ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<name>[A-Za-z][A-Za-z0-9]*'*(?:_[A-Za-z0-9]+)?)"
    r"|(?P<num>\d+)"
    r"|(?P<op>[-+*/^(),;=@\[\]])"
    r"|(?P<ws>\s+)"
)


@dataclass(frozen=True)
class Token:
    kind: str  # name | num | op | end
    text: str
    line: int
    col: int


def _tokenize(text: str, line: int, col0: int) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SyslangError(f"unexpected character {text[pos]!r}", line, col0 + pos + 1)
        if m.lastgroup != "ws":
            out.append(Token(m.lastgroup, m.group(), line, col0 + pos + 1))
        pos = m.end()
    return out


class _TokenStream:
    def __init__(self, tokens: Sequence[Token], end_line: int):
        self.tokens = list(tokens)
        self.pos = 0
        self.end_line = end_line

    def peek(self) -> Token:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return Token("end", "", self.end_line, 0)

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise SyslangError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return tok

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.tokens)


# -- expression parsing ---------------------------------------------------------


class _ExprParser:
    """Precedence-climbing parser over a declared context.

    In operator mode, names ``D_<suffix>`` become formal total-derivative
    atoms; a literal then denotes a sum of coefficient*D_alpha terms.
    """

    def __init__(self, ctx: Context, stream: _TokenStream, operator_mode: bool = False):
        self.ctx = ctx
        self.stream = stream
        self.operator_mode = operator_mode
        self.d_atoms: dict[sympy.Symbol, MultiIndex] = {}

    def parse_expr(self) -> Expr:
        return self._sum()

    def _sum(self) -> Expr:
        acc = self._product()
        while self.stream.peek().text in ("+", "-"):
            op = self.stream.next().text
            rhs = self._product()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def _product(self) -> Expr:
        acc = self._factor()
        while self.stream.peek().text in ("*", "/"):
            tok = self.stream.next()
            rhs = self._factor()
            if tok.text == "*":
                acc = acc * rhs
            else:
                if rhs == 0:
                    raise SyslangError("division by zero", tok.line, tok.col)
                acc = acc / rhs
        return acc

    def _factor(self) -> Expr:
        tok = self.stream.peek()
        if tok.text == "-":
            self.stream.next()
            return -self._factor()
        if tok.text == "+":
            self.stream.next()
            return self._factor()
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        if self.stream.peek().text == "^":
            self.stream.next()
            exponent = self._factor()  # right associative, unary minus allowed
            return base**exponent
        return base

    def _atom(self) -> Expr:
        tok = self.stream.next()
        if tok.kind == "num":
            return sympy.Integer(int(tok.text))
        if tok.text == "(":
            inner = self._sum()
            self.stream.expect(")")
            return inner
        if tok.kind == "name":
            if self.stream.peek().text == "(":
                return self._call(tok)
            return self._name(tok)
        raise SyslangError(f"unexpected token {tok.text or 'end of input'!r}", tok.line, tok.col)

    def _call(self, tok: Token) -> Expr:
        if tok.text not in self.ctx.functions:
            raise SyslangError(f"undeclared function {tok.text!r}", tok.line, tok.col)
        self.stream.expect("(")
        args = [self._sum()]
        while self.stream.peek().text == ",":
            self.stream.next()
            args.append(self._sum())
        self.stream.expect(")")
        expected = self.ctx.functions[tok.text].arity
        if len(args) != expected:
            raise SyslangError(
                f"function {tok.text!r} takes {expected} argument(s), got {len(args)}", tok.line, tok.col
            )
        return self.ctx.func(tok.text)(*args)

    def _name(self, tok: Token) -> Expr:
        name = tok.text
        if self.operator_mode and name.startswith("D_"):
            suffix = name[2:]
            alpha = [0] * len(self.ctx.independent)
            for letter in suffix:
                if letter not in self.ctx.independent:
                    raise SyslangError(
                        f"total-derivative suffix letter {letter!r} is not an independent variable",
                        tok.line,
                        tok.col,
                    )
                alpha[self.ctx.independent.index(letter)] += 1
            sym = sympy.Symbol(f"@D_{suffix}")
            self.d_atoms[sym] = MultiIndex(alpha)
            return sym
        try:
            return self.ctx.symbol(name)
        except ExprError as exc:
            raise SyslangError(str(exc), tok.line, tok.col) from None


def parse_expression(ctx: Context, text: str, line: int = 1, col0: int = 0) -> Expr:
    """Parse a single expression in an existing context (used by the CLI)."""
    stream = _TokenStream(_tokenize(text, line, col0), line)
    parser = _ExprParser(ctx, stream)
    expr = parser.parse_expr()
    if not stream.exhausted:
        tok = stream.peek()
        raise SyslangError(f"unexpected token {tok.text!r}", tok.line, tok.col)
    return normalize(expr)


def _operator_from_expr(ctx: Context, e: Expr, d_atoms: dict, line: int) -> dict:
    """Collect an operator entry {MultiIndex: coeff} from an expanded literal."""
    entry: dict[MultiIndex, Expr] = {}
    zero = MultiIndex.zero(len(ctx.independent))
    for term in sympy.Add.make_args(sympy.expand(e)):
        alpha = zero
        coeff = sympy.Integer(1)
        for factor in sympy.Mul.make_args(term):
            base, exp = factor.as_base_exp()
            if base in d_atoms:
                if not exp.is_Integer or int(exp) < 1:
                    raise SyslangError("total-derivative powers must be positive integers", line, 0)
                for _ in range(int(exp)):
                    alpha = alpha + d_atoms[base]
            else:
                coeff *= factor
        if any(s in d_atoms for s in coeff.free_symbols):
            raise SyslangError("operator entries must be sums of coefficient*D terms", line, 0)
        entry[alpha] = entry.get(alpha, sympy.Integer(0)) + coeff
    return entry


# -- file structure --------------------------------------------------------------

_SECTION_RE = re.compile(r"^(?P<kw>[a-z_]+)(?:\s+(?P<name>[A-Za-z][A-Za-z0-9_]*'*))?\s*:(?P<rest>.*)$")

_KNOWN_SECTIONS = {
    "independent",
    "dependent",
    "constants",
    "functions",
    "positive",
    "nonlocal",
    "equations",
    "lagrangian",
    "kovalevskaya",
    "kovalevskaya_hints",
    "operator",
    "symmetry",
    "conservation_law",
}

_NAMED_SECTIONS = {"operator", "symmetry", "conservation_law"}


@dataclass
class _RawSection:
    keyword: str
    name: str | None
    chunks: list[tuple[str, int, int]]  # (text, line, col0)
    line: int


def _split_sections(text: str) -> list[_RawSection]:
    sections: list[_RawSection] = []
    current: _RawSection | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line[0].isspace():
            if current is None:
                raise SyslangError("continuation line outside any section", lineno, 1)
            stripped = line.lstrip()
            current.chunks.append((stripped, lineno, len(line) - len(stripped)))
            continue
        m = _SECTION_RE.match(line)
        if m is None:
            raise SyslangError("expected a section header like 'equations:'", lineno, 1)
        keyword, name, rest = m.group("kw"), m.group("name"), m.group("rest")
        if keyword not in _KNOWN_SECTIONS:
            raise SyslangError(f"unknown section {keyword!r}", lineno, 1)
        if (name is not None) != (keyword in _NAMED_SECTIONS):
            need = "requires" if keyword in _NAMED_SECTIONS else "does not take"
            raise SyslangError(f"section {keyword!r} {need} a name", lineno, 1)
        current = _RawSection(keyword, name, [], lineno)
        if rest.strip():
            col0 = len(line) - len(rest) + (len(rest) - len(rest.lstrip()))
            current.chunks.append((rest.strip(), lineno, col0))
        sections.append(current)
    return sections


def _section_tokens(section: _RawSection) -> list[list[Token]]:
    return [_tokenize(text, line, col0) for text, line, col0 in section.chunks]


def _names_with_flags(section: _RawSection) -> list[tuple[str, list[str], int, int]]:
    """Parse 'name flag flag, name flag' style declaration lists."""
    out = []
    for tokens in _section_tokens(section):
        group: list[Token] = []
        for tok in tokens + [Token("op", ",", tok_line(tokens, section), 0)]:
            if tok.text == ",":
                if group:
                    out.append((group[0].text, [t.text for t in group[1:]], group[0].line, group[0].col))
                    group = []
                continue
            if tok.kind != "name" and tok.text != "(" and tok.text != ")" and tok.kind != "num":
                raise SyslangError(f"unexpected token {tok.text!r} in declaration", tok.line, tok.col)
            group.append(tok)
    return out


def tok_line(tokens: Sequence[Token], section: _RawSection) -> int:
    return tokens[-1].line if tokens else section.line


def parse(text: str, name: str = "") -> SystemFile:
    """Parse and validate a complete .pde file."""
    sections = _split_sections(text)
    by_kw: dict[str, list[_RawSection]] = {}
    for s in sections:
        by_kw.setdefault(s.keyword, []).append(s)
    for kw in ("independent", "dependent", "constants", "functions", "positive", "nonlocal",
               "equations", "lagrangian", "kovalevskaya", "kovalevskaya_hints"):
        if len(by_kw.get(kw, [])) > 1:
            dup = by_kw[kw][1]
            raise SyslangError(f"duplicate section {kw!r}", dup.line, 1)

    if "independent" not in by_kw:
        raise SyslangError("missing 'independent:' section", 1, 1)
    if "dependent" not in by_kw:
        raise SyslangError("missing 'dependent:' section", 1, 1)

    def decl_error(exc: ExprError, line: int, col: int):
        raise SyslangError(str(exc), line, col) from None

    ctx = Context([], [])
    for nm, flags, line, col in _names_with_flags(by_kw["independent"][0]):
        if flags:
            raise SyslangError("independent variables take no flags", line, col)
        try:
            ctx.declare_independent(nm)
        except ExprError as exc:
            decl_error(exc, line, col)
    for nm, flags, line, col in _names_with_flags(by_kw["dependent"][0]):
        if flags:
            raise SyslangError("dependent variables take no flags", line, col)
        try:
            ctx.declare_dependent(nm)
        except ExprError as exc:
            decl_error(exc, line, col)

    decl_constants: list[Constant] = []
    for nm, flags, line, col in _names_with_flags(by_kw.get("constants", [_RawSection("constants", None, [], 0)])[0]):
        positive = False
        for flag in flags:
            if flag != "positive":
                raise SyslangError(f"unknown constant flag {flag!r}", line, col)
            positive = True
        const = Constant(nm, positive=positive)
        try:
            ctx.declare_constant(const)
        except ExprError as exc:
            decl_error(exc, line, col)
        decl_constants.append(const)

    decl_functions: list[FunctionSymbol] = []
    for nm, flags, line, col in _names_with_flags(by_kw.get("functions", [_RawSection("functions", None, [], 0)])[0]):
        arity = 1
        if flags:
            if len(flags) == 3 and flags[0] == "(" and flags[2] == ")" and flags[1].isdigit():
                arity = int(flags[1])
            else:
                raise SyslangError("function declarations are 'name' or 'name(arity)'", line, col)
        fsym = FunctionSymbol(nm, arity=arity)
        try:
            ctx.declare_function(fsym)
        except ExprError as exc:
            decl_error(exc, line, col)
        decl_functions.append(fsym)

    positive_jets: list[str] = []
    for nm, flags, line, col in _names_with_flags(by_kw.get("positive", [_RawSection("positive", None, [], 0)])[0]):
        if flags:
            raise SyslangError("positive declarations take bare jet names", line, col)
        try:
            ctx.declare_positive_jet(nm)
        except ExprError as exc:
            decl_error(exc, line, col)
        positive_jets.append(nm)

    nonlocal_vars: list[str] = []
    for nm, flags, line, col in _names_with_flags(by_kw.get("nonlocal", [_RawSection("nonlocal", None, [], 0)])[0]):
        if flags or nm not in ctx.dependent:
            raise SyslangError(f"nonlocal variable {nm!r} must be a declared dependent variable", line, col)
        nonlocal_vars.append(nm)

    def parse_line_expr(tokens: list[Token], operator_mode: bool = False):
        stream = _TokenStream(tokens, tokens[0].line if tokens else 0)
        parser = _ExprParser(ctx, stream, operator_mode=operator_mode)
        expr = parser.parse_expr()
        return expr, parser, stream

    # equations: one per line, LHS = RHS (RHS optional, defaults to 0)
    equations: list[Expr] = []
    for tokens in _section_tokens(by_kw.get("equations", [_RawSection("equations", None, [], 0)])[0]):
        if not tokens:
            continue
        stream = _TokenStream(tokens, tokens[0].line)
        parser = _ExprParser(ctx, stream)
        lhs = parser.parse_expr()
        rhs = sympy.Integer(0)
        if stream.peek().text == "=":
            stream.next()
            rhs = parser.parse_expr()
        if not stream.exhausted:
            tok = stream.peek()
            raise SyslangError(f"unexpected token {tok.text!r}", tok.line, tok.col)
        try:
            equations.append(normalize(lhs - rhs))
        except ExprError as exc:
            decl_error(exc, tokens[0].line, tokens[0].col)

    # lagrangian: all lines joined into a single expression
    lagrangian = None
    if "lagrangian" in by_kw:
        section = by_kw["lagrangian"][0]
        tokens = [t for chunk in _section_tokens(section) for t in chunk]
        if not tokens:
            raise SyslangError("empty lagrangian section", section.line, 1)
        expr, _, stream = parse_line_expr(tokens)
        if not stream.exhausted:
            tok = stream.peek()
            raise SyslangError(f"unexpected token {tok.text!r}", tok.line, tok.col)
        lagrangian = Lagrangian(ctx, expr)

    # kovalevskaya: direction line plus solved equations
    kovalevskaya = None
    if "kovalevskaya" in by_kw:
        section = by_kw["kovalevskaya"][0]
        chunks = _section_tokens(section)
        if not chunks or len(chunks[0]) != 2 or chunks[0][0].text != "direction":
            raise SyslangError("kovalevskaya section must start with 'direction <variable>'", section.line, 1)
        dtok = chunks[0][1]
        if dtok.text not in ctx.independent:
            raise SyslangError(f"unknown direction {dtok.text!r}", dtok.line, dtok.col)
        direction = ctx.independent.index(dtok.text)
        orders: dict[str, int] = {}
        rhs: dict[str, Expr] = {}
        extra: list[tuple[str, MultiIndex, Expr]] = []
        for tokens in chunks[1:]:
            if not tokens:
                continue
            head = tokens[0]
            if head.kind != "name":
                raise SyslangError("expected 'jet = expression'", head.line, head.col)
            try:
                dep, alpha = ctx.parse_jet_name(head.text)
            except ExprError as exc:
                decl_error(exc, head.line, head.col)
            stream = _TokenStream(tokens[1:], head.line)
            stream.expect("=")
            parser = _ExprParser(ctx, stream)
            value = normalize(parser.parse_expr())
            if not stream.exhausted:
                tok = stream.peek()
                raise SyslangError(f"unexpected token {tok.text!r}", tok.line, tok.col)
            alpha = MultiIndex(alpha)
            pure = alpha.order == alpha[direction] and alpha.order >= 1
            if pure and dep not in orders:
                orders[dep] = alpha[direction]
                rhs[dep] = value
            else:
                extra.append((dep, alpha, value))
        try:
            kovalevskaya = KovalevskayaData(direction=direction, orders=orders, rhs=rhs, extra_rules=tuple(extra))
            kovalevskaya.validate(ctx)
        except ExprError as exc:
            decl_error(exc, section.line, 1)

    hints: list[tuple[str, int]] = []
    if "kovalevskaya_hints" in by_kw:
        section = by_kw["kovalevskaya_hints"][0]
        tokens = [t for chunk in _section_tokens(section) for t in chunk]
        stream = _TokenStream(tokens, section.line)
        while not stream.exhausted:
            jet_tok = stream.next()
            if jet_tok.kind != "name":
                raise SyslangError("hints are 'jet @ equation-number' pairs", jet_tok.line, jet_tok.col)
            stream.expect("@")
            num_tok = stream.next()
            if num_tok.kind != "num":
                raise SyslangError("expected an equation number", num_tok.line, num_tok.col)
            hints.append((jet_tok.text, int(num_tok.text)))
            if stream.peek().text == ",":
                stream.next()

    try:
        system = PdeSystem(context=ctx, equations=equations, kovalevskaya=kovalevskaya, name=name)
    except ExprError as exc:
        raise SyslangError(str(exc)) from None

    operators: dict[str, TotalDiffOp] = {}
    symmetries: dict[str, Symmetry] = {}
    laws: dict[str, ConservationLaw] = {}
    for section in sections:
        if section.keyword in _NAMED_SECTIONS:
            bucket = {"operator": operators, "symmetry": symmetries, "conservation_law": laws}[section.keyword]
            if section.name in bucket:
                raise SyslangError(f"duplicate {section.keyword} {section.name!r}", section.line, 1)
        if section.keyword == "operator":
            operators[section.name] = _parse_operator(ctx, section)
        elif section.keyword == "symmetry":
            comps = _parse_expr_list(ctx, section)
            if len(comps) != len(ctx.dependent):
                raise SyslangError(
                    f"symmetry {section.name!r} needs {len(ctx.dependent)} component(s), got {len(comps)}",
                    section.line,
                    1,
                )
            symmetries[section.name] = Symmetry(section.name, tuple(normalize(c) for c in comps))
        elif section.keyword == "conservation_law":
            comps = _parse_expr_list(ctx, section)
            if len(comps) != len(ctx.independent):
                raise SyslangError(
                    f"conservation law {section.name!r} needs {len(ctx.independent)} component(s), got {len(comps)}",
                    section.line,
                    1,
                )
            laws[section.name] = ConservationLaw(section.name, tuple(normalize(c) for c in comps))

    return SystemFile(
        context=ctx,
        system=system,
        decl_constants=decl_constants,
        decl_functions=decl_functions,
        positive_jets=positive_jets,
        nonlocal_vars=nonlocal_vars,
        lagrangian=lagrangian,
        operators=operators,
        symmetries=symmetries,
        conservation_laws=laws,
        kovalevskaya_hints=hints,
        name=name,
    )


def _parse_expr_list(ctx: Context, section: _RawSection) -> list[Expr]:
    tokens = [t for chunk in _section_tokens(section) for t in chunk]
    if not tokens:
        raise SyslangError(f"empty section {section.keyword!r}", section.line, 1)
    stream = _TokenStream(tokens, section.line)
    parser = _ExprParser(ctx, stream)
    out = [parser.parse_expr()]
    while stream.peek().text == ",":
        stream.next()
        out.append(parser.parse_expr())
    if not stream.exhausted:
        tok = stream.peek()
        raise SyslangError(f"unexpected token {tok.text!r}", tok.line, tok.col)
    return out


def _parse_operator(ctx: Context, section: _RawSection) -> TotalDiffOp:
    tokens = [t for chunk in _section_tokens(section) for t in chunk]
    if not tokens:
        raise SyslangError(f"empty operator section {section.name!r}", section.line, 1)
    stream = _TokenStream(tokens, section.line)
    parser = _ExprParser(ctx, stream, operator_mode=True)
    grid_exprs: list[list[Expr]]
    if stream.peek().text == "[":
        stream.next()
        grid_exprs = [[parser.parse_expr()]]
        while True:
            tok = stream.next()
            if tok.text == ",":
                grid_exprs[-1].append(parser.parse_expr())
            elif tok.text == ";":
                grid_exprs.append([parser.parse_expr()])
            elif tok.text == "]":
                break
            else:
                raise SyslangError(f"expected ',', ';' or ']', found {tok.text!r}", tok.line, tok.col)
        if not stream.exhausted:
            tok = stream.peek()
            raise SyslangError(f"unexpected token {tok.text!r}", tok.line, tok.col)
    else:
        grid_exprs = [[parser.parse_expr()]]
        if not stream.exhausted:
            tok = stream.peek()
            raise SyslangError(f"unexpected token {tok.text!r}", tok.line, tok.col)
    if any(len(row) != len(grid_exprs[0]) for row in grid_exprs):
        raise SyslangError(f"ragged operator matrix in {section.name!r}", section.line, 1)
    grid = [
        [_operator_from_expr(ctx, e, parser.d_atoms, section.line) for e in row]
        for row in grid_exprs
    ]
    try:
        return TotalDiffOp.from_entries(ctx, grid)
    except ExprError as exc:
        raise SyslangError(str(exc), section.line, 1) from None


def file_from_system(
    system: PdeSystem,
    nonlocal_vars: Sequence[str] = (),
    lagrangian: Lagrangian | None = None,
    name: str = "",
) -> SystemFile:
    """Wrap a constructed system (e.g. a covering) for printing."""
    ctx = system.context
    positive = sorted(
        ctx._positive_jets,
        key=lambda jn: (ctx.dependent.index(ctx.parse_jet_name(jn)[0]), ctx.parse_jet_name(jn)[1]),
    )
    return SystemFile(
        context=ctx,
        system=system,
        decl_constants=list(ctx.constants.values()),
        decl_functions=list(ctx.functions.values()),
        positive_jets=positive,
        nonlocal_vars=list(nonlocal_vars),
        lagrangian=lagrangian,
        name=name,
    )


# -- printing --------------------------------------------------------------------


def print_system(sf: SystemFile) -> str:
    """Canonical text: declarations first, then equations in input order."""
    ctx = sf.context
    out: list[str] = []
    out.append("independent: " + ", ".join(ctx.independent))
    out.append("dependent: " + ", ".join(ctx.dependent))
    if sf.decl_constants:
        out.append(
            "constants: "
            + ", ".join(c.name + (" positive" if c.positive else "") for c in sf.decl_constants)
        )
    if sf.decl_functions:
        out.append(
            "functions: "
            + ", ".join(f.name if f.arity == 1 else f"{f.name}({f.arity})" for f in sf.decl_functions)
        )
    if sf.positive_jets:
        out.append("positive: " + ", ".join(sf.positive_jets))
    if sf.nonlocal_vars:
        out.append("nonlocal: " + ", ".join(sf.nonlocal_vars))
    if sf.system.equations:
        out.append("equations:")
        for f in sf.system.equations:
            out.append(f"  {format_expr(ctx, f)} = 0")
    if sf.lagrangian is not None:
        out.append("lagrangian: " + format_expr(ctx, sf.lagrangian.density))
    data = sf.system.kovalevskaya
    if data is not None:
        out.append("kovalevskaya:")
        out.append(f"  direction {ctx.independent[data.direction]}")
        for dep in ctx.dependent:
            if dep in data.orders:
                lead = ctx.jet_name(dep, MultiIndex.unit(len(ctx.independent), data.direction, data.orders[dep]))
                out.append(f"  {lead} = {format_expr(ctx, data.rhs[dep])}")
        for dep, alpha, rhs in data.extra_rules:
            out.append(f"  {ctx.jet_name(dep, alpha)} = {format_expr(ctx, rhs)}")
    if sf.kovalevskaya_hints:
        out.append(
            "kovalevskaya_hints: "
            + ", ".join(f"{jet} @ {num}" for jet, num in sf.kovalevskaya_hints)
        )
    for name, law in sf.conservation_laws.items():
        out.append(f"conservation_law {name}: " + ", ".join(format_expr(ctx, c) for c in law.components))
    for name, sym in sf.symmetries.items():
        out.append(f"symmetry {name}: " + ", ".join(format_expr(ctx, c) for c in sym.components))
    for name, op in sf.operators.items():
        out.append(f"operator {name}: " + format_operator(ctx, op))
    return "\n".join(out) + "\n"
