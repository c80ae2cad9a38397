"""Declaration contexts and the exact expression kernel.

Expressions are sympy objects built through a :class:`Context`, which declares
independent variables, dependent variables, jet coordinates, constants and
formal function symbols.  Jet coordinates are plain symbols (``u_tx``), so
partial differentiation treats them as independent quantities; the chain
structure of total derivatives lives in :mod:`jetcalc.jets`, not here.

The kernel guarantees an exact, idempotent normal form on the rational
fragment (polynomial or rational in every leaf): a single fraction with
expanded, gcd-reduced numerator and denominator.  Formal function
applications and non-integer powers are treated as atomic generators, where
equality testing degrades to seeded random-point evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import sympy

Expr = sympy.Expr


class ExprError(ValueError):
    """Raised for malformed expressions or undeclared symbols."""


class Verdict(Enum):
    PROVED_EQUAL = "ProvedEqual"
    PROVED_UNEQUAL = "ProvedUnequal"
    PROBABLY_EQUAL = "ProbablyEqual"

    @property
    def affirmative(self) -> bool:
        return self in (Verdict.PROVED_EQUAL, Verdict.PROBABLY_EQUAL)


@dataclass(frozen=True)
class EqualsResult:
    """Outcome of an equality test, with enough evidence to reproduce it."""

    verdict: Verdict
    method: str  # "normal-form" or "oracle"
    seed: int | None = None
    trials: int | None = None
    witness: dict | None = None

    @property
    def affirmative(self) -> bool:
        return self.verdict.affirmative

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict.value, "method": self.method}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.trials is not None:
            out["trials"] = self.trials
        if self.witness is not None:
            out["witness"] = {str(k): str(v) for k, v in self.witness.items()}
        return out


@dataclass(frozen=True)
class Constant:
    name: str
    positive: bool = False


@dataclass(frozen=True)
class FunctionSymbol:
    """A formal function with named derivative symbols per argument slot.

    Differentiating an application produces applications of the registered
    derivative symbols via the chain rule.  Chains extend on demand: the
    derivative of ``H'''`` is ``H''''`` unless declared otherwise.
    """

    name: str
    arity: int = 1


def _derivative_name(name: str, slot: int, arity: int) -> str:
    if arity == 1:
        return name + "'"
    return f"{name}_{slot + 1}"


class Context:
    """A single declaration scope: variables, jets, constants, functions."""

    def __init__(
        self,
        independent: Sequence[str],
        dependent: Sequence[str] = (),
        constants: Sequence[Constant | str] = (),
        functions: Sequence[FunctionSymbol | str] = (),
    ) -> None:
        self.independent: list[str] = []
        self.dependent: list[str] = []
        self.constants: dict[str, Constant] = {}
        self.functions: dict[str, FunctionSymbol] = {}
        self._symbols: dict[str, sympy.Symbol] = {}
        self._jet_info: dict[sympy.Symbol, tuple[str, tuple[int, ...]]] = {}
        self._positive_jets: set[str] = set()
        self._func_classes: dict[str, type] = {}
        for name in independent:
            self.declare_independent(name)
        for name in dependent:
            self.declare_dependent(name)
        for c in constants:
            self.declare_constant(c if isinstance(c, Constant) else Constant(c))
        for f in functions:
            self.declare_function(f if isinstance(f, FunctionSymbol) else FunctionSymbol(f))

    # -- declarations -------------------------------------------------------

    def _check_fresh(self, name: str) -> None:
        if name in self.independent or name in self.dependent or name in self.constants or name in self.functions:
            raise ExprError(f"name {name!r} is already declared")

    def declare_independent(self, name: str) -> sympy.Symbol:
        if len(name) != 1 or not name.isalpha():
            raise ExprError(f"independent variable {name!r} must be a single letter")
        self._check_fresh(name)
        self.independent.append(name)
        return self._make_symbol(name)

    def declare_dependent(self, name: str) -> sympy.Symbol:
        if not _is_identifier(name) or "_" in name:
            raise ExprError(f"invalid dependent variable name {name!r}")
        self._check_fresh(name)
        self.dependent.append(name)
        sym = self._make_symbol(name)
        self._jet_info[sym] = (name, (0,) * len(self.independent))
        return sym

    def declare_constant(self, const: Constant) -> sympy.Symbol:
        if not _is_identifier(const.name) or "_" in const.name:
            raise ExprError(f"invalid constant name {const.name!r}")
        self._check_fresh(const.name)
        self.constants[const.name] = const
        return self._make_symbol(const.name, positive=const.positive)

    def declare_function(self, fsym: FunctionSymbol) -> None:
        if not _is_identifier(fsym.name) or "_" in fsym.name:
            raise ExprError(f"invalid function name {fsym.name!r}")
        if fsym.arity < 1:
            raise ExprError(f"function {fsym.name!r} must take at least one argument")
        self._check_fresh(fsym.name)
        self.functions[fsym.name] = fsym

    def declare_positive_jet(self, jet_name: str) -> None:
        """Flag a jet coordinate (e.g. ``x_m``) as positive for sampling and powers."""
        dep, alpha = self.parse_jet_name(jet_name)
        self._positive_jets.add(self.jet_name(dep, alpha))
        # rebuild the symbol with the positivity assumption
        name = self.jet_name(dep, alpha)
        old = self._symbols.pop(name, None)
        sym = self._make_symbol(name, positive=True)
        if old is not None:
            info = self._jet_info.pop(old)
            self._jet_info[sym] = info
        else:
            self._jet_info[sym] = (dep, alpha)

    # -- symbol construction ------------------------------------------------

    def _make_symbol(self, name: str, positive: bool = False) -> sympy.Symbol:
        if name not in self._symbols:
            self._symbols[name] = sympy.Symbol(name, positive=True) if positive else sympy.Symbol(name)
        return self._symbols[name]

    def var(self, name: str) -> sympy.Symbol:
        """The symbol of a declared independent variable."""
        if name not in self.independent:
            raise ExprError(f"undeclared variable {name!r}")
        return self._symbols[name]

    def const(self, name: str) -> sympy.Symbol:
        if name not in self.constants:
            raise ExprError(f"undeclared constant {name!r}")
        return self._symbols[name]

    def jet(self, dep: str, alpha: Sequence[int]) -> sympy.Symbol:
        """The jet coordinate of ``dep`` with multi-index ``alpha``."""
        if dep not in self.dependent:
            raise ExprError(f"undeclared dependent variable {dep!r}")
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != len(self.independent) or any(a < 0 for a in alpha):
            raise ExprError(f"bad multi-index {alpha} for {len(self.independent)} variables")
        name = self.jet_name(dep, alpha)
        sym = self._make_symbol(name, positive=name in self._positive_jets)
        self._jet_info.setdefault(sym, (dep, alpha))
        return sym

    def jet_name(self, dep: str, alpha: Sequence[int]) -> str:
        suffix = "".join(v * a for v, a in zip(self.independent, alpha))
        return dep if not suffix else f"{dep}_{suffix}"

    def parse_jet_name(self, name: str) -> tuple[str, tuple[int, ...]]:
        """Split ``u_txx`` into ``('u', (1, 2, ...))``; raises on bad suffixes."""
        if "_" not in name:
            if name in self.dependent:
                return name, (0,) * len(self.independent)
            raise ExprError(f"undeclared dependent variable {name!r}")
        dep, suffix = name.split("_", 1)
        if dep not in self.dependent:
            raise ExprError(f"undeclared dependent variable {dep!r}")
        alpha = [0] * len(self.independent)
        for letter in suffix:
            if letter not in self.independent:
                raise ExprError(f"jet suffix letter {letter!r} in {name!r} is not an independent variable")
            alpha[self.independent.index(letter)] += 1
        return dep, tuple(alpha)

    def symbol(self, name: str) -> sympy.Expr:
        """Resolve any declared name (variable, constant, dependent or jet)."""
        if name in self.independent:
            return self.var(name)
        if name in self.constants:
            return self.const(name)
        dep, alpha = self.parse_jet_name(name)
        return self.jet(dep, alpha)

    def func(self, name: str) -> type:
        """The sympy function class for a declared function symbol.

        The class carries an ``fdiff`` producing the registered derivative
        symbol, so sympy's chain rule yields e.g. ``H'(x)*x_t``.
        """
        if name not in self.functions:
            raise ExprError(f"undeclared function symbol {name!r}")
        return self._func_class(name)

    def _func_class(self, name: str) -> type:
        if name in self._func_classes:
            return self._func_classes[name]
        fsym = self.functions[name]
        ctx = self

        def fdiff(self_app, argindex=1):
            dname = _derivative_name(name, argindex - 1, fsym.arity)
            if dname not in ctx.functions:
                ctx.functions[dname] = FunctionSymbol(dname, fsym.arity)
            return ctx._func_class(dname)(*self_app.args)

        def eval_check(cls, *args):
            if len(args) != fsym.arity:
                raise ExprError(f"function {name!r} takes {fsym.arity} argument(s), got {len(args)}")
            return None

        cls = type(name, (sympy.Function,), {"fdiff": fdiff, "eval": classmethod(eval_check)})
        self._func_classes[name] = cls
        return cls

    def function_root(self, name: str) -> tuple[str, int]:
        """Root of a derivative chain and the derivative depth of ``name``.

        Only single-argument prime chains (``H'' -> H`` at depth 2) are
        chained; multi-argument derivative symbols count as their own roots.
        """
        depth = 0
        base = name
        while base.endswith("'"):
            base = base[:-1]
            depth += 1
        if base in self.functions:
            return base, depth
        return name, 0

    # -- queries ------------------------------------------------------------

    def _resolve_jet(self, sym: sympy.Symbol) -> tuple[str, tuple[int, ...]] | None:
        """Jet info for ``sym``, recognizing well-named jets lazily.

        Symbols created by a parent context (same name, same assumptions)
        resolve here too; a name that parses as a jet but carries different
        assumptions is rejected as foreign.
        """
        if sym in self._jet_info:
            return self._jet_info[sym]
        if not isinstance(sym, sympy.Symbol):
            return None
        try:
            dep, alpha = self.parse_jet_name(str(sym))
        except ExprError:
            return None
        ours = self.jet(dep, alpha)
        return self._jet_info[ours] if ours == sym else None

    def is_jet(self, sym: sympy.Expr) -> bool:
        return isinstance(sym, sympy.Symbol) and self._resolve_jet(sym) is not None

    def jet_info(self, sym: sympy.Symbol) -> tuple[str, tuple[int, ...]]:
        info = self._resolve_jet(sym)
        if info is None:
            raise ExprError(f"{sym} is not a jet coordinate of this context")
        return info

    def jets_in(self, e: Expr) -> list[sympy.Symbol]:
        """Jet coordinates occurring in ``e`` (including bare dependents), sorted."""
        found = [s for s in e.free_symbols if self._resolve_jet(s) is not None]
        return sorted(found, key=self._jet_sort_key)

    def _jet_sort_key(self, sym: sympy.Symbol):
        dep, alpha = self._jet_info[sym]
        return (self.dependent.index(dep), sum(alpha), alpha)

    def is_positive(self, sym: sympy.Symbol) -> bool:
        name = str(sym)
        if name in self.constants:
            return self.constants[name].positive
        return name in self._positive_jets

    def extended(self, extra_dependent: Sequence[str]) -> "Context":
        """A copy of this context with additional dependent variables."""
        child = Context(list(self.independent))
        for d in self.dependent:
            child.declare_dependent(d)
        for d in extra_dependent:
            child.declare_dependent(d)
        for c in self.constants.values():
            child.declare_constant(c)
        for f in self.functions.values():
            child.declare_function(f)
        for jname in self._positive_jets:
            child.declare_positive_jet(jname)
        return child


def _is_identifier(name: str) -> bool:
    if not name:
        return False
    body = name.rstrip("'")
    return body != "" and body[0].isalpha() and all(c.isalnum() for c in body)


# -- normalization ----------------------------------------------------------


def _normalize_function_args(e: Expr) -> Expr:
    apps = e.atoms(sympy.Function)
    if not apps:
        return e
    repl = {}
    for app in apps:
        norm_args = tuple(normalize(a) for a in app.args)
        if norm_args != app.args:
            repl[app] = app.func(*norm_args)
    return e.xreplace(repl) if repl else e


def _polynomial_in_generators(e: Expr) -> bool:
    """True when every power has a nonnegative integer exponent (expand is
    then already canonical; the fraction-normalizing pass is unnecessary)."""
    for node in sympy.preorder_traversal(e):
        if isinstance(node, sympy.Pow):
            if not (node.exp.is_Integer and int(node.exp) >= 0):
                return False
    return True


def normalize(e) -> Expr:
    """Canonical form: one fraction with expanded, reduced numerator/denominator.

    Idempotent, value-preserving away from singularities, and the zero
    expression has the unique normal form ``0``.  Purely polynomial
    expressions short-circuit to plain expansion.
    """
    e = sympy.sympify(e)
    if e.has(sympy.zoo, sympy.nan, sympy.oo, -sympy.oo):
        raise ExprError("expression is undefined (division by zero?)")
    e = _normalize_function_args(e)
    expanded = sympy.expand(e)
    if _polynomial_in_generators(expanded):
        return expanded
    try:
        n = sympy.cancel(sympy.together(expanded))
    except (sympy.PolynomialError, sympy.polys.polyerrors.ComputationFailed, ZeroDivisionError):
        return sympy.together(expanded)
    if n.has(sympy.zoo, sympy.nan):
        raise ExprError("expression is undefined (division by zero?)")
    return n


def is_rational_fragment(e: Expr) -> bool:
    """True when ``e`` is polynomial/rational in all leaves.

    Leaves are symbols; powers must have integer exponents and no formal
    function applications may appear.  On this fragment the normal form
    decides equality.
    """
    for node in sympy.preorder_traversal(e):
        if isinstance(node, sympy.Function):
            return False
        if isinstance(node, sympy.Pow) and not node.exp.is_Integer:
            return False
        if node.is_Atom and not (node.is_Symbol or node.is_Rational):
            return False
    return True


# -- core operations --------------------------------------------------------


def partial_derivative(ctx: Context, e, v) -> Expr:
    """Partial derivative treating every other jet coordinate as independent."""
    e = sympy.sympify(e)
    if isinstance(v, str):
        v = ctx.symbol(v)
    name = str(v)
    declared = (
        name in ctx.independent
        or name in ctx.constants
        or (isinstance(v, sympy.Symbol) and ctx.is_jet(v))
    )
    if not declared:
        raise ExprError(f"undeclared variable {name!r}")
    return normalize(sympy.diff(e, v))


def substitute(e, bindings: Mapping) -> Expr:
    """Simultaneous single-pass replacement of jet coordinates or variables."""
    e = sympy.sympify(e)
    if not bindings:
        return normalize(e)
    subs = {sympy.sympify(k): sympy.sympify(val) for k, val in bindings.items()}
    for k in subs:
        if not k.is_Symbol:
            raise ExprError(f"substitution key {k} is not a variable or jet coordinate")
    return normalize(e.subs(subs, simultaneous=True))


def equals(
    ctx: Context,
    a,
    b,
    trials: int | None = None,
    tol=None,
    seed: int | None = None,
) -> EqualsResult:
    """Three-way equality: exact on the rational fragment, sampled elsewhere."""
    a = sympy.sympify(a)
    b = sympy.sympify(b)
    d = normalize(a - b)
    if d == 0:
        result = EqualsResult(Verdict.PROVED_EQUAL, "normal-form")
        _audit_record(ctx, a, b, result)
        return result
    if is_rational_fragment(d):
        return EqualsResult(Verdict.PROVED_UNEQUAL, "normal-form")
    from . import oracle

    return oracle.random_identity_test(ctx, a, b, trials=trials, tol=tol, seed=seed)


# -- cross-validation audit ---------------------------------------------------

_AUDIT: list[tuple[Expr, Expr, "EqualsResult"]] | None = None


def audit_start() -> None:
    """Begin recording kernel ProvedEqual verdicts for oracle cross-checks."""
    global _AUDIT
    _AUDIT = []


def audit_stop() -> list[tuple[Expr, Expr, EqualsResult]]:
    global _AUDIT
    recorded, _AUDIT = _AUDIT or [], None
    return recorded


def _audit_record(ctx: Context, a: Expr, b: Expr, result: EqualsResult) -> None:
    if _AUDIT is not None and result.verdict is Verdict.PROVED_EQUAL:
        _AUDIT.append((a, b, result))


def as_fraction(q) -> Fraction:
    """Exact conversion of a sympy Rational to ``fractions.Fraction``."""
    q = sympy.nsimplify(q, rational=True) if not isinstance(q, sympy.Rational) else q
    if not isinstance(q, sympy.Rational):
        raise ExprError(f"{q} is not rational")
    return Fraction(int(q.p), int(q.q))
