"""Independent numeric ground truth: seeded random-point identity testing.

Evaluation walks the expression tree directly with ``fractions.Fraction``
arithmetic, bypassing the symbolic simplifier entirely, so kernel and oracle
form genuinely independent routes.  Non-integer powers that have no exact
rational value fall back to 50-digit mpmath evaluation against a tolerance.

Formal function symbols evaluate through registered callback polynomials
(default: a seeded random cubic per root symbol, with derivative symbols
bound to its honest derivatives, so chain identities survive sampling).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from random import Random
from typing import Mapping, Sequence

import mpmath
import sympy

from .exprs import Context, EqualsResult, Expr, ExprError, Verdict
from .systems import MultiIndex, PdeSystem, multi_indices_upto

DEFAULT_TRIALS = 25
DEFAULT_SEED = 20260810
DEFAULT_TOL = Fraction(1, 10**9)
RESAMPLE_CAP = 100
FLOAT_DPS = 50


class OracleUndecidable(RuntimeError):
    """Every sampled point hit a singularity."""


class UncoveredLeaf(ExprError):
    """The sample point does not assign a value to some leaf."""


class ResampleSignal(Exception):
    """Division by zero or a non-real power at the current point."""


class _InexactPower(Exception):
    """Exact rational evaluation impossible; switch to float mode."""


@dataclass
class SamplePoint:
    """An assignment of exact rational values to symbols, plus callbacks."""

    values: dict[sympy.Symbol, Fraction] = field(default_factory=dict)
    func_tables: dict[str, tuple[tuple[sympy.Symbol, ...], Expr]] = field(default_factory=dict)
    supplier: object = None  # optional callable(symbol) -> Fraction

    def lookup(self, sym: sympy.Symbol) -> Fraction:
        if sym in self.values:
            return self.values[sym]
        if self.supplier is not None:
            value = self.supplier(sym)
            self.values[sym] = value
            return value
        raise UncoveredLeaf(f"sample point does not cover {sym}")


def _nth_root_exact(value: Fraction, q: int) -> Fraction | None:
    if value < 0:
        return None

    def iroot(n: int) -> int | None:
        r = round(n ** (1.0 / q)) if n > 0 else 0
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand**q == n:
                return cand
        return None

    pn, pd = iroot(value.numerator), iroot(value.denominator)
    if pn is None or pd is None:
        return None
    return Fraction(pn, pd)


def evaluate_exact(e: Expr, point: SamplePoint) -> Fraction:
    """Exact rational value of ``e`` at ``point``; raises on singularities."""
    if isinstance(e, sympy.Rational):
        return Fraction(int(e.p), int(e.q))
    if isinstance(e, sympy.Symbol):
        return point.lookup(e)
    if isinstance(e, sympy.Add):
        return sum((evaluate_exact(a, point) for a in e.args), start=Fraction(0))
    if isinstance(e, sympy.Mul):
        out = Fraction(1)
        for a in e.args:
            out *= evaluate_exact(a, point)
        return out
    if isinstance(e, sympy.Pow):
        base = evaluate_exact(e.base, point)
        exp = evaluate_exact(e.exp, point)
        if exp.denominator == 1:
            k = exp.numerator
            if base == 0 and k < 0:
                raise ResampleSignal("zero base with negative exponent")
            return base**k
        if base == 0:
            if exp > 0:
                return Fraction(0)
            raise ResampleSignal("zero base with negative exponent")
        if base < 0:
            raise ResampleSignal("negative base with fractional exponent")
        root = _nth_root_exact(base, exp.denominator)
        if root is None:
            raise _InexactPower(str(e))
        return root**exp.numerator
    if isinstance(e, sympy.Function):
        name = type(e).__name__
        argsyms, poly = _function_table(point, name)
        if len(argsyms) != len(e.args):
            raise UncoveredLeaf(f"callback for {name!r} has wrong arity")
        inner = SamplePoint(
            values={s: evaluate_exact(a, point) for s, a in zip(argsyms, e.args)},
            func_tables=point.func_tables,
        )
        return evaluate_exact(poly, inner)
    raise UncoveredLeaf(f"cannot evaluate node {e!r}")


def evaluate_float(e: Expr, point: SamplePoint) -> mpmath.mpf:
    """High-precision float value (50 digits), same traversal as exact mode."""
    with mpmath.workdps(FLOAT_DPS):
        return _eval_float(e, point)


def _to_mpf(q: Fraction) -> mpmath.mpf:
    return mpmath.mpf(q.numerator) / mpmath.mpf(q.denominator)


def _eval_float(e: Expr, point: SamplePoint):
    if isinstance(e, sympy.Rational):
        return mpmath.mpf(int(e.p)) / mpmath.mpf(int(e.q))
    if isinstance(e, sympy.Symbol):
        return _to_mpf(point.lookup(e))
    if isinstance(e, sympy.Add):
        return mpmath.fsum(_eval_float(a, point) for a in e.args)
    if isinstance(e, sympy.Mul):
        out = mpmath.mpf(1)
        for a in e.args:
            out *= _eval_float(a, point)
        return out
    if isinstance(e, sympy.Pow):
        base = _eval_float(e.base, point)
        exp = _eval_float(e.exp, point)
        if base == 0 and exp < 0:
            raise ResampleSignal("zero base with negative exponent")
        if base < 0 and exp != mpmath.floor(exp):
            raise ResampleSignal("negative base with fractional exponent")
        return mpmath.power(base, exp)
    if isinstance(e, sympy.Function):
        name = type(e).__name__
        argsyms, poly = _function_table(point, name)
        inner_vals = {s: _eval_float(a, point) for s, a in zip(argsyms, e.args)}
        return _eval_float(poly, _FloatArgsPoint(inner_vals, point.func_tables))
    raise UncoveredLeaf(f"cannot evaluate node {e!r}")


class _FloatArgsPoint(SamplePoint):
    def __init__(self, float_values, func_tables):
        super().__init__(values={}, func_tables=func_tables)
        self._float_values = float_values

    def lookup(self, sym):
        if sym in self._float_values:
            return self._float_values[sym]
        raise UncoveredLeaf(f"sample point does not cover {sym}")


def evaluate(e: Expr, point: SamplePoint):
    """Exact rational value when possible, else a 50-digit float."""
    e = sympy.sympify(e)
    try:
        return evaluate_exact(e, point)
    except _InexactPower:
        return evaluate_float(e, point)


# -- point construction -------------------------------------------------------


def _as_tolerance(tol) -> Fraction:
    if tol is None:
        return DEFAULT_TOL
    if isinstance(tol, Fraction):
        return tol
    q = sympy.Rational(str(tol))
    return Fraction(int(q.p), int(q.q))


def _draw_fraction(rng: Random, positive: bool) -> Fraction:
    num = rng.randint(1, 9) if positive else rng.randint(-9, 9)
    den = rng.randint(1, 9)
    return Fraction(num, den)


def _function_table(point: SamplePoint, name: str):
    if name not in point.func_tables:
        raise UncoveredLeaf(f"no callback registered for function {name!r}")
    return point.func_tables[name]


def build_function_tables(
    ctx: Context,
    rng: Random,
    callbacks: Mapping[str, Expr] | None = None,
) -> dict[str, tuple[tuple[sympy.Symbol, ...], Expr]]:
    """Callback polynomials for every declared function symbol.

    Roots get either the registered polynomial (in argument symbols ``a1,
    a2, ...``) or a seeded random cubic; derivative symbols get the honest
    sympy derivative of their root's polynomial, keeping chains consistent.
    """
    callbacks = dict(callbacks or {})
    tables: dict[str, tuple[tuple[sympy.Symbol, ...], Expr]] = {}
    roots: dict[str, tuple[tuple[sympy.Symbol, ...], Expr]] = {}
    names = sorted(ctx.functions)
    for name in names:
        root, _ = ctx.function_root(name)
        if root in roots:
            continue
        arity = ctx.functions.get(root, ctx.functions[name]).arity
        args = tuple(sympy.Symbol(f"a{i + 1}") for i in range(arity))
        if root in callbacks:
            poly = sympy.sympify(callbacks[root])
        else:
            coeffs = [sympy.Rational(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(4)]
            base = args[0] if args else sympy.Integer(1)
            poly = coeffs[0] + sum(c * base ** (i + 1) for i, c in enumerate(coeffs[1:]))
            for extra in args[1:]:
                poly += sympy.Rational(rng.randint(-4, 4), rng.randint(1, 3)) * extra**2
        roots[root] = (args, sympy.expand(poly))
    for name in names:
        root, depth = ctx.function_root(name)
        args, poly = roots[root]
        tables[name] = (args, sympy.expand(sympy.diff(poly, args[0], depth)) if depth else poly)

    def extend(name: str):
        # derivative symbols created lazily during differentiation
        root, depth = ctx.function_root(name)
        if root in roots:
            args, poly = roots[root]
            return (args, sympy.expand(sympy.diff(poly, args[0], depth)))
        raise UncoveredLeaf(f"no callback registered for function {name!r}")

    return _LazyTables(tables, extend)


class _LazyTables(dict):
    def __init__(self, base, extend):
        super().__init__(base)
        self._extend = extend

    def __missing__(self, name):
        value = self._extend(name)
        self[name] = value
        return value

    def __contains__(self, name):  # allow lazy hits through `in` checks
        if super().__contains__(name):
            return True
        try:
            self[name]
            return True
        except UncoveredLeaf:
            return False


def sample_point(
    ctx: Context,
    symbols: Sequence[sympy.Symbol],
    rng: Random,
    callbacks: Mapping[str, Expr] | None = None,
) -> SamplePoint:
    """Draw exact rational values for the given symbols, respecting positivity."""
    values = {}
    for s in sorted(symbols, key=str):
        values[s] = _draw_fraction(rng, ctx.is_positive(s))
    return SamplePoint(values=values, func_tables=build_function_tables(ctx, rng, callbacks))


def _free_leaves(ctx: Context, *exprs: Expr) -> list[sympy.Symbol]:
    seen = set()
    for e in exprs:
        seen |= sympy.sympify(e).free_symbols
    return sorted(seen, key=str)


def random_identity_test(
    ctx: Context,
    a,
    b,
    trials: int | None = None,
    tol=None,
    seed: int | None = None,
    callbacks: Mapping[str, Expr] | None = None,
    point_factory=None,
) -> EqualsResult:
    """ProbablyEqual when a == b at every sampled point; a witness disproves.

    In exact mode agreement means identical rationals; float mode compares
    against ``tol``.  ``point_factory(rng) -> SamplePoint`` overrides the
    default free-leaf sampler (used for on-shell sampling).
    """
    trials = DEFAULT_TRIALS if trials is None else int(trials)
    seed = DEFAULT_SEED if seed is None else int(seed)
    tol = _as_tolerance(tol)
    if trials < 1:
        raise ExprError("trials must be at least 1")
    a = sympy.sympify(a)
    b = sympy.sympify(b)
    rng = Random(seed)
    leaves = _free_leaves(ctx, a, b)
    successes = 0
    resamples = 0
    while successes < trials:
        if resamples > RESAMPLE_CAP:
            if successes == 0:
                raise OracleUndecidable("undecidable at sampled points")
            return EqualsResult(Verdict.PROBABLY_EQUAL, "oracle", seed=seed, trials=successes)
        point = point_factory(rng) if point_factory else sample_point(ctx, leaves, rng, callbacks)
        try:
            va = evaluate_exact(a, point)
            vb = evaluate_exact(b, point)
            agree = va == vb
        except _InexactPower:
            try:
                with mpmath.workdps(FLOAT_DPS):
                    fa = evaluate_float(a, point)
                    fb = evaluate_float(b, point)
                    agree = abs(fa - fb) <= _to_mpf(tol)
                    va, vb = fa, fb
            except ResampleSignal:
                resamples += 1
                continue
        except (ResampleSignal, ZeroDivisionError):
            resamples += 1
            continue
        if not agree:
            witness = dict(point.values)
            witness["lhs"] = va
            witness["rhs"] = vb
            return EqualsResult(
                Verdict.PROVED_UNEQUAL, "oracle", seed=seed, trials=successes + 1, witness=witness
            )
        successes += 1
    return EqualsResult(Verdict.PROBABLY_EQUAL, "oracle", seed=seed, trials=trials)


# -- on-shell sampling ---------------------------------------------------------


def on_shell_sample(
    system: PdeSystem,
    order: int,
    seed: int | None = None,
    callbacks: Mapping[str, Expr] | None = None,
    rng: Random | None = None,
) -> SamplePoint:
    """A point on the prolonged system via the Kovalevskaya parameterization.

    Internal coordinates get free random values; leading coordinates are
    computed by evaluating one rewrite step recursively, so every prolonged
    equation vanishes at the result (exactly, in rational mode).
    """
    from . import jets  # local import to keep module load order simple

    data = system.require_kovalevskaya("on-shell sampling")
    ctx = system.context
    rng = rng if rng is not None else Random(DEFAULT_SEED if seed is None else seed)
    point = SamplePoint(values={}, func_tables=build_function_tables(ctx, rng, callbacks))
    in_progress: set[sympy.Symbol] = set()

    def supply(sym: sympy.Symbol):
        if not ctx.is_jet(sym):
            return _draw_fraction(rng, ctx.is_positive(sym))
        dep, alpha = ctx.jet_info(sym)
        if data.match(dep, alpha) is None:
            return _draw_fraction(rng, ctx.is_positive(sym))
        if sym in in_progress:
            raise ExprError(f"cyclic rewrite rules at {sym}")
        in_progress.add(sym)
        try:
            replacement = jets.rule_replacement(system, dep, alpha)
            return evaluate(replacement, point)
        finally:
            in_progress.discard(sym)

    point.supplier = supply
    # pre-populate deterministically: independents, constants, then jets by order
    for name in ctx.independent:
        point.lookup(ctx.var(name))
    for name in sorted(ctx.constants):
        point.lookup(ctx.const(name))
    for alpha in multi_indices_upto(len(ctx.independent), order):
        for dep in ctx.dependent:
            point.lookup(ctx.jet(dep, alpha))
    return point
