"""Total derivatives, prolongation, on-shell reduction, linear variable changes."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import sympy

from .exprs import Context, Expr, ExprError, normalize
from .systems import KovalevskayaData, MultiIndex, PdeSystem, ReductionError, multi_indices_upto

REDUCTION_ITERATION_BOUND = 400


def _diff(e: Expr, s: sympy.Symbol) -> Expr:
    """Partial derivative tuned for big expanded sums.

    Structurally recursive over Add/Mul/Pow; function applications defer to
    sympy.diff so formal derivative chains keep working.
    """
    if e == s:
        return sympy.Integer(1)
    if e.is_Atom or not e.has(s):
        return sympy.Integer(0)
    if isinstance(e, sympy.Add):
        return sympy.Add(*(_diff(a, s) for a in e.args))
    if isinstance(e, sympy.Mul):
        terms = []
        args = e.args
        for idx, factor in enumerate(args):
            if not factor.has(s):
                continue
            d = _diff(factor, s)
            if d != 0:
                terms.append(sympy.Mul(*args[:idx], d, *args[idx + 1 :]))
        return sympy.Add(*terms)
    if isinstance(e, sympy.Pow):
        base, exp = e.base, e.exp
        if exp.has(s):
            return sympy.diff(e, s)
        return exp * base ** (exp - 1) * _diff(base, s)
    return sympy.diff(e, s)


def _total_derivative_raw(ctx: Context, e: Expr, i: int) -> Expr:
    """D_i without the normalization pass (hot path for operator algebra)."""
    x = ctx.var(ctx.independent[i])
    out = _diff(e, x)
    for s in ctx.jets_in(e):
        dep, alpha = ctx.jet_info(s)
        out += ctx.jet(dep, MultiIndex(alpha).bump(i)) * _diff(e, s)
    return out


def total_derivative(ctx: Context, e, i: int) -> Expr:
    """D_i(e): explicit x^i dependence plus the jet chain over coordinates in e."""
    e = sympy.sympify(e)
    if not 0 <= i < len(ctx.independent):
        raise ExprError(f"direction index {i} out of range")
    return normalize(_total_derivative_raw(ctx, e, i))


def total_derivative_multi(ctx: Context, e, alpha: Sequence[int], normalized: bool = True) -> Expr:
    """D_alpha as the composition D_1^a1 o ... o D_n^an (order-independent)."""
    alpha = MultiIndex(alpha)
    if len(alpha) != len(ctx.independent):
        raise ExprError(f"multi-index {tuple(alpha)} does not match {len(ctx.independent)} variables")
    out = sympy.sympify(e)
    for i in range(len(alpha) - 1, -1, -1):
        for _ in range(alpha[i]):
            out = _total_derivative_raw(ctx, out, i)
    return normalize(out) if normalized else out


def derivative_table(ctx: Context, e, upto: Sequence[int]) -> dict[MultiIndex, Expr]:
    """All D_gamma(e) for gamma <= upto, each one step from a predecessor.

    Intermediate results are kept expanded, which keeps repeated
    differentiation of large coefficient sums linear rather than quadratic.
    """
    upto = MultiIndex(upto)
    n = len(upto)
    table: dict[MultiIndex, Expr] = {MultiIndex.zero(n): sympy.expand(sympy.sympify(e))}
    for gamma in multi_indices_upto(n, upto.order):
        if gamma.order == 0 or not gamma.leq(upto):
            continue
        i = next(k for k in range(n) if gamma[k] > 0)
        prev = gamma - MultiIndex.unit(n, i)
        table[gamma] = sympy.expand(_total_derivative_raw(ctx, table[prev], i))
    return table


def prolong(system: PdeSystem, k: int) -> list[Expr]:
    """All D_alpha(F^i) with |alpha| <= k, normalized, graded-lex order."""
    if k < 0:
        raise ExprError("prolongation order must be nonnegative")
    ctx = system.context
    out = []
    for alpha in multi_indices_upto(len(ctx.independent), k):
        for f in system.equations:
            out.append(total_derivative_multi(ctx, f, alpha))
    return out


def rule_replacement_for(ctx: Context, data: KovalevskayaData, dep: str, alpha: Sequence[int]) -> Expr:
    """One rewrite step for a leading coordinate: D_residual of the rule rhs."""
    alpha = MultiIndex(alpha)
    match = data.match(dep, alpha)
    if match is None:
        raise ExprError(f"{ctx.jet_name(dep, alpha)} is an internal coordinate")
    kind, residual, rhs = match
    key = (dep, tuple(alpha))
    if key not in data._memo:
        data._memo[key] = total_derivative_multi(ctx, rhs, residual)
    return data._memo[key]


def rule_replacement(system: PdeSystem, dep: str, alpha: Sequence[int]) -> Expr:
    data = system.require_kovalevskaya("leading-derivative rewriting")
    return rule_replacement_for(system.context, data, dep, alpha)


def reducible_jets(system: PdeSystem, e: Expr) -> list[sympy.Symbol]:
    data = system.require_kovalevskaya()
    ctx = system.context
    out = []
    for s in ctx.jets_in(e):
        dep, alpha = ctx.jet_info(s)
        if data.match(dep, alpha) is not None:
            out.append(s)
    return out


def reduce_with_rules(
    ctx: Context,
    data: KovalevskayaData,
    e,
    max_iterations: int = REDUCTION_ITERATION_BOUND,
) -> Expr:
    """Rewrite every leading coordinate to a fixpoint of internal coordinates.

    Termination is guaranteed for valid Kovalevskaya data (each step strictly
    lowers the direction-excess multiset); the iteration bound guards
    ill-posed auxiliary rule sets.
    """
    e = normalize(e)
    for _ in range(max_iterations):
        repl = {}
        for s in ctx.jets_in(e):
            dep, alpha = ctx.jet_info(s)
            if data.match(dep, alpha) is not None:
                repl[s] = rule_replacement_for(ctx, data, dep, alpha)
        if not repl:
            return normalize(e)
        e = normalize(e.xreplace(repl))
    raise ReductionError("on-shell reduction exceeded the iteration bound")


def on_shell_reduce(e, system: PdeSystem, max_iterations: int = REDUCTION_ITERATION_BOUND) -> Expr:
    data = system.require_kovalevskaya("on-shell reduction")
    return reduce_with_rules(system.context, data, e, max_iterations)


def _as_rational_matrix(M) -> sympy.Matrix:
    rows = [[sympy.Rational(x) if isinstance(x, (int, Fraction)) else sympy.sympify(x) for x in row] for row in M]
    mat = sympy.Matrix(rows)
    if mat.rows != mat.cols:
        raise ExprError("change of variables needs a square matrix")
    if not all(x.is_Rational for x in mat):
        raise ExprError("change of variables matrix must be rational")
    return mat


def linear_change_of_independent_vars(ctx: Context, target, M):
    """Rewrite jets and explicit variables under x_new = M x_old.

    The variable names are reused for the new coordinates.  Old total
    derivatives become D_old_j = sum_k M[k, j] D_new_k, and every jet
    coordinate is expanded accordingly.  For a system the equations are
    transformed and any Kovalevskaya data is dropped (re-derive it for the
    new direction, e.g. with the Kovalevskaya search).
    """
    mat = _as_rational_matrix(M)
    n = len(ctx.independent)
    if mat.rows != n:
        raise ExprError(f"matrix size {mat.rows} does not match {n} independent variables")
    if mat.det() == 0:
        raise ExprError("singular change-of-variables matrix")
    if isinstance(target, PdeSystem):
        eqs = [linear_change_of_independent_vars(ctx, f, M) for f in target.equations]
        return PdeSystem(context=target.context, equations=eqs, kovalevskaya=None, name=target.name)

    e = sympy.sympify(target)
    inv = mat.inv()
    jet_map: dict[sympy.Symbol, Expr] = {}
    memo: dict[tuple[str, tuple[int, ...]], Expr] = {}

    def transform_jet(dep: str, alpha: MultiIndex) -> Expr:
        key = (dep, tuple(alpha))
        if key in memo:
            return memo[key]
        out: Expr = ctx.jet(dep, MultiIndex.zero(n))
        for j in range(n):
            for _ in range(alpha[j]):
                out = normalize(sum(mat[k, j] * total_derivative(ctx, out, k) for k in range(n)))
        memo[key] = out
        return out

    for s in ctx.jets_in(e):
        dep, alpha = ctx.jet_info(s)
        jet_map[s] = transform_jet(dep, MultiIndex(alpha))
    var_map = {}
    for j, name in enumerate(ctx.independent):
        xj = ctx.var(name)
        if e.has(xj):
            var_map[xj] = sum(inv[j, k] * ctx.var(ctx.independent[k]) for k in range(n))
    return normalize(e.xreplace({**jet_map, **var_map}))
