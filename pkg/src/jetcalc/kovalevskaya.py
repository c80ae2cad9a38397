"""Extended Kovalevskaya forms: greedy elimination search and validation.

The search mirrors the hand procedure for the incompressible Navier-Stokes
system: repeatedly solve one equation linearly for a pure-direction
derivative, push total-derivative consequences of the solved rules into the
remaining right sides, and stop when every dependent variable owns a solved
equation.  It is a heuristic, not a decision procedure; hints pin the pivot
order when a specific elimination script is wanted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import sympy

from .exprs import Context, EqualsResult, Expr, ExprError, Verdict, equals, normalize
from .jets import on_shell_reduce, reduce_with_rules, total_derivative_multi
from .systems import KovalevskayaData, MultiIndex, PdeSystem, ReductionError


class KovalevskayaSearchError(ExprError):
    pass


@dataclass(frozen=True)
class EliminationStep:
    index: int  # 1-based position in the audit trail
    pivot_dep: str
    pivot_order: int
    equation_index: int  # 0-based index into the original equations
    phi: Expr

    def describe(self, ctx: Context, direction: int) -> str:
        n = len(ctx.independent)
        pivot = ctx.jet_name(self.pivot_dep, MultiIndex.unit(n, direction, self.pivot_order))
        return (
            f"{self.index}. eliminate {pivot} from equation {self.equation_index + 1}: "
            f"{pivot} = {self.phi}"
        )


@dataclass
class KovalevskayaForm:
    direction: int
    orders: dict[str, int]
    rhs: dict[str, Expr]
    trail: list[EliminationStep] = field(default_factory=list)

    @property
    def l_normal(self) -> bool:
        """Systems in extended Kovalevskaya form are l-normal (recorded, not checked)."""
        return True

    def as_data(self, extra_rules=()) -> KovalevskayaData:
        return KovalevskayaData(
            direction=self.direction,
            orders=dict(self.orders),
            rhs=dict(self.rhs),
            extra_rules=tuple(extra_rules),
        )

    def orders_tuple(self, ctx: Context) -> tuple[int, ...]:
        return tuple(self.orders[dep] for dep in ctx.dependent)


def _pure_direction_candidates(ctx: Context, f: Expr, direction: int, dep: str) -> list[int]:
    """Orders k for which dep_{k * direction} occurs in f, ascending."""
    n = len(ctx.independent)
    ks = set()
    for s in ctx.jets_in(f):
        d, alpha = ctx.jet_info(s)
        if d != dep:
            continue
        alpha = MultiIndex(alpha)
        if alpha.order == alpha[direction] and alpha[direction] >= 1:
            ks.add(alpha[direction])
    return sorted(ks)


def _solve_linear(ctx: Context, f: Expr, pivot: sympy.Symbol) -> Expr | None:
    """Solve f = 0 for pivot when it occurs linearly with pivot-free coefficient."""
    coeff = normalize(sympy.diff(f, pivot))
    if coeff == 0 or pivot in coeff.free_symbols:
        return None
    rest = normalize(f - coeff * pivot)
    if pivot in rest.free_symbols:
        return None
    return normalize(-rest / coeff)


def _reduce_with(partial: dict[str, tuple[int, Expr]], ctx: Context, direction: int, e: Expr, cap: int = 200) -> Expr:
    """Rewrite jets that are leading for already-solved variables."""
    if not partial:
        return normalize(e)
    data = KovalevskayaData(
        direction=direction,
        orders={dep: b for dep, (b, _) in partial.items()},
        rhs={dep: rhs for dep, (_, rhs) in partial.items()},
    )
    return reduce_with_rules(ctx, data, e, max_iterations=cap)


def _feasible(ctx: Context, direction: int, dep: str, order: int, phi: Expr, solved: dict[str, tuple[int, Expr]]) -> bool:
    """Right side must avoid own leading jets and any direction-derivative of unsolved variables."""
    for s in ctx.jets_in(phi):
        d, alpha = ctx.jet_info(s)
        a_dir = alpha[direction]
        if d == dep and a_dir >= order:
            return False
        if d in solved and a_dir >= solved[d][0]:
            return False
        if d != dep and d not in solved and a_dir >= 1:
            return False
    return True


def to_kovalevskaya(
    system: PdeSystem,
    direction: int,
    hints: Sequence[tuple[str, int]] | None = None,
) -> KovalevskayaForm:
    """Search for an extended Kovalevskaya form in the given direction.

    ``hints`` is an ordered list of (pivot jet name, 1-based equation number)
    fixing the elimination script; without hints the greedy order is lowest
    equation index first, then lowest derivative order.
    """
    system.require_square("the Kovalevskaya search")
    ctx = system.context
    n = len(ctx.independent)
    if not 0 <= direction < n:
        raise ExprError(f"direction index {direction} out of range")
    solved: dict[str, tuple[int, Expr]] = {}
    used_equations: set[int] = set()
    trail: list[EliminationStep] = []

    def attempt(eq_idx: int, dep: str, k: int) -> bool:
        pivot = ctx.jet(dep, MultiIndex.unit(n, direction, k))
        f = _reduce_with(solved, ctx, direction, system.equations[eq_idx])
        phi = _solve_linear(ctx, f, pivot)
        if phi is None:
            return False
        phi = _reduce_with(solved, ctx, direction, phi)
        if not _feasible(ctx, direction, dep, k, phi, solved):
            return False
        solved[dep] = (k, phi)
        used_equations.add(eq_idx)
        trail.append(EliminationStep(len(trail) + 1, dep, k, eq_idx, phi))
        return True

    if hints is not None:
        for jet_name, eq_number in hints:
            dep, alpha = ctx.parse_jet_name(jet_name)
            alpha = MultiIndex(alpha)
            if alpha.order != alpha[direction] or alpha.order < 1:
                raise KovalevskayaSearchError(f"hint {jet_name!r} is not a pure-direction derivative")
            eq_idx = eq_number - 1
            if not 0 <= eq_idx < len(system.equations):
                raise KovalevskayaSearchError(f"hint equation number {eq_number} out of range")
            if dep in solved or eq_idx in used_equations:
                raise KovalevskayaSearchError(f"hint {jet_name!r} reuses a solved variable or equation")
            if not attempt(eq_idx, dep, alpha[direction]):
                raise KovalevskayaSearchError(
                    f"hint failed: cannot eliminate {jet_name} from equation {eq_number}"
                )
    while len(solved) < len(ctx.dependent):
        progress = False
        for eq_idx in range(len(system.equations)):
            if eq_idx in used_equations:
                continue
            f = _reduce_with(solved, ctx, direction, system.equations[eq_idx])
            for dep in ctx.dependent:
                if dep in solved:
                    continue
                for k in _pure_direction_candidates(ctx, f, direction, dep):
                    if attempt(eq_idx, dep, k):
                        progress = True
                        break
                if progress:
                    break
            if progress:
                break
        if not progress:
            raise KovalevskayaSearchError("Kovalevskaya search failed; supply hints")
    orders = {dep: b for dep, (b, _) in solved.items()}
    rhs = {dep: phi for dep, (_, phi) in solved.items()}
    form = KovalevskayaForm(direction=direction, orders=orders, rhs=rhs, trail=trail)
    form.as_data().validate(ctx)
    return form


@dataclass
class ValidationCheck:
    name: str
    verdict: Verdict
    detail: str = ""


@dataclass
class ValidationResult:
    valid: bool
    checks: list[ValidationCheck] = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return all(c.verdict is Verdict.PROVED_EQUAL for c in self.checks)


def replay_trail(form: KovalevskayaForm, system: PdeSystem) -> bool:
    """Re-run the recorded eliminations on the original system; must reproduce rhs."""
    ctx = system.context
    partial: dict[str, tuple[int, Expr]] = {}
    for step in form.trail:
        pivot = ctx.jet(step.pivot_dep, MultiIndex.unit(len(ctx.independent), form.direction, step.pivot_order))
        f = _reduce_with(partial, ctx, form.direction, system.equations[step.equation_index])
        phi = _solve_linear(ctx, f, pivot)
        if phi is None:
            return False
        phi = _reduce_with(partial, ctx, form.direction, phi)
        if normalize(phi - step.phi) != 0:
            return False
        partial[step.pivot_dep] = (step.pivot_order, phi)
    return len(partial) == len(form.orders)


def validate_kovalevskaya(
    form: KovalevskayaForm,
    system: PdeSystem,
    trials: int | None = None,
    seed: int | None = None,
) -> ValidationResult:
    """Check independence, that originals vanish on the form, and equivalence.

    Equivalence of solution sets is certified exactly through the audit trail
    (or through an exact linear factorization of each original); failing
    both, the solved equations are endorsed only by on-shell sampling and the
    overall result is reported as sampled rather than exact.
    """
    ctx = system.context
    checks: list[ValidationCheck] = []
    n = len(ctx.independent)
    data = form.as_data()

    # 1. mechanical independence of the right sides
    offender = None
    for dep in form.orders:
        offender = data.violating_coordinate(ctx, form.rhs[dep])
        if offender is not None:
            checks.append(
                ValidationCheck(
                    "independence",
                    Verdict.PROVED_UNEQUAL,
                    f"right side for {dep!r} contains leading coordinate {offender}",
                )
            )
            break
    if offender is None:
        checks.append(ValidationCheck("independence", Verdict.PROVED_EQUAL))

    # 2. each original equation reduces to zero modulo the form
    solved_system = PdeSystem(context=ctx, equations=list(system.equations), kovalevskaya=data)
    reduction_ok = True
    for i, f in enumerate(system.equations):
        try:
            residue = on_shell_reduce(f, solved_system)
        except ReductionError as exc:
            checks.append(ValidationCheck("originals-vanish", Verdict.PROVED_UNEQUAL, str(exc)))
            reduction_ok = False
            break
        res = equals(ctx, residue, 0, trials=trials, seed=seed)
        if res.verdict is Verdict.PROVED_UNEQUAL:
            checks.append(
                ValidationCheck("originals-vanish", Verdict.PROVED_UNEQUAL, f"equation {i + 1} does not vanish")
            )
            reduction_ok = False
            break
    if reduction_ok:
        checks.append(ValidationCheck("originals-vanish", Verdict.PROVED_EQUAL))

    # 3. solved equations are consequences of the originals
    if form.trail and replay_trail(form, system):
        checks.append(ValidationCheck("solved-from-originals", Verdict.PROVED_EQUAL, "audit trail replayed"))
    else:
        certified = _factor_certificate(form, system)
        if certified:
            checks.append(ValidationCheck("solved-from-originals", Verdict.PROVED_EQUAL, "linear factor of an original"))
        else:
            verdict = _sampled_equivalence(form, system, trials=trials, seed=seed)
            checks.append(
                ValidationCheck(
                    "solved-from-originals",
                    verdict,
                    "endorsed by on-shell sampling only",
                )
            )
    valid = all(c.verdict is not Verdict.PROVED_UNEQUAL for c in checks)
    return ValidationResult(valid=valid, checks=checks)


def _factor_certificate(form: KovalevskayaForm, system: PdeSystem) -> bool:
    """Each solved equation matches some original as A * (pivot - rhs), A nonzero."""
    ctx = system.context
    n = len(ctx.independent)
    remaining = list(range(len(system.equations)))
    for dep, b in form.orders.items():
        pivot = ctx.jet(dep, MultiIndex.unit(n, form.direction, b))
        matched = None
        for i in remaining:
            f = system.equations[i]
            coeff = normalize(sympy.diff(f, pivot))
            if coeff == 0 or pivot in coeff.free_symbols:
                continue
            if normalize(f - coeff * (pivot - form.rhs[dep])) == 0:
                matched = i
                break
        if matched is None:
            return False
        remaining.remove(matched)
    return True


def _sampled_equivalence(form: KovalevskayaForm, system: PdeSystem, trials=None, seed=None) -> Verdict:
    """Oracle-only evidence: points generated by the form satisfy the originals."""
    from . import oracle

    data = form.as_data()
    solved_system = PdeSystem(context=system.context, equations=list(system.equations), kovalevskaya=data)
    order = max((MultiIndex(a).order for a in _jet_orders(system)), default=1)
    try:
        point = oracle.on_shell_sample(solved_system, order, seed=seed)
        for f in system.equations:
            value = oracle.evaluate(f, point)
            if value != 0 and abs(value) > 10**-9:
                return Verdict.PROVED_UNEQUAL
    except oracle.OracleUndecidable:
        return Verdict.PROBABLY_EQUAL
    return Verdict.PROBABLY_EQUAL


def _jet_orders(system: PdeSystem):
    ctx = system.context
    out = []
    for f in system.equations:
        for s in ctx.jets_in(f):
            out.append(ctx.jet_info(s)[1])
    return out
