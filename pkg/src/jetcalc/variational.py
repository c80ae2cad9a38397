"""Euler operator, Helmholtz check, Lagrangian reconstruction, symplectic
operators, symmetries/cosymmetries, the Noether map, and the fiber-symmetry
degeneracy test for candidate structures on coverings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import sympy

from .exprs import Context, EqualsResult, Expr, ExprError, Verdict, equals, normalize
from .jets import on_shell_reduce, total_derivative_multi
from .operators import TotalDiffOp, linearize, op_equals_on_shell
from .systems import MultiIndex, PdeSystem


@dataclass(frozen=True)
class Lagrangian:
    """A Lagrangian density (coefficient of the full volume form)."""

    context: Context
    density: Expr

    def __post_init__(self):
        object.__setattr__(self, "density", normalize(self.density))


@dataclass(frozen=True)
class Symmetry:
    """A generating vector function in the kernel of the linearization."""

    name: str
    components: tuple[Expr, ...]


@dataclass(frozen=True)
class Cosymmetry:
    name: str
    components: tuple[Expr, ...]


@dataclass(frozen=True)
class SymplecticCandidate:
    operator: TotalDiffOp
    system: PdeSystem


def euler(lagrangian: Lagrangian) -> list[Expr]:
    """Variational derivative: E_j(L) = sum_alpha (-1)^|alpha| D_alpha(dL/du^j_alpha)."""
    ctx = lagrangian.context
    L = lagrangian.density
    acc = {dep: sympy.Integer(0) for dep in ctx.dependent}
    for s in ctx.jets_in(L):
        dep, alpha = ctx.jet_info(s)
        alpha = MultiIndex(alpha)
        term = total_derivative_multi(ctx, sympy.diff(L, s), alpha)
        acc[dep] += sympy.Integer(-1) ** alpha.order * term
    return [normalize(acc[dep]) for dep in ctx.dependent]


@dataclass
class VariationalResult:
    variational: bool
    defect: TotalDiffOp  # l_F - l_F*, zero when variational
    violating_entry: tuple[int, int] | None = None
    certificate: Lagrangian | None = None
    certificate_note: str = ""

    @property
    def verdict(self) -> Verdict:
        return Verdict.PROVED_EQUAL if self.variational else Verdict.PROVED_UNEQUAL


def is_variational(system: PdeSystem, with_certificate: bool = True) -> VariationalResult:
    """Helmholtz criterion: F = E(L) iff the linearization is formally self-adjoint.

    Checked off-shell as an operator identity in expanded canonical form (the
    exact criterion for F itself being an Euler-Lagrange expression).
    """
    system.require_square("the Helmholtz check")
    l_f = linearize(system)
    defect = l_f - l_f.adjoint()
    if not defect.is_zero():
        entry = next(
            (i, j)
            for i in range(defect.rows)
            for j in range(defect.cols)
            if defect.entries[i][j]
        )
        return VariationalResult(False, defect, violating_entry=entry)
    result = VariationalResult(True, defect)
    if with_certificate:
        try:
            result.certificate = homotopy_lagrangian(system.context, system.equations)
        except ExprError as exc:
            result.certificate_note = str(exc)
    return result


def homotopy_lagrangian(ctx: Context, F: Sequence[Expr], shift: Sequence | None = None) -> Lagrangian:
    """Reconstruct L with E(L) = F via L = integral_0^1 sum_j u^j F_j(x, lam*u) dlam.

    Requires every component to be polynomial in the jet coordinates so the
    parameter integral is exact; a shift moves the homotopy base point away
    from singular loci (u -> u + c).
    """
    F = [normalize(f) for f in F]
    if len(F) != len(ctx.dependent):
        raise ExprError("need one component per dependent variable")
    if shift is not None:
        if len(shift) != len(ctx.dependent):
            raise ExprError("need one shift per dependent variable")
        offsets = {dep: sympy.sympify(c) for dep, c in zip(ctx.dependent, shift)}
        moved = {}
        for f in F:
            for s in ctx.jets_in(f):
                dep, alpha = ctx.jet_info(s)
                if MultiIndex(alpha).order == 0:
                    moved[s] = s + offsets[dep]
        F = [normalize(f.xreplace(moved)) for f in F]
    jet_syms = sorted({s for f in F for s in ctx.jets_in(f)}, key=str)
    for f in F:
        if not f.is_polynomial(*jet_syms) or any(
            app.has(*jet_syms) for app in f.atoms(sympy.Function)
        ):
            raise ExprError("homotopy requires polynomial jets; supply Lagrangian manually")
    lam = sympy.Symbol("_lambda")
    scale = {s: lam * s for s in jet_syms}
    integrand = sympy.Integer(0)
    for dep, f in zip(ctx.dependent, F):
        integrand += ctx.jet(dep, MultiIndex.zero(len(ctx.independent))) * f.xreplace(scale)
    density = sympy.integrate(sympy.expand(integrand), (lam, 0, 1))
    lagr = Lagrangian(ctx, density)
    for e_l, f in zip(euler(lagr), F):
        check = equals(ctx, e_l, f)
        if check.verdict is Verdict.PROVED_UNEQUAL:
            raise ExprError("homotopy failed: input is not variational")
    return lagr


@dataclass
class SymplecticResult:
    verdict: Verdict
    evidence: EqualsResult
    note: str = (
        "representative-level check of adjoint-compatibility with the "
        "linearization on-shell; equivalence modulo self-adjoint multiples "
        "of the linearization is not decided"
    )

    @property
    def holds(self) -> bool:
        return self.verdict.affirmative


def symplectic_check(candidate: SymplecticCandidate, trials: int | None = None, seed: int | None = None) -> SymplecticResult:
    """Does op* o l_F equal l_F* o op on-shell?  Sufficient, representative-level."""
    system = candidate.system
    system.require_kovalevskaya("the symplectic condition")
    system.require_square("the symplectic condition")
    l_f = linearize(system)
    lhs = candidate.operator.adjoint().compose(l_f)
    rhs = l_f.adjoint().compose(candidate.operator)
    evidence = op_equals_on_shell(lhs, rhs, system, trials=trials, seed=seed)
    return SymplecticResult(evidence.verdict, evidence)


def _componentwise_on_shell_zero(
    system: PdeSystem, values: Sequence[Expr], trials=None, seed=None
) -> tuple[Verdict, list[EqualsResult], list[Expr]]:
    ctx = system.context
    reduced = [on_shell_reduce(v, system) for v in values]
    results = [equals(ctx, r, 0, trials=trials, seed=seed) for r in reduced]
    if all(r.verdict is Verdict.PROVED_EQUAL for r in results):
        verdict = Verdict.PROVED_EQUAL
    elif any(r.verdict is Verdict.PROVED_UNEQUAL for r in results):
        verdict = Verdict.PROVED_UNEQUAL
    else:
        verdict = Verdict.PROBABLY_EQUAL
    return verdict, results, reduced


def is_symmetry(system: PdeSystem, phi: Sequence[Expr], trials=None, seed=None) -> EqualsResult:
    """phi is a symmetry when l_F(phi) reduces to zero on-shell componentwise."""
    system.require_kovalevskaya("the symmetry condition")
    applied = linearize(system).apply(list(phi))
    verdict, results, _ = _componentwise_on_shell_zero(system, applied, trials, seed)
    for r in results:
        if r.verdict is verdict:
            return r
    return results[0]


def is_cosymmetry(system: PdeSystem, psi: Sequence[Expr], trials=None, seed=None) -> EqualsResult:
    """psi is a cosymmetry when l_F*(psi) reduces to zero on-shell componentwise."""
    system.require_kovalevskaya("the cosymmetry condition")
    system.require_square("the cosymmetry condition")
    applied = linearize(system).adjoint().apply(list(psi))
    verdict, results, _ = _componentwise_on_shell_zero(system, applied, trials, seed)
    for r in results:
        if r.verdict is verdict:
            return r
    return results[0]


def noether_map(candidate: SymplecticCandidate, phi: Symmetry, trials=None, seed=None) -> Cosymmetry:
    """Map a symmetry to a cosymmetry through the symplectic operator.

    Asserts the postcondition; failure means the candidate is not symplectic
    along this symmetry.
    """
    system = candidate.system
    sym_check = is_symmetry(system, phi.components, trials=trials, seed=seed)
    if not sym_check.affirmative:
        raise ExprError(f"{phi.name!r} is not a symmetry of the system")
    image = candidate.operator.apply(list(phi.components))
    psi = [on_shell_reduce(v, system) for v in image]
    post = is_cosymmetry(system, psi, trials=trials, seed=seed)
    if not post.affirmative:
        raise ExprError("candidate not symplectic on this symmetry")
    return Cosymmetry(name=f"noether({phi.name})", components=tuple(psi))


@dataclass
class DegeneracyEntry:
    symmetry: Symmetry
    image: list[Expr]
    degenerate: bool
    zero_evidence: EqualsResult
    positivity_note: str = ""

    @property
    def label(self) -> str:
        if self.degenerate:
            return "lift-compatible (degenerate on %s)" % self.symmetry.name
        return "not a lift (nondegenerate on %s)" % self.symmetry.name


@dataclass
class DegeneracyReport:
    candidate: SymplecticCandidate
    entries: list[DegeneracyEntry] = field(default_factory=list)

    @property
    def lift_excluded(self) -> bool:
        """A single nondegenerate fiber symmetry rules out a lifted structure."""
        return any(not e.degenerate for e in self.entries)

    @property
    def conclusion(self) -> str:
        if self.lift_excluded:
            return "not a lift of a symplectic structure of the base system"
        return "compatible with being a lift on the tested fiber symmetries"


def degeneracy_check(
    candidate: SymplecticCandidate,
    fiber_symmetries: Sequence[Symmetry],
    fiber_variables: Sequence[str],
    trials=None,
    seed=None,
) -> DegeneracyReport:
    """Test whether the candidate annihilates each fiber symmetry on-shell.

    Lifted structures vanish on symmetries acting only along covering fibers,
    so any nondegenerate fiber symmetry certifies the candidate is not a
    lift.  Per-symmetry facts only; no claim is made about equivalent
    representatives modulo self-adjoint multiples of the linearization.
    """
    system = candidate.system
    ctx = system.context
    report = DegeneracyReport(candidate)
    fiber = set(fiber_variables)
    for phi in fiber_symmetries:
        for dep, comp in zip(ctx.dependent, phi.components):
            if dep not in fiber and normalize(comp) != 0:
                raise ExprError(
                    f"{phi.name!r} acts on non-fiber variable {dep!r}; "
                    "degeneracy applies to fiber symmetries only"
                )
        sym_check = is_symmetry(system, phi.components, trials=trials, seed=seed)
        if not sym_check.affirmative:
            raise ExprError(f"{phi.name!r} is not a symmetry of the covering system")
        image = candidate.operator.apply(list(phi.components))
        verdict, results, reduced = _componentwise_on_shell_zero(system, image, trials, seed)
        degenerate = verdict is Verdict.PROVED_EQUAL
        evidence = next((r for r in results if r.verdict is verdict), results[0])
        note = ""
        if not degenerate:
            positives = [r for r in reduced if r != 0 and all(ctx.is_positive(s) for s in r.free_symbols) and r.free_symbols]
            if positives:
                note = f"{positives[0]} is positive on-shell, hence nonzero"
        report.entries.append(
            DegeneracyEntry(phi, reduced, degenerate, evidence, positivity_note=note)
        )
    return report
