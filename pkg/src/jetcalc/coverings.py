"""Differential coverings: Lagrangian labels from mass conservation, and
two-variable potential coverings from arbitrary conservation laws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import sympy

from .exprs import Context, EqualsResult, Expr, ExprError, Verdict, equals, normalize
from .jets import on_shell_reduce, total_derivative
from .systems import KovalevskayaData, MultiIndex, PdeSystem


@dataclass(frozen=True)
class ConservationLaw:
    """Current components T^i, one per independent variable.

    ``verify`` checks the defining property sum_i D_i(T^i) = 0 on-shell.
    """

    name: str
    components: tuple[Expr, ...]

    def divergence(self, ctx: Context) -> Expr:
        if len(self.components) != len(ctx.independent):
            raise ExprError(
                f"law {self.name!r} needs {len(ctx.independent)} components, has {len(self.components)}"
            )
        return normalize(
            sum(total_derivative(ctx, T, i) for i, T in enumerate(self.components))
        )

    def verify(self, system: PdeSystem, trials=None, seed=None) -> EqualsResult:
        system.require_kovalevskaya("conservation-law verification")
        residue = on_shell_reduce(self.divergence(system.context), system)
        return equals(system.context, residue, 0, trials=trials, seed=seed)


@dataclass
class CoveringSystem:
    """A base system enlarged by nonlocal variables and their defining equations."""

    base: PdeSystem
    system: PdeSystem
    nonlocal_vars: list[str]
    covering_equations: list[Expr]
    transport_rules: list[tuple[str, MultiIndex, Expr]] = field(default_factory=list)
    velocities: list[Expr] = field(default_factory=list)
    roles: dict = field(default_factory=dict)
    jacobian_positive: bool = False

    def strip(self) -> PdeSystem:
        """Forget the nonlocal variables; must recover the base verbatim."""
        return PdeSystem(
            context=self.base.context,
            equations=list(self.system.equations[: len(self.base.equations)]),
            kovalevskaya=self.base.kovalevskaya,
            name=self.base.name,
        )


def _jacobian_determinant(ctx: Context, xi_names: Sequence[str], spatial: Sequence[int]) -> Expr:
    k = len(xi_names)
    mat = sympy.Matrix(
        [[ctx.jet(xi, MultiIndex.unit(len(ctx.independent), s)) for s in spatial] for xi in xi_names]
    )
    return normalize(mat.det())


def build_lagrangian_covering(
    base: PdeSystem,
    density: str,
    velocities: Sequence[str],
    xi_prefix: str = "xi",
) -> CoveringSystem:
    """Adjoin Lagrangian labels: transport equations plus the Jacobian constraint.

    The first independent variable is taken as time; each remaining (spatial)
    variable contributes one nonlocal variable xi^i with
    ``xi^i_t + sum_s vel_s xi^i_{x_s} = 0`` and the constraint
    ``density = det(d xi / d x)``.
    """
    ctx = base.context
    if not 2 <= len(ctx.independent) <= 4:
        raise ExprError("Lagrangian covering needs time plus 1 to 3 spatial variables")
    spatial = list(range(1, len(ctx.independent)))
    k = len(spatial)
    if density not in ctx.dependent:
        raise ExprError(f"density role {density!r} is not a dependent variable")
    if len(velocities) != k:
        raise ExprError(f"need {k} velocity roles, got {len(velocities)}")
    for v in velocities:
        if v not in ctx.dependent:
            raise ExprError(f"velocity role {v!r} is not a dependent variable")
    if not ctx.is_positive(ctx.const(density) if density in ctx.constants else ctx.jet(density, MultiIndex.zero(len(ctx.independent)))):
        raise ExprError(f"density {density!r} must be flagged positive")

    xi_names = [f"{xi_prefix}{i + 1}" if k > 1 else xi_prefix for i in range(k)]
    big = ctx.extended(xi_names)
    if k == 1:
        # the 1x1 Jacobian is the single jet xi_x; positivity propagates to it
        big.declare_positive_jet(big.jet_name(xi_names[0], MultiIndex.unit(len(ctx.independent), spatial[0])))

    vel_syms = [big.jet(v, MultiIndex.zero(len(ctx.independent))) for v in velocities]
    rho = big.jet(density, MultiIndex.zero(len(ctx.independent)))
    det = _jacobian_determinant(big, xi_names, spatial)
    covering_eqs = [normalize(rho - det)]
    transport_rules = []
    for xi in xi_names:
        xi_t = big.jet(xi, MultiIndex.unit(len(ctx.independent), 0))
        advect = sum(
            v * big.jet(xi, MultiIndex.unit(len(ctx.independent), s))
            for v, s in zip(vel_syms, spatial)
        )
        covering_eqs.append(normalize(xi_t + advect))
        transport_rules.append((xi, MultiIndex.unit(len(ctx.independent), 0), normalize(-advect)))

    kov = None
    if base.kovalevskaya is not None and base.kovalevskaya.direction == 0:
        data = base.kovalevskaya
        orders = dict(data.orders)
        rhs = dict(data.rhs)
        for xi, _, rule_rhs in transport_rules:
            orders[xi] = 1
            rhs[xi] = rule_rhs
        kov = KovalevskayaData(
            direction=0, orders=orders, rhs=rhs, extra_rules=data.extra_rules
        )
    system = PdeSystem(
        context=big,
        equations=list(base.equations) + covering_eqs,
        kovalevskaya=kov,
        name=(base.name + "+lagrangian-labels").lstrip("+"),
    )
    return CoveringSystem(
        base=base,
        system=system,
        nonlocal_vars=xi_names,
        covering_equations=covering_eqs,
        transport_rules=transport_rules,
        velocities=list(vel_syms),
        roles={"density": density, "velocities": tuple(velocities)},
        jacobian_positive=True,
    )


def verify_covering_consistency(cov: CoveringSystem, trials=None, seed=None) -> EqualsResult:
    """Check D_t(J) + sum_s D_s(vel_s J) = 0 modulo the transport equations.

    This is the computational content of the claim that the only consistency
    condition of the label equations is the mass conservation law: reducing
    the mass-conservation divergence of the Jacobian with the transport rules
    alone yields exactly zero.
    """
    ctx = cov.system.context
    if not cov.transport_rules:
        raise ExprError("covering carries no transport rules to reduce against")
    spatial = list(range(1, len(ctx.independent)))
    vels = cov.velocities
    det = _jacobian_determinant(ctx, cov.nonlocal_vars, spatial)
    residue = total_derivative(ctx, det, 0)
    for v, s in zip(vels, spatial):
        residue += total_derivative(ctx, v * det, s)
    transport_only = PdeSystem(
        context=ctx,
        equations=list(cov.system.equations),
        kovalevskaya=KovalevskayaData(
            direction=0,
            orders={xi: 1 for xi, _, _ in cov.transport_rules},
            rhs={xi: rhs for xi, _, rhs in cov.transport_rules},
        ),
        name="transport-only",
    )
    reduced = on_shell_reduce(normalize(residue), transport_only)
    return equals(ctx, reduced, 0, trials=trials, seed=seed)


def build_potential_covering(base: PdeSystem, law: ConservationLaw, potential: str = "w") -> CoveringSystem:
    """Adjoin the potential of a two-variable conservation law.

    Sign convention, fixed once: ``w_x = T^t`` and ``w_t = -T^x``, so the
    cross-derivative identity D_t(w_x) - D_x(w_t) recovers the divergence of
    the law.
    """
    ctx = base.context
    if len(ctx.independent) != 2:
        raise ExprError("potential covering implemented for two independent variables only")
    T_t, T_x = (normalize(c) for c in law.components)
    big = ctx.extended([potential])
    w_t = big.jet(potential, MultiIndex((1, 0)))
    w_x = big.jet(potential, MultiIndex((0, 1)))
    covering_eqs = [normalize(w_x - T_t), normalize(w_t + T_x)]
    kov = None
    if base.kovalevskaya is not None and base.kovalevskaya.direction == 0:
        data = base.kovalevskaya
        offender = data.violating_coordinate(ctx, T_x)
        if offender is None:
            orders = dict(data.orders)
            rhs = dict(data.rhs)
            orders[potential] = 1
            rhs[potential] = normalize(-T_x)
            extra = tuple(data.extra_rules) + ((potential, MultiIndex((0, 1)), T_t),)
            kov = KovalevskayaData(direction=0, orders=orders, rhs=rhs, extra_rules=extra)
    system = PdeSystem(
        context=big,
        equations=list(base.equations) + covering_eqs,
        kovalevskaya=kov,
        name=(base.name + "+potential").lstrip("+"),
    )
    return CoveringSystem(
        base=base,
        system=system,
        nonlocal_vars=[potential],
        covering_equations=covering_eqs,
        transport_rules=[],
        roles={"law": law.name},
    )


def covering_from_file(sf) -> CoveringSystem:
    """Reconstruct covering structure from a parsed file with nonlocal variables.

    Lagrangian-label coverings are recognized by transport-shaped rules
    ``xi_t = -sum_s vel_s xi_{x_s}`` for every nonlocal variable; potential
    coverings by a single nonlocal variable with rules for both first
    derivatives.  The base system is the file minus the nonlocal variables'
    equations.
    """
    ctx = sf.context
    system = sf.system
    names = list(sf.nonlocal_vars)
    if not names:
        raise ExprError("file declares no nonlocal variables")
    n = len(ctx.independent)

    def mentions_nonlocal(e: Expr) -> bool:
        return any(ctx.jet_info(s)[0] in names for s in ctx.jets_in(e))

    base_eqs = [e for e in system.equations if not mentions_nonlocal(e)]
    covering_eqs = [e for e in system.equations if mentions_nonlocal(e)]
    base_kov = None
    if system.kovalevskaya is not None:
        data = system.kovalevskaya
        base_orders = {d: b for d, b in data.orders.items() if d not in names}
        if base_orders:
            base_kov = KovalevskayaData(
                direction=data.direction,
                orders=base_orders,
                rhs={d: data.rhs[d] for d in base_orders},
                extra_rules=tuple(r for r in data.extra_rules if r[0] not in names),
            )
    base_ctx = Context(
        list(ctx.independent),
        [d for d in ctx.dependent if d not in names],
    )
    for c in ctx.constants.values():
        base_ctx.declare_constant(c)
    for f in ctx.functions.values():
        base_ctx.declare_function(f)
    for jname in ctx._positive_jets:
        dep = jname.split("_", 1)[0]
        if dep not in names:
            base_ctx.declare_positive_jet(jname)
    base = PdeSystem(context=base_ctx, equations=base_eqs, kovalevskaya=base_kov, name=sf.name)

    # transport-shaped rules -> Lagrangian-label covering
    transport_rules = []
    velocities = None
    if system.kovalevskaya is not None and system.kovalevskaya.direction == 0:
        data = system.kovalevskaya
        spatial = list(range(1, n))
        for xi in names:
            if data.orders.get(xi) != 1:
                transport_rules = []
                break
            rhs = data.rhs[xi]
            vels = []
            rebuilt = sympy.Integer(0)
            for s in spatial:
                xi_s = ctx.jet(xi, MultiIndex.unit(n, s))
                coeff = normalize(-sympy.diff(rhs, xi_s))
                vels.append(coeff)
                rebuilt += coeff * xi_s
            if normalize(rhs + rebuilt) != 0:
                transport_rules = []
                break
            if velocities is None:
                velocities = vels
            elif [normalize(a - b) for a, b in zip(velocities, vels)] != [0] * len(vels):
                transport_rules = []
                break
            transport_rules.append((xi, MultiIndex.unit(n, 0), rhs))
    if not (transport_rules and velocities is not None and len(names) == n - 1):
        transport_rules = []
        velocities = []
    return CoveringSystem(
        base=base,
        system=system,
        nonlocal_vars=names,
        covering_equations=covering_eqs,
        transport_rules=transport_rules,
        velocities=list(velocities),
        roles={},
        jacobian_positive=False,
    )


def cross_derivative_residue(cov: CoveringSystem) -> Expr:
    """D_t(w_x) - D_x(w_t) for a potential covering, reduced on the base."""
    ctx = cov.system.context
    if len(cov.nonlocal_vars) != 1 or cov.transport_rules:
        raise ExprError("cross-derivative residue applies to potential coverings")
    w_x_rhs, w_t_rhs = None, None
    for eq in cov.covering_equations:
        jets_w = [s for s in ctx.jets_in(eq) if ctx.jet_info(s)[0] == cov.nonlocal_vars[0]]
        (sym,) = jets_w
        _, alpha = ctx.jet_info(sym)
        solved = normalize(sym - eq)
        if alpha == (0, 1):
            w_x_rhs = solved
        else:
            w_t_rhs = solved
    residue = total_derivative(ctx, w_x_rhs, 0) - total_derivative(ctx, w_t_rhs, 1)
    if cov.base.kovalevskaya is not None:
        return on_shell_reduce(normalize(residue), cov.base)
    return normalize(residue)
