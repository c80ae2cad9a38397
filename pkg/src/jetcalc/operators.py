"""Matrix operators in total derivatives: apply, compose, adjoint, linearize.

An operator entry is a finite sum ``sum_alpha a_alpha * D_alpha`` stored as a
sparse map from multi-index to coefficient, always expanded ("all D to the
right") so that comparison and the formal adjoint work on a canonical form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import sympy

from .exprs import Context, EqualsResult, Expr, ExprError, Verdict, equals, normalize
from .jets import derivative_table, on_shell_reduce, rule_replacement, total_derivative_multi
from .systems import KovalevskayaData, MultiIndex, PdeSystem, multi_indices_upto

Entry = dict[MultiIndex, Expr]


def _clean_entry(ctx: Context, entry: Mapping) -> Entry:
    out: Entry = {}
    for alpha, coeff in entry.items():
        coeff = normalize(coeff)
        if coeff != 0:
            out[MultiIndex(alpha)] = coeff
    return out


@dataclass(frozen=True)
class TotalDiffOp:
    """An r x c matrix whose entries are operators in total derivatives."""

    context: Context
    entries: tuple[tuple[Entry, ...], ...]

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    @property
    def order(self) -> int:
        return max((a.order for row in self.entries for e in row for a in e), default=0)

    @classmethod
    def from_entries(cls, ctx: Context, grid: Sequence[Sequence[Mapping]]) -> "TotalDiffOp":
        rows = tuple(tuple(_clean_entry(ctx, e) for e in row) for row in grid)
        if rows and any(len(r) != len(rows[0]) for r in rows):
            raise ExprError("ragged operator matrix")
        return cls(ctx, rows)

    @classmethod
    def zero(cls, ctx: Context, rows: int, cols: int) -> "TotalDiffOp":
        return cls(ctx, tuple(tuple({} for _ in range(cols)) for _ in range(rows)))

    @classmethod
    def identity(cls, ctx: Context, size: int) -> "TotalDiffOp":
        zero_idx = MultiIndex.zero(len(ctx.independent))
        return cls.from_entries(
            ctx,
            [[{zero_idx: sympy.Integer(1)} if i == j else {} for j in range(size)] for i in range(size)],
        )

    @classmethod
    def scalar(cls, ctx: Context, coeff) -> "TotalDiffOp":
        return cls.from_entries(ctx, [[{MultiIndex.zero(len(ctx.independent)): coeff}]])

    @classmethod
    def d(cls, ctx: Context, i: int, power: int = 1) -> "TotalDiffOp":
        alpha = MultiIndex.unit(len(ctx.independent), i, power)
        return cls.from_entries(ctx, [[{alpha: sympy.Integer(1)}]])

    # -- linear algebra ------------------------------------------------------

    def _check_same_shape(self, other: "TotalDiffOp") -> None:
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ExprError("operator shape mismatch")

    def __add__(self, other: "TotalDiffOp") -> "TotalDiffOp":
        self._check_same_shape(other)
        grid = []
        for ra, rb in zip(self.entries, other.entries):
            row = []
            for ea, eb in zip(ra, rb):
                merged = dict(ea)
                for alpha, c in eb.items():
                    merged[alpha] = merged.get(alpha, sympy.Integer(0)) + c
                row.append(merged)
            grid.append(row)
        return TotalDiffOp.from_entries(self.context, grid)

    def __sub__(self, other: "TotalDiffOp") -> "TotalDiffOp":
        return self + other.scale(-1)

    def scale(self, factor) -> "TotalDiffOp":
        grid = [[{a: factor * c for a, c in e.items()} for e in row] for row in self.entries]
        return TotalDiffOp.from_entries(self.context, grid)

    def is_zero(self) -> bool:
        return all(not e for row in self.entries for e in row)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TotalDiffOp):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self):
        return hash(tuple(tuple(tuple(sorted(e.items(), key=lambda kv: kv[0])) for e in row) for row in self.entries))

    # -- operator actions ----------------------------------------------------

    def apply(self, phi: Sequence) -> list[Expr]:
        """(op phi)^i = sum_j sum_alpha a^{ij}_alpha D_alpha(phi^j)."""
        phi = [sympy.sympify(p) for p in phi]
        if len(phi) != self.cols:
            raise ExprError(f"operator with {self.cols} columns applied to {len(phi)} components")
        ctx = self.context
        out = []
        for row in self.entries:
            acc = sympy.Integer(0)
            for entry, pj in zip(row, phi):
                for alpha, coeff in entry.items():
                    acc += coeff * total_derivative_multi(ctx, pj, alpha)
            out.append(normalize(acc))
        return out

    def compose(self, other: "TotalDiffOp") -> "TotalDiffOp":
        """self o other, expanded by the Leibniz rule into canonical sparse form."""
        if self.cols != other.rows:
            raise ExprError("operator shape mismatch in composition")
        ctx = self.context
        n = len(ctx.independent)
        grid = [[{} for _ in range(other.cols)] for _ in range(self.rows)]
        for j in range(self.cols):
            col_alphas = [alpha for i in range(self.rows) for alpha in self.entries[i][j]]
            if not col_alphas:
                continue
            alpha_max = MultiIndex(tuple(max(a[d] for a in col_alphas) for d in range(n)))
            for k in range(other.cols):
                for beta, b in other.entries[j][k].items():
                    # D_alpha o (b D_beta) = sum_{g <= alpha} C(alpha,g) D_g(b) D_{alpha-g+beta}
                    table = derivative_table(ctx, b, alpha_max)
                    for i in range(self.rows):
                        for alpha, a in self.entries[i][j].items():
                            for gamma in _sub_indices(alpha):
                                coeff = alpha.binom(gamma) * a * table[gamma]
                                target = (alpha - gamma) + beta
                                cell = grid[i][k]
                                cell[target] = cell.get(target, sympy.Integer(0)) + coeff
        return TotalDiffOp.from_entries(ctx, grid)

    def adjoint(self) -> "TotalDiffOp":
        """Formal adjoint: transpose with (a D_alpha)* = (-1)^|alpha| D_alpha o a."""
        ctx = self.context
        grid = [[{} for _ in range(self.rows)] for _ in range(self.cols)]
        for i in range(self.rows):
            for j in range(self.cols):
                for alpha, a in self.entries[i][j].items():
                    sign = sympy.Integer(-1) ** alpha.order
                    table = derivative_table(ctx, a, alpha)
                    for gamma in _sub_indices(alpha):
                        coeff = sign * alpha.binom(gamma) * table[gamma]
                        target = alpha - gamma
                        cell = grid[j][i]
                        cell[target] = cell.get(target, sympy.Integer(0)) + coeff
        return TotalDiffOp.from_entries(ctx, grid)

    def entry_expr(self, i: int, j: int, d_symbols: Mapping[MultiIndex, sympy.Symbol] | None = None) -> Expr:
        """Entry (i, j) as an expression in formal D symbols (for printing)."""
        entry = self.entries[i][j]
        acc = sympy.Integer(0)
        for alpha, coeff in entry.items():
            if alpha.order == 0:
                acc += coeff
            else:
                dsym = (d_symbols or {}).get(alpha) or sympy.Symbol(_d_name(self.context, alpha))
                acc += coeff * dsym
        return acc


def _d_name(ctx: Context, alpha: MultiIndex) -> str:
    suffix = "".join(v * a for v, a in zip(ctx.independent, alpha))
    return f"D_{suffix}"


def _sub_indices(alpha: MultiIndex) -> list[MultiIndex]:
    out = [MultiIndex.zero(len(alpha))]
    for i, a in enumerate(alpha):
        out = [g + MultiIndex.unit(len(alpha), i, k) for g in out for k in range(a + 1)]
    return out


def linearize(system: PdeSystem) -> TotalDiffOp:
    """Universal linearization: entries sum_alpha dF^i/du^j_alpha D_alpha."""
    ctx = system.context
    grid = [[{} for _ in ctx.dependent] for _ in system.equations]
    for i, f in enumerate(system.equations):
        for s in ctx.jets_in(f):
            dep, alpha = ctx.jet_info(s)
            j = ctx.dependent.index(dep)
            coeff = normalize(sympy.diff(f, s))
            if coeff != 0:
                cell = grid[i][j]
                key = MultiIndex(alpha)
                cell[key] = cell.get(key, sympy.Integer(0)) + coeff
    return TotalDiffOp.from_entries(ctx, grid)


# -- on-shell operator comparison ---------------------------------------------

_TEST_PREFIXES = ("phi", "psi", "chi", "eta")


def _fresh_names(ctx: Context, count: int) -> list[str]:
    for prefix in _TEST_PREFIXES:
        names = [f"{prefix}{i + 1}" for i in range(count)]
        if not any(
            n in ctx.dependent or n in ctx.constants or n in ctx.functions or n in ctx.independent
            for n in names
        ):
            return names
    raise ExprError("could not find fresh test-function names")


def augmented_system(system: PdeSystem) -> tuple[PdeSystem, list[str]]:
    """Extend the system with generic test functions solving the linearized rules.

    For each rule ``u_{b d} = Phi`` the test vector gets ``phi_{b d} =
    l_Phi(phi)``, i.e. restriction to the prolonged system together with the
    linearized equation.  This realizes operator equality on the equation
    manifold: operators that differ by something vanishing on-shell or by a
    composition with the linearization compare equal.
    """
    data = system.require_kovalevskaya()
    ctx = system.context
    names = _fresh_names(ctx, len(ctx.dependent))
    big = ctx.extended(names)
    phi_of = dict(zip(ctx.dependent, names))

    def linearize_rhs(rhs: Expr) -> Expr:
        acc = sympy.Integer(0)
        for s in ctx.jets_in(rhs):
            dep, alpha = ctx.jet_info(s)
            acc += sympy.diff(rhs, s) * big.jet(phi_of[dep], alpha)
        return normalize(acc)

    orders = dict(data.orders)
    rhs = dict(data.rhs)
    for dep, b in data.orders.items():
        orders[phi_of[dep]] = b
        rhs[phi_of[dep]] = linearize_rhs(data.rhs[dep])
    extra = list(data.extra_rules)
    for dep, alpha, rule_rhs in data.extra_rules:
        extra.append((phi_of[dep], alpha, linearize_rhs(rule_rhs)))
    aug_data = KovalevskayaData(direction=data.direction, orders=orders, rhs=rhs, extra_rules=tuple(extra))
    aug = PdeSystem(context=big, equations=list(system.equations), kovalevskaya=aug_data, name=system.name)
    return aug, names


def op_equals_on_shell(
    op1: TotalDiffOp,
    op2: TotalDiffOp,
    system: PdeSystem,
    trials: int | None = None,
    seed: int | None = None,
) -> EqualsResult:
    """Compare operators restricted to the prolonged system.

    The difference is applied to a generic test vector, reduced modulo the
    augmented rewrite rules, and the coefficient of every remaining test-jet
    must vanish.  Falls back to on-shell oracle sampling outside the exact
    fragment.
    """
    system.require_kovalevskaya("on-shell comparison")
    op1._check_same_shape(op2)
    diff = op1 - op2
    if diff.is_zero():
        return EqualsResult(Verdict.PROVED_EQUAL, "normal-form")
    aug, names = augmented_system(system)
    big = aug.context
    phi = [big.jet(n, MultiIndex.zero(len(big.independent))) for n in names]
    diff_big = TotalDiffOp(big, diff.entries)
    residues = [on_shell_reduce(r, aug) for r in diff_big.apply(phi)]
    verdicts = []
    for r in residues:
        verdicts.append(equals(big, r, 0, trials=trials, seed=seed))
    if all(v.verdict is Verdict.PROVED_EQUAL for v in verdicts):
        return EqualsResult(Verdict.PROVED_EQUAL, "normal-form")
    if any(v.verdict is Verdict.PROVED_UNEQUAL for v in verdicts):
        bad = next(v for v in verdicts if v.verdict is Verdict.PROVED_UNEQUAL)
        return bad
    sampled = [v for v in verdicts if v.verdict is Verdict.PROBABLY_EQUAL]
    first = sampled[0]
    return EqualsResult(Verdict.PROBABLY_EQUAL, "oracle", seed=first.seed, trials=first.trials)


# -- Lagrange identity witness --------------------------------------------------


def divergence_witness(op: TotalDiffOp, phi, psi) -> list[Expr]:
    """W with sum_i D_i(W^i) = psi * op(phi) - op*(psi) * phi (scalar op).

    Built by the standard integration-by-parts telescoping, one direction at
    a time, with exact coefficients.
    """
    if op.rows != 1 or op.cols != 1:
        raise ExprError("divergence witness is defined for scalar operators")
    ctx = op.context
    n = len(ctx.independent)
    phi = sympy.sympify(phi)
    psi = sympy.sympify(psi)
    witness = [sympy.Integer(0)] * n

    def telescope(g: Expr, i: int, k: int, h: Expr) -> Expr:
        # g*D_i^k(h) - (-1)^k D_i^k(g)*h = D_i(sum_j (-1)^j D_i^j(g) D_i^{k-1-j}(h))
        acc = sympy.Integer(0)
        for j in range(k):
            acc += (
                sympy.Integer(-1) ** j
                * total_derivative_multi(ctx, g, MultiIndex.unit(n, i, j))
                * total_derivative_multi(ctx, h, MultiIndex.unit(n, i, k - 1 - j))
            )
        return acc

    for alpha, coeff in op.entries[0][0].items():
        g = normalize(psi * coeff)
        remaining = list(alpha)
        for i in range(n):
            k = remaining[i]
            if k == 0:
                continue
            remaining[i] = 0
            h = total_derivative_multi(ctx, phi, MultiIndex(remaining))
            witness[i] += telescope(g, i, k, h)
            g = sympy.Integer(-1) ** k * total_derivative_multi(ctx, g, MultiIndex.unit(n, i, k))
    return [normalize(w) for w in witness]
