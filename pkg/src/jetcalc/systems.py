"""PDE systems, multi-indices, and leading-derivative rewrite data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import sympy

from .exprs import Context, Expr, ExprError, normalize


class MultiIndex(tuple):
    """Per-variable derivative exponents; addition is componentwise."""

    def __new__(cls, entries: Sequence[int]):
        entries = tuple(int(a) for a in entries)
        if any(a < 0 for a in entries):
            raise ExprError(f"multi-index entries must be nonnegative: {entries}")
        return super().__new__(cls, entries)

    @classmethod
    def zero(cls, n: int) -> "MultiIndex":
        return cls((0,) * n)

    @classmethod
    def unit(cls, n: int, i: int, k: int = 1) -> "MultiIndex":
        entries = [0] * n
        entries[i] = k
        return cls(entries)

    @property
    def order(self) -> int:
        return sum(self)

    def __add__(self, other) -> "MultiIndex":
        return MultiIndex(tuple(a + b for a, b in zip(self, other)))

    def __sub__(self, other) -> "MultiIndex":
        return MultiIndex(tuple(a - b for a, b in zip(self, other)))

    def bump(self, i: int) -> "MultiIndex":
        return self + MultiIndex.unit(len(self), i)

    def leq(self, other) -> bool:
        return all(a <= b for a, b in zip(self, other))

    def binom(self, lower) -> int:
        out = 1
        for a, g in zip(self, lower):
            out *= sympy.binomial(a, g)
        return int(out)


def multi_indices_upto(n: int, order: int) -> list[MultiIndex]:
    """All multi-indices with |alpha| <= order, in graded lexicographic order."""
    out: list[MultiIndex] = []
    for total in range(order + 1):
        out.extend(_compositions(n, total))
    return out


def _compositions(n: int, total: int) -> list[MultiIndex]:
    if n == 1:
        return [MultiIndex((total,))]
    out = []
    for head in range(total, -1, -1):
        for rest in _compositions(n - 1, total - head):
            out.append(MultiIndex((head,) + tuple(rest)))
    return out


class ReductionError(RuntimeError):
    """On-shell reduction failed to terminate within its iteration bound."""


@dataclass
class KovalevskayaData:
    """Rewrite rules for leading derivatives.

    ``orders[dep] = b`` and ``rhs[dep]`` encode ``dep_{b*direction} = rhs``.
    ``extra_rules`` carry auxiliary constraints (used by coverings), each
    rewriting a single jet coordinate.  The primary right sides must be
    independent of every leading coordinate; this is checked mechanically.
    """

    direction: int
    orders: dict[str, int]
    rhs: dict[str, Expr]
    extra_rules: tuple[tuple[str, MultiIndex, Expr], ...] = ()
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    def validate(self, ctx: Context) -> None:
        for dep, b in self.orders.items():
            if dep not in ctx.dependent:
                raise ExprError(f"undeclared dependent variable {dep!r} in Kovalevskaya data")
            if b < 1:
                raise ExprError(f"Kovalevskaya order for {dep!r} must be a positive integer")
            if dep not in self.rhs:
                raise ExprError(f"missing solved right side for {dep!r}")
        for dep in self.orders:
            offender = self.violating_coordinate(ctx, self.rhs[dep])
            if offender is not None:
                raise ExprError(
                    f"right side for {dep!r} depends on leading coordinate {offender}"
                )
        for dep, alpha, rule_rhs in self.extra_rules:
            for s in ctx.jets_in(rule_rhs):
                d2, a2 = ctx.jet_info(s)
                if d2 == dep and alpha.leq(MultiIndex(a2)):
                    raise ExprError(f"auxiliary rule for {ctx.jet_name(dep, alpha)} rewrites to itself")

    def violating_coordinate(self, ctx: Context, e: Expr):
        """First jet in ``e`` that is a leading coordinate, or None."""
        for s in ctx.jets_in(e):
            dep, alpha = ctx.jet_info(s)
            b = self.orders.get(dep)
            if b is not None and alpha[self.direction] >= b:
                return s
        return None

    def match(self, dep: str, alpha: Sequence[int]) -> tuple[str, MultiIndex, Expr] | None:
        """Return (kind, residual multi-index, rule rhs) when a rule applies."""
        b = self.orders.get(dep)
        if b is not None and alpha[self.direction] >= b:
            n = len(alpha)
            residual = MultiIndex(alpha) - MultiIndex.unit(n, self.direction, b)
            return ("primary", residual, self.rhs[dep])
        for rdep, ralpha, rrhs in self.extra_rules:
            if rdep == dep and ralpha.leq(alpha):
                return ("extra", MultiIndex(alpha) - ralpha, rrhs)
        return None


@dataclass
class PdeSystem:
    """A finite system of equations F^i = 0 over one declaration context.

    The operator-theoretic machinery (linearization, adjoint symmetry checks)
    expects the square case, one equation per dependent variable; corpus
    files carrying bare conservation laws may be non-square and are accepted
    for covering construction.
    """

    context: Context
    equations: list[Expr]
    kovalevskaya: KovalevskayaData | None = None
    name: str = ""

    def __post_init__(self) -> None:
        self.equations = [normalize(f) for f in self.equations]
        if self.kovalevskaya is not None:
            self.kovalevskaya.validate(self.context)

    @property
    def is_square(self) -> bool:
        return len(self.equations) == len(self.context.dependent)

    def require_square(self, what: str) -> None:
        if not self.is_square:
            raise ExprError(
                f"{what} requires a square system "
                f"({len(self.equations)} equations, {len(self.context.dependent)} dependents)"
            )

    def require_kovalevskaya(self, what: str | None = None) -> KovalevskayaData:
        if self.kovalevskaya is None:
            raise ExprError(
                (what or "on-shell comparison") + " requires Kovalevskaya form"
            )
        return self.kovalevskaya
