"""Operator algebra: apply, compose, adjoint, linearize, on-shell comparison."""

from __future__ import annotations

from random import Random

import pytest
import sympy

from conftest import random_polynomial
from jetcalc.exprs import Context, ExprError, Verdict, equals, normalize
from jetcalc.jets import total_derivative
from jetcalc.operators import TotalDiffOp, divergence_witness, linearize, op_equals_on_shell
from jetcalc.systems import KovalevskayaData, MultiIndex, PdeSystem
from jetcalc import oracle


def random_operator(ctx, rng: Random, rows: int, cols: int, order: int = 3) -> TotalDiffOp:
    from jetcalc.systems import multi_indices_upto

    atoms = [ctx.jet("u", (0, 0)), ctx.jet("u", (0, 1)), ctx.var("x")]
    indices = multi_indices_upto(len(ctx.independent), order)
    grid = []
    for _ in range(rows):
        row = []
        for _ in range(cols):
            entry = {}
            for _ in range(rng.randint(1, 2)):
                alpha = rng.choice(indices)
                entry[alpha] = random_polynomial(rng, atoms, terms=2, degree=2)
            row.append(entry)
        grid.append(row)
    return TotalDiffOp.from_entries(ctx, grid)


class TestApply:
    def test_identity(self, ctx):
        ux = ctx.jet("u", (0, 1))
        assert TotalDiffOp.identity(ctx, 1).apply([ux]) == [ux]

    def test_linearized_burgers_on_constant(self, ctx):
        u, ux = ctx.jet("u", (0, 0)), ctx.jet("u", (0, 1))
        op = TotalDiffOp.from_entries(
            ctx,
            [[{MultiIndex((1, 0)): 1, MultiIndex((0, 1)): u, MultiIndex((0, 0)): ux}]],
        )
        assert op.apply([sympy.Integer(1)]) == [ux]

    def test_second_derivative_of_square(self, ctx):
        u = ctx.jet("u", (0, 0))
        got = TotalDiffOp.d(ctx, 1, 2).apply([u**2])[0]
        want = 2 * ctx.jet("u", (0, 1)) ** 2 + 2 * u * ctx.jet("u", (0, 2))
        assert normalize(got - want) == 0

    def test_shape_mismatch(self, ctx):
        with pytest.raises(ExprError, match="columns"):
            TotalDiffOp.identity(ctx, 1).apply([1, 2])


class TestCompose:
    def test_leibniz_scalar(self, ctx):
        u = ctx.jet("u", (0, 0))
        got = TotalDiffOp.d(ctx, 1).compose(TotalDiffOp.scalar(ctx, u))
        want = TotalDiffOp.from_entries(
            ctx, [[{MultiIndex((0, 1)): u, MultiIndex((0, 0)): ctx.jet("u", (0, 1))}]]
        )
        assert got == want

    def test_identity_neutral(self, ctx):
        rng = Random(3)
        op = random_operator(ctx, rng, 2, 2)
        assert TotalDiffOp.identity(ctx, 2).compose(op) == op

    def test_constant_coefficient_commute(self, ctx):
        dx, dt = TotalDiffOp.d(ctx, 1), TotalDiffOp.d(ctx, 0)
        assert dx.compose(dt) == dt.compose(dx)

    def test_compose_apply_coherence(self, ctx):
        rng = Random(7)
        for _ in range(5):
            a = random_operator(ctx, rng, 1, 1, order=2)
            b = random_operator(ctx, rng, 1, 1, order=2)
            phi = random_polynomial(rng, [ctx.jet("u", (0, 0)), ctx.var("x")], terms=2, degree=2)
            lhs = a.compose(b).apply([phi])[0]
            rhs = a.apply(b.apply([phi]))[0]
            assert normalize(lhs - rhs) == 0


class TestAdjoint:
    def test_first_order_skew(self, ctx):
        dx = TotalDiffOp.d(ctx, 1)
        assert dx.adjoint() == dx.scale(-1)

    def test_zeroth_order_self_adjoint(self, ctx):
        a = ctx.var("x") * ctx.jet("u", (0, 0))
        op = TotalDiffOp.scalar(ctx, a)
        assert op.adjoint() == op

    def test_u_dx_expansion(self, ctx):
        # (u*D_x)* = -D_x o u = -u*D_x - u_x
        u = ctx.jet("u", (0, 0))
        op = TotalDiffOp.from_entries(ctx, [[{MultiIndex((0, 1)): u}]])
        want = TotalDiffOp.from_entries(
            ctx, [[{MultiIndex((0, 1)): -u, MultiIndex((0, 0)): -ctx.jet("u", (0, 1))}]]
        )
        assert op.adjoint() == want

    def test_involution_and_contravariance_thirty_random(self, ctx):
        rng = Random(2024)
        for k in range(30):
            size = rng.randint(1, 3)
            op = random_operator(ctx, rng, size, size, order=3)
            assert op.adjoint().adjoint() == op
            other = random_operator(ctx, rng, size, size, order=3)
            lhs = op.compose(other).adjoint()
            rhs = other.adjoint().compose(op.adjoint())
            assert lhs == rhs


class TestLagrangeIdentity:
    def test_witness_exact_and_sampled(self, two_dep_ctx):
        ctx = two_dep_ctx
        rng = Random(5)
        u, v = ctx.jet("u", (0, 0)), ctx.jet("v", (0, 0))
        op = TotalDiffOp.from_entries(
            ctx,
            [[{
                MultiIndex((0, 3)): u,
                MultiIndex((1, 1)): ctx.jet("u", (0, 1)),
                MultiIndex((0, 0)): u * v,
            }]],
        )
        phi = u**2 + v
        psi = v * u
        witness = divergence_witness(op, phi, psi)
        lhs = psi * op.apply([phi])[0] - op.adjoint().apply([psi])[0] * phi
        div = sum(total_derivative(ctx, w, i) for i, w in enumerate(witness))
        assert normalize(lhs - div) == 0
        res = oracle.random_identity_test(ctx, lhs, div, trials=25, seed=77)
        assert res.verdict is Verdict.PROBABLY_EQUAL


class TestLinearize:
    def test_burgers(self, ctx):
        u, ux, ut = ctx.jet("u", (0, 0)), ctx.jet("u", (0, 1)), ctx.jet("u", (1, 0))
        system = PdeSystem(ctx, [ut + u * ux])
        got = linearize(system)
        want = TotalDiffOp.from_entries(
            ctx, [[{MultiIndex((1, 0)): 1, MultiIndex((0, 1)): u, MultiIndex((0, 0)): ux}]]
        )
        assert got == want

    def test_heat(self, heat):
        ctx = heat.context
        want = TotalDiffOp.from_entries(
            ctx, [[{MultiIndex((1, 0)): 1, MultiIndex((0, 2)): -1}]]
        )
        assert linearize(heat) == want

    def test_wave_self_adjoint(self, wave):
        l_f = linearize(wave)
        assert l_f.adjoint() == l_f


class TestOpEqualsOnShell:
    def test_same_operator(self, heat):
        dx = TotalDiffOp.d(heat.context, 1)
        assert op_equals_on_shell(dx, dx, heat).verdict is Verdict.PROVED_EQUAL

    def test_heat_equation_coefficients(self, heat):
        ctx = heat.context
        a = TotalDiffOp.scalar(ctx, ctx.jet("u", (0, 2)))
        b = TotalDiffOp.scalar(ctx, ctx.jet("u", (1, 0)))
        assert op_equals_on_shell(a, b, heat).verdict is Verdict.PROVED_EQUAL

    def test_heat_dx2_equals_dt(self, heat):
        # restriction to the equation manifold: acting through test functions
        # constrained by the linearized equation
        ctx = heat.context
        got = op_equals_on_shell(TotalDiffOp.d(ctx, 1, 2), TotalDiffOp.d(ctx, 0), heat)
        assert got.verdict is Verdict.PROVED_EQUAL

    def test_distinct_operators(self, heat):
        ctx = heat.context
        got = op_equals_on_shell(TotalDiffOp.d(ctx, 1), TotalDiffOp.d(ctx, 0), heat)
        assert got.verdict is Verdict.PROVED_UNEQUAL

    def test_requires_kovalevskaya(self, ctx):
        system = PdeSystem(ctx, [ctx.jet("u", (1, 0))])
        with pytest.raises(ExprError, match="requires Kovalevskaya form"):
            op_equals_on_shell(TotalDiffOp.d(ctx, 0), TotalDiffOp.d(ctx, 1), system)

    def test_oracle_on_shell_agreement(self, heat):
        # numeric cross-check of the D_x^2 == D_t restriction via on-shell sampling
        from jetcalc.operators import augmented_system

        aug, names = augmented_system(heat)
        big = aug.context
        phi = big.jet(names[0], (0, 0))
        from jetcalc.jets import on_shell_reduce

        diff = TotalDiffOp(big, (TotalDiffOp.d(big, 1, 2) - TotalDiffOp.d(big, 0)).entries)
        residue = on_shell_reduce(diff.apply([phi])[0], aug)
        point = oracle.on_shell_sample(aug, 2, seed=31)
        assert oracle.evaluate(residue, point) == 0
