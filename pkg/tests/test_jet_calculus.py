"""Total derivatives, prolongation, on-shell reduction, changes of variables."""

from __future__ import annotations

from random import Random

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from conftest import random_expr
from jetcalc.exprs import Constant, Context, ExprError, Verdict, equals, normalize
from jetcalc.jets import (
    linear_change_of_independent_vars,
    on_shell_reduce,
    prolong,
    total_derivative,
    total_derivative_multi,
)
from jetcalc.systems import KovalevskayaData, MultiIndex, PdeSystem, ReductionError


class TestMultiIndex:
    def test_componentwise_addition(self):
        assert MultiIndex((1, 2)) + MultiIndex((0, 1)) == MultiIndex((1, 3))
        assert MultiIndex((1, 2)).order == 3
        assert MultiIndex((0, 0)).bump(1) == MultiIndex((0, 1))

    def test_negative_entries_rejected(self):
        with pytest.raises(ExprError):
            MultiIndex((1, -1))


class TestTotalDerivative:
    def test_bare_dependent(self, ctx):
        u = ctx.jet("u", (0, 0))
        assert total_derivative(ctx, u, 0) == ctx.jet("u", (1, 0))

    def test_leibniz(self):
        c = Context(["t", "x", "y"], ["u"])
        u, uy = c.jet("u", (0, 0, 0)), c.jet("u", (0, 0, 1))
        got = total_derivative(c, u * uy, 1)
        want = c.jet("u", (0, 1, 0)) * uy + u * c.jet("u", (0, 1, 1))
        assert normalize(got - want) == 0

    def test_explicit_variable_dependence(self, ctx):
        x, u = ctx.var("x"), ctx.jet("u", (0, 0))
        got = total_derivative(ctx, x * u, 1)
        assert normalize(got - u - x * ctx.jet("u", (0, 1))) == 0

    def test_function_chain(self, ctx):
        H = ctx.func("H")
        u = ctx.jet("u", (0, 0))
        got = total_derivative(ctx, H(u), 1)
        assert normalize(got - ctx.func("H'")(u) * ctx.jet("u", (0, 1))) == 0

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_linearity_and_leibniz_random(self, seed):
        ctx = Context(["t", "x"], ["u"], [Constant("C", positive=True)])
        rng = Random(seed)
        atoms = [ctx.jet("u", (0, 0)), ctx.jet("u", (0, 1)), ctx.var("x"), ctx.const("C")]
        a = random_expr(rng, atoms, depth=3, allow_division=False)
        b = random_expr(rng, atoms, depth=3, allow_division=False)
        i = rng.randint(0, 1)
        assert normalize(total_derivative(ctx, a + b, i) - total_derivative(ctx, a, i) - total_derivative(ctx, b, i)) == 0
        leibniz = total_derivative(ctx, a * b, i) - a * total_derivative(ctx, b, i) - b * total_derivative(ctx, a, i)
        assert normalize(leibniz) == 0

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_directions_commute(self, seed):
        ctx = Context(["t", "x"], ["u"], [Constant("C", positive=True)])
        rng = Random(seed)
        atoms = [ctx.jet("u", (0, 0)), ctx.jet("u", (0, 1)), ctx.jet("u", (1, 0)), ctx.var("x")]
        e = random_expr(rng, atoms, depth=4)
        dtdx = total_derivative(ctx, total_derivative(ctx, e, 0), 1)
        dxdt = total_derivative(ctx, total_derivative(ctx, e, 1), 0)
        assert equals(ctx, dtdx, dxdt).verdict is Verdict.PROVED_EQUAL


class TestTotalDerivativeMulti:
    def test_mixed_index(self, ctx):
        u = ctx.jet("u", (0, 0))
        assert total_derivative_multi(ctx, u, (1, 1)) == ctx.jet("u", (1, 1))

    def test_zero_index_is_identity(self, ctx):
        e = ctx.jet("u", (0, 1)) ** 2 + 3
        assert total_derivative_multi(ctx, e, (0, 0)) == normalize(e)

    def test_second_derivative_of_square(self, ctx):
        u = ctx.jet("u", (0, 0))
        got = total_derivative_multi(ctx, u**2, (0, 2))
        want = 2 * ctx.jet("u", (0, 1)) ** 2 + 2 * u * ctx.jet("u", (0, 2))
        assert normalize(got - want) == 0

    def test_order_independence(self, ctx):
        e = ctx.jet("u", (0, 0)) ** 3 * ctx.var("x")
        a = total_derivative(ctx, total_derivative(ctx, e, 0), 1)
        b = total_derivative_multi(ctx, e, (1, 1))
        assert normalize(a - b) == 0


class TestProlong:
    def test_order_zero(self, heat):
        assert prolong(heat, 0) == [normalize(heat.equations[0])]

    def test_order_one_members(self, heat):
        ctx = heat.context
        got = prolong(heat, 1)
        utt_term = ctx.jet("u", (2, 0)) - ctx.jet("u", (1, 2))
        utx_term = ctx.jet("u", (1, 1)) - ctx.jet("u", (0, 3))
        assert any(normalize(g - utt_term) == 0 for g in got)
        assert any(normalize(g - utx_term) == 0 for g in got)

    def test_count_binomial(self, heat):
        # m=1, n=2, k=2: six multi-indices with |alpha| <= 2
        assert len(prolong(heat, 2)) == 6


class TestOnShellReduce:
    def test_heat_third_derivative(self, heat):
        ctx = heat.context
        assert on_shell_reduce(ctx.jet("u", (0, 3)), heat) == ctx.jet("u", (1, 1))

    def test_internal_untouched(self, heat):
        ux = heat.context.jet("u", (0, 1))
        assert on_shell_reduce(ux, heat) == ux

    def test_burgers_hand_reduction(self, ctx):
        # u_xx = u_t - u*u_x: reduce(u*u_xx + u_x) -> u*u_t - u^2*u_x + u_x
        u, ux, ut, uxx = (ctx.jet("u", a) for a in ((0, 0), (0, 1), (1, 0), (0, 2)))
        burgers = PdeSystem(
            ctx,
            [uxx - ut + u * ux],
            KovalevskayaData(direction=1, orders={"u": 2}, rhs={"u": ut - u * ux}),
        )
        got = on_shell_reduce(u * uxx + ux, burgers)
        assert normalize(got - (u * ut - u**2 * ux + ux)) == 0

    def test_projection(self, heat):
        ctx = heat.context
        e = ctx.jet("u", (0, 4)) * ctx.jet("u", (0, 2)) + ctx.jet("u", (0, 3))
        once = on_shell_reduce(e, heat)
        assert on_shell_reduce(once, heat) == once

    def test_soundness_prolonged_equations_vanish(self, heat, wave, kdv):
        for system in (heat, wave, kdv):
            for g in prolong(system, 3):
                assert on_shell_reduce(g, system) == 0

    def test_result_is_internal(self, heat):
        ctx = heat.context
        reduced = on_shell_reduce(ctx.jet("u", (0, 5)), heat)
        for s in ctx.jets_in(reduced):
            _, alpha = ctx.jet_info(s)
            assert alpha[1] < 2


class TestKovalevskayaDataValidation:
    def test_leading_rhs_rejected(self, ctx):
        ut, uxx = ctx.jet("u", (1, 0)), ctx.jet("u", (0, 2))
        with pytest.raises(ExprError, match="leading coordinate"):
            PdeSystem(
                ctx,
                [ut - uxx],
                KovalevskayaData(direction=1, orders={"u": 2}, rhs={"u": uxx * ut}),
            )

    def test_orders_must_be_positive(self, ctx):
        with pytest.raises(ExprError, match="positive integer"):
            KovalevskayaData(direction=1, orders={"u": 0}, rhs={"u": ctx.jet("u", (1, 0))}).validate(ctx)


class TestChangeOfVariables:
    def test_identity_matrix(self, ctx):
        e = ctx.jet("u", (1, 1)) * ctx.jet("u", (0, 1)) + ctx.var("x")
        assert normalize(linear_change_of_independent_vars(ctx, e, [[1, 0], [0, 1]]) - e) == 0

    def test_swap(self, ctx):
        ut = ctx.jet("u", (1, 0))
        got = linear_change_of_independent_vars(ctx, ut, [[0, 1], [1, 0]])
        assert got == ctx.jet("u", (0, 1))

    def test_scaled_quarter_rotation_of_wave(self, ctx):
        # t' = t + x, x' = -t + x by hand: u_tt - u_xx -> -4*u_t'x'
        utt, uxx = ctx.jet("u", (2, 0)), ctx.jet("u", (0, 2))
        got = linear_change_of_independent_vars(ctx, utt - uxx, [[1, 1], [-1, 1]])
        assert normalize(got + 4 * ctx.jet("u", (1, 1))) == 0

    def test_singular_matrix_rejected(self, ctx):
        with pytest.raises(ExprError, match="singular"):
            linear_change_of_independent_vars(ctx, ctx.jet("u", (1, 0)), [[1, 1], [1, 1]])

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_inverse_round_trip(self, seed):
        ctx = Context(["t", "x"], ["u"], [Constant("C", positive=True)])
        rng = Random(seed)
        atoms = [ctx.jet("u", (0, 0)), ctx.jet("u", (0, 1)), ctx.jet("u", (1, 0)), ctx.jet("u", (1, 1))]
        e = random_expr(rng, atoms, depth=3, allow_division=False)
        M = sympy.Matrix([[1, 2], [1, 1]])
        forward = linear_change_of_independent_vars(ctx, e, M.tolist())
        back = linear_change_of_independent_vars(ctx, forward, M.inv().tolist())
        assert equals(ctx, back, e).verdict is Verdict.PROVED_EQUAL

    def test_system_transform_drops_rules(self, wave):
        got = linear_change_of_independent_vars(wave.context, wave, [[1, 1], [-1, 1]])
        assert got.kovalevskaya is None
        assert len(got.equations) == 1
