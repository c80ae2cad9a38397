"""Expression kernel: normalization, differentiation, substitution, equality."""

from __future__ import annotations

from random import Random

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from conftest import random_expr
from jetcalc import oracle
from jetcalc.exprs import (
    Constant,
    Context,
    ExprError,
    FunctionSymbol,
    Verdict,
    equals,
    normalize,
    partial_derivative,
    substitute,
)


def _atoms(ctx):
    return [
        ctx.jet("u", (0, 0)),
        ctx.jet("u", (0, 1)),
        ctx.jet("u", (1, 0)),
        ctx.var("x"),
        ctx.const("C"),
    ]


class TestContext:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ExprError):
            Context(["t", "x"], ["x"])

    def test_independent_must_be_single_letter(self):
        with pytest.raises(ExprError):
            Context(["tau"], ["u"])

    def test_jet_naming_round_trip(self, ctx):
        assert ctx.jet_name("u", (1, 2)) == "u_txx"
        assert ctx.parse_jet_name("u_txx") == ("u", (1, 2))
        assert ctx.parse_jet_name("u") == ("u", (0, 0))

    def test_bad_jet_suffix(self, ctx):
        with pytest.raises(ExprError):
            ctx.parse_jet_name("u_q")

    def test_function_chain_autoextends(self, ctx):
        H = ctx.func("H")
        x = ctx.var("x")
        d3 = sympy.diff(H(x), x, 3)
        assert str(d3) == "H'''(x)"
        assert "H'''" in ctx.functions


class TestPartialDerivative:
    def test_product_rule_jets_independent(self, ctx):
        u, ux = ctx.jet("u", (0, 0)), ctx.jet("u", (0, 1))
        assert partial_derivative(ctx, u * ux, ux) == u

    def test_jets_are_independent_symbols(self, ctx):
        u, ux = ctx.jet("u", (0, 0)), ctx.jet("u", (0, 1))
        assert partial_derivative(ctx, ux**2, u) == 0

    def test_registered_formal_derivative(self, ctx):
        H = ctx.func("H")
        x, xt = ctx.var("x"), ctx.jet("u", (1, 0))
        got = partial_derivative(ctx, H(x) * xt, x)
        assert got == ctx.func("H'")(x) * xt

    def test_undeclared_variable_errors(self, ctx):
        with pytest.raises(ExprError, match="undeclared variable"):
            partial_derivative(ctx, ctx.jet("u", (0, 0)), sympy.Symbol("q"))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_mixed_partials_commute(self, seed):
        ctx = Context(["t", "x"], ["u"], [Constant("C", positive=True)])
        rng = Random(seed)
        atoms = _atoms(ctx)
        e = random_expr(rng, atoms, depth=4)
        a, b = rng.choice(atoms), rng.choice(atoms)
        first = partial_derivative(ctx, partial_derivative(ctx, e, a), b)
        second = partial_derivative(ctx, partial_derivative(ctx, e, b), a)
        assert normalize(first - second) == 0


class TestSubstitute:
    def test_simultaneous_single_pass(self, ctx):
        u, ux, ut = ctx.jet("u", (0, 0)), ctx.jet("u", (0, 1)), ctx.jet("u", (1, 0))
        assert substitute(ut + ux, {ut: -u * ux}) == normalize(ux - u * ux)

    def test_identity(self, ctx):
        u = ctx.jet("u", (0, 0))
        assert substitute(u, {}) == u

    def test_no_recursion_into_other_keys(self, ctx):
        ux, uxx = ctx.jet("u", (0, 1)), ctx.jet("u", (0, 2))
        assert substitute(uxx, {ux: 0}) == uxx


class TestNormalize:
    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_idempotent_depth_six(self, seed):
        ctx = Context(["t", "x"], ["u"], [Constant("C", positive=True)])
        e = random_expr(Random(seed), _atoms(ctx), depth=6)
        n = normalize(e)
        assert normalize(n) == n

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_value_preserving(self, seed):
        ctx = Context(["t", "x"], ["u"], [Constant("C", positive=True)])
        e = random_expr(Random(seed), _atoms(ctx), depth=5)
        res = oracle.random_identity_test(ctx, e, normalize(e), trials=25, seed=seed)
        assert res.verdict is Verdict.PROBABLY_EQUAL

    def test_zero_unique_normal_form(self, ctx):
        u = ctx.jet("u", (0, 0))
        assert normalize((u + 1) ** 2 - u**2 - 2 * u - 1) == 0
        assert normalize((u**2 - 1) / (u - 1) - u - 1) == 0

    def test_division_by_literal_zero_rejected(self, ctx):
        u = ctx.jet("u", (0, 0))
        with pytest.raises(ExprError):
            normalize(u / (u - u))


class TestEquals:
    def test_collected_terms(self, ctx):
        ux = ctx.jet("u", (0, 1))
        assert equals(ctx, ux + ux, 2 * ux).verdict is Verdict.PROVED_EQUAL

    def test_distinct_jets(self, ctx):
        ux, ut = ctx.jet("u", (0, 1)), ctx.jet("u", (1, 0))
        assert equals(ctx, ux, ut).verdict is Verdict.PROVED_UNEQUAL

    def test_rational_identity_with_pole(self, ctx):
        # oracle cross-check: 25 exact points, resampling around the pole at u=1
        u = ctx.jet("u", (0, 0))
        lhs, rhs = (u**2 - 1) / (u - 1), u + 1
        assert equals(ctx, lhs, rhs).verdict is Verdict.PROVED_EQUAL
        res = oracle.random_identity_test(ctx, lhs, rhs, trials=25)
        assert res.verdict is Verdict.PROBABLY_EQUAL
        assert res.trials == 25

    def test_function_identity_falls_back_to_oracle(self, ctx):
        H = ctx.func("H")
        u = ctx.jet("u", (0, 0))
        res = equals(ctx, H(2 * u), H(2 * u) + (u - u))
        assert res.verdict is Verdict.PROVED_EQUAL
        res2 = equals(ctx, H(2 * u), 2 * H(u))
        assert res2.verdict is Verdict.PROVED_UNEQUAL
        assert res2.method == "oracle" and res2.witness is not None

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_reflexive_symmetric(self, seed):
        ctx = Context(["t", "x"], ["u"], [Constant("C", positive=True)])
        rng = Random(seed)
        atoms = _atoms(ctx)
        a = random_expr(rng, atoms, depth=4)
        b = random_expr(rng, atoms, depth=4)
        assert equals(ctx, a, a).verdict is Verdict.PROVED_EQUAL
        ab, ba = equals(ctx, a, b), equals(ctx, b, a)
        assert ab.verdict is ba.verdict


class TestFunctionDeclarations:
    def test_arity_enforced(self, ctx):
        H = ctx.func("H")
        with pytest.raises(ExprError, match="argument"):
            H(ctx.var("x"), ctx.var("t"))

    def test_underscore_names_rejected(self):
        with pytest.raises(ExprError):
            Context(["t"], ["u"], constants=[Constant("c_0")])
        with pytest.raises(ExprError):
            Context(["t"], ["u"], functions=[FunctionSymbol("f_1")])
