"""Shared fixtures: declaration contexts, corpus loaders, random generators."""

from __future__ import annotations

from random import Random

import pytest
import sympy

import jetcalc
from jetcalc.exprs import Constant, Context, FunctionSymbol
from jetcalc.systems import KovalevskayaData, MultiIndex, PdeSystem


@pytest.fixture
def ctx():
    """Scalar context over (t, x) with one constant and one formal function."""
    return Context(["t", "x"], ["u"], [Constant("C", positive=True)], [FunctionSymbol("H")])


@pytest.fixture
def two_dep_ctx():
    return Context(["t", "x"], ["u", "v"])


@pytest.fixture
def heat(ctx):
    ut, uxx = ctx.jet("u", (1, 0)), ctx.jet("u", (0, 2))
    return PdeSystem(
        ctx,
        [ut - uxx],
        KovalevskayaData(direction=1, orders={"u": 2}, rhs={"u": ut}),
        name="heat-x",
    )


@pytest.fixture
def heat_t(ctx):
    ut, uxx = ctx.jet("u", (1, 0)), ctx.jet("u", (0, 2))
    return PdeSystem(
        ctx,
        [ut - uxx],
        KovalevskayaData(direction=0, orders={"u": 1}, rhs={"u": uxx}),
        name="heat-t",
    )


@pytest.fixture
def wave(ctx):
    utt, uxx = ctx.jet("u", (2, 0)), ctx.jet("u", (0, 2))
    return PdeSystem(
        ctx,
        [utt - uxx],
        KovalevskayaData(direction=0, orders={"u": 2}, rhs={"u": uxx}),
        name="wave",
    )


@pytest.fixture
def kdv(ctx):
    u = ctx.jet("u", (0, 0))
    ux, ut, uxxx = ctx.jet("u", (0, 1)), ctx.jet("u", (1, 0)), ctx.jet("u", (0, 3))
    return PdeSystem(
        ctx,
        [ut + u * ux + uxxx],
        KovalevskayaData(direction=0, orders={"u": 1}, rhs={"u": -u * ux - uxxx}),
        name="kdv",
    )


@pytest.fixture(scope="session")
def corpus():
    """All bundled corpus files, parsed once."""
    return {name: jetcalc.load_corpus(name) for name in jetcalc.CORPUS_FILES}


def random_expr(rng: Random, atoms, depth: int, allow_division: bool = True):
    """A random expression tree over the given atoms (seeded, exact)."""
    if depth <= 0 or rng.random() < 0.3:
        if rng.random() < 0.35:
            return sympy.Integer(rng.randint(-4, 4))
        return rng.choice(atoms)
    kind = rng.choice(["add", "add", "mul", "mul", "pow"] + (["div"] if allow_division else []))
    if kind == "add":
        return random_expr(rng, atoms, depth - 1, allow_division) + random_expr(
            rng, atoms, depth - 1, allow_division
        )
    if kind == "mul":
        return random_expr(rng, atoms, depth - 1, allow_division) * random_expr(
            rng, atoms, depth - 1, allow_division
        )
    if kind == "pow":
        return random_expr(rng, atoms, depth - 1, allow_division) ** rng.randint(2, 3)
    for _ in range(10):
        den = random_expr(rng, atoms, depth - 1, allow_division=False)
        if den != 0:
            return random_expr(rng, atoms, depth - 1, allow_division) / den
    return random_expr(rng, atoms, depth - 1, allow_division)


def random_polynomial(rng: Random, atoms, terms: int = 4, degree: int = 3):
    """A random polynomial in the given atoms with small integer coefficients."""
    out = sympy.Integer(0)
    for _ in range(terms):
        term = sympy.Integer(rng.randint(-3, 3))
        for _ in range(rng.randint(0, degree)):
            term *= rng.choice(atoms)
        out += term
    return out
