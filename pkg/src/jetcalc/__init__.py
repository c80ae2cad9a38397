"""jetcalc: symbolic jet-space calculus for PDE geometry.

Total derivatives, universal linearizations, formal adjoints, the Euler
operator, Helmholtz variationality checks, symplectic-operator conditions,
extended Kovalevskaya rewriting, and Lagrangian-label differential coverings,
all over an exact rational expression kernel with a seeded numeric oracle.
"""

from importlib import resources

from .exprs import (
    Constant,
    Context,
    EqualsResult,
    ExprError,
    FunctionSymbol,
    Verdict,
    equals,
    normalize,
    partial_derivative,
    substitute,
)
from .systems import KovalevskayaData, MultiIndex, PdeSystem, ReductionError

__version__ = "0.1.0"

CORPUS_FILES = (
    "wave.pde",
    "heat.pde",
    "kdv.pde",
    "navier_stokes.pde",
    "gas_1d_lagrangian.pde",
    "gas_1d_covering.pde",
    "green_naghdi_lagrangian.pde",
    "euler_gas_1d.pde",
    "euler_gas_2d.pde",
    "mass_conservation_3d.pde",
)


def corpus_text(name: str) -> str:
    """Source text of a bundled corpus file (e.g. ``'wave.pde'``)."""
    if name not in CORPUS_FILES:
        raise KeyError(f"unknown corpus file {name!r}; known: {', '.join(CORPUS_FILES)}")
    return resources.files(__name__).joinpath("corpus", name).read_text(encoding="utf-8")


def load_corpus(name: str):
    """Parse a bundled corpus file into a SystemFile."""
    from . import syslang

    return syslang.parse(corpus_text(name), name=name)
