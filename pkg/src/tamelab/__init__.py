"""tamelab: tame estimates, smoothing operators and Nash-Moser runs.

A desk-scale numerical and symbolic laboratory: discrete function spaces
on nested domains with C^k norms, flows and actions of near-identity
maps, Nash smoothing operators, Cauchy/Dolbeault homotopy operators,
exact Poisson and Chevalley-Eilenberg calculus, Williamson
classification, and the fast-convergence engine run against Lie-algebra
and Darboux normalization problems.
"""

from . import (
    calculus,
    darboux,
    dolbeault,
    errors,
    exactla,
    grid,
    liealg,
    nashmoser,
    poly,
    smoothing,
    symplectic,
    williamson,
)
from ._kernels import backend_name

__version__ = "0.1.0"

__all__ = [
    "calculus",
    "darboux",
    "dolbeault",
    "errors",
    "exactla",
    "grid",
    "liealg",
    "nashmoser",
    "poly",
    "smoothing",
    "symplectic",
    "williamson",
    "backend_name",
    "__version__",
]
