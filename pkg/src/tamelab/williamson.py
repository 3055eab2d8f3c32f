"""Hessian Lie algebras at fixed points and Williamson classification.

The identification between quadratic Hamiltonians and sp(2n) is
h <-> A with omega(A u, v) = h(u, v); in the stored conventions (see
symplectic.py) this reads A = -Pi H for the Hessian matrix H, which
reproduces the classical blocks: the elliptic block [[0,-1],[1,0]] for
(x^2+y^2)/2 and the hyperbolic block [[-1,0],[0,1]] for xy.

Classification is exact: a random rational combination of the family is
formed, its characteristic polynomial (even, = P(lambda^2)) is computed
by Faddeev-LeVerrier, and the root types of P are counted by Sturm
chains -- real negative roots give elliptic pairs, real positive give
hyperbolic pairs, nonreal quadruples give focus-focus blocks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .errors import DegenerateError, NotAFixedPointError
from .exactla import (
    char_poly,
    count_real_roots_sign,
    mat_mul,
    nullspace,
    poly_is_squarefree,
    rank,
)
from .poly import Polynomial, poly_hessian
from .symplectic import PolyIntegrableSystem, canonical_bivector

__all__ = [
    "WilliamsonType",
    "hessian_lie_algebra",
    "is_cartan",
    "williamson_type",
    "fixed_point_set",
    "normal_model",
    "sp_basis",
    "is_sp",
    "classification_report",
]


@dataclass(frozen=True)
class WilliamsonType:
    e: int
    h: int
    f: int

    def __post_init__(self):
        if min(self.e, self.h, self.f) < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def n(self) -> int:
        return self.e + self.h + 2 * self.f

    def as_tuple(self):
        return (self.e, self.h, self.f)


def _sym_basis(m):
    basis = []
    for i in range(m):
        for j in range(i, m):
            S = [[Fraction(0)] * m for _ in range(m)]
            S[i][j] += 1
            S[j][i] += 1 if i != j else 0
            if i == j:
                S[i][i] = Fraction(1)
            basis.append(S)
    return basis


def sp_basis(n: int, pi=None):
    """Basis of sp(2n) as {-Pi S : S symmetric}."""
    m = 2 * n
    P = canonical_bivector(n) if pi is None else [list(r) for r in pi]
    return [mat_mul([[-x for x in row] for row in P], S) for S in _sym_basis(m)]


def is_sp(A, n: int, pi=None) -> bool:
    """Exact membership test: omega A symmetric for omega = Pi^{-1}."""
    from .exactla import mat_inverse

    P = canonical_bivector(n) if pi is None else [list(r) for r in pi]
    W = mat_inverse(P)
    WA = mat_mul(W, A)
    m = 2 * n
    return all(WA[i][j] == WA[j][i] for i in range(m) for j in range(m))


def hessian_lie_algebra(system: PolyIntegrableSystem, x) -> list:
    """A_i in sp(2n) with omega(A_i u, v) = Hess_x(mu_i)(u, v).

    Requires x to be a fixed point (all d mu_i(x) = 0).  The family is
    abelian because the mu_i are in involution; commutativity is checked.
    """
    m = 2 * system.n
    pt = list(x)
    if len(pt) < system.nvars:
        pt = pt + [Fraction(0)] * (system.nvars - len(pt))
    for i, f in enumerate(system.mu):
        for j in range(m):
            if f.diff(j).eval(pt) != 0:
                raise NotAFixedPointError(f"d mu_{i} does not vanish at the point")
    mats = []
    negPi = [[-x_ for x_ in row] for row in system.pi]
    for f in system.mu:
        H = poly_hessian(f, pt, m)
        mats.append(mat_mul(negPi, H))
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            if _commutator(mats[i], mats[j]) != [[Fraction(0)] * m for _ in range(m)]:
                raise ValueError("Hessian family fails to commute (involution broken?)")
    return mats


def _commutator(A, B):
    return [
        [x - y for x, y in zip(ra, rb)]
        for ra, rb in zip(mat_mul(A, B), mat_mul(B, A))
    ]


def _vec(A):
    return [x for row in A for x in row]


@dataclass
class CartanReport:
    abelian: bool
    dimension: int
    expected_dimension: int
    self_normalizing: bool
    normalizer_dimension: int

    @property
    def ok(self) -> bool:
        return self.abelian and self.dimension == self.expected_dimension and self.self_normalizing

    def failing_axiom(self):
        if not self.abelian:
            return "abelian"
        if self.dimension != self.expected_dimension:
            return "dimension"
        if not self.self_normalizing:
            return "self-normalizing"
        return None


def is_cartan(mats, n: int, pi=None) -> CartanReport:
    """Abelian + n-dimensional + self-normalizing inside sp(2n), exact.

    The normalizer {X in sp(2n): [X, A_i] in span(A) for all i} is the
    projection to the X-block of the nullspace of one big linear system
    over the sp basis; self-normalization means its dimension equals n.
    """
    m = 2 * n
    abelian = all(
        _commutator(mats[i], mats[j]) == [[Fraction(0)] * m for _ in range(m)]
        for i in range(len(mats))
        for j in range(i + 1, len(mats))
    )
    span_rows = [_vec(A) for A in mats]
    dim = rank(span_rows)

    basis = sp_basis(n, pi)
    nb = len(basis)
    k = len(mats)
    # unknowns: sp coefficients (nb) then span coefficients (k per constraint i)
    rows = []
    span_cols = [_vec(A) for A in mats]
    for i in range(k):
        comm_cols = [_vec(_commutator(B, mats[i])) for B in basis]
        for entry in range(m * m):
            row = [comm_cols[b][entry] for b in range(nb)]
            row_span = [Fraction(0)] * (k * k)
            row_span[i * k : (i + 1) * k] = [-span_cols[ci][entry] for ci in range(k)]
            rows.append(row + row_span)
    null = nullspace(rows) if rows else []
    proj = [v[:nb] for v in null]
    # normalizer = image of proj under the sp-basis map: its dimension is
    # the rank of the matrix of sp-vectors spanned
    norm_vecs = []
    for coeffs in proj:
        V = [Fraction(0)] * (m * m)
        for c, B in zip(coeffs, basis):
            if c != 0:
                bv = _vec(B)
                V = [a + c * b for a, b in zip(V, bv)]
        norm_vecs.append(V)
    norm_dim = rank(norm_vecs) if norm_vecs else 0
    return CartanReport(abelian, dim, n, norm_dim == dim == n, norm_dim)


def williamson_type(mats, n: int, pi=None, seed: int = 0, max_resamples: int = 25) -> WilliamsonType:
    """Classify a Cartan family by root signs of the even char polynomial."""
    report = is_cartan(mats, n, pi)
    if not report.ok:
        raise DegenerateError(f"family is not Cartan ({report.failing_axiom()})")
    rng = random.Random(seed)
    m = 2 * n
    for _ in range(max_resamples):
        coeffs = [Fraction(rng.randint(1, 30), rng.randint(1, 7)) * rng.choice([1, -1]) for _ in mats]
        A = [[sum((c * M[i][j] for c, M in zip(coeffs, mats)), Fraction(0)) for j in range(m)] for i in range(m)]
        p = char_poly(A)
        if any(p[i] != 0 for i in range(1, m + 1, 2)):
            raise DegenerateError("characteristic polynomial is not even (not sp?)")
        P = [p[2 * i] for i in range(n + 1)]  # p(lambda) = P(lambda^2)
        if P[0] == 0 or not poly_is_squarefree(P):
            continue  # 0 or repeated eigenvalue family: resample
        neg, pos = count_real_roots_sign(P)
        f2 = n - neg - pos
        if f2 % 2:
            continue
        return WilliamsonType(neg, pos, f2 // 2)
    raise DegenerateError("degenerate spectrum after max resamples")


def fixed_point_set(mats, n: int):
    """Basis of the common kernel of the family (exact)."""
    if not mats:
        return [[Fraction(1) if i == j else Fraction(0) for j in range(2 * n)] for i in range(2 * n)]
    rows = []
    for A in mats:
        rows.extend([list(map(Fraction, row)) for row in A])
    return nullspace(rows)


def normal_model(wtype: WilliamsonType) -> PolyIntegrableSystem:
    """Product of elliptic/hyperbolic/focus-focus models on R^{2n}.

    Coordinates are ordered (x_1..x_n, y_1..y_n): pair i uses (x_i, y_i),
    and each focus-focus block occupies two consecutive pairs.
    """
    n = wtype.n
    nv = 2 * n
    mu = []
    pair = 0

    def x(i):
        return Polynomial.variable(i, nv)

    def y(i):
        return Polynomial.variable(n + i, nv)

    for _ in range(wtype.e):
        mu.append((x(pair) * x(pair) + y(pair) * y(pair)) * Fraction(1, 2))
        pair += 1
    for _ in range(wtype.h):
        mu.append(x(pair) * y(pair))
        pair += 1
    for _ in range(wtype.f):
        k = pair
        mu.append(x(k) * y(k) + x(k + 1) * y(k + 1))
        mu.append(x(k) * y(k + 1) - x(k + 1) * y(k))
        pair += 2
    return PolyIntegrableSystem(n, tuple(mu))


def classification_report(system: PolyIntegrableSystem, x, seed: int = 0) -> dict:
    """JSON-ready report {type, cartan, diagnostics} for a fixed point."""
    mats = hessian_lie_algebra(system, x)
    cart = is_cartan(mats, system.n, system.pi)
    out = {
        "cartan": cart.ok,
        "diagnostics": {
            "abelian": cart.abelian,
            "dimension": cart.dimension,
            "normalizer_dimension": cart.normalizer_dimension,
        },
    }
    if cart.ok:
        t = williamson_type(mats, system.n, system.pi, seed=seed)
        out["type"] = list(t.as_tuple())
    else:
        out["type"] = None
        out["diagnostics"]["failing_axiom"] = cart.failing_axiom()
    return out
