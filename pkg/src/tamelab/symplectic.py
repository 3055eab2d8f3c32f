"""Exact Poisson calculus and the standard deformation complex.

Conventions (fixed once, used everywhere):

* coordinates are ordered (x_1..x_n, y_1..y_n); a system on R^{2n} stores
  the constant bivector matrix Pi with {f,g} = grad(f)^T Pi grad(g) and
  Hamiltonian fields X_f = Pi grad(f).  The canonical Pi has {x_i,y_i}=1
  and gives X for (x^2+y^2)/2 equal to y d/dx - x d/dy, i.e. i_{X_f}
  omega = -df for the stored omega = Pi^{-1}.
* the deformation complex C^k = Omega^{k+1} (+) Lambda^k h* (x) C-infty
  carries d(alpha, beta) = (-d_dR alpha, rho* alpha + delta beta), where
  both rho* and delta are built from the action fields X_{mu_i}; with
  commuting fields this squares to zero exactly.

Polynomials may carry extra trailing formal parameters (e.g. the family
parameter r); brackets and differentials only touch the first 2n slots.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import DegreeError, DimensionError, NotAFixedPointError, NotClosedError
from .exactla import mat_inverse
from .poly import Polynomial

__all__ = [
    "PolyIntegrableSystem",
    "PolyForm",
    "DeformCochain",
    "canonical_bivector",
    "poisson_bracket",
    "hamiltonian_vf",
    "lie_derivative",
    "check_integrable",
    "deformation_differential",
    "contract_form",
    "rescaling_family",
    "moser_cocycle",
    "poincare_homotopy",
    "darboux_solve",
]


def __getattr__(name):
    # darboux_solve belongs to this module's surface; the grid-level
    # machinery lives in tamelab.darboux (lazy to avoid a cycle)
    if name == "darboux_solve":
        from .darboux import darboux_solve

        return darboux_solve
    raise AttributeError(name)


def canonical_bivector(n: int) -> list[list[Fraction]]:
    """Pi with {x_i, y_j} = delta_ij in (x..., y...) ordering."""
    m = 2 * n
    P = [[Fraction(0)] * m for _ in range(m)]
    for i in range(n):
        P[i][n + i] = Fraction(1)
        P[n + i][i] = Fraction(-1)
    return P


def _check_bivector(P) -> list[list[Fraction]]:
    m = len(P)
    M = [[Fraction(x) if not isinstance(x, Fraction) else x for x in row] for row in P]
    for i in range(m):
        for j in range(m):
            if M[i][j] != -M[j][i]:
                raise ValueError("bivector matrix must be antisymmetric")
    if mat_inverse(M) is None:
        raise ValueError("bivector matrix must be invertible")
    return M


def poisson_bracket(f: Polynomial, g: Polynomial, pi: Sequence[Sequence[Fraction]]) -> Polynomial:
    """{f, g} = sum_ij Pi[i][j] d_i f d_j g over the first len(Pi) slots."""
    m = len(pi)
    if f.nvars != g.nvars:
        raise DimensionError("mixed variable counts")
    if f.nvars < m:
        raise DimensionError(f"polynomials have {f.nvars} vars, bivector needs {m}")
    out = Polynomial.zero(f.nvars)
    dgs = [g.diff(j) for j in range(m)]
    for i in range(m):
        dfi = f.diff(i)
        if dfi.is_zero:
            continue
        for j in range(m):
            c = pi[i][j]
            if c != 0 and not dgs[j].is_zero:
                out = out + dfi * dgs[j] * c
    return out


def hamiltonian_vf(f: Polynomial, pi: Sequence[Sequence[Fraction]]) -> list[Polynomial]:
    """Components of X_f = Pi grad(f); i_{X_f} omega = -df for omega = Pi^{-1}."""
    m = len(pi)
    if f.nvars < m:
        raise DimensionError("not enough variables")
    grads = [f.diff(j) for j in range(m)]
    return [
        sum((grads[j] * pi[i][j] for j in range(m) if pi[i][j] != 0), Polynomial.zero(f.nvars))
        for i in range(m)
    ]


def lie_derivative(X: Sequence[Polynomial], g: Polynomial) -> Polynomial:
    return sum((X[i] * g.diff(i) for i in range(len(X))), Polynomial.zero(g.nvars))


@dataclass(frozen=True)
class PolyIntegrableSystem:
    """n Poisson-commuting polynomials on R^{2n} with a constant structure.

    `pi` is the bivector matrix (defaults to canonical); `mu` entries may
    live in an extended ring with trailing formal parameters.
    """

    n: int
    mu: tuple
    pi: tuple = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        pi = canonical_bivector(self.n) if self.pi is None else [list(r) for r in self.pi]
        pi = _check_bivector(pi)
        if len(pi) != 2 * self.n:
            raise DimensionError("bivector size must be 2n")
        object.__setattr__(self, "pi", tuple(tuple(row) for row in pi))
        mu = tuple(self.mu)
        if len(mu) != self.n:
            raise DimensionError("need exactly n component functions")
        for f in mu:
            if f.nvars < 2 * self.n:
                raise DimensionError("component has too few variables")
        object.__setattr__(self, "mu", mu)
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if not poisson_bracket(mu[i], mu[j], pi).is_zero:
                    raise ValueError(f"mu_{i} and mu_{j} are not in involution")

    @property
    def nvars(self) -> int:
        return self.mu[0].nvars

    def bracket(self, f: Polynomial, g: Polynomial) -> Polynomial:
        return poisson_bracket(f, g, self.pi)

    def action_field(self, i: int) -> list[Polynomial]:
        return hamiltonian_vf(self.mu[i], self.pi)

    def omega_matrix(self) -> list[list[Fraction]]:
        return mat_inverse([list(r) for r in self.pi])

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "pi": [[str(x) for x in row] for row in self.pi],
                "mu": [json.loads(f.to_json()) for f in self.mu],
                "nvars": self.nvars,
            }
        )

    @staticmethod
    def from_json(text: str) -> "PolyIntegrableSystem":
        data = json.loads(text)
        nv = data.get("nvars", 2 * data["n"])
        mu = tuple(
            Polynomial(nv, {tuple(e): Fraction(num, den) for e, num, den in comp})
            for comp in data["mu"]
        )
        pi = None
        if data.get("pi") is not None:
            pi = [[Fraction(x) for x in row] for row in data["pi"]]
        return PolyIntegrableSystem(data["n"], mu, pi)


@dataclass
class IntegrabilityReport:
    involutive: bool
    independent: bool
    failing_pairs: list
    witness_point: list | None

    @property
    def ok(self) -> bool:
        return self.involutive and self.independent


def check_integrable(n: int, mu: Sequence[Polynomial], pi=None, seed: int = 0) -> IntegrabilityReport:
    """Exact involution check plus independence of d mu_1 ^ ... ^ d mu_n.

    Independence is decided by evaluating the Jacobian at random rational
    points; if every sample is rank-deficient the n x n minors are
    expanded symbolically, so the verdict is exact either way.
    """
    pi = canonical_bivector(n) if pi is None else _check_bivector(pi)
    failing = []
    for i in range(n):
        for j in range(i + 1, n):
            if not poisson_bracket(mu[i], mu[j], pi).is_zero:
                failing.append((i, j))
    m = 2 * n
    jac = [[f.diff(i) for i in range(m)] for f in mu]
    import random

    rng = random.Random(seed)
    nv = mu[0].nvars
    witness = None
    for _ in range(25):
        pt = [Fraction(rng.randint(-9, 9), rng.randint(1, 7)) for _ in range(nv)]
        rows = [[e.eval(pt) for e in row] for row in jac]
        from .exactla import rank

        if rank(rows) == n:
            witness = pt
            break
    independent = witness is not None
    if not independent:
        # decide exactly: all n x n minors identically zero?
        for cols in itertools.combinations(range(m), n):
            minor = _poly_det([[jac[i][c] for c in cols] for i in range(n)])
            if not minor.is_zero:
                independent = True
                break
    return IntegrabilityReport(not failing, independent, failing, witness)


def _poly_det(M: list[list[Polynomial]]) -> Polynomial:
    n = len(M)
    nv = M[0][0].nvars
    out = Polynomial.zero(nv)
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        term = Polynomial.constant(sign, nv)
        for i, j in enumerate(perm):
            term = term * M[i][j]
        out = out + term
    return out


def _perm_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


# ---------------------------------------------------------------------- #
# polynomial differential forms


class PolyForm:
    """Degree-p form with Polynomial coefficients on sorted index tuples."""

    __slots__ = ("nvars", "degree", "comps")

    def __init__(self, nvars: int, degree: int, comps=None):
        self.nvars = nvars
        self.degree = degree
        self.comps: dict[tuple, Polynomial] = {}
        if comps:
            for idx, p in comps.items():
                self._add(tuple(idx), p)

    def _add(self, idx: tuple, p: Polynomial):
        if p.is_zero:
            return
        if len(idx) != self.degree:
            raise ValueError("index tuple has wrong length")
        if len(set(idx)) != len(idx):
            return
        order = tuple(sorted(idx))
        sign = _perm_sign(tuple(sorted(range(len(idx)), key=lambda k: idx[k])))
        q = self.comps.get(order, Polynomial.zero(self.nvars)) + p * sign
        if q.is_zero:
            self.comps.pop(order, None)
        else:
            self.comps[order] = q

    @property
    def is_zero(self) -> bool:
        return not self.comps

    def __add__(self, other: "PolyForm") -> "PolyForm":
        if (self.nvars, self.degree) != (other.nvars, other.degree):
            raise DimensionError("form mismatch")
        out = PolyForm(self.nvars, self.degree, self.comps)
        for idx, p in other.comps.items():
            out._add(idx, p)
        return out

    def __neg__(self) -> "PolyForm":
        return PolyForm(self.nvars, self.degree, {i: -p for i, p in self.comps.items()})

    def scale(self, c) -> "PolyForm":
        return PolyForm(self.nvars, self.degree, {i: p * c for i, p in self.comps.items()})

    def d(self, nactive: int) -> "PolyForm":
        """Exterior derivative in the first nactive coordinates."""
        out = PolyForm(self.nvars, self.degree + 1, {})
        for idx, p in self.comps.items():
            for i in range(nactive):
                dp = p.diff(i)
                if not dp.is_zero:
                    out._add((i,) + idx, dp)
        return out

    def contract(self, X: Sequence[Polynomial]) -> "PolyForm":
        """Insert the vector field X in the first slot."""
        out = PolyForm(self.nvars, self.degree - 1, {})
        for idx, p in self.comps.items():
            for pos, i in enumerate(idx):
                if X[i].is_zero:
                    continue
                rest = idx[:pos] + idx[pos + 1 :]
                out._add(rest, p * X[i] * ((-1) ** pos))
        return out

    def eval_on_fields(self, fields: Sequence[Sequence[Polynomial]]) -> Polynomial:
        """Full contraction alpha(X_1, ..., X_p)."""
        form = self
        for X in fields:
            form = form.contract(X)
        if form.degree != 0:
            raise DegreeError("wrong number of fields")
        return form.comps.get((), Polynomial.zero(self.nvars))

    def __eq__(self, other):
        return (
            isinstance(other, PolyForm)
            and self.degree == other.degree
            and self.nvars == other.nvars
            and self.comps == other.comps
        )

    def __repr__(self):
        if not self.comps:
            return f"0 (degree {self.degree})"
        bits = [f"({p!r}) d{''.join(map(str, i))}" for i, p in sorted(self.comps.items())]
        return " + ".join(bits)


# ---------------------------------------------------------------------- #
# deformation complex


@dataclass
class DeformCochain:
    """Element of C^k = Omega^{k+1} (+) Lambda^k h* (x) C-infinity.

    `beta` is stored on strictly increasing index tuples of length k.
    """

    degree: int
    alpha: PolyForm
    beta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha.degree != self.degree + 1:
            raise DegreeError("alpha must have form-degree k+1")
        clean = {}
        for idx, p in self.beta.items():
            idx = tuple(idx)
            if list(idx) != sorted(set(idx)):
                raise ValueError("beta keys must be strictly increasing tuples")
            if not p.is_zero:
                clean[idx] = p
        self.beta = clean

    @property
    def is_zero(self) -> bool:
        return self.alpha.is_zero and not self.beta

    def beta_eval(self, idx: tuple, nvars: int) -> Polynomial:
        """Evaluate the alternating map on an arbitrary basis tuple."""
        if len(set(idx)) != len(idx):
            return Polynomial.zero(nvars)
        order = tuple(sorted(idx))
        sign = _perm_sign(tuple(sorted(range(len(idx)), key=lambda k: idx[k])))
        p = self.beta.get(order)
        if p is None:
            return Polynomial.zero(nvars)
        return p * sign


def contract_form(alpha: PolyForm, system: PolyIntegrableSystem, i: int) -> PolyForm:
    """i_{X_{mu_i}} alpha, the contraction used by rho*."""
    return alpha.contract(system.action_field(i))


def deformation_differential(c: DeformCochain, system: PolyIntegrableSystem) -> DeformCochain:
    """d(alpha, beta) = (-d alpha, rho* alpha + delta beta), exact.

    rho* is full contraction with the action fields, delta the
    Chevalley-Eilenberg differential of the abelian action h -> X_{mu(h)}
    acting on functions by Lie derivative.
    """
    k = c.degree
    n = system.n
    nv = c.alpha.nvars
    m = 2 * n
    if k < 0 or k > 2 * n:
        raise DegreeError("degree out of range")
    fields = [system.action_field(i) for i in range(n)]
    ext = lambda X: [p if p.nvars == nv else p.extend(nv - p.nvars) for p in X]
    fields = [ext(X) for X in fields]

    new_alpha = -c.alpha.d(m)

    new_beta: dict[tuple, Polynomial] = {}
    for idx in itertools.combinations(range(n), k + 1):
        # rho*(alpha)(h_idx) = alpha(X_{mu_i0}, ..., X_{mu_ik})
        val = c.alpha.eval_on_fields([fields[i] for i in idx])
        # delta(beta)(h) = sum_i (-1)^i L_{X_{mu(h_i)}} beta(h^(i))
        for pos, i in enumerate(idx):
            rest = idx[:pos] + idx[pos + 1 :]
            b = c.beta_eval(rest, nv)
            if not b.is_zero:
                val = val + lie_derivative(fields[i], b) * ((-1) ** pos)
        if not val.is_zero:
            new_beta[idx] = val
    return DeformCochain(k + 1, new_alpha, new_beta)


# ---------------------------------------------------------------------- #
# the rescaling family and its Moser cocycle


def _graded_scale(f: Polynomial, two_n: int, r: Fraction) -> Polynomial:
    """r^{-2} f(r x) for f with vanishing 1-jet: scales degree-d part by r^{d-2}."""
    out = {}
    for e, c in f.terms.items():
        d = sum(e[:two_n])
        out[e] = c * r ** (d - 2) if r != 0 else (c if d == 2 else Fraction(0))
    return Polynomial(f.nvars, out)


def _require_fixed_point(system: PolyIntegrableSystem):
    m = 2 * system.n
    zero = [Fraction(0)] * system.nvars
    for i, f in enumerate(system.mu):
        if f.eval(zero) != 0:
            raise NotAFixedPointError(f"mu_{i}(0) != 0")
        for j in range(m):
            if f.diff(j).eval(zero) != 0:
                raise NotAFixedPointError(f"d mu_{i}(0) != 0")


def rescaling_family(system: PolyIntegrableSystem, r) -> PolyIntegrableSystem:
    """(omega^r, mu^r) = (r^-2 (m^r)* omega, r^-2 mu o m^r) for rational r.

    The structure matrix is constant, so omega^r = omega for every r; the
    moment map components scale per homogeneous degree and extend through
    r = 0, where the quadratic (Hessian) model remains.
    """
    _require_fixed_point(system)
    r = Fraction(r)
    m = 2 * system.n
    mu_r = tuple(_graded_scale(f, m, r) for f in system.mu)
    return PolyIntegrableSystem(system.n, mu_r, [list(row) for row in system.pi])


def rescaling_family_formal(system: PolyIntegrableSystem) -> PolyIntegrableSystem:
    """Same family with r kept as a trailing formal variable."""
    _require_fixed_point(system)
    two_n = 2 * system.n
    nv = system.nvars
    mu_r = []
    for f in system.mu:
        terms = {}
        for e, c in f.terms.items():
            d = sum(e[:two_n])
            terms[e + (d - 2,)] = c
        mu_r.append(Polynomial(nv + 1, terms))
    return PolyIntegrableSystem(system.n, tuple(mu_r), [list(row) for row in system.pi])


@dataclass
class ClosednessCertificate:
    closed: bool
    differential: DeformCochain
    formal: bool


def moser_cocycle(system: PolyIntegrableSystem, r=None):
    """c^r = (d/dr omega^r, d/dr mu^r) in C^1(omega^r, mu^r), with certificate.

    With r=None the computation is carried out with r as a formal
    variable, so closedness holds for every r at once, exactly.
    """
    formal = r is None
    if formal:
        fam = rescaling_family_formal(system)
        nv = fam.nvars
        r_idx = nv - 1
        dmu = tuple(f.diff(r_idx) for f in fam.mu)
        base = fam
    else:
        _require_fixed_point(system)
        rq = Fraction(r)
        two_n = 2 * system.n
        dmu_terms = []
        for f in system.mu:
            out = {}
            for e, c in f.terms.items():
                d = sum(e[:two_n])
                if d >= 3:  # the quadratic part is r-independent
                    out[e] = c * (d - 2) * rq ** (d - 3)
            dmu_terms.append(Polynomial(f.nvars, out))
        dmu = tuple(dmu_terms)
        base = rescaling_family(system, rq)
        nv = base.nvars
    # first component d/dr omega^r vanishes: omega is constant and the
    # rescale is exactly quadratic on it
    alpha = PolyForm(nv, 2, {})
    beta = {(i,): dmu[i] for i in range(system.n) if not dmu[i].is_zero}
    c = DeformCochain(1, alpha, beta)
    dc = deformation_differential(c, base)
    cert = ClosednessCertificate(dc.is_zero, dc, formal)
    return c, cert


# ---------------------------------------------------------------------- #
# Poincare homotopy (radial primitive) for closed polynomial forms


def poincare_homotopy(alpha: PolyForm, nactive: int | None = None, normalize: bool = True) -> PolyForm:
    """Radial primitive P(alpha) with dP(alpha) = alpha, exact.

    P integrates the Euler contraction along rays from the origin; for a
    monomial coefficient of degree d in a p-form the weight is 1/(d+p).
    Raises NotClosedError if d alpha != 0.  With normalize=True the
    value and the symmetric first jet at 0 are projected away (a no-op
    for the radial formula itself; kept explicit because family
    arguments at r=0 require that normalization).
    """
    na = alpha.nvars if nactive is None else nactive
    p = alpha.degree
    if p < 1:
        raise DegreeError("need a form of degree >= 1")
    if not alpha.d(na).is_zero:
        raise NotClosedError("form is not closed")
    out = PolyForm(alpha.nvars, p - 1, {})
    for idx, poly in alpha.comps.items():
        for e, c in poly.terms.items():
            d = sum(e[:na])
            w = Fraction(c, d + p)
            for pos, i in enumerate(idx):
                rest = idx[:pos] + idx[pos + 1 :]
                ei = list(e)
                ei[i] += 1
                out._add(rest, Polynomial.monomial(ei, w * ((-1) ** pos), alpha.nvars))
    if normalize and p == 2:
        out = _normalize_affine_jet(out, na)
    return out


def _normalize_affine_jet(one_form: PolyForm, na: int) -> PolyForm:
    """Subtract d(affine-quadratic) so value and symmetric jet vanish at 0.

    The correction is exact (a primitive stays a primitive); the radial
    formula already satisfies both conditions, so this usually returns
    its input unchanged.
    """
    nv = one_form.nvars
    zero = [Fraction(0)] * nv
    # linear correction: remove the value at 0 ................ f = sum a_i x_i
    f_terms: dict[tuple, Fraction] = {}
    for (i,), poly in one_form.comps.items():
        v = poly.eval(zero)
        if v != 0:
            e = [0] * nv
            e[i] = 1
            f_terms[tuple(e)] = f_terms.get(tuple(e), Fraction(0)) + v
    # quadratic correction: remove the symmetric part of the derivative at 0
    deriv = {}
    for (i,), poly in one_form.comps.items():
        for j in range(na):
            deriv[(i, j)] = poly.diff(j).eval(zero)
    for i in range(na):
        for j in range(i, na):
            s = (deriv.get((i, j), Fraction(0)) + deriv.get((j, i), Fraction(0))) / 2
            if s != 0:
                e = [0] * nv
                e[i] += 1
                e[j] += 1
                w = s if i != j else s / 2
                f_terms[tuple(e)] = f_terms.get(tuple(e), Fraction(0)) + w
    if not f_terms:
        return one_form
    f = Polynomial(nv, f_terms)
    correction = PolyForm(nv, 1, {(i,): f.diff(i) for i in range(na) if not f.diff(i).is_zero})
    return one_form + (-correction)
