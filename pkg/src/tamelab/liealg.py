"""Finite-dimensional Lie algebra rigidity.

The Chevalley-Eilenberg complex with adjoint coefficients in degrees
1..3, homotopy operators built from Moore-Penrose pseudoinverses when
H^2(g, ad) = 0, and the normalization solver that recovers g with
nu . g = mu through the Nash-Moser engine (smoothing = identity, all
norms equivalent, trivial nested domains).

Brackets store structure constants mu(e_i, e_j) = sum_k c[i][j][k] e_k,
either exactly (Fraction entries) or as floats; the homotopy operators
follow the dtype.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import exactla
from .errors import DegreeError, NonVanishingH2Error, SingularError
__all__ = [
    "Bracket",
    "CECochain",
    "jacobiator",
    "ce_differential",
    "gl_action",
    "homotopy_operators",
    "rigidity_solve",
    "su2",
    "so3",
    "heisenberg3",
    "LieAlgebraInstance",
]


def _is_exact(x) -> bool:
    return isinstance(x, (Fraction, int))


class Bracket:
    """Antisymmetric bilinear map on R^d via structure constants."""

    def __init__(self, dim: int, entries=None, data=None, exact: bool | None = None):
        self.dim = dim
        if data is not None:
            self.c = data
        else:
            zero = Fraction(0) if (exact or exact is None) else 0.0
            self.c = [[[zero for _ in range(dim)] for _ in range(dim)] for _ in range(dim)]
            for i, j, k, v in entries or []:
                self.c[i][j][k] = v
                self.c[j][i][k] = -v
        self.exact = _is_exact(self.c[0][0][0]) if exact is None else exact
        for i in range(dim):
            for j in range(dim):
                for k in range(dim):
                    bad = (
                        self.c[i][j][k] != -self.c[j][i][k]
                        if self.exact
                        else abs(self.c[i][j][k] + self.c[j][i][k]) > 1e-12
                    )
                    if bad:
                        raise ValueError("structure constants must be antisymmetric")

    def __call__(self, u, v):
        """Bracket of coordinate vectors (lists or arrays)."""
        d = self.dim
        out = [sum(self.c[i][j][k] * u[i] * v[j] for i in range(d) for j in range(d)) for k in range(d)]
        return out

    def basis_bracket(self, i: int, j: int):
        return list(self.c[i][j])

    def as_array(self) -> np.ndarray:
        return np.array([[[float(x) for x in row] for row in plane] for plane in self.c])

    @staticmethod
    def from_array(arr: np.ndarray) -> "Bracket":
        arr = np.asarray(arr, float)
        arr = 0.5 * (arr - arr.transpose(1, 0, 2))  # kill float asymmetry drift
        d = arr.shape[0]
        data = [[[arr[i, j, k] for k in range(d)] for j in range(d)] for i in range(d)]
        return Bracket(d, data=data, exact=False)

    def norm(self) -> float:
        return float(np.abs(self.as_array()).max())

    def to_json(self) -> str:
        entries = []
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                for k in range(self.dim):
                    v = self.c[i][j][k]
                    if v != 0:
                        sv = f"{Fraction(v)}" if self.exact else repr(float(v))
                        entries.append([i, j, k, sv])
        return json.dumps({"dim": self.dim, "entries": entries})

    @staticmethod
    def from_json(text: str) -> "Bracket":
        d = json.loads(text)
        entries = []
        exact = True
        for i, j, k, v in d["entries"]:
            if isinstance(v, str) and ("/" in v or v.lstrip("-").isdigit()):
                entries.append((i, j, k, Fraction(v)))
            else:
                entries.append((i, j, k, float(v)))
                exact = False
        return Bracket(d["dim"], entries=entries, exact=exact)


def su2() -> Bracket:
    return Bracket(3, entries=[(0, 1, 2, Fraction(1)), (1, 2, 0, Fraction(1)), (2, 0, 1, Fraction(1))])


so3 = su2  # the cross-product bracket


def heisenberg3() -> Bracket:
    return Bracket(3, entries=[(0, 1, 2, Fraction(1))])


@dataclass
class CECochain:
    """Alternating map Lambda^q g -> g on ordered basis tuples."""

    degree: int
    dim: int
    comps: dict  # {(i_1 < ... < i_q): coefficient vector (length dim)}

    def value(self, idx: tuple):
        """Evaluate on an arbitrary basis tuple (with alternation)."""
        if len(set(idx)) != len(idx):
            return [0] * self.dim
        order = tuple(sorted(idx))
        perm = tuple(sorted(range(len(idx)), key=lambda t: idx[t]))
        sign = _perm_sign(perm)
        vec = self.comps.get(order)
        if vec is None:
            return [0] * self.dim
        return [sign * x for x in vec]

    def max_abs(self) -> float:
        if not self.comps:
            return 0.0
        return max(max(abs(float(x)) for x in vec) for vec in self.comps.values())


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


def jacobiator(mu: Bracket) -> CECochain:
    """Jac(mu)(x,y,z) = mu(mu(x,y),z) + mu(mu(y,z),x) + mu(mu(z,x),y)."""
    d = mu.dim
    comps = {}
    for i, j, k in combinations(range(d), 3):
        ei = [1 if t == i else 0 for t in range(d)]
        ej = [1 if t == j else 0 for t in range(d)]
        ek = [1 if t == k else 0 for t in range(d)]
        v1 = mu(mu(ei, ej), ek)
        v2 = mu(mu(ej, ek), ei)
        v3 = mu(mu(ek, ei), ej)
        vec = [a + b + c for a, b, c in zip(v1, v2, v3)]
        if any(x != 0 for x in vec):
            comps[(i, j, k)] = vec
    return CECochain(3, d, comps)


def ce_differential(mu: Bracket, c: CECochain) -> CECochain:
    """Chevalley-Eilenberg differential of the adjoint rep, degrees 1 and 2.

    delta(alpha)(x,y) = mu(alpha x, y) - mu(alpha y, x) - alpha mu(x,y);
    delta(beta)(x,y,z) = sum (-1)^i [x_i, beta(...)] + sum (-1)^{i+j}
    beta([x_i,x_j], ...) with the standard signs (these square to zero
    whenever Jac(mu) = 0).
    """
    d = mu.dim
    if c.degree == 1:
        comps = {}
        for i, j in combinations(range(d), 2):
            ai = c.value((i,))
            aj = c.value((j,))
            ei = [1 if t == i else 0 for t in range(d)]
            ej = [1 if t == j else 0 for t in range(d)]
            term = mu(ai, ej)
            term2 = mu(aj, ei)
            amu = c_apply_deg1(c, mu.basis_bracket(i, j))
            vec = [a - b - g for a, b, g in zip(term, term2, amu)]
            if any(x != 0 for x in vec):
                comps[(i, j)] = vec
        return CECochain(2, d, comps)
    if c.degree == 2:
        comps = {}
        for i, j, k in combinations(range(d), 3):
            basis = {t: [1 if s == t else 0 for s in range(d)] for t in (i, j, k)}
            # ad terms: [x,b(y,z)] - [y,b(x,z)] + [z,b(x,y)]
            vec = mu(basis[i], c.value((j, k)))
            vec = [a - b for a, b in zip(vec, mu(basis[j], c.value((i, k))))]
            vec = [a + b for a, b in zip(vec, mu(basis[k], c.value((i, j))))]
            # bracket terms: -b([x,y],z) + b([x,z],y) - b([y,z],x)
            vec = [a - b for a, b in zip(vec, _eval_on_vector(c, mu.basis_bracket(i, j), k, d))]
            vec = [a + b for a, b in zip(vec, _eval_on_vector(c, mu.basis_bracket(i, k), j, d))]
            vec = [a - b for a, b in zip(vec, _eval_on_vector(c, mu.basis_bracket(j, k), i, d))]
            if any(x != 0 for x in vec):
                comps[(i, j, k)] = vec
        return CECochain(3, d, comps)
    raise DegreeError("ce_differential implemented for degrees 1 and 2")


def c_apply_deg1(c: CECochain, vec):
    """Apply a degree-1 cochain (linear map) to a coordinate vector."""
    d = c.dim
    out = [0] * d
    for i in range(d):
        if vec[i] == 0:
            continue
        col = c.value((i,))
        out = [o + vec[i] * x for o, x in zip(out, col)]
    return out


def _eval_on_vector(c: CECochain, vec, other: int, d: int):
    """beta(vec, e_other) by linearity in the first slot (degree 2)."""
    out = [0] * d
    for i in range(d):
        if vec[i] == 0:
            continue
        col = c.value((i, other))
        out = [o + vec[i] * x for o, x in zip(out, col)]
    return out


def gl_action(mu: Bracket, g) -> Bracket:
    """(mu . g)(x, y) = g^{-1} mu(g x, g y); preserves Jacobi."""
    d = mu.dim
    if mu.exact and all(_is_exact(x) for row in g for x in row):
        ginv = exactla.mat_inverse([[Fraction(x) for x in row] for row in g])
        if ginv is None:
            raise SingularError("g is singular")
        new = [[[Fraction(0)] * d for _ in range(d)] for _ in range(d)]
        for i in range(d):
            for j in range(d):
                gi = [g[t][i] for t in range(d)]
                gj = [g[t][j] for t in range(d)]
                w = mu(gi, gj)
                for k in range(d):
                    new[i][j][k] = sum(ginv[k][t] * w[t] for t in range(d))
        return Bracket(d, data=new, exact=True)
    garr = np.asarray(g, float)
    if abs(np.linalg.det(garr)) < 1e-14:
        raise SingularError("g is singular")
    ginv = np.linalg.inv(garr)
    arr = mu.as_array()
    # (mu.g)_{ij}^k = ginv^k_t mu(g e_i, g e_j)^t = ginv_kt g_ai g_bj mu_ab^t
    new = np.einsum("kt,ai,bj,abt->ijk", ginv, garr, garr, arr)
    return Bracket.from_array(new)


# ---------------------------------------------------------------------- #
# vectorized CE complex and homotopy operators


def _c1_basis(d):
    return [(i,) for i in range(d)]


def _c2_basis(d):
    return list(combinations(range(d), 2))


def _c3_basis(d):
    return list(combinations(range(d), 3))


def cochain_to_vec(c: CECochain) -> np.ndarray:
    d = c.dim
    basis = {1: _c1_basis, 2: _c2_basis, 3: _c3_basis}[c.degree](d)
    out = np.zeros(len(basis) * d)
    for p, idx in enumerate(basis):
        vec = c.comps.get(idx)
        if vec is not None:
            out[p * d : (p + 1) * d] = [float(x) for x in vec]
    return out

def vec_to_cochain(v, degree: int, d: int, exact: bool = False) -> CECochain:
    basis = {1: _c1_basis, 2: _c2_basis, 3: _c3_basis}[degree](d)
    comps = {}
    for p, idx in enumerate(basis):
        vec = list(v[p * d : (p + 1) * d])
        if any(x != 0 for x in vec):
            comps[idx] = vec
    return CECochain(degree, d, comps)


def _delta_matrix(mu: Bracket, degree: int):
    """Matrix of the CE differential on the chosen bases (exact or float)."""
    d = mu.dim
    src = {1: _c1_basis, 2: _c2_basis}[degree](d)
    cols = []
    zero = Fraction(0) if mu.exact else 0.0
    for p, idx in enumerate(src):
        for a in range(d):
            comp = {idx: [zero] * d}
            comp[idx] = [Fraction(1) if (t == a and mu.exact) else (1.0 if t == a else zero) for t in range(d)]
            c = CECochain(degree, d, comp)
            dc = ce_differential(mu, c)
            tgt = {1: _c2_basis, 2: _c3_basis}[degree](d)
            col = []
            for q in tgt:
                vec = dc.comps.get(q, [zero] * d)
                col.extend(vec)
            cols.append(col)
    # transpose: rows = target entries, columns = source entries
    rows = len(cols[0])
    return [[cols[c][r] for c in range(len(cols))] for r in range(rows)]


def h2_betti(mu: Bracket):
    """(betti number of H^2(g, ad), D1, D2) via exact or float ranks."""
    D1 = _delta_matrix(mu, 1)
    D2 = _delta_matrix(mu, 2)
    if mu.exact:
        r1 = exactla.rank(D1)
        r2 = exactla.rank(D2)
    else:
        r1 = np.linalg.matrix_rank(np.array(D1, float), tol=1e-9)
        r2 = np.linalg.matrix_rank(np.array(D2, float), tol=1e-9)
    dim_c2 = len(D1)
    betti = dim_c2 - r2 - r1
    return betti, D1, D2


def homotopy_operators(mu: Bracket):
    """(h1, h2) with delta h1 + h2 delta = id on degree-2 cochains.

    h1 = pinv(D1) (id - pinv(D2) D2) and h2 = pinv(D2); requires
    H^2(g, ad) = 0, else NonVanishingH2Error carrying the Betti number.
    The identity is exact over rationals, <= 1e-12 in floats.
    """
    betti, D1, D2 = h2_betti(mu)
    if betti != 0:
        raise NonVanishingH2Error(f"H^2(g, ad) has dimension {betti}", betti=betti)
    if mu.exact:
        P1 = exactla.pinv(D1)
        P2 = exactla.pinv(D2)
        ker_proj = exactla.mat_sub(exactla.mat_eye(len(D1)), exactla.mat_mul(P2, D2))
        H1 = exactla.mat_mul(P1, ker_proj)
        return H1, P2
    D1f = np.array(D1, float)
    D2f = np.array(D2, float)
    P1 = np.linalg.pinv(D1f, rcond=1e-12)
    P2 = np.linalg.pinv(D2f, rcond=1e-12)
    H1 = P1 @ (np.eye(D1f.shape[0]) - P2 @ D2f)
    return H1, P2


# ---------------------------------------------------------------------- #
# the rigidity instance for the Nash-Moser engine


class LieAlgebraInstance:
    """PDE-with-symmetry wrapper: Q = Jac(mu + e), symmetry = GL(g).

    Sections are degree-2 cochain vectors e = nu - mu (floats), symmetry
    generators live in gl(g); smoothing is the identity and every norm
    is the max-abs of coefficients (finite dimension).
    """

    name = "liealg"
    d_order = 0
    l1 = 0
    l2 = 0

    def __init__(self, mu: Bracket):
        self.mu = Bracket.from_array(mu.as_array())
        self.dim = mu.dim
        _, D1, D2 = h2_betti(self.mu)
        self.h1_mat, self.h2_mat = homotopy_operators(self.mu)
        self.D1 = np.array(D1, float)
        self.D2 = np.array(D2, float)

    def d_k(self, k: int) -> float:
        return 0.0

    # -- sections are numpy vectors over the C^2 basis ------------------- #
    def section_from_bracket(self, nu: Bracket) -> np.ndarray:
        return cochain_to_vec_bracket(nu) - cochain_to_vec_bracket(self.mu)

    def bracket_from_section(self, e: np.ndarray) -> Bracket:
        arr = self.mu.as_array().copy()
        d = self.dim
        for p, (i, j) in enumerate(_c2_basis(d)):
            for k in range(d):
                arr[i, j, k] += e[p * d + k]
                arr[j, i, k] -= e[p * d + k]
        return Bracket.from_array(arr)

    def zero_section(self, r: float) -> np.ndarray:
        return np.zeros(len(_c2_basis(self.dim)) * self.dim)

    def Q(self, e: np.ndarray) -> np.ndarray:
        return cochain_to_vec(jacobiator(self.bracket_from_section(e)))

    def linearize(self, e: np.ndarray) -> np.ndarray:
        # d Jac_mu = -delta^2 (the global sign is irrelevant downstream)
        return -self.D2 @ e

    def h1(self, w: np.ndarray, s: float, r: float) -> np.ndarray:
        return self.h1_mat @ w if not isinstance(self.h1_mat, list) else np.array(
            exactla.mat_vec(self.h1_mat, list(w)), float
        )

    def h2(self, w: np.ndarray, s: float, r: float) -> np.ndarray:
        return -(self.h2_mat @ w) if not isinstance(self.h2_mat, list) else -np.array(
            exactla.mat_vec(self.h2_mat, list(w)), float
        )

    def infinitesimal_action(self, v: np.ndarray, r: float) -> np.ndarray:
        return self.D1 @ v

    def smooth(self, e: np.ndarray, t: float, s: float) -> np.ndarray:
        return e  # all norms are equivalent in finite dimension

    def flow(self, v: np.ndarray, r_now: float = 0.0, s_next: float = 0.0) -> np.ndarray:
        from scipy.linalg import expm

        return expm(_gl_from_c1_vec(v, self.dim))

    def act(self, e: np.ndarray, sym: np.ndarray, s_next: float, r_now: float) -> np.ndarray:
        nu = self.bracket_from_section(e)
        return self.section_from_bracket(gl_action(nu, sym))

    def restrict(self, e: np.ndarray, r: float) -> np.ndarray:
        return e

    def compose_symmetry(self, acc: np.ndarray, new: np.ndarray) -> np.ndarray:
        return acc @ new

    def identity_symmetry(self) -> np.ndarray:
        return np.eye(self.dim)

    def norm(self, e: np.ndarray, k: int, r: float) -> float:
        return float(np.abs(e).max()) if e.size else 0.0

    def norm_generator(self, v: np.ndarray, k: int, r: float) -> float:
        return float(np.abs(v).max())

    def gap(self, nu_step: int, sched) -> float:
        return 1.0  # trivial nested domains: expm needs no domain room

    def symmetry_norm(self, sym: np.ndarray, k: int, r: float) -> float:
        return float(np.abs(sym - np.eye(self.dim)).max())


def cochain_to_vec_bracket(b: Bracket) -> np.ndarray:
    d = b.dim
    arr = b.as_array()
    out = np.zeros(len(_c2_basis(d)) * d)
    for p, (i, j) in enumerate(_c2_basis(d)):
        out[p * d : (p + 1) * d] = arr[i, j]
    return out


# -- the generator: h1 maps C^2 -> Hom(g, g) = gl; fix the vector layout -- #
# C^1 basis is (i,) x target a: column index i*d + a encodes alpha(e_i)_a;
# gl matrices act as alpha[a, i] = alpha(e_i)_a, so reshape with care.


def _gl_from_c1_vec(v: np.ndarray, d: int) -> np.ndarray:
    m = np.empty((d, d))
    for i in range(d):
        m[:, i] = v[i * d : (i + 1) * d]
    return m


def rigidity_solve(mu: Bracket, nu: Bracket, config=None):
    """Normalize nu to mu: returns g with ||nu . g - mu|| <= tol.

    Thin wrapper over nashmoser.run with the LieAlgebraInstance; see
    RunConfig for tunables.  nu = mu short-circuits to the identity.
    """
    from . import nashmoser

    inst = LieAlgebraInstance(mu)
    e0 = inst.section_from_bracket(Bracket.from_array(nu.as_array()))
    cfg = config or nashmoser.RunConfig()
    if inst.norm(e0, 0, 1.0) == 0.0:
        return np.eye(mu.dim), None
    sched = nashmoser.schedule(
        t_0=cfg.t_0, s=1.0, r=0.0, d=inst.d_order, l1=inst.l1, l2=inst.l2,
        d_k=inst.d_k, nu_max=cfg.nu_max, p_override=cfg.p_override,
    )
    result = nashmoser.run(inst, e0, sched, cfg)
    return result.symmetry, result
