"""Exact linear algebra over the rationals.

Plain list-of-lists matrices with Fraction entries.  Sizes here are tiny
(sp(2n) with n <= 3, Chevalley-Eilenberg spaces of dimension <= 30), so
clarity beats asymptotics; everything is exact.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = [
    "mat_mul",
    "mat_vec",
    "mat_sub",
    "mat_eye",
    "mat_transpose",
    "mat_inverse",
    "rank",
    "nullspace",
    "solve",
    "char_poly",
    "sturm_count",
    "count_real_roots_sign",
    "poly_is_squarefree",
    "pinv",
]

Frac = Fraction


def _F(x):
    return x if isinstance(x, Fraction) else Fraction(x)


def mat_eye(n):
    return [[Frac(1) if i == j else Frac(0) for j in range(n)] for i in range(n)]


def mat_transpose(A):
    return [list(col) for col in zip(*A)]


def mat_mul(A, B):
    n, k, m = len(A), len(B), len(B[0])
    Bt = list(zip(*B))
    return [[sum((A[i][p] * Bt[j][p] for p in range(k)), Frac(0)) for j in range(m)] for i in range(n)]


def mat_vec(A, v):
    return [sum((A[i][j] * v[j] for j in range(len(v))), Frac(0)) for i in range(len(A))]


def mat_sub(A, B):
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def _rref(A):
    """Reduced row echelon form; returns (rref matrix, pivot columns)."""
    M = [[_F(x) for x in row] for row in A]
    rows = len(M)
    cols = len(M[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(cols):
        pivot = next((i for i in range(r, rows) if M[i][c] != 0), None)
        if pivot is None:
            continue
        M[r], M[pivot] = M[pivot], M[r]
        pv = M[r][c]
        M[r] = [x / pv for x in M[r]]
        for i in range(rows):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return M, pivots


def rank(A):
    if not A:
        return 0
    return len(_rref(A)[1])


def nullspace(A):
    """Basis (list of vectors) of the right nullspace of A."""
    if not A:
        return []
    cols = len(A[0])
    R, pivots = _rref(A)
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for fc in free:
        v = [Frac(0)] * cols
        v[fc] = Frac(1)
        for r, pc in enumerate(pivots):
            v[pc] = -R[r][fc]
        basis.append(v)
    return basis


def solve(A, b):
    """One exact solution of A x = b, or None if inconsistent."""
    rows = len(A)
    cols = len(A[0]) if rows else 0
    aug = [list(map(_F, A[i])) + [_F(b[i])] for i in range(rows)]
    R, pivots = _rref(aug)
    for r in range(len(R)):
        if all(R[r][c] == 0 for c in range(cols)) and R[r][cols] != 0:
            return None
    x = [Frac(0)] * cols
    for r, pc in enumerate(pivots):
        if pc == cols:
            return None
        x[pc] = R[r][cols]
    return x


def mat_inverse(A):
    n = len(A)
    aug = [list(map(_F, A[i])) + [Frac(1) if j == i else Frac(0) for j in range(n)] for i in range(n)]
    R, pivots = _rref(aug)
    if pivots != list(range(n)):
        return None
    return [row[n:] for row in R]


def char_poly(A):
    """Coefficients [c_0 .. c_n] of det(t I - A) = sum c_k t^k, exact.

    Faddeev-LeVerrier; divisions are by integers so Fractions stay exact.
    """
    n = len(A)
    coeffs = [Frac(0)] * (n + 1)
    coeffs[n] = Frac(1)
    M = [[Frac(0)] * n for _ in range(n)]
    I = mat_eye(n)
    c = Frac(1)
    for k in range(1, n + 1):
        M = mat_mul(A, M)
        for i in range(n):
            M[i][i] += c
        AM = mat_mul(A, M)
        c = -sum(AM[i][i] for i in range(n)) / k
        coeffs[n - k] = c
    return coeffs


# ---------------------------------------------------------------------- #
# univariate real-root counting via Sturm chains (exact)


def _poly_trim(p):
    while p and p[-1] == 0:
        p.pop()
    return p


def _poly_deriv(p):
    return _poly_trim([p[i] * i for i in range(1, len(p))])


def _poly_rem(a, b):
    a = _poly_trim(list(a))
    db, lb = len(b) - 1, b[-1]
    while a and len(a) - 1 >= db:
        da, la = len(a) - 1, a[-1]
        q = la / lb
        for i in range(db + 1):
            a[da - db + i] -= q * b[i]
        del a[da]
        a = _poly_trim(a)
    return a


def _sturm_chain(p):
    p0 = _poly_trim([_F(c) for c in p])
    if not p0:
        return []
    chain = [p0]
    p1 = _poly_deriv(p0)
    if p1:
        chain.append(p1)
    while len(chain[-1]) > 1:
        r = _poly_rem(chain[-2], chain[-1])
        if not r:
            break
        chain.append([-c for c in r])
    return chain


def _eval_poly(p, x):
    v = Frac(0)
    for c in reversed(p):
        v = v * x + c
    return v


def _sign_changes(vals):
    signs = [v for v in vals if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


def _sign_at_inf(p, positive: bool):
    lead = p[-1]
    deg = len(p) - 1
    if positive:
        return lead
    return lead if deg % 2 == 0 else -lead


def sturm_count(p, a=None, b=None):
    """Number of distinct real roots of p in (a, b]; None means +-infinity."""
    chain = _sturm_chain(p)
    if not chain or len(chain[0]) <= 1:
        return 0
    va = [_sign_at_inf(q, positive=False) if a is None else _eval_poly(q, _F(a)) for q in chain]
    vb = [_sign_at_inf(q, positive=True) if b is None else _eval_poly(q, _F(b)) for q in chain]
    return _sign_changes(va) - _sign_changes(vb)


def count_real_roots_sign(p):
    """(negative, positive) counts of distinct real roots of p, excluding 0."""
    neg = sturm_count(p, None, 0)
    if _eval_poly(p, Frac(0)) == 0:
        neg -= 1  # (a, b] intervals include the endpoint 0
    pos = sturm_count(p, 0, None)
    return neg, pos


def poly_is_squarefree(p):
    chain = _sturm_chain(p)
    return bool(chain) and len(chain[-1]) == 1


# ---------------------------------------------------------------------- #
# exact Moore-Penrose pseudoinverse


def pinv(A):
    """Exact Moore-Penrose pseudoinverse via a full-rank factorization.

    A = C R with C = columns of A at pivot positions, R = rref rows;
    then A^+ = R^T (R R^T)^-1 (C^T C)^-1 C^T.
    """
    rows = len(A)
    cols = len(A[0]) if rows else 0
    A = [[_F(x) for x in row] for row in A]
    R_full, pivots = _rref(A)
    r = len(pivots)
    if r == 0:
        return [[Frac(0)] * rows for _ in range(cols)]
    C = [[A[i][c] for c in pivots] for i in range(rows)]
    R = [R_full[i] for i in range(r)]
    Ct = mat_transpose(C)
    Rt = mat_transpose(R)
    CtC_inv = mat_inverse(mat_mul(Ct, C))
    RRt_inv = mat_inverse(mat_mul(R, Rt))
    return mat_mul(mat_mul(Rt, RRt_inv), mat_mul(CtC_inv, Ct))
