"""Cauchy transform and degree-one Dolbeault homotopy operators on polydisks.

The per-axis operator is T f(z) = -(1/pi) integral over the disk of
f(zeta)/(zeta - z) dA(zeta), the normalization for which dbar T = id
holds.  Quadrature uses exact per-cell integrals of the kernel computed
from the closed form

    integral over a cell of dA/(zeta - z)
        = (1/2i) contour integral of (conj(zeta) - conj(z))/(zeta - z),

which is valid for every offset including the singular cell (the polar
change of coordinates makes the boundary term the whole answer).  Since
targets sit on source nodes, the cell integrals form a translation-
invariant offset table and T becomes a direct convolution -- the hot
kernel lives in tamelab._kernels (Cython, with a scipy fallback).

Degree-one homotopy operators follow the subset-sum formulas

    h1(beta) = sum_k sum_{J not containing k} (-1)^|J|/(|J|+1)
               (prod_{j in J} T_j dbar_j) T_k beta_k,
    h2(gamma) analogously with 1/((|J|+1)(|J|+2)) weights,

with (dbar h1 + h2 dbar) alpha = alpha restricted to the inner polydisk.
Only q = 1, 2 and n <= 2 are implemented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _kernels
from .errors import DomainError, QuadratureError
from .grid import Box, GridSection

__all__ = [
    "ComplexGridFunction",
    "Form01",
    "Form02",
    "dbar",
    "dbar_axis",
    "cauchy_riemann",
    "cauchy_transform_axis",
    "bump_split",
    "h1",
    "h2",
    "kernel_offset_table",
    "sup_norm",
    "as_grid_section",
]


# ---------------------------------------------------------------------- #
# data types


@dataclass
class AxisGrid:
    """Real sampling of one complex axis: nodes for both Re and Im parts."""

    radius: float
    n: int

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.n)

    @property
    def h(self) -> float:
        return 2 * self.radius / (self.n - 1)

    def window(self, radius: float):
        """Index slice of nodes with |coordinate| <= radius (plus fp slack)."""
        idx = np.nonzero(np.abs(self.nodes) <= radius + 1e-12)[0]
        if len(idx) == 0:
            raise DomainError("window radius too small for the grid")
        return slice(int(idx[0]), int(idx[-1]) + 1)


class ComplexGridFunction:
    """Complex values on the tensor grid of an n-dim polydisk cover.

    values axes are ordered (x_1, y_1, x_2, y_2, ...); each complex axis
    j is sampled on the square [-s_j, s_j]^2 covering the disk |z_j|<=s_j.
    """

    def __init__(self, axes: list[AxisGrid], values: np.ndarray):
        values = np.asarray(values)
        if not np.iscomplexobj(values):
            values = values.astype(np.complex128)
        if values.ndim != 2 * len(axes):
            raise ValueError("values must have two real axes per complex axis")
        for j, ax in enumerate(axes):
            if values.shape[2 * j] != ax.n or values.shape[2 * j + 1] != ax.n:
                raise ValueError("values shape does not match axis grids")
        self.axes = list(axes)
        self.values = values

    @property
    def n(self) -> int:
        return len(self.axes)

    @staticmethod
    def sample(fn, radii, n_points, dtype=np.complex128) -> "ComplexGridFunction":
        """Sample fn(z_1, ..., z_n) on the tensor grid."""
        radii = [float(r) for r in np.atleast_1d(radii)]
        ns = [int(x) for x in np.atleast_1d(n_points)]
        if len(ns) == 1:
            ns = ns * len(radii)
        axes = [AxisGrid(r, n) for r, n in zip(radii, ns)]
        planes = []
        for ax in axes:
            x = ax.nodes
            planes.append(x[:, None] + 1j * x[None, :])
        if len(axes) == 1:
            z = planes[0]
            vals = fn(z)
        else:
            z1 = planes[0][:, :, None, None]
            z2 = planes[1][None, None, :, :]
            vals = fn(z1 + 0 * z2, z2 + 0 * z1)
        return ComplexGridFunction(axes, np.asarray(vals, dtype=dtype))

    @staticmethod
    def sample_monomials(coeffs: dict, radii, n_points, dtype=np.complex128) -> "ComplexGridFunction":
        """Polynomial in (z_j, conj z_j) from {(a1,b1[,a2,b2]): coeff}.

        Assembled from per-plane monomial factors (outer products), which
        is vastly cheaper than broadcasting on the full tensor grid.
        """
        radii = [float(r) for r in np.atleast_1d(radii)]
        ns = [int(x) for x in np.atleast_1d(n_points)]
        if len(ns) == 1:
            ns = ns * len(radii)
        axes = [AxisGrid(r, n) for r, n in zip(radii, ns)]
        n = len(axes)
        planes = [ax.nodes[:, None] + 1j * ax.nodes[None, :] for ax in axes]
        shape = tuple(ax.n for ax in axes for _ in range(2))
        vals = np.zeros(shape, dtype=dtype)
        for exps, c in coeffs.items():
            factors = []
            for j in range(n):
                a, b = exps[2 * j], exps[2 * j + 1]
                factors.append(planes[j] ** a * np.conj(planes[j]) ** b)
            if n == 1:
                vals += (c * factors[0]).astype(dtype)
            else:
                vals += (c * factors[0][:, :, None, None] * factors[1][None, None, :, :]).astype(dtype)
        return ComplexGridFunction(axes, vals)

    def plane_z(self, j: int) -> np.ndarray:
        x = self.axes[j].nodes
        return x[:, None] + 1j * x[None, :]

    def copy_with(self, values: np.ndarray, axes=None) -> "ComplexGridFunction":
        return ComplexGridFunction(axes or self.axes, values)

    def disk_mask(self, j: int, radius: float | None = None) -> np.ndarray:
        r = self.axes[j].radius if radius is None else radius
        return np.abs(self.plane_z(j)) <= r + 1e-12

    def restrict(self, radius: float) -> "ComplexGridFunction":
        """Slice to the square windows |x_j|,|y_j| <= radius."""
        slicer = []
        new_axes = []
        for ax in self.axes:
            w = ax.window(radius)
            slicer.extend([w, w])
            nodes = ax.nodes[w]
            new_axes.append(AxisGrid(float(nodes[-1]), len(nodes)))
        return ComplexGridFunction(new_axes, self.values[tuple(slicer)])


def sup_norm(f: ComplexGridFunction, radius: float | None = None) -> float:
    """sup |f| over nodes with |z_j| <= radius on every axis."""
    vals = np.abs(f.values)
    if radius is not None:
        mask = np.ones(vals.shape, bool)
        for j in range(f.n):
            m = np.abs(f.plane_z(j)) <= radius + 1e-12
            shape = [1] * vals.ndim
            shape[2 * j] = m.shape[0]
            shape[2 * j + 1] = m.shape[1]
            mask &= m.reshape(shape)
        vals = np.where(mask, vals, 0.0)
    return float(vals.max())


def as_grid_section(f: ComplexGridFunction) -> GridSection:
    """View an n=1 function as a fiber-2 GridSection (for C^k norms)."""
    if f.n != 1:
        raise ValueError("only single complex variables convert to sections")
    r = f.axes[0].radius
    box = Box(((-r, r), (-r, r)))
    vals = np.stack([f.values.real, f.values.imag], axis=-1)
    return GridSection(box, vals)


def _cgf_to_payload(f: "ComplexGridFunction") -> dict:
    return {
        "radii": [ax.radius for ax in f.axes],
        "counts": [ax.n for ax in f.axes],
        "re": f.values.real.ravel().tolist(),
        "im": f.values.imag.ravel().tolist(),
    }


def _cgf_from_payload(d: dict) -> "ComplexGridFunction":
    axes = [AxisGrid(r, n) for r, n in zip(d["radii"], d["counts"])]
    shape = tuple(n for n in d["counts"] for _ in range(2))
    vals = np.asarray(d["re"], float).reshape(shape) + 1j * np.asarray(d["im"], float).reshape(shape)
    return ComplexGridFunction(axes, vals)


@dataclass
class Form01:
    comps: list  # beta_k, k = 1..n

    @property
    def n(self) -> int:
        return len(self.comps)

    def to_json(self) -> str:
        import json

        return json.dumps({f"dzbar_{k + 1}": _cgf_to_payload(c) for k, c in enumerate(self.comps)})

    @staticmethod
    def from_json(text: str) -> "Form01":
        import json

        d = json.loads(text)
        return Form01([_cgf_from_payload(d[k]) for k in sorted(d)])


@dataclass
class Form02:
    comps: dict  # {(k, l), k < l: gamma_kl}

    def comp(self, k: int, l: int):
        """gamma_{kl} for arbitrary order (antisymmetric), None if k == l."""
        if k == l:
            return None
        if (k, l) in self.comps:
            return self.comps[(k, l)], 1.0
        return self.comps[(l, k)], -1.0

    def to_json(self) -> str:
        import json

        return json.dumps(
            {f"dzbar_{k + 1}^dzbar_{l + 1}": _cgf_to_payload(c) for (k, l), c in self.comps.items()}
        )


# ---------------------------------------------------------------------- #
# dbar


def _complex_deriv(values: np.ndarray, axis: int, h: float, order: int = 4) -> np.ndarray:
    """First derivative along one real axis; one-sided stencils at edges."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    if order == 4 and v.shape[0] >= 6:
        out[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)
        # one-sided 4th order at the two edge layers
        c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
        out[0] = sum(ci * v[i] for i, ci in enumerate(c))
        out[1] = sum(ci * v[1 + i] for i, ci in enumerate(np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * h)))
        out[-1] = -sum(ci * v[-1 - i] for i, ci in enumerate(c))
        out[-2] = -sum(ci * v[-2 - i] for i, ci in enumerate(np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * h)))
    else:
        out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
        out[0] = (v[1] - v[0]) / h
        out[-1] = (v[-1] - v[-2]) / h
    return np.moveaxis(out, 0, axis)


def dbar_axis(f: ComplexGridFunction, j: int, order: int = 4) -> ComplexGridFunction:
    """dbar_j = (d/dx_j + i d/dy_j)/2 by centered differences."""
    h = f.axes[j].h
    dx = _complex_deriv(f.values, 2 * j, h, order)
    dy = _complex_deriv(f.values, 2 * j + 1, h, order)
    return f.copy_with(0.5 * (dx + 1j * dy))


def dbar(obj, order: int = 4):
    """Exterior dbar: functions -> Form01, Form01 -> Form02."""
    if isinstance(obj, ComplexGridFunction):
        return Form01([dbar_axis(obj, j, order) for j in range(obj.n)])
    if isinstance(obj, Form01):
        comps = {}
        for k, l in combinations(range(obj.n), 2):
            dk = dbar_axis(obj.comps[l], k, order)
            dl = dbar_axis(obj.comps[k], l, order)
            comps[(k, l)] = dk.copy_with(dk.values - dl.values)
        return Form02(comps)
    raise TypeError("dbar acts on functions and (0,1)-forms")


# ---------------------------------------------------------------------- #
# kernel table and the per-axis Cauchy transform


def _cell_moment(w: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """Exact integral of dA/(zeta - z) over cells centered at offsets w.

    (1/2i) sum over the four edges of (conj - 0)/(zeta) d zeta, with the
    principal log of endpoint ratios (each straight edge subtends less
    than pi, so the principal branch is the continuous one).
    """
    corners = [
        w + complex(-hx / 2, -hy / 2),
        w + complex(hx / 2, -hy / 2),
        w + complex(hx / 2, hy / 2),
        w + complex(-hx / 2, hy / 2),
    ]
    total = np.zeros_like(w)
    for idx in range(4):
        u = corners[idx]
        q = corners[(idx + 1) % 4]
        v = q - u
        with np.errstate(divide="ignore", invalid="ignore"):
            L = np.log(q / u)
            term = np.conj(v) + (np.conj(u) - u * np.conj(v) / v) * L
        total = total + term
    out = total / 2j
    if not np.isfinite(out).all():
        raise QuadratureError("singular quadrature failed (corner hit a node?)")
    return out


_TABLE_CACHE: dict = {}


def kernel_offset_table(n_nodes: int, h: float) -> np.ndarray:
    """Offset table M0[di+N-1, dj+N-1] of exact cell kernel integrals."""
    key = (n_nodes, round(h, 14))
    if key in _TABLE_CACHE:
        return _TABLE_CACHE[key]
    off = np.arange(-(n_nodes - 1), n_nodes) * h
    W = off[:, None] + 1j * off[None, :]
    table = _cell_moment(W, h, h)
    _TABLE_CACHE[key] = table
    return table


_MATRIX_CACHE: dict = {}


def _transform_matrix(ax: AxisGrid, source_radius: float, ti0: int, nti: int) -> np.ndarray:
    """Dense (targets x sources) matrix of -1/pi * masked cell integrals.

    Used for the batched (n >= 2) path where BLAS beats the scalar
    kernel; stored in complex64, plenty for the polydisk tolerances.
    """
    key = (ax.n, round(ax.h, 14), round(source_radius, 12), ti0, nti)
    if key in _MATRIX_CACHE:
        return _MATRIX_CACHE[key]
    table = kernel_offset_table(ax.n, ax.h)
    idx = np.arange(ax.n)
    tgt = np.arange(ti0, ti0 + nti)
    R = idx[None, :] - tgt[:, None] + ax.n - 1  # (nti, N)
    x = ax.nodes
    mask = (np.abs(x[:, None] + 1j * x[None, :]) <= source_radius + 1e-12).astype(np.complex64)
    M = table[R[:, None, :, None], R[None, :, None, :]].astype(np.complex64)
    M *= mask[None, None, :, :]
    M *= np.complex64(-1.0 / math.pi)
    M = np.ascontiguousarray(M.reshape(nti * nti, ax.n * ax.n))
    _MATRIX_CACHE[key] = M
    return M


def cauchy_transform_axis(
    f: ComplexGridFunction,
    j: int,
    target_radius: float,
    source_radius: float | None = None,
) -> ComplexGridFunction:
    """T_j f: integrate axis j over its disk, evaluate on the target window.

    Axis j of the result is the sub-grid of nodes with |x|,|y| <=
    target_radius; other axes are untouched.  The single-variable case
    runs through the compiled offset-table kernel; with batch axes the
    dense-matrix BLAS path wins.
    """
    ax = f.axes[j]
    s = ax.radius if source_radius is None else float(source_radius)
    win = ax.window(target_radius)
    ti0, nti = win.start, win.stop - win.start

    vals = np.moveaxis(f.values, (2 * j, 2 * j + 1), (0, 1))
    rest = vals.shape[2:]
    flat = vals.reshape(ax.n, ax.n, -1)
    batch = flat.shape[-1]
    if batch == 1:
        table = kernel_offset_table(ax.n, ax.h)
        mask = f.disk_mask(j, s)
        src = np.ascontiguousarray(flat[:, :, 0] * mask)
        out = _kernels.table_apply(src, table, ti0, ti0, nti, nti)[..., None]
        out = out * (-1.0 / math.pi)
    else:
        M = _transform_matrix(ax, s, ti0, nti)
        fcols = flat.reshape(ax.n * ax.n, batch)
        if fcols.dtype != np.complex64:
            fcols = fcols.astype(np.complex64)
        out = (M @ fcols).reshape(nti, nti, batch)
        if f.values.dtype != np.complex64:
            out = out.astype(f.values.dtype)
    out = out.reshape((nti, nti) + rest)
    out = np.moveaxis(out, (0, 1), (2 * j, 2 * j + 1))
    new_axes = list(f.axes)
    nodes = ax.nodes[win]
    new_axes[j] = AxisGrid(float(nodes[-1]), nti)
    return ComplexGridFunction(new_axes, out)


def _slice_axis(f: ComplexGridFunction, j: int, radius: float) -> ComplexGridFunction:
    ax = f.axes[j]
    w = ax.window(radius)
    slicer = [slice(None)] * f.values.ndim
    slicer[2 * j] = w
    slicer[2 * j + 1] = w
    nodes = ax.nodes[w]
    new_axes = list(f.axes)
    new_axes[j] = AxisGrid(float(nodes[-1]), w.stop - w.start)
    return ComplexGridFunction(new_axes, f.values[tuple(slicer)])


# ---------------------------------------------------------------------- #
# bump splitting


def _decreasing_bump(t: np.ndarray) -> np.ndarray:
    """1 for t <= 0, 0 for t >= 1, smooth and decreasing in between."""

    def sig(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    t = np.clip(t, -1.0, 2.0)
    a = sig(1.0 - t)
    b = sig(t)
    return a / (a + b)


def bump_split(f: ComplexGridFunction, r: float, eps: float = 0.25):
    """f = f1 + f2 with f1 = chi f supported inside D_s, f2 = (1-chi) f
    vanishing on D_{r + eps(s-r)}; chi is the radial bump chi o mu^{s,r}.
    """
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    chi_total = np.ones(f.values.shape)
    for j in range(f.n):
        s = f.axes[j].radius
        if not r < s:
            raise DomainError("need r < s")
        mu = (np.abs(f.plane_z(j)) - (r + eps * (s - r))) / ((1 - 2 * eps) * (s - r))
        chi = _decreasing_bump(mu)
        shape = [1] * f.values.ndim
        shape[2 * j] = chi.shape[0]
        shape[2 * j + 1] = chi.shape[1]
        chi_total = chi_total * chi.reshape(shape)
    f1 = f.copy_with(f.values * chi_total)
    f2 = f.copy_with(f.values * (1.0 - chi_total))
    return f1, f2


# ---------------------------------------------------------------------- #
# the single-variable Cauchy-Riemann operator and the homotopy operators


def cauchy_riemann(
    f: ComplexGridFunction,
    s: float | None = None,
    r: float = 0.5,
    eps: float = 0.25,
    margin_nodes: int = 3,
) -> ComplexGridFunction:
    """T^{s,r} f for one complex variable, run through the f1 + f2 split.

    Both pieces are integrated with the exact-cell table (the singular
    cell needs it; for f2 the kernel is smooth and the table is simply
    sharp).  The result lives on the node window |x|,|y| <= r plus a few
    nodes of margin so finite differences at radius r stay centered.
    """
    if f.n != 1:
        raise ValueError("cauchy_riemann is the single-variable operator")
    ax = f.axes[0]
    s = ax.radius if s is None else float(s)
    if not 0 < r < s <= 1 + 1e-12:
        raise DomainError("need 0 < r < s <= 1")
    f1, f2 = bump_split(f, r, eps)
    target = min(r + margin_nodes * ax.h, ax.radius)
    T1 = cauchy_transform_axis(f1, 0, target, source_radius=s)
    T2 = cauchy_transform_axis(f2, 0, target, source_radius=s)
    return T1.copy_with(T1.values + T2.values, axes=T1.axes)


def _h_term(beta_k: ComplexGridFunction, k: int, J: tuple, r: float, margin: int) -> ComplexGridFunction:
    """(prod_{j in J} T_j dbar_j) T_k beta_k, axes in J u {k} on the window."""
    cur = cauchy_transform_axis(beta_k, k, r + margin * beta_k.axes[k].h)
    for j in J:
        cur = dbar_axis(cur, j)
        cur = cauchy_transform_axis(cur, j, r + margin * cur.axes[j].h)
    return cur


def h1(beta: Form01, s: float | None = None, r: float = 0.5, margin_nodes: int = 3) -> ComplexGridFunction:
    """First homotopy operator on (0,1)-forms; n = 1 reduces to T beta_1."""
    n = beta.n
    if n > 2:
        raise ValueError("only n <= 2 polydisks are implemented")
    total = None
    for k in range(n):
        others = [j for j in range(n) if j != k]
        for size in range(len(others) + 1):
            for J in combinations(others, size):
                coeff = (-1) ** len(J) / (len(J) + 1)
                term = _h_term(beta.comps[k], k, J, r, margin_nodes)
                # bring untouched axes onto the window grid by slicing
                for j in range(n):
                    if j != k and j not in J:
                        term = _slice_axis(term, j, r + margin_nodes * term.axes[j].h)
                vals = coeff * term.values
                total = vals if total is None else total + vals
                axes = term.axes
    return ComplexGridFunction(axes, total)


def h2(gamma: Form02, s: float | None = None, r: float = 0.5, margin_nodes: int = 3) -> Form01:
    """Second homotopy operator on (0,2)-forms (n = 2 at desk scale)."""
    pairs = list(gamma.comps)
    if not pairs:
        return Form01([])
    n = max(max(p) for p in pairs) + 1
    if n > 2:
        raise ValueError("only n <= 2 polydisks are implemented")
    comps = []
    for k in range(n):
        total = None
        axes = None
        for l in range(n):
            if l == k:
                continue
            got = gamma.comp(k, l)
            if got is None:
                continue
            g_kl, sign = got
            others = [j for j in range(n) if j not in (k, l)]
            for size in range(len(others) + 1):
                for J in combinations(others, size):
                    coeff = sign * (-1) ** (len(J) + 1) / ((len(J) + 1) * (len(J) + 2))
                    term = _h_term(g_kl, l, J, r, margin_nodes)
                    for j in range(n):
                        if j != l and j not in J:
                            term = _slice_axis(term, j, r + margin_nodes * term.axes[j].h)
                    vals = coeff * term.values
                    total = vals if total is None else total + vals
                    axes = term.axes
        comps.append(ComplexGridFunction(axes, total))
    return Form01(comps)
