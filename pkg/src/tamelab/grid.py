"""Discrete function spaces on nested box domains.

GridSection is the workhorse: a uniformly sampled vector-valued function
on a box, evaluated off-grid by cubic splines.  C^k norms follow the
convention ||e||_{k,K} = sup over nodes of the Euclidean norm of all
normalized centered differences D^a e = (1/a!) d^a e with |a| <= k; the
sup runs over the nodes of the target domain at which the stencil fits
inside the section's own grid (a uniform margin is used whenever the
grid allows, which makes the norm monotone in both k and r exactly).

The compactly supported extension operator is a Seeley-type reflection:
values beyond a face at depth s are sum_w c_w e(edge - 2^-w s), with
weights solving a small Vandermonde system so that normal derivatives
match to order 6, then a smooth cutoff kills the result near the support
boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import DomainError, ResolutionError

__all__ = [
    "Box",
    "NestedDomain",
    "GridSection",
    "CkNormReport",
    "ck_norm",
    "restrict",
    "extend",
    "interpolation_check",
    "band_limited_corpus",
    "fd_stencil",
    "norm_table_csv",
]

DEFAULT_KMAX = 6


@dataclass(frozen=True)
class Box:
    """Product of closed intervals [a_i, b_i]."""

    bounds: tuple

    def __post_init__(self):
        bd = tuple((float(a), float(b)) for a, b in self.bounds)
        for a, b in bd:
            if not a < b:
                raise ValueError(f"degenerate interval [{a}, {b}]")
        object.__setattr__(self, "bounds", bd)

    @staticmethod
    def cube(half_width: float, dim: int, center: float = 0.0) -> "Box":
        return Box(tuple((center - half_width, center + half_width) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def widths(self) -> tuple:
        return tuple(b - a for a, b in self.bounds)

    def contains_box(self, other: "Box", tol: float = 1e-12) -> bool:
        return all(
            a - tol <= oa and ob <= b + tol
            for (a, b), (oa, ob) in zip(self.bounds, other.bounds)
        )

    def strictly_contains_box(self, other: "Box", margin: float = 0.0) -> bool:
        return all(
            a + margin < oa and ob < b - margin
            for (a, b), (oa, ob) in zip(self.bounds, other.bounds)
        )

    def contains_points(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        pts = np.asarray(pts, float)
        ok = np.ones(pts.shape[:-1], bool)
        for i, (a, b) in enumerate(self.bounds):
            ok &= (pts[..., i] >= a - tol) & (pts[..., i] <= b + tol)
        return ok


class NestedDomain:
    """One-parameter family of boxes D_r, strictly decreasing inward.

    The default family is D_r = {x : |x_i| <= 1 + r} inside the template
    [-2, 2]^m (the polydisk family of the rigid normalization problems).
    """

    def __init__(self, dim: int = 1, family=None, base: Box | None = None):
        self.dim = dim
        self._family = family or (lambda r: Box.cube(1.0 + r, dim))
        self.base = base or self._family(1.0)
        # spot check of strict decrease and containment in the template
        rs = np.linspace(0.0, 1.0, 9)
        for lo, hi in zip(rs, rs[1:]):
            if not self._family(hi).strictly_contains_box(self._family(lo)):
                raise ValueError("family is not strictly decreasing")
        if not self.base.contains_box(self._family(1.0)):
            raise ValueError("base box must contain D_1")

    def box(self, r: float) -> Box:
        if not 0.0 <= r <= 1.0:
            raise DomainError(f"domain parameter r={r} outside [0, 1]")
        return self._family(r)

    def strict_decrease_witness(self, pairs: int = 100, seed: int = 0) -> bool:
        rng = np.random.default_rng(seed)
        for _ in range(pairs):
            r, s = np.sort(rng.uniform(0.0, 1.0, 2))
            if s - r < 1e-6:
                continue
            inner, outer = self.box(r), self.box(s)
            if not outer.strictly_contains_box(inner):
                return False
        return True


class GridSection:
    """Uniform tensor-grid samples of a map box -> R^fiber."""

    def __init__(self, box: Box, values: np.ndarray, interp_order: int = 3):
        values = np.asarray(values, float)
        if values.ndim == box.dim:
            values = values[..., None]
        if values.ndim != box.dim + 1:
            raise ValueError("values must have shape (N_1,...,N_m, fiber)")
        if any(n < 2 for n in values.shape[:-1]):
            raise ValueError("need at least two samples per axis")
        self.box = box
        self.values = values
        self.interp_order = interp_order
        self._spline_coeffs = None

    # ------------------------------------------------------------------ #
    @property
    def counts(self) -> tuple:
        return self.values.shape[:-1]

    @property
    def fiber_dim(self) -> int:
        return self.values.shape[-1]

    @property
    def spacing(self) -> tuple:
        return tuple(w / (n - 1) for w, n in zip(self.box.widths, self.counts))

    def axis_nodes(self, i: int) -> np.ndarray:
        a, b = self.box.bounds[i]
        return np.linspace(a, b, self.counts[i])

    def node_mesh(self) -> np.ndarray:
        grids = np.meshgrid(*[self.axis_nodes(i) for i in range(self.box.dim)], indexing="ij")
        return np.stack(grids, axis=-1)

    @staticmethod
    def from_function(box: Box, counts, fn, fiber_dim: int | None = None) -> "GridSection":
        counts = tuple(counts)
        axes = [np.linspace(a, b, n) for (a, b), n in zip(box.bounds, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = np.asarray(fn(*mesh), float)
        if vals.ndim == len(counts):
            vals = vals[..., None]
        elif vals.shape[: len(counts)] != counts:
            vals = np.moveaxis(vals, 0, -1)
        return GridSection(box, vals)

    # ------------------------------------------------------------------ #
    # evaluation

    def _coeffs(self):
        if self._spline_coeffs is None:
            order = self.interp_order
            if order <= 1:
                self._spline_coeffs = self.values
            else:
                c = np.empty_like(self.values)
                for f in range(self.fiber_dim):
                    c[..., f] = ndimage.spline_filter(self.values[..., f], order=order, mode="nearest")
                self._spline_coeffs = c
        return self._spline_coeffs

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Cubic-spline evaluation; exact at grid nodes."""
        pts = np.atleast_2d(np.asarray(points, float))
        coords = np.empty((self.box.dim, len(pts)))
        for i, (a, _) in enumerate(self.box.bounds):
            coords[i] = (pts[:, i] - a) / self.spacing[i]
        out = np.empty((len(pts), self.fiber_dim))
        c = self._coeffs()
        for f in range(self.fiber_dim):
            out[:, f] = ndimage.map_coordinates(
                c[..., f], coords, order=self.interp_order, prefilter=False, mode="nearest"
            )
        return out

    # ------------------------------------------------------------------ #
    # linear structure (same grid)

    def _compat(self, other: "GridSection"):
        if self.box.bounds != other.box.bounds or self.counts != other.counts:
            raise ValueError("sections live on different grids")

    def __add__(self, other: "GridSection") -> "GridSection":
        self._compat(other)
        return GridSection(self.box, self.values + other.values, self.interp_order)

    def __sub__(self, other: "GridSection") -> "GridSection":
        self._compat(other)
        return GridSection(self.box, self.values - other.values, self.interp_order)

    def __mul__(self, c: float) -> "GridSection":
        return GridSection(self.box, self.values * float(c), self.interp_order)

    __rmul__ = __mul__

    def __neg__(self) -> "GridSection":
        return GridSection(self.box, -self.values, self.interp_order)

    # ------------------------------------------------------------------ #
    # serialization

    def to_json(self) -> str:
        return json.dumps(
            {
                "bounds": [list(b) for b in self.box.bounds],
                "counts": list(self.counts),
                "fiber_dim": self.fiber_dim,
                "values": self.values.ravel().tolist(),
            }
        )

    @staticmethod
    def from_json(text: str) -> "GridSection":
        d = json.loads(text)
        vals = np.asarray(d["values"], float).reshape(tuple(d["counts"]) + (d["fiber_dim"],))
        return GridSection(Box(tuple(map(tuple, d["bounds"]))), vals)

    def to_binary(self) -> bytes:
        header = json.dumps(
            {
                "bounds": [list(b) for b in self.box.bounds],
                "counts": list(self.counts),
                "fiber_dim": self.fiber_dim,
                "dtype": "<f8",
            }
        ).encode()
        return len(header).to_bytes(8, "little") + header + self.values.astype("<f8").tobytes()

    @staticmethod
    def from_binary(blob: bytes) -> "GridSection":
        hlen = int.from_bytes(blob[:8], "little")
        d = json.loads(blob[8 : 8 + hlen].decode())
        vals = np.frombuffer(blob[8 + hlen :], dtype=d["dtype"]).reshape(
            tuple(d["counts"]) + (d["fiber_dim"],)
        )
        return GridSection(Box(tuple(map(tuple, d["bounds"]))), vals.copy())


# ---------------------------------------------------------------------- #
# finite differences


@lru_cache(maxsize=None)
def fd_stencil(m: int, order: int = 2) -> tuple:
    """Centered stencil weights for the m-th derivative (unit spacing)."""
    if m == 0:
        return (1.0,)
    hw = (m + 1) // 2 + (order - 2) // 2
    offsets = np.arange(-hw, hw + 1)
    V = np.vander(offsets, increasing=True).T.astype(float)
    rhs = np.zeros(len(offsets))
    rhs[m] = math.factorial(m)
    w = np.linalg.solve(V, rhs)
    w[np.abs(w) < 1e-13] = 0.0
    return tuple(w)


def _fd_derivative(values: np.ndarray, axis: int, m: int, h: float, order: int) -> np.ndarray:
    if m == 0:
        return values
    w = np.array(fd_stencil(m, order)) / h**m
    return ndimage.correlate1d(values, w, axis=axis, mode="nearest")


def stencil_halfwidth(m: int, order: int = 2) -> int:
    return 0 if m == 0 else (m + 1) // 2 + (order - 2) // 2


@dataclass
class CkNormReport:
    k: int
    r: float | None
    value: float
    per_index: dict = field(default_factory=dict)
    nodes_used: int = 0
    margin: tuple = ()

    def __float__(self):
        return self.value


def _multi_indices(dim: int, k: int):
    if dim == 1:
        for a in range(k + 1):
            yield (a,)
        return

    def rec(prefix, rem, axes_left):
        if axes_left == 1:
            for a in range(rem + 1):
                yield prefix + (a,)
            return
        for a in range(rem + 1):
            yield from rec(prefix + (a,), rem - a, axes_left - 1)

    yield from rec((), k, dim)


def ck_norm(
    e: GridSection,
    k: int,
    r: float | None = None,
    nested: NestedDomain | None = None,
    target: Box | None = None,
    order: int = 2,
) -> CkNormReport:
    """Discrete C^k norm of e over D_r (or an explicit target box).

    sup over eligible nodes of sqrt(sum_{|a|<=k} |D^a e|^2) with
    normalized derivatives D^a = (1/a!) d^a by centered differences.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if order < 2:
        raise ResolutionError("finite-difference order must be >= 2")
    dim = e.box.dim
    if target is None:
        if r is None:
            target = e.box
        else:
            nd = nested or NestedDomain(dim)
            target = nd.box(r)
    if not e.box.contains_box(target, tol=1e-9):
        raise DomainError("target domain is not contained in the section's box")

    # eligible nodes: inside target, and far enough from the grid edge;
    # the uniform k<=6 margin keeps the norm monotone in k exactly
    hw_needed = stencil_halfwidth(k, order)
    hw = max(hw_needed, stencil_halfwidth(DEFAULT_KMAX, order))
    if any(n <= 2 * hw for n in e.counts):
        hw = hw_needed
    masks = []
    for i in range(dim):
        nodes = e.axis_nodes(i)
        a, b = target.bounds[i]
        m = (nodes >= a - 1e-12) & (nodes <= b + 1e-12)
        if hw > 0:
            m[:hw] = False
            m[-hw:] = False
        masks.append(m)
    if any(not m.any() for m in masks):
        raise ResolutionError(f"k={k} stencil does not fit inside the sampled domain")
    sel = np.ix_(*[np.nonzero(m)[0] for m in masks])
    nodes_used = int(np.prod([m.sum() for m in masks]))

    h = e.spacing
    total_sq = np.zeros(tuple(int(m.sum()) for m in masks))
    per_index = {}
    for a in _multi_indices(dim, k):
        if sum(a) > k:
            continue
        fact = math.prod(math.factorial(ai) for ai in a)
        d = e.values
        for axis, m_ax in enumerate(a):
            if m_ax:
                d = _fd_derivative(d, axis, m_ax, h[axis], order)
        block = d[sel] / fact
        sq = np.sum(block**2, axis=-1)
        per_index[a] = float(np.sqrt(sq.max()))
        total_sq += sq
    value = float(np.sqrt(total_sq.max()))
    return CkNormReport(k=k, r=r, value=value, per_index=per_index, nodes_used=nodes_used, margin=(hw,) * dim)


# ---------------------------------------------------------------------- #
# restriction and extension


def restrict(
    e: GridSection,
    r: float,
    nested: NestedDomain | None = None,
    target: Box | None = None,
    counts=None,
) -> GridSection:
    """Resample e on D_r (cubic interpolation; same per-axis counts by default)."""
    nd = nested or NestedDomain(e.box.dim)
    box = target if target is not None else nd.box(r)
    if not e.box.contains_box(box, tol=1e-9):
        raise DomainError("D_r is not contained in the section's domain")
    counts = tuple(counts) if counts is not None else e.counts
    axes = [np.linspace(a, b, n) for (a, b), n in zip(box.bounds, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = e.eval(pts).reshape(counts + (e.fiber_dim,))
    return GridSection(box, vals, e.interp_order)


@lru_cache(maxsize=None)
def _seeley_weights(order: int = DEFAULT_KMAX) -> tuple:
    """Weights c_w with sum c_w (-w)^p = 1 for p = 0..order, w = 1..order+1.

    Equivalently: Lagrange extrapolation weights from nodes -1..-(order+1)
    to +1, so a value at depth s beyond a face is built from samples at
    integer multiples of s inside -- these land on grid nodes exactly.
    """
    W = order + 1
    b = np.arange(1.0, W + 1)
    V = np.vander(-b, increasing=True).T
    rhs = np.ones(W)
    return tuple(np.linalg.solve(V, rhs))


def _smoothstep(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""

    def sig(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    u = np.clip(u, -1.0, 2.0)
    a = sig(u)
    b = sig(1.0 - u)
    return a / (a + b)


def extend(
    e: GridSection,
    support: Box,
    k_max: int = DEFAULT_KMAX,
    nested: NestedDomain | None = None,
) -> GridSection:
    """Extension by Seeley reflection, cut off to vanish near d(support).

    A value at depth s beyond a face is sum_w c_w e(face - w s) with the
    cached Lagrange weights, so all samples fall on grid nodes (exact, no
    interpolation noise).  Samples whose reflected depth would leave the
    grid are clamped, but only in the region where the smooth cutoff has
    already vanished.  The result agrees with e on its whole domain, is
    supported strictly inside `support`, and is tame with constants
    independent of the inner domain.
    """
    dim = e.box.dim
    if not support.strictly_contains_box(e.box):
        raise DomainError("support must strictly contain the section's domain")
    if nested is not None and not support.strictly_contains_box(nested.box(1.0)):
        raise DomainError("support must strictly contain D_1")
    h = e.spacing
    weights = np.array(_seeley_weights(k_max))
    W = k_max + 1

    vals = e.values
    lo_pad, hi_pad, cut_widths = [], [], []
    for i in range(dim):
        gap_lo = e.box.bounds[i][0] - support.bounds[i][0]
        gap_hi = support.bounds[i][1] - e.box.bounds[i][1]
        if min(gap_lo, gap_hi) < 3 * h[i]:
            raise DomainError("insufficient margin between the domain and the support box")
        lo_pad.append(int(math.floor(gap_lo / h[i])))
        hi_pad.append(int(math.floor(gap_hi / h[i])))
        # cutoff must die before sample clamping can start
        inner_width = e.box.bounds[i][1] - e.box.bounds[i][0]
        w_cut = min(min(gap_lo, gap_hi) - h[i], inner_width / W - h[i])
        if w_cut < 2 * h[i]:
            raise DomainError("insufficient margin between the domain and the support box")
        cut_widths.append(w_cut)

    for axis in range(dim):
        n = vals.shape[axis]
        m_lo, m_hi = lo_pad[axis], hi_pad[axis]
        moved = np.moveaxis(vals, axis, 0)
        flat = moved.reshape(n, -1)
        j_lo = np.arange(m_lo, 0, -1)  # pad row order: deepest first
        idx_lo = np.minimum(np.arange(1, W + 1)[:, None] * j_lo[None, :], n - 1)
        new_lo = np.tensordot(weights, flat[idx_lo], axes=(0, 0))
        j_hi = np.arange(1, m_hi + 1)
        idx_hi = (n - 1) - np.minimum(np.arange(1, W + 1)[:, None] * j_hi[None, :], n - 1)
        new_hi = np.tensordot(weights, flat[idx_hi], axes=(0, 0))
        flat_ext = np.concatenate([new_lo, flat, new_hi], axis=0)
        vals = np.moveaxis(flat_ext.reshape((n + m_lo + m_hi,) + moved.shape[1:]), 0, axis)

    out_bounds = tuple(
        (e.box.bounds[i][0] - lo_pad[i] * h[i], e.box.bounds[i][1] + hi_pad[i] * h[i])
        for i in range(dim)
    )
    out = GridSection(Box(out_bounds), vals, e.interp_order)

    # smooth cutoff: identically 1 on the inner domain, 0 beyond cut_width
    mask = np.ones(out.counts)
    for i in range(dim):
        nodes = out.axis_nodes(i)
        a_in, b_in = e.box.bounds[i]
        w_cut = cut_widths[i]
        s = np.maximum(np.maximum(a_in - nodes, nodes - b_in), 0.0)
        prof = _smoothstep((w_cut - s) / w_cut)
        prof[s <= 0] = 1.0
        shape = [1] * dim
        shape[i] = len(nodes)
        mask = mask * prof.reshape(shape)
    out.values = out.values * mask[..., None]
    out._spline_coeffs = None
    return out


def interpolation_check(e: GridSection, i: int, j: int, k: int, r: float | None = None, nested=None, order: int = 2):
    """Ratio ||e||_j^{k-i} / (||e||_i^{k-j} ||e||_k^{j-i}); 0 for e = 0."""
    if not i <= j <= k:
        raise ValueError("need i <= j <= k")
    ni = ck_norm(e, i, r, nested, order=order).value
    nj = ck_norm(e, j, r, nested, order=order).value
    nk = ck_norm(e, k, r, nested, order=order).value
    denom = ni ** (k - j) * nk ** (j - i)
    if denom == 0.0:
        return 0.0
    return nj ** (k - i) / denom


def norm_table_csv(e: GridSection, ks, rs, nested: NestedDomain | None = None, order: int = 2) -> str:
    """CSV table of C^k norms over the requested (k, r) grid."""
    nd = nested or NestedDomain(e.box.dim)
    lines = ["k,r,norm"]
    for k in ks:
        for r in rs:
            lines.append(f"{k},{r:.17g},{ck_norm(e, k, r, nd, order=order).value:.17g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------- #
# test corpora


def band_limited_corpus(
    box: Box,
    counts,
    n_sections: int,
    fiber_dim: int = 1,
    max_freq: float = 2.0,
    n_modes: int = 4,
    amplitude: float = 1.0,
    seed: int = 0,
):
    """Random sums of plane waves with bounded frequency (FD error stays controlled)."""
    rng = np.random.default_rng(seed)
    dim = box.dim
    out = []
    for _ in range(n_sections):
        freqs = rng.uniform(-max_freq, max_freq, (n_modes, dim))
        phases = rng.uniform(0, 2 * np.pi, (n_modes, fiber_dim))
        amps = rng.normal(0, 1, (n_modes, fiber_dim)) * amplitude / math.sqrt(n_modes)
        axes = [np.linspace(a, b, n) for (a, b), n in zip(box.bounds, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = np.zeros(tuple(counts) + (fiber_dim,))
        for m in range(n_modes):
            phase = sum(freqs[m, d_] * mesh[d_] for d_ in range(dim))
            for f in range(fiber_dim):
                vals[..., f] += amps[m, f] * np.cos(phase + phases[m, f])
        out.append(GridSection(box, vals))
    return out
