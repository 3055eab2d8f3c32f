"""Near-identity maps, flows, and the action of diffeomorphisms on sections.

Maps are stored as id + f with the displacement f a GridSection whose
fiber dimension equals the ambient dimension.  The action of a map on a
section solves phi(x, y(x)) = (z(x), e(z(x))) nodewise by Newton, via
the auxiliary fiber map psi(x,y) = (x, y + g2(x,y) - e(x+g1(x,y)) + e(x))
whose inversion reduces the problem to the fiber variable only; the
compatibility certificate carries the relative base map z and its
inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    EscapeError,
    IncompatibleError,
    InversionError,
    ThresholdError,
)
from .grid import Box, GridSection, ck_norm

__all__ = [
    "NearIdentityMap",
    "TimeDepVectorField",
    "SectionOverBase",
    "CompatibilityCertificate",
    "DEFAULT_THETA",
    "compose",
    "compose_maps",
    "invert",
    "flow",
    "act",
    "infinitesimal_action",
    "flow_action_residual",
    "infinite_compose",
    "iterated_flow_convergence",
]

DEFAULT_THETA = 0.05


def _grid_points(box: Box, counts) -> np.ndarray:
    axes = [np.linspace(a, b, n) for (a, b), n in zip(box.bounds, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def derivative_section(e: GridSection, axis: int, order: int = 4) -> GridSection:
    """First partial derivative of every fiber component, same grid.

    Interior stencils are centered; the two layers at each edge use
    one-sided stencils of the same order, so boundary rows carry no
    padding artifacts (they would otherwise leak into interpolation).
    """
    h = e.spacing[axis]
    v = np.moveaxis(e.values, axis, 0)
    out = np.empty_like(v)
    n = v.shape[0]
    if order >= 4 and n >= 6:
        out[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)
        c_edge = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
        c_next = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * h)
        out[0] = sum(ci * v[i] for i, ci in enumerate(c_edge))
        out[1] = sum(ci * v[1 + i] for i, ci in enumerate(c_next))
        out[-1] = -sum(ci * v[-1 - i] for i, ci in enumerate(c_edge))
        out[-2] = -sum(ci * v[-2 - i] for i, ci in enumerate(c_next))
    else:
        out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
        out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
        out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    vals = np.moveaxis(out, 0, axis)
    return GridSection(e.box, vals, e.interp_order)


class NearIdentityMap:
    """Map id + f on a box; f sampled with fiber dimension = box dimension."""

    def __init__(self, disp: GridSection):
        if disp.fiber_dim != disp.box.dim:
            raise ValueError("displacement fiber dimension must equal the box dimension")
        self.disp = disp
        self._jac = None

    @property
    def box(self) -> Box:
        return self.disp.box

    @staticmethod
    def identity(box: Box, counts) -> "NearIdentityMap":
        pts = _grid_points(box, counts)
        vals = np.zeros(tuple(counts) + (box.dim,))
        return NearIdentityMap(GridSection(box, vals))

    @staticmethod
    def from_function(box: Box, counts, fn) -> "NearIdentityMap":
        """fn maps meshgrid arrays to displacement components."""
        return NearIdentityMap(GridSection.from_function(box, counts, fn))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, float))
        return pts + self.disp.eval(pts)

    def displacement_at(self, points: np.ndarray) -> np.ndarray:
        return self.disp.eval(points)

    def jacobian_at(self, points: np.ndarray) -> np.ndarray:
        """D(id+f) = I + Df, Df by interpolated centered differences."""
        if self._jac is None:
            self._jac = [derivative_section(self.disp, a) for a in range(self.box.dim)]
        pts = np.atleast_2d(np.asarray(points, float))
        m = self.box.dim
        J = np.zeros((len(pts), m, m))
        for a in range(m):
            J[:, :, a] = self._jac[a].eval(pts)
        J += np.eye(m)
        return J

    def norm(self, k: int, target: Box | None = None, order: int = 2) -> float:
        return ck_norm(self.disp, k, target=target or self.box, order=order).value


class TimeDepVectorField:
    """Vector field v^t on a box, sampled on a uniform time grid in [0,1]."""

    def __init__(self, box: Box, values: np.ndarray, times: np.ndarray | None = None):
        values = np.asarray(values, float)
        if values.ndim == box.dim + 1:  # time-independent convenience
            values = values[None]
        self.box = box
        self.values = values
        self.times = np.linspace(0.0, 1.0, values.shape[0]) if times is None else np.asarray(times, float)
        if len(self.times) != values.shape[0]:
            raise ValueError("time grid does not match samples")
        self._slices = [GridSection(box, values[i]) for i in range(values.shape[0])]

    @staticmethod
    def from_function(box: Box, counts, fn, times=None, n_times: int = 1) -> "TimeDepVectorField":
        """fn(t, *mesh) -> components; n_times=1 gives a frozen field."""
        tvals = np.linspace(0.0, 1.0, n_times) if times is None else np.asarray(times, float)
        axes = [np.linspace(a, b, n) for (a, b), n in zip(box.bounds, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        frames = []
        for t in tvals:
            vals = np.asarray(fn(t, *mesh), float)
            if vals.ndim == len(counts):
                vals = vals[..., None]
            elif vals.shape[: len(counts)] != tuple(counts):
                vals = np.moveaxis(vals, 0, -1)
            frames.append(vals)
        return TimeDepVectorField(box, np.stack(frames), tvals)

    @property
    def fiber_dim(self) -> int:
        return self.values.shape[-1]

    def frozen(self, t: float = 0.0) -> "TimeDepVectorField":
        return TimeDepVectorField(self.box, self.at_time(t).values[None], np.array([0.0]))

    def at_time(self, t: float) -> GridSection:
        if len(self.times) == 1:
            return self._slices[0]
        t = float(np.clip(t, self.times[0], self.times[-1]))
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 2)
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        vals = (1 - w) * self.values[i] + w * self.values[i + 1]
        return GridSection(self.box, vals)

    def eval(self, t: float, points: np.ndarray) -> np.ndarray:
        if len(self.times) == 1:
            return self._slices[0].eval(points)
        t = float(np.clip(t, self.times[0], self.times[-1]))
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 2)
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return (1 - w) * self._slices[i].eval(points) + w * self._slices[i + 1].eval(points)

    def sup_c1_norm(self) -> float:
        return max(ck_norm(s, 1, target=self.box).value for s in self._slices)


@dataclass
class SectionOverBase:
    """Graph section x -> (x, e(x)) of the trivial bundle over a base box."""

    section: GridSection
    total_box: Box

    def __post_init__(self):
        base = self.section.box
        if self.total_box.dim != base.dim + self.section.fiber_dim:
            raise ValueError("total box dimension must be base + fiber")
        pts = _grid_points(base, self.section.counts)
        graph = np.concatenate([pts, self.section.eval(pts)], axis=1)
        if not self.total_box.contains_points(graph, tol=1e-9).all():
            raise DomainError("graph leaves the configured total-space box")

    @property
    def base_box(self) -> Box:
        return self.section.box

    @property
    def fiber_dim(self) -> int:
        return self.section.fiber_dim


@dataclass
class CompatibilityCertificate:
    base_set: Box
    phi_b: NearIdentityMap  # relative base map z
    psi_b: NearIdentityMap  # its inverse (phi^{-1})_e
    roundtrip_residual: float


# ---------------------------------------------------------------------- #
# composition


def compose(
    g: GridSection,
    f: GridSection,
    theta: float = DEFAULT_THETA,
    embed: bool = True,
) -> GridSection:
    """g o (i + f) sampled on f's grid; i embeds the base into g's domain.

    f's fiber dimension must equal g's box dimension; when embed=True and
    f's box has lower dimension m, i(x) = (x, 0, ...) pads with zeros.
    """
    if f.fiber_dim != g.box.dim:
        raise ValueError("displacement fiber dim must match g's domain dim")
    n0 = ck_norm(f, 0, target=f.box).value
    if n0 >= theta:
        raise ThresholdError(f"|f|_0 = {n0:.4g} >= theta = {theta:.4g}")
    pts = _grid_points(f.box, f.counts)
    if f.box.dim < g.box.dim:
        if not embed:
            raise ValueError("dimension mismatch without embedding")
        base = np.zeros((len(pts), g.box.dim))
        base[:, : f.box.dim] = pts
    else:
        base = pts
    target = base + f.eval(pts)
    if not g.box.contains_points(target, tol=1e-9).all():
        raise DomainError("(i+f)(B) escapes g's domain")
    vals = g.eval(target).reshape(tuple(f.counts) + (g.fiber_dim,))
    return GridSection(f.box, vals, g.interp_order)


def compose_maps(
    outer: NearIdentityMap,
    inner: NearIdentityMap,
    box: Box | None = None,
    counts=None,
    theta: float = 0.5,
) -> NearIdentityMap:
    """(id+g) o (id+f) = id + [f + g o (id+f)] sampled on `box`."""
    box = box or inner.box
    counts = counts or inner.disp.counts
    pts = _grid_points(box, counts)
    f_here = inner.disp.eval(pts)
    mid = pts + f_here
    if not outer.box.contains_points(mid, tol=1e-9).all():
        raise DomainError("inner image escapes the outer map's domain")
    disp = f_here + outer.disp.eval(mid)
    return NearIdentityMap(
        GridSection(box, disp.reshape(tuple(counts) + (box.dim,)), inner.disp.interp_order)
    )


# ---------------------------------------------------------------------- #
# inversion


def invert(
    phi: NearIdentityMap,
    target: Box,
    counts=None,
    theta: float = DEFAULT_THETA,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> NearIdentityMap:
    """Newton inversion of id+g on the target box: (id+g) o (id+f) = id.

    Damped Newton from f = 0; InversionError if any node fails to reach
    the tolerance within max_iter iterations.
    """
    C = phi.box
    if not C.contains_box(target, tol=1e-9):
        raise DomainError("target box must lie inside the map's domain")
    n1 = phi.norm(1)
    if n1 >= theta:
        raise ThresholdError(f"|g|_1 = {n1:.4g} >= theta = {theta:.4g}")
    counts = tuple(counts) if counts is not None else phi.disp.counts
    x = _grid_points(target, counts)
    y = x.copy()
    for _ in range(max_iter):
        F = y + phi.displacement_at(y) - x
        err = np.abs(F).max()
        if err < tol:
            break
        J = phi.jacobian_at(y)
        step = np.linalg.solve(J, F[..., None])[..., 0]
        ns = np.abs(step).max()
        lam = 1.0 if ns < 0.5 else 0.5 / ns  # damping for large steps
        y = y - lam * step
        if not C.contains_points(y, tol=1e-6).all():
            raise InversionError("Newton iterate escaped the domain")
    else:
        raise InversionError(f"Newton did not converge (residual {err:.3e})")
    disp = (y - x).reshape(tuple(counts) + (target.dim,))
    return NearIdentityMap(GridSection(target, disp))


# ---------------------------------------------------------------------- #
# flows


def flow(
    v: TimeDepVectorField,
    t: float,
    box: Box,
    counts=None,
    theta: float = DEFAULT_THETA,
    tol: float = 1e-10,
    min_steps: int = 8,
    max_steps: int = 4096,
    interp_order: int = 3,
) -> NearIdentityMap:
    """Time-[0,t] flow map of v on `box`, RK4 with Richardson step control.

    Trajectories are monitored; leaving v's domain raises EscapeError.
    """
    n1 = v.sup_c1_norm()
    if n1 >= theta:
        raise ThresholdError(f"sup_t |v|_1 = {n1:.4g} >= theta = {theta:.4g}")
    counts = tuple(counts) if counts is not None else v.values.shape[1 : 1 + box.dim]
    x0 = _grid_points(box, counts)

    def integrate(n_steps: int) -> np.ndarray:
        ht = t / n_steps
        y = x0.copy()
        for i in range(n_steps):
            ti = i * ht
            k1 = v.eval(ti, y)
            k2 = v.eval(ti + ht / 2, y + ht / 2 * k1)
            k3 = v.eval(ti + ht / 2, y + ht / 2 * k2)
            k4 = v.eval(ti + ht, y + ht * k3)
            y = y + ht / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not v.box.contains_points(y, tol=1e-9).all():
                raise EscapeError("flow trajectory left the field's domain")
        return y

    n = min_steps
    y_prev = integrate(n)
    while n < max_steps:
        y_next = integrate(2 * n)
        richardson = np.abs(y_next - y_prev).max() / 15.0
        y_prev = y_next
        n *= 2
        if richardson < tol:
            break
    disp = (y_prev - x0).reshape(tuple(counts) + (box.dim,))
    return NearIdentityMap(GridSection(box, disp, interp_order))


# ---------------------------------------------------------------------- #
# the action of near-identity maps on sections


def act(
    e: SectionOverBase,
    phi: NearIdentityMap,
    W: Box,
    theta: float = DEFAULT_THETA,
    tol: float = 1e-11,
    max_iter: int = 50,
):
    """Right action e . phi on the base window W, with certificate.

    Solves phi(x, y(x)) = (z(x), e(z(x))) for all base nodes x in W by
    Newton in the fiber variable; raises IncompatibleError when the
    transversality fails (Newton divergence or non-injective base map).
    """
    m = e.base_box.dim
    n = e.fiber_dim
    if phi.box.dim != m + n:
        raise ValueError("map must live on the total space")
    if not all(
        Wa >= Ba - 1e-9 and Wb <= Bb + 1e-9
        for (Wa, Wb), (Ba, Bb) in zip(W.bounds, e.base_box.bounds)
    ):
        raise DomainError("window must sit inside the section's base box")
    ne = ck_norm(e.section, 1, target=e.base_box).value
    ng = phi.norm(1)
    if ne >= theta:
        raise ThresholdError(f"|e|_1 = {ne:.4g} >= theta")
    if ng >= theta:
        raise ThresholdError(f"|phi - id|_1 = {ng:.4g} >= theta")

    counts = e.section.counts
    x = _grid_points(W, counts)
    ex = e.section.eval(x)
    y = ex.copy()

    g = phi.disp  # fiber_dim = m + n
    dgs = [derivative_section(g, m + j) for j in range(n)]  # d g / d y_j
    de = [derivative_section(e.section, a) for a in range(m)]

    converged = False
    for _ in range(max_iter):
        xy = np.concatenate([x, y], axis=1)
        if not phi.box.contains_points(xy, tol=1e-9).all():
            raise DomainError("fiber escape during Newton")
        gval = g.eval(xy)
        z = x + gval[:, :m]
        if not e.base_box.contains_points(z, tol=1e-9).all():
            raise DomainError("base image escapes the section's domain")
        F = y + gval[:, m:] - e.section.eval(z)
        err = np.abs(F).max()
        if err < tol:
            converged = True
            break
        # J = I + d g2/dy - De(z) dg1/dy
        J = np.zeros((len(x), n, n))
        Dez = np.stack([d.eval(z) for d in de], axis=-1)  # (P, n, m)
        for j in range(n):
            dg = dgs[j].eval(xy)  # (P, m+n)
            J[:, :, j] = dg[:, m:] - np.einsum("pnm,pm->pn", Dez, dg[:, :m])
        J += np.eye(n)
        try:
            step = np.linalg.solve(J, F[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise IncompatibleError("transversality failure: singular fiber Jacobian") from exc
        ns = np.abs(step).max()
        lam = 1.0 if ns < 0.25 else 0.25 / ns
        y = y - lam * step
    if not converged:
        raise IncompatibleError(f"Newton failed to converge at some node (residual {err:.3e})")

    xy = np.concatenate([x, y], axis=1)
    gval = g.eval(xy)
    z = x + gval[:, :m]

    # injectivity of the base map z on the node lattice
    z_map = NearIdentityMap(GridSection(W, (z - x).reshape(tuple(counts) + (m,))))
    Jz = z_map.jacobian_at(x)
    if np.linalg.det(Jz).min() <= 0:
        raise IncompatibleError("base map fails orientation/injectivity test")
    stride = max(1, len(x) // 256)
    sub = z[::stride]
    d2 = np.sum((sub[None, :, :] - sub[:, None, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    xsub = x[::stride]
    dx2 = np.sum((xsub[None, :, :] - xsub[:, None, :]) ** 2, axis=-1)
    np.fill_diagonal(dx2, np.inf)
    if d2.min() < 1e-10 * max(dx2.min(), 1e-30):
        raise IncompatibleError("base map collapses distinct lattice nodes")

    result = GridSection(W, y.reshape(tuple(counts) + (n,)))
    # the inverse base map is certified on W shrunk by the displacement
    z_sup = float(np.abs(z - x).max())
    margin = z_sup + 2 * max(np.asarray(result.spacing))
    inv_box = _shrink_box(W, margin)
    psi_b = invert(z_map, inv_box, counts=counts, theta=0.49)
    rt = compose_maps(z_map, psi_b, theta=1.0)
    residual = float(np.abs(rt.disp.values).max())
    cert = CompatibilityCertificate(W, z_map, psi_b, residual)
    return SectionOverBase(result, e.total_box), cert


def _shrink_box(box: Box, margin: float) -> Box:
    return Box(tuple((a + margin, b - margin) for a, b in box.bounds))


def infinitesimal_action(
    v: GridSection,
    b: SectionOverBase,
) -> GridSection:
    """delta_b(v) = (db o dpi - id)(v o b), a vertical section over the base."""
    m = b.base_box.dim
    n = b.fiber_dim
    if v.fiber_dim != m + n or v.box.dim != m + n:
        raise ValueError("v must be a vector field on the total space")
    pts = _grid_points(b.base_box, b.section.counts)
    graph = np.concatenate([pts, b.section.eval(pts)], axis=1)
    if not v.box.contains_points(graph, tol=1e-9).all():
        raise DomainError("graph leaves the field's domain")
    vvals = v.eval(graph)
    Db = np.stack(
        [derivative_section(b.section, a).eval(pts) for a in range(m)], axis=-1
    )  # (P, n, m)
    vert = np.einsum("pnm,pm->pn", Db, vvals[:, :m]) - vvals[:, m:]
    return GridSection(b.base_box, vert.reshape(tuple(b.section.counts) + (n,)))


def flow_action_residual(
    e: SectionOverBase,
    v: GridSection,
    W: Box,
    ks=(0, 1, 2, 3),
    theta: float = DEFAULT_THETA,
    flow_tol: float = 1e-10,
) -> dict:
    """||e . phi_v - e - delta_e(v)||_k for k in ks (time-one flow of v)."""
    field = TimeDepVectorField(v.box, v.values[None], np.array([0.0]))
    margin = 1.5 * float(np.abs(v.values).max()) + 2 * max(
        (b - a) / (n - 1) for (a, b), n in zip(v.box.bounds, v.values.shape[:-1])
    )
    inner = _shrink_box(v.box, margin)
    phi = flow(field, 1.0, inner, counts=v.values.shape[:-1], theta=theta, tol=flow_tol)
    acted, _ = act(e, phi, W, theta=theta)
    delta = infinitesimal_action(v, e)
    e_W = GridSection(W, e.section.eval(_grid_points(W, e.section.counts)).reshape(acted.section.values.shape))
    d_W = GridSection(W, delta.eval(_grid_points(W, e.section.counts)).reshape(acted.section.values.shape))
    resid = GridSection(W, acted.section.values - e_W.values - d_W.values)
    return {k: ck_norm(resid, k, target=W).value for k in ks}


# ---------------------------------------------------------------------- #
# infinite compositions and iterated flows


def infinite_compose(
    phis,
    boxes,
    limit_box: Box,
    counts=None,
    theta: float = DEFAULT_THETA,
):
    """psi = phi_1 o ... o phi_N with Cauchy-tail diagnostics on limit_box.

    phis[i] must map boxes[i] into boxes[i-1]; the accumulated map is
    resampled on each new domain, and tails ||psi_nu - psi_{nu-1}||_0 on
    the limit box are reported.
    """
    if len(phis) != len(boxes):
        raise ValueError("need one domain box per map")
    total = sum(p.norm(1) for p in phis)
    if total >= theta * 10:
        raise ThresholdError(f"sum |phi_nu - id|_1 = {total:.4g} too large")
    counts = tuple(counts) if counts is not None else phis[0].disp.counts
    acc = phis[0]
    lim_pts = _grid_points(limit_box, counts)
    tails = []
    prev = acc(lim_pts)
    for nu in range(1, len(phis)):
        box_nu = boxes[nu]
        if not boxes[nu - 1].contains_box(box_nu, tol=1e-9):
            raise DomainError("domain chain must be decreasing")
        acc = compose_maps(acc, phis[nu], box=box_nu, counts=counts, theta=1.0)
        cur = acc(lim_pts)
        tails.append(float(np.abs(cur - prev).max()))
        prev = cur
    psi = NearIdentityMap(
        GridSection(limit_box, (prev - lim_pts).reshape(tuple(counts) + (limit_box.dim,)))
    )
    return psi, tails


def iterated_flow_convergence(
    v: TimeDepVectorField,
    t: float,
    box: Box,
    ns=(2, 4, 8, 16),
    k: int = 0,
    counts=None,
    theta: float = DEFAULT_THETA,
    tol: float = 1e-11,
) -> dict:
    """||(phi_v^{t/n})^n - phi_{v^0}^t||_k for the requested split counts."""
    counts = tuple(counts) if counts is not None else v.values.shape[1 : 1 + box.dim]
    exact = flow(v.frozen(0.0), t, box, counts=counts, theta=theta, tol=tol)
    # sample the short-time map on a box wide enough for the whole chain
    sup_v = float(np.abs(v.values).max())
    h_max = max(
        (b - a) / (n_ - 1)
        for (a, b), n_ in zip(v.box.bounds, v.values.shape[1 : 1 + box.dim])
    )
    wide = Box(
        tuple(
            (max(a - 0, va + h_max), min(b + 0, vb - h_max))
            for (a, b), (va, vb) in zip(
                tuple((a - 1.5 * t * sup_v - 2 * h_max, b + 1.5 * t * sup_v + 2 * h_max) for a, b in box.bounds),
                v.box.bounds,
            )
        )
    )
    out = {}
    for n in ns:
        small = flow(v, t / n, wide, counts=counts, theta=theta, tol=tol)
        acc = flow(v, t / n, box, counts=counts, theta=theta, tol=tol)
        for _ in range(n - 1):
            acc = compose_maps(small, acc, box=box, counts=counts, theta=1.0)
        diff = GridSection(box, acc.disp.values - exact.disp.values)
        out[n] = ck_norm(diff, k, target=box).value
    return out
