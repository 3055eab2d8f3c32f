"""Nash smoothing operators S_t^r on nested domains.

S_t^r e = (K_t * extend(e)) restricted back to D_r, where K_t is a
compactly supported mollifier of width 1/t whose moments vanish up to
order M (default 6).  The sampled kernel gets an exact discrete moment
correction, so constants and polynomials of degree <= M reproduce to
machine precision away from the boundary collar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ResolutionError
from .grid import Box, GridSection, NestedDomain, ck_norm, extend, restrict

__all__ = ["Mollifier", "smooth", "smoothing_inequality_check", "SmoothingRatios"]


class Mollifier:
    """Bump-times-polynomial profile with vanishing moments up to order M."""

    def __init__(self, moments: int = 6, quad_points: int = 4001):
        if moments < 0 or moments % 2:
            raise ValueError("moment order must be even and nonnegative")
        self.moments = moments
        x = np.linspace(-1.0, 1.0, quad_points)
        w = np.zeros_like(x)
        inside = np.abs(x) < 1.0
        w[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
        ncoef = moments // 2 + 1
        # solve for even polynomial coefficients: integral x^{2p} K = delta_{p0}
        A = np.empty((ncoef, ncoef))
        for p in range(ncoef):
            for i in range(ncoef):
                A[p, i] = np.trapezoid(x ** (2 * p) * x ** (2 * i) * w, x)
        rhs = np.zeros(ncoef)
        rhs[0] = 1.0
        self._coef = np.linalg.solve(A, rhs)
        self._x = x
        self._w = w

    def profile(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 1.0
        bump = np.exp(-1.0 / (1.0 - x[inside] ** 2))
        poly = sum(c * x[inside] ** (2 * i) for i, c in enumerate(self._coef))
        out[inside] = bump * poly
        return out

    def continuous_moments(self, up_to: int | None = None) -> np.ndarray:
        m = self.moments if up_to is None else up_to
        k = self.profile(self._x)
        return np.array([np.trapezoid(self._x**p * k, self._x) for p in range(m + 1)])

    def sample(self, t: float, h: float) -> np.ndarray:
        """1-d kernel samples on spacing h at scale t, discrete moments exact.

        Discrete moments sum_j k_j (j h)^p h match delta_{p0} for
        p = 0..M (minimal-norm correction), so the discrete operator
        reproduces polynomials of degree <= M exactly in the interior.
        """
        if t <= 1.0:
            raise ValueError("scale parameter must exceed 1")
        radius = 1.0 / t
        if h > radius / 4 + 1e-12:
            raise ResolutionError(f"grid spacing {h:.4g} does not resolve kernel width {radius:.4g}")
        m = int(math.floor(radius / h * (1 - 1e-12)))
        j = np.arange(-m, m + 1)
        k = t * self.profile(t * j * h)
        # exact discrete moment correction (scaled basis for conditioning)
        u = (j * h) / radius
        V = np.stack([u**p for p in range(self.moments + 1)])
        target = np.zeros(self.moments + 1)
        target[0] = 1.0 / h
        resid = target - V @ k
        corr = V.T @ np.linalg.solve(V @ V.T, resid)
        return k + corr


@dataclass
class SmoothingRatios:
    t: float
    k: int
    l: int
    r: float
    smooth_ratio: float  # ||S_t e||_{k,r} / (t^l ||e||_{k-l,r})
    error_ratio: float  # ||e - S_t e||_{k-l,r} * t^l / ||e||_{k,r}


def smooth(
    e: GridSection,
    t: float,
    r: float | None = None,
    nested: NestedDomain | None = None,
    mollifier: Mollifier | None = None,
    order: int = 2,
) -> GridSection:
    """S_t^r e = (K_t * extend(e)) | D_r; linear in e."""
    nd = nested or NestedDomain(e.box.dim)
    mol = mollifier or _default_mollifier()
    h = e.spacing
    radius = 1.0 / float(t)
    for hi in h:
        if hi > radius / 4 + 1e-12:
            raise ResolutionError(f"grid spacing {hi:.4g} does not resolve kernel width {radius:.4g}")
    d1 = nd.box(1.0)
    pad = radius + 5 * max(h)
    support = Box(tuple((a - pad, b + pad) for a, b in d1.bounds))
    ext = extend(e, support, nested=nd)
    vals = ext.values.copy()
    for axis in range(e.box.dim):
        kern = mol.sample(float(t), ext.spacing[axis]) * ext.spacing[axis]
        vals = ndimage.correlate1d(vals, kern, axis=axis, mode="constant", cval=0.0)
    smoothed = GridSection(ext.box, vals, e.interp_order)
    # e already lives on D_r; restrict back onto its own grid
    return restrict(smoothed, 0.0, nd, target=e.box, counts=e.counts)


_MOLLIFIER_CACHE: dict[int, Mollifier] = {}


def _default_mollifier(moments: int = 6) -> Mollifier:
    if moments not in _MOLLIFIER_CACHE:
        _MOLLIFIER_CACHE[moments] = Mollifier(moments)
    return _MOLLIFIER_CACHE[moments]


def smoothing_inequality_check(
    e: GridSection,
    t: float,
    k: int,
    l: int,
    r: float,
    nested: NestedDomain | None = None,
    order: int = 2,
) -> SmoothingRatios:
    """Both smoothing-inequality ratios at (t, k, l, r); zeros give 0."""
    if not 0 <= l <= k:
        raise ValueError("need 0 <= l <= k")
    nd = nested or NestedDomain(e.box.dim)
    se = smooth(e, t, r, nd)
    n_low = ck_norm(e, k - l, r, nd, order=order).value
    n_high = ck_norm(e, k, r, nd, order=order).value
    n_s = ck_norm(se, k, r, nd, order=order).value
    diff = GridSection(e.box, e.values - se.values, e.interp_order)
    n_d = ck_norm(diff, k - l, r, nd, order=order).value
    ratio1 = 0.0 if n_low == 0 else n_s / (t**l * n_low)
    ratio2 = 0.0 if n_high == 0 else n_d * t**l / n_high
    return SmoothingRatios(t=t, k=k, l=l, r=r, smooth_ratio=ratio1, error_ratio=ratio2)
