"""Backend-independent fallback for the Cauchy table convolution.

Uses scipy.signal's direct 2-d convolution on a trimmed table band; it
computes exactly the same sums as the compiled kernel, just slower.
"""

from __future__ import annotations

import numpy as np
from scipy import signal


def table_apply(f, table, ti0, tj0, nti, ntj):
    """out[a,b] = sum_{ij} f[i,j] table[i-(ti0+a)+Ni-1, j-(tj0+b)+Nj-1]."""
    f = np.ascontiguousarray(f, dtype=np.complex128)
    Ni, Nj = f.shape
    # offsets used: rows Ni-1-ti0-(nti-1) .. 2Ni-2-ti0, flipped for convolution
    r0 = Ni - 1 - ti0 - (nti - 1)
    c0 = Nj - 1 - tj0 - (ntj - 1)
    band = table[r0 : r0 + Ni + nti - 1, c0 : c0 + Nj + ntj - 1]
    flipped = band[::-1, ::-1]
    return signal.convolve2d(flipped, f, mode="valid")
