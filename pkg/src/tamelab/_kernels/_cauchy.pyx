# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Direct offset-table convolution: the hot kernel of the Cauchy transform.

out[a, b] = sum_{i, j} f[i, j] * table[i - (ti0 + a) + Ni - 1,
                                        j - (tj0 + b) + Nj - 1]

f is the (masked) source grid, table the per-cell kernel integrals
indexed by source-minus-target offset, and (ti0, tj0, nti, ntj) select
the target window inside the source index space.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def table_apply(
    cnp.complex128_t[:, ::1] f,
    cnp.complex128_t[:, ::1] table,
    Py_ssize_t ti0,
    Py_ssize_t tj0,
    Py_ssize_t nti,
    Py_ssize_t ntj,
):
    cdef Py_ssize_t Ni = f.shape[0]
    cdef Py_ssize_t Nj = f.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out_arr = np.empty((nti, ntj), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    cdef Py_ssize_t a, b, i, j, roff, coff
    cdef double complex acc
    cdef double complex fij

    for a in range(nti):
        roff = Ni - 1 - ti0 - a
        for b in range(ntj):
            coff = Nj - 1 - tj0 - b
            acc = 0
            for i in range(Ni):
                for j in range(Nj):
                    fij = f[i, j]
                    if fij != 0:
                        acc = acc + fij * table[i + roff, j + coff]
            out[a, b] = acc
    return out_arr
