# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Toeplitz-form assembly kernel."""
import numpy as np


def toeplitz_form(const double[:, ::1] L, const double[:, ::1] R,
                  const double complex[:, :, ::1] ahat, Py_ssize_t n_c,
                  const long long[:, ::1] index):
    cdef Py_ssize_t P = L.shape[0]
    cdef Py_ssize_t d = L.shape[1]
    cdef Py_ssize_t p, q, i, j, a, flat, diff
    cdef double complex acc, row
    out = np.empty((P, P), dtype=np.complex128)
    cdef double complex[:, ::1] H = out
    with nogil:
        for p in range(P):
            for q in range(P):
                flat = 0
                for a in range(d):
                    diff = (index[p, a] - index[q, a]) % n_c
                    if diff < 0:
                        diff = diff + n_c
                    flat = flat * n_c + diff
                acc = 0
                for i in range(d):
                    row = 0
                    for j in range(d):
                        row = row + ahat[flat, i, j] * R[q, j]
                    acc = acc + L[p, i] * row
                H[p, q] = acc
    return out
