# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Fock-propagation kernels.

Mirrors ``_fock_py`` exactly; that module documents the indexing.  The
compiled two-mode step walks the configuration space once, without
materializing index arrays.
"""

import numpy as np
cimport numpy as cnp

from ._fock_py import binomial_table

cnp.import_array()

ctypedef long long i64

cdef enum:
    MAXK = 32
    MAXN = 4096


cdef inline i64 _rank(const int* m, int s, int K, const i64[:, :] binom) noexcept nogil:
    cdef i64 r = 0
    cdef int i, j, rem = s
    for i in range(K - 1):
        j = K - 1 - i
        r += binom[rem + j, j] - binom[rem - m[i] + j, j]
        rem -= m[i]
    return r


cdef inline bint _next(int* m, int K) noexcept nogil:
    cdef int L = K - 1
    cdef int tail
    while L >= 0 and m[L] == 0:
        L -= 1
    if L <= 0:
        return False
    tail = m[L] - 1
    m[L - 1] += 1
    m[L] = 0
    m[K - 1] = tail
    return True


def apply_two_mode(state, int s, int K, int p, int q, const double complex[:] rep_flat, const i64[:] rep_off):
    """Apply a two-mode unitary on rows ``(p, q)``; see ``_fock_py.apply_two_mode``."""
    arr = np.ascontiguousarray(state, dtype=np.complex128)
    one_d = arr.ndim == 1
    cdef const double complex[:, :] old = arr.reshape(arr.shape[0], -1)
    cdef int B = old.shape[1]
    out_arr = np.empty((old.shape[0], B), dtype=np.complex128)
    cdef double complex[:, :] new = out_arr
    cdef const i64[:, :] binom = binomial_table(s, K)
    cdef int m[MAXK]
    cdef i64 idx[MAXN]
    cdef double xr[MAXN]
    cdef double xi[MAXN]
    cdef int i, j, k, n, b
    cdef i64 off, row
    cdef double ar, ai, rr, ri
    if K > MAXK or s >= MAXN:
        raise ValueError("configuration too large for the compiled kernel")
    # split real and imaginary parts: C complex multiplication is not vectorized
    cdef const double[:] rep = np.ascontiguousarray(rep_flat).view(np.float64)
    with nogil:
        for i in range(K):
            m[i] = 0
        m[K - 1] = s
        while True:
            if m[p] == 0:
                n = m[q]
                for j in range(n + 1):
                    m[p] = j
                    m[q] = n - j
                    idx[j] = _rank(m, s, K, binom)
                m[p] = 0
                m[q] = n
                off = 2 * rep_off[n]
                for b in range(B):
                    for j in range(n + 1):
                        xr[j] = old[idx[j], b].real
                        xi[j] = old[idx[j], b].imag
                    for k in range(n + 1):
                        ar = 0.0
                        ai = 0.0
                        row = off + 2 * k * (n + 1)
                        for j in range(n + 1):
                            rr = rep[row + 2 * j]
                            ri = rep[row + 2 * j + 1]
                            ar = ar + rr * xr[j] - ri * xi[j]
                            ai = ai + rr * xi[j] + ri * xr[j]
                        new[idx[k], b] = ar + 1j * ai
            if not _next(m, K):
                break
    return out_arr.reshape(arr.shape) if not one_d else out_arr[:, 0]


def detector_probs(const double complex[:] state, int s, const int[:] row_det, int M):
    """Aggregate ``|amplitude|^2`` onto detector counts; loss rows have ``row_det < 0``."""
    cdef int K = row_det.shape[0]
    shape = (s + 1,) * M
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(int(np.prod(shape)), dtype=np.float64)
    cdef double[:] out = out_arr
    cdef int m[MAXK]
    cdef int cnt[MAXK]
    cdef int i, d
    cdef i64 idx = 0, lin
    cdef double complex a
    if K > MAXK or M > MAXK:
        raise ValueError("too many network rows")
    with nogil:
        for i in range(K):
            m[i] = 0
        m[K - 1] = s
        while True:
            for d in range(M):
                cnt[d] = 0
            for i in range(K):
                if row_det[i] >= 0:
                    cnt[row_det[i]] += m[i]
            lin = 0
            for d in range(M):
                lin = lin * (s + 1) + cnt[d]
            a = state[idx]
            out[lin] += a.real * a.real + a.imag * a.imag
            idx += 1
            if not _next(m, K):
                break
    return out_arr.reshape(shape)
