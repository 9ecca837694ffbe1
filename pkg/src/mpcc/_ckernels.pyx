# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt
from libc.stdint cimport uint32_t, uint64_t, int64_t

cnp.import_array()

BACKEND = "cython"


def fisher_yates(const uint32_t[::1] words, Py_ssize_t n):
    cdef cnp.ndarray[int64_t, ndim=1] perm = np.arange(n, dtype=np.int64)
    cdef int64_t[::1] p = perm
    cdef Py_ssize_t nw = words.shape[0]
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t i
    cdef uint64_t bound, limit, v
    cdef int64_t j, tmp
    for i in range(n - 1, 0, -1):
        bound = <uint64_t>(i + 1)
        limit = 4294967296ULL - (4294967296ULL % bound)
        while True:
            if pos >= nw:
                return np.arange(n, dtype=np.int64), -1
            v = words[pos]
            pos += 1
            if v < limit:
                break
        j = <int64_t>(v % bound)
        tmp = p[i]
        p[i] = p[j]
        p[j] = tmp
    return perm, pos


def signed_levels(const uint32_t[::1] words, Py_ssize_t n, Py_ssize_t t):
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef uint64_t bound = <uint64_t>(2 * t)
    cdef uint64_t limit = 4294967296ULL - (4294967296ULL % bound)
    cdef Py_ssize_t nw = words.shape[0]
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t k
    cdef uint64_t v, u
    cdef double mag
    for k in range(n):
        while True:
            if pos >= nw:
                return np.zeros(n), -1
            v = words[pos]
            pos += 1
            if v < limit:
                break
        u = v % bound
        mag = <double>((u >> 1) + 1)
        o[k] = -mag if (u & 1) else mag
    return out, pos


def shrink_step(xh, z, u, double kappa):
    if not (z.flags.c_contiguous and u.flags.c_contiguous):
        raise ValueError("z and u must be C-contiguous")
    cdef const double[::1] xv = np.ascontiguousarray(xh, dtype=np.float64).reshape(-1)
    cdef double[::1] zv = z.reshape(-1)
    cdef double[::1] uv = u.reshape(-1)
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double w, t
    with nogil:
        for i in range(n):
            w = xv[i] + uv[i]
            t = fabs(w) - kappa
            if t > 0.0:
                zv[i] = t if w > 0.0 else -t
            else:
                zv[i] = 0.0
            uv[i] = (uv[i] + xv[i]) - zv[i]


def ball_multipliers(g, s2, eps, int max_iter=100, double tol=1e-13):
    g = np.asarray(g, dtype=np.float64)
    if g.ndim == 1:
        g = g[:, None]
    cdef const double[:, :] gv = g
    cdef const double[::1] sv = np.ascontiguousarray(s2, dtype=np.float64)
    cdef const double[::1] ev = np.ascontiguousarray(
        np.broadcast_to(np.asarray(eps, dtype=np.float64), (g.shape[1],)))
    cdef Py_ssize_t m = gv.shape[0], b = gv.shape[1]
    cdef cnp.ndarray[double, ndim=1] lam = np.zeros(b)
    cdef double[::1] lv = lam
    cdef Py_ssize_t c, k
    cdef int it
    cdef double la, q, dq, d, gk2, nr, phi, dphi, step, n0
    with nogil:
        for c in range(b):
            n0 = 0.0
            for k in range(m):
                n0 += gv[k, c] * gv[k, c]
            if sqrt(n0) <= ev[c]:
                continue
            la = 0.0
            for it in range(max_iter):
                q = 0.0
                dq = 0.0
                for k in range(m):
                    gk2 = gv[k, c] * gv[k, c]
                    d = 1.0 + la * sv[k]
                    q += gk2 / (d * d)
                    dq += -2.0 * gk2 * sv[k] / (d * d * d)
                nr = sqrt(q)
                phi = 1.0 / nr - 1.0 / ev[c]
                dphi = -0.5 * dq / (q * nr)
                step = -phi / dphi
                la = la + step
                if fabs(step) <= tol * (la if la > 1.0 else 1.0):
                    break
            lv[c] = la
    return lam
