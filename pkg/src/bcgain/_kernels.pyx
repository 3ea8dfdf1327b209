# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled rollout kernel; mirrors ``_fallback.simulate`` operation for operation."""

from libc.math cimport sqrt, log, cos, sin
from libc.stdint cimport uint32_t, uint64_t
from libc.stdlib cimport malloc, free

cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0

cdef enum:
    MAXD = 64


cdef inline void philox4x32(uint32_t* ctr, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3]
    cdef int i
    for i in range(10):
        if i:
            k0 = k0 + <uint32_t>0x9E3779B9UL
            k1 = k1 + <uint32_t>0xBB67AE85UL
        p0 = <uint64_t>c0 * <uint64_t>0xD2511F53UL
        p1 = <uint64_t>c2 * <uint64_t>0xCD9E8D57UL
        c0 = <uint32_t>(p1 >> 32) ^ c1 ^ k0
        c1 = <uint32_t>p1
        c2 = <uint32_t>(p0 >> 32) ^ c3 ^ k1
        c3 = <uint32_t>p0
    ctr[0] = c0
    ctr[1] = c1
    ctr[2] = c2
    ctr[3] = c3


cdef inline double u53(uint32_t hi, uint32_t lo) noexcept nogil:
    return (<double>(hi >> 5) * 67108864.0 + <double>(lo >> 6)) * INV_2_53


cdef void draw(double* z, int width, int kind, uint64_t index, uint32_t t,
               uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint32_t ctr[4]
    cdef int blk, nblocks = (width + 1) // 2
    cdef double u1, u2, rad, ang, z0, z1
    for blk in range(nblocks):
        ctr[0] = <uint32_t>blk
        ctr[1] = t
        ctr[2] = <uint32_t>index
        ctr[3] = <uint32_t>(index >> 32)
        philox4x32(ctr, k0, k1)
        if kind == 0:
            u1 = 1.0 - u53(ctr[0], ctr[1])
            u2 = u53(ctr[2], ctr[3])
            rad = sqrt(-2.0 * log(u1))
            ang = TWO_PI * u2
            z0 = rad * cos(ang)
            z1 = rad * sin(ang)
        elif kind == 1:
            z0 = 2.0 * u53(ctr[0], ctr[1]) - 1.0
            z1 = 2.0 * u53(ctr[2], ctr[3]) - 1.0
        else:
            z0 = 1.0 if (ctr[0] >> 31) else -1.0
            z1 = 1.0 if (ctr[2] >> 31) else -1.0
        z[2 * blk] = z0
        if 2 * blk + 1 < width:
            z[2 * blk + 1] = z1


cdef void run(const double[:, ::1] a, const double[:, ::1] b, const double[:, ::1] c,
              const double[:, ::1] lfac, int kind, uint32_t k0, uint32_t k1,
              int horizon, Py_ssize_t start, Py_ssize_t stop,
              double[:, ::1] norms, bint keep_norms,
              int snap_t, double[:, ::1] snap) noexcept nogil:
    cdef int d = a.shape[0], k = b.shape[1], n = c.shape[0]
    cdef double x[MAXD]
    cdef double xn[MAXD]
    cdef double z[MAXD + 1]
    cdef double xi[MAXD]
    cdef double e[MAXD]
    cdef double acc, sq
    cdef Py_ssize_t r, row
    cdef int t, i, j
    for r in range(start, stop):
        row = r - start
        for i in range(d):
            x[i] = 0.0
        if keep_norms:
            norms[row, 0] = 0.0
        if snap_t == 0:
            for i in range(n):
                snap[row, i] = 0.0
        for t in range(horizon):
            draw(z, k, kind, <uint64_t>r, <uint32_t>t, k0, k1)
            for i in range(k):
                acc = 0.0
                for j in range(k):
                    acc = acc + lfac[i, j] * z[j]
                xi[i] = acc
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc = acc + a[i, j] * x[j]
                for j in range(k):
                    acc = acc + b[i, j] * xi[j]
                xn[i] = acc
            for i in range(d):
                x[i] = xn[i]
            if not keep_norms and snap_t != t + 1:
                continue
            for i in range(n):
                acc = 0.0
                for j in range(d):
                    acc = acc + c[i, j] * x[j]
                e[i] = acc
            if keep_norms:
                sq = 0.0
                for i in range(n):
                    sq = sq + e[i] * e[i]
                norms[row, t + 1] = sqrt(sq)
            if snap_t == t + 1:
                for i in range(n):
                    snap[row, i] = e[i]


MAX_STATE = MAXD


def simulate(a, b, c, lfac, int kind, seed, int horizon, Py_ssize_t start, Py_ssize_t stop,
             norms_out=None, int snap_t=-1, snap_out=None, chunk=None):
    """Same contract as ``bcgain._fallback.simulate``; releases the GIL."""
    cdef const double[:, ::1] av = a
    cdef const double[:, ::1] bv = b
    cdef const double[:, ::1] cv = c
    cdef const double[:, ::1] lv = lfac
    cdef double[:, ::1] nv
    cdef double[:, ::1] sv
    cdef double dummy[1][1]
    cdef bint keep = norms_out is not None
    cdef uint64_t s = <uint64_t>int(seed)
    if av.shape[0] > MAXD or bv.shape[1] > MAXD or cv.shape[0] > MAXD:
        raise ValueError(f"state dimension above {MAXD} not supported")
    import numpy as np
    nv = norms_out if keep else np.zeros((1, 1))
    sv = snap_out if snap_t >= 0 else np.zeros((1, 1))
    with nogil:
        run(av, bv, cv, lv, kind, <uint32_t>s, <uint32_t>(s >> 32),
            horizon, start, stop, nv, keep, snap_t, sv)
