"""Vectorized NumPy rollout kernel.

Used when the compiled ``_kernels`` extension is unavailable. It follows the
same random stream layout and the same floating-point operation order as
the compiled kernel, so both produce the same ensembles (up to last-bit
differences in ``log``/``cos``/``sin`` between libm and NumPy).

Random stream layout: Philox4x32-10 keyed by the 64-bit seed, with counter
words ``(block, t, index_lo, index_hi)``. Each block yields two variates,
so an input of width ``k`` uses ``ceil(k / 2)`` blocks per step.
"""

import numpy as np

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)
MASK32 = np.uint64(0xFFFFFFFF)
SHIFT32 = np.uint64(32)
TWO_PI = 6.283185307179586
INV_2_53 = 1.0 / 9007199254740992.0

GAUSSIAN, UNIFORM, RADEMACHER = 0, 1, 2


def philox4x32(c0, c1, c2, c3, k0, k1, rounds=10):
    """Philox4x32 block function on broadcastable uint arrays.

    Returns the four 32-bit output words as uint64 arrays.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & MASK32 for c in (c0, c1, c2, c3))
    k0 = np.asarray(k0, dtype=np.uint64) & MASK32
    k1 = np.asarray(k1, dtype=np.uint64) & MASK32
    for i in range(rounds):
        if i:
            k0 = (k0 + PHILOX_W0) & MASK32
            k1 = (k1 + PHILOX_W1) & MASK32
        p0 = c0 * PHILOX_M0
        p1 = c2 * PHILOX_M1
        c0, c1, c2, c3 = (
            (p1 >> SHIFT32) ^ c1 ^ k0,
            p1 & MASK32,
            (p0 >> SHIFT32) ^ c3 ^ k1,
            p0 & MASK32,
        )
    return c0, c1, c2, c3


def _u53(hi, lo):
    return ((hi >> np.uint64(5)).astype(np.float64) * 67108864.0
            + (lo >> np.uint64(6)).astype(np.float64)) * INV_2_53


def base_variates(seed, indices, horizon, width, kind):
    """Standardized variates, shape ``(len(indices), horizon, width)``."""
    indices = np.asarray(indices, dtype=np.uint64)
    seed = int(seed)
    k0 = np.uint64(seed & 0xFFFFFFFF)
    k1 = np.uint64((seed >> 32) & 0xFFFFFFFF)
    nblocks = (width + 1) // 2
    idx = indices[:, None, None]
    t = np.arange(horizon, dtype=np.uint64)[None, :, None]
    blk = np.arange(nblocks, dtype=np.uint64)[None, None, :]
    w0, w1, w2, w3 = philox4x32(blk, t, idx & MASK32, idx >> SHIFT32, k0, k1)
    if kind == GAUSSIAN:
        u1 = 1.0 - _u53(w0, w1)
        u2 = _u53(w2, w3)
        rad = np.sqrt(-2.0 * np.log(u1))
        ang = TWO_PI * u2
        z0 = rad * np.cos(ang)
        z1 = rad * np.sin(ang)
    elif kind == UNIFORM:
        z0 = 2.0 * _u53(w0, w1) - 1.0
        z1 = 2.0 * _u53(w2, w3) - 1.0
    elif kind == RADEMACHER:
        z0 = np.where((w0 >> np.uint64(31)) != 0, 1.0, -1.0)
        z1 = np.where((w2 >> np.uint64(31)) != 0, 1.0, -1.0)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    out = np.empty(z0.shape[:2] + (2 * nblocks,))
    out[..., 0::2] = z0
    out[..., 1::2] = z1
    return out[..., :width]


def _matvec(m, v):
    """``m @ v`` for a batch ``v`` of shape (N, k), summed left to right."""
    out = np.empty((v.shape[0], m.shape[0]))
    for i in range(m.shape[0]):
        acc = np.zeros(v.shape[0])
        for j in range(m.shape[1]):
            acc = acc + m[i, j] * v[:, j]
        out[:, i] = acc
    return out


def noise_batch(lfac, seed, indices, horizon, kind):
    """Action errors ``L z`` for each rollout and step, shape (N, T, k)."""
    k = lfac.shape[0]
    z = base_variates(seed, indices, horizon, k, kind)
    xi = np.zeros_like(z)
    for i in range(k):
        acc = np.zeros(z.shape[:2])
        for j in range(k):
            acc = acc + lfac[i, j] * z[:, :, j]
        xi[:, :, i] = acc
    return xi


def simulate(a, b, c, lfac, kind, seed, horizon, start, stop,
             norms_out=None, snap_t=-1, snap_out=None, chunk=32768):
    """Fill ``norms_out[r, t] = ||e_t||`` and ``snap_out[r] = e_{snap_t}``
    for rollouts ``start <= index < stop``."""
    d = a.shape[0]
    n = c.shape[0]
    for lo in range(start, stop, chunk):
        hi = min(lo + chunk, stop)
        idx = np.arange(lo, hi, dtype=np.uint64)
        xi = noise_batch(lfac, seed, idx, horizon, kind)
        x = np.zeros((hi - lo, d))
        rows = slice(lo - start, hi - start)
        if norms_out is not None:
            norms_out[rows, 0] = 0.0
        if snap_t == 0:
            snap_out[rows] = 0.0
        for t in range(horizon):
            xn = np.empty_like(x)
            for i in range(d):
                acc = np.zeros(hi - lo)
                for j in range(d):
                    acc = acc + a[i, j] * x[:, j]
                for j in range(b.shape[1]):
                    acc = acc + b[i, j] * xi[:, t, j]
                xn[:, i] = acc
            x = xn
            if norms_out is None and snap_t != t + 1:
                continue
            e = _matvec(c, x)
            if norms_out is not None:
                sq = np.zeros(hi - lo)
                for i in range(n):
                    sq = sq + e[:, i] * e[:, i]
                norms_out[rows, t + 1] = np.sqrt(sq)
            if snap_t == t + 1:
                snap_out[rows] = e
