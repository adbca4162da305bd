"""Compiled kernel-times-basis contraction over ragged (target, block) pairs.

The kernel formulas mirror :mod:`beltrami.kernels`; the tests check that the
two agree.
"""

from __future__ import annotations

import numba
import numpy as np

from .kernels import KernelKind

_CODES = {
    KernelKind.SINGLE: 0,
    KernelKind.DOUBLE: 1,
    KernelKind.SINGLE_PRIME: 2,
    KernelKind.DIFF_SUM: 3,
}


def kind_codes(kinds) -> np.ndarray:
    return np.array([_CODES[k] for k in kinds], dtype=np.int64)


@numba.njit(cache=True, fastmath=False)
def pair_integrals(codes, xt, nt, tgt, y, ny, WB, blk):
    """out[k, p, :] = sum_q kernel_k(xt[tgt[p]], y[blk[p], q]) WB[blk[p], q, :]."""
    nk = codes.shape[0]
    P = tgt.shape[0]
    nq = y.shape[1]
    nm = WB.shape[2]
    out = np.zeros((P, nk, nm))
    kv = np.empty(nk)
    c4 = 1.0 / (4.0 * np.pi)
    for p in range(P):
        i = tgt[p]
        c = blk[p]
        x0, x1, x2 = xt[i, 0], xt[i, 1], xt[i, 2]
        m0, m1, m2 = nt[i, 0], nt[i, 1], nt[i, 2]
        for q in range(nq):
            rx = x0 - y[c, q, 0]
            ry = x1 - y[c, q, 1]
            rz = x2 - y[c, q, 2]
            inv_r = 1.0 / np.sqrt(rx * rx + ry * ry + rz * rz)
            inv_r3 = inv_r * inv_r * inv_r
            n0, n1, n2 = ny[c, q, 0], ny[c, q, 1], ny[c, q, 2]
            nyr = n0 * rx + n1 * ry + n2 * rz
            nxr = m0 * rx + m1 * ry + m2 * rz
            for k in range(nk):
                code = codes[k]
                if code == 0:
                    val = inv_r
                elif code == 1:
                    val = nyr * inv_r3
                elif code == 2:
                    val = -nxr * inv_r3
                else:
                    d0, d1, d2 = m0 - n0, m1 - n1, m2 - n2
                    half = 0.5 * (d0 * d0 + d1 * d1 + d2 * d2)
                    val = (-half - 3.0 * (nyr - nxr) * nxr * inv_r * inv_r) * inv_r3
                kv[k] = val * c4
            for k in range(nk):
                a = kv[k]
                for m in range(nm):
                    out[p, k, m] += a * WB[c, q, m]
    return out.transpose(1, 0, 2)


@numba.njit(cache=True)
def scatter_add(out, rows, vals):
    """out[:, rows[p], :] += vals[:, p, :] with repeated rows allowed."""
    for k in range(vals.shape[0]):
        for p in range(rows.shape[0]):
            r = rows[p]
            for m in range(vals.shape[2]):
                out[k, r, m] += vals[k, p, m]
