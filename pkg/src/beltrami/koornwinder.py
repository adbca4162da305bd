"""Orthonormal Koornwinder polynomials on the reference triangle.

The reference triangle is T0 = {u >= 0, v >= 0, u + v <= 1}. Modes are
indexed by (m, n) with m + n <= p and ordered by total degree, then by m.
Every mode satisfies ``int_T0 K_i K_j du dv = delta_ij``.

Values and first/second partial derivatives are produced by differentiating
the three-term recurrences directly, never via monomials.
"""

from __future__ import annotations

import numpy as np


def n_modes(p: int) -> int:
    return (p + 1) * (p + 2) // 2


def mode_indices(p: int) -> list[tuple[int, int]]:
    """(m, n) pairs in storage order."""
    return [(m, d - m) for d in range(p + 1) for m in range(d + 1)]


def _scaled_legendre(p, u, v, nderiv):
    # q_m(u, v) = (1 - v)^m P_m((2u + v - 1)/(1 - v)), a polynomial in (u, v).
    # Returns array (k, p+1, N) with slots value, du, dv, duu, duv, dvv.
    N = u.shape[0]
    q = np.zeros(({0: 1, 1: 3, 2: 6}[nderiv], p + 1, N))
    w = 2.0 * u + v - 1.0
    s2 = (1.0 - v) ** 2
    ds2 = -2.0 * (1.0 - v)
    q[0, 0] = 1.0
    if p >= 1:
        q[0, 1] = w
        if nderiv >= 1:
            q[1, 1] = 2.0
            q[2, 1] = 1.0
    for m in range(1, p):
        a = (2 * m + 1) / (m + 1)
        b = m / (m + 1)
        qm, qp = q[:, m], q[:, m - 1]
        q[0, m + 1] = a * w * qm[0] - b * s2 * qp[0]
        if nderiv >= 1:
            q[1, m + 1] = a * (2.0 * qm[0] + w * qm[1]) - b * s2 * qp[1]
            q[2, m + 1] = a * (qm[0] + w * qm[2]) - b * (ds2 * qp[0] + s2 * qp[2])
        if nderiv >= 2:
            q[3, m + 1] = a * (4.0 * qm[1] + w * qm[3]) - b * s2 * qp[3]
            q[4, m + 1] = a * (2.0 * qm[2] + qm[1] + w * qm[4]) - b * (
                ds2 * qp[1] + s2 * qp[4]
            )
            q[5, m + 1] = a * (2.0 * qm[2] + w * qm[5]) - b * (
                2.0 * qp[0] + 2.0 * ds2 * qp[2] + s2 * qp[5]
            )
    return q


def _jacobi_alpha0(nmax, alpha, v, nderiv):
    # P_n^{(alpha, 0)}(2v - 1) and its first two v-derivatives, shape (3, nmax+1, N).
    N = v.shape[0]
    b = 2.0 * v - 1.0
    P = np.zeros((nderiv + 1, nmax + 1, N))
    P[0, 0] = 1.0
    if nmax >= 1:
        P[0, 1] = 0.5 * ((alpha + 2) * b + alpha)
        if nderiv >= 1:
            P[1, 1] = alpha + 2.0
    for n in range(2, nmax + 1):
        c = 2 * n + alpha
        a1 = 2.0 * n * (n + alpha) * (c - 2)
        a2 = (c - 1) * alpha * alpha
        a3 = (c - 2) * (c - 1) * c
        a4 = 2.0 * (n + alpha - 1) * (n - 1) * c
        lin = a2 + a3 * b
        P[0, n] = (lin * P[0, n - 1] - a4 * P[0, n - 2]) / a1
        if nderiv >= 1:
            P[1, n] = (2.0 * a3 * P[0, n - 1] + lin * P[1, n - 1] - a4 * P[1, n - 2]) / a1
        if nderiv >= 2:
            P[2, n] = (4.0 * a3 * P[1, n - 1] + lin * P[2, n - 1] - a4 * P[2, n - 2]) / a1
    return P


def evaluate(p: int, u, v, nderiv: int = 0) -> np.ndarray:
    """Evaluate all modes of degree <= p at points (u, v).

    Returns an array of shape ``(k, N, n_modes(p))`` where ``k`` is 1, 3 or 6
    for ``nderiv`` 0, 1, 2; the slots are (value, du, dv, duu, duv, dvv).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float)).ravel()
    v = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
    nslots = {0: 1, 1: 3, 2: 6}[nderiv]
    q = _scaled_legendre(p, u, v, nderiv)
    out = np.empty((nslots, n_modes(p), u.shape[0]))
    jac = [_jacobi_alpha0(p - m, 2 * m + 1, v, nderiv) for m in range(p + 1)]
    for col, (m, n) in enumerate(mode_indices(p)):
        P = jac[m][:, n]
        c = np.sqrt((2 * m + 1) * (2 * m + 2 * n + 2))
        qv = q[:, m]
        out[0, col] = c * qv[0] * P[0]
        if nderiv >= 1:
            out[1, col] = c * qv[1] * P[0]
            out[2, col] = c * (qv[2] * P[0] + qv[0] * P[1])
        if nderiv >= 2:
            out[3, col] = c * qv[3] * P[0]
            out[4, col] = c * (qv[4] * P[0] + qv[1] * P[1])
            out[5, col] = c * (qv[5] * P[0] + 2.0 * qv[2] * P[1] + qv[0] * P[2])
    return out.transpose(0, 2, 1)


def vandermonde(p: int, u, v) -> np.ndarray:
    """Matrix ``V[i, l] = K_l(u_i, v_i)``."""
    return evaluate(p, u, v)[0]
