"""Laplace Green's function G = 1/(4 pi |x - y|) and its normal derivatives.

Kernels are written for a target ``x`` with unit normal ``n_x`` and a source
``y`` with unit normal ``n_y``:

* ``SINGLE``        G
* ``DOUBLE``        dG/dn_y      =  n_y . (x - y) / (4 pi r^3)
* ``SINGLE_PRIME``  dG/dn_x      = -n_x . (x - y) / (4 pi r^3)
* ``DIFF_SUM``      d/dn_x (dG/dn_x + dG/dn_y), the kernel of S'' + D'

For DIFF_SUM the two O(r^-3) pieces are combined before differentiating,

    4 pi K = (n_x . n_y - 1) / r^3 - 3 ((n_y - n_x) . r)(n_x . r) / r^5,

and ``n_x . n_y - 1`` is formed as ``-|n_x - n_y|^2 / 2`` so no cancellation
happens near the diagonal. On a smooth surface every factor in the numerators
vanishes to second order, leaving an O(1/r) kernel.
"""

from __future__ import annotations

import enum

import numpy as np

FOUR_PI = 4.0 * np.pi


class KernelKind(enum.Enum):
    SINGLE = "S"
    DOUBLE = "D"
    SINGLE_PRIME = "S'"
    DIFF_SUM = "S''+D'"

    @property
    def needs_target_normal(self) -> bool:
        return self in (KernelKind.SINGLE_PRIME, KernelKind.DIFF_SUM)


ALL_KINDS = tuple(KernelKind)


def eval_kernel(kind: KernelKind, x, n_x, y, n_y) -> float:
    """Kernel value for a single point pair; raises on coincident points."""
    x, n_x, y, n_y = (np.asarray(a, dtype=float) for a in (x, n_x, y, n_y))
    r = x - y
    r2 = float(r @ r)
    if r2 == 0.0:
        raise ZeroDivisionError("kernel evaluated at coincident points")
    return float(kernel_values([kind], x, n_x, y, n_y)[0])


def kernel_values(kinds, x, n_x, y, n_y) -> np.ndarray:
    """Vectorised kernels over broadcast point sets.

    ``x``, ``n_x`` have shape ``(..., 3)`` and broadcast against ``y``,
    ``n_y``. Returns ``(len(kinds), *broadcast_shape)``.
    """
    rx = x[..., 0] - y[..., 0]
    ry = x[..., 1] - y[..., 1]
    rz = x[..., 2] - y[..., 2]
    inv_r = 1.0 / np.sqrt(rx * rx + ry * ry + rz * rz)
    inv_r3 = inv_r * inv_r * inv_r
    out = []
    nxr = nyr = None
    for kind in kinds:
        if kind is KernelKind.SINGLE:
            out.append(inv_r / FOUR_PI)
            continue
        if kind is KernelKind.DOUBLE or kind is KernelKind.DIFF_SUM:
            if nyr is None:
                nyr = n_y[..., 0] * rx + n_y[..., 1] * ry + n_y[..., 2] * rz
        if kind is KernelKind.SINGLE_PRIME or kind is KernelKind.DIFF_SUM:
            if nxr is None:
                nxr = n_x[..., 0] * rx + n_x[..., 1] * ry + n_x[..., 2] * rz
        if kind is KernelKind.DOUBLE:
            out.append(nyr * inv_r3 / FOUR_PI)
        elif kind is KernelKind.SINGLE_PRIME:
            out.append(-nxr * inv_r3 / FOUR_PI)
        else:
            dn = n_x - n_y
            half_dn2 = 0.5 * np.einsum("...i,...i->...", dn, dn)
            out.append(
                (-half_dn2 - 3.0 * (nyr - nxr) * nxr * inv_r * inv_r) * inv_r3 / FOUR_PI
            )
    return np.stack(np.broadcast_arrays(*out))


def naive_diff_sum(x, n_x, y, n_y) -> float:
    """d2G/dn_x^2 + d2G/(dn_x dn_y) evaluated term by term (reference form)."""
    r = np.asarray(x, float) - np.asarray(y, float)
    R = np.linalg.norm(r)
    d2_nx = -(1.0 / R**3 - 3.0 * (n_x @ r) ** 2 / R**5) / FOUR_PI
    d2_nxny = ((n_x @ n_y) / R**3 - 3.0 * (n_x @ r) * (n_y @ r) / R**5) / FOUR_PI
    return float(d2_nx + d2_nxny)
