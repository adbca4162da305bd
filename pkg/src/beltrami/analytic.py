"""Closed-form test problems: spherical harmonics, harmonic point-source
potentials with their manufactured right-hand sides, and Biot-Savart fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

FOUR_PI = 4.0 * np.pi
MAX_DEGREE = 20
SOURCE_SEED = 20140917


def _normalized_legendre(ell: int, m: int, x):
    # orthonormal P_l^m(x) (m >= 0) with the Condon-Shortley phase and 1/sqrt(4 pi)
    # folded in, so that Y = P e^{i m phi} is orthonormal on the unit sphere
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    pmm = np.full_like(x, 1.0 / np.sqrt(FOUR_PI))
    for k in range(1, m + 1):
        pmm = -np.sqrt((2 * k + 1) / (2 * k)) * s * pmm
    if ell == m:
        return pmm
    prev, cur = pmm, np.sqrt(2 * m + 3) * x * pmm
    for n in range(m + 2, ell + 1):
        a = np.sqrt((4 * n * n - 1) / (n * n - m * m))
        b = np.sqrt(((n - 1) ** 2 - m * m) / (4 * (n - 1) ** 2 - 1))
        prev, cur = cur, a * (x * cur - b * prev)
    return cur


def spherical_harmonic(ell: int, m: int, points) -> np.ndarray:
    """Orthonormal complex Y_l^m at points of the unit sphere, shape ``(...,)``."""
    if not (0 <= ell <= MAX_DEGREE and abs(m) <= ell):
        raise ValueError(f"unsupported spherical harmonic degree/order ({ell}, {m})")
    pts = np.asarray(points, dtype=float)
    r = np.linalg.norm(pts, axis=-1)
    if np.any(np.abs(r - 1.0) > 1e-10):
        raise ValueError("spherical_harmonic expects points on the unit sphere")
    phi = np.arctan2(pts[..., 1], pts[..., 0])
    P = _normalized_legendre(ell, abs(m), np.clip(pts[..., 2] / r, -1.0, 1.0))
    Y = P * np.exp(1j * abs(m) * phi)
    if m < 0:
        Y = (-1) ** m * np.conj(Y)
    return Y


def sphere_harmonic_on_mesh(mesh, ell: int, m: int, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Y_l^m sampled at mesh nodes, radially projected to the unit sphere."""
    x = mesh.positions - np.asarray(center, dtype=float)
    return spherical_harmonic(ell, m, x / np.linalg.norm(x, axis=1, keepdims=True))


@dataclass(frozen=True)
class VolumeFunction:
    """g, its gradient and Hessian as vectorised callables on ``(N, 3)`` points."""

    value: Callable
    gradient: Callable
    hessian: Callable
    laplacian: Callable | None = None

    def laplace(self, x):
        if self.laplacian is not None:
            return self.laplacian(x)
        return np.trace(self.hessian(x), axis1=-2, axis2=-1)

    def scaled(self, c: float) -> "VolumeFunction":
        lap = None if self.laplacian is None else (lambda x: c * self.laplacian(x))
        return VolumeFunction(
            lambda x: c * self.value(x),
            lambda x: c * self.gradient(x),
            lambda x: c * self.hessian(x),
            lap,
        )


@dataclass(frozen=True)
class PointSources:
    """g(x) = C sum_j 1 / (4 pi |x - x_j|), harmonic away from the sources."""

    points: np.ndarray
    strength: float = 1.0

    def _r(self, x):
        x = np.asarray(x, dtype=float)
        return x[..., None, :] - self.points  # (..., n_src, 3)

    def value(self, x):
        d = np.linalg.norm(self._r(x), axis=-1)
        return self.strength * (1.0 / d).sum(-1) / FOUR_PI

    def gradient(self, x):
        r = self._r(x)
        d = np.linalg.norm(r, axis=-1)
        return -self.strength * (r / d[..., None] ** 3).sum(-2) / FOUR_PI

    def hessian(self, x):
        r = self._r(x)
        d = np.linalg.norm(r, axis=-1)[..., None, None]
        eye = np.eye(3)
        rr = r[..., :, None] * r[..., None, :]
        return self.strength * (3.0 * rr / d**5 - eye / d**3).sum(-3) / FOUR_PI

    def volume_function(self) -> VolumeFunction:
        return VolumeFunction(
            self.value, self.gradient, self.hessian, lambda x: np.zeros(np.shape(x)[:-1])
        )


def random_sources(seed: int = SOURCE_SEED, n: int = 10, radius: float = 7.0) -> np.ndarray:
    """``n`` points uniformly distributed on the sphere of the given radius."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    return radius * d / np.linalg.norm(d, axis=1, keepdims=True)


def _surface_distance(mesh, pts):
    X = mesh.positions
    return min(np.linalg.norm(X - p, axis=1).min() for p in pts)


def manufactured_rhs(mesh, vol):
    """f = Lap g - 2 H dg/dn - d2g/dn2 on the mesh, and the mean-zero trace of g.

    ``vol`` is a :class:`VolumeFunction` or :class:`PointSources`.
    """
    if isinstance(vol, PointSources):
        if _surface_distance(mesh, vol.points) < 1e-3:
            raise ValueError("point source lies within 1e-3 of the surface")
        vol = vol.volume_function()
    X, n, H = mesh.positions, mesh.normals, mesh.curvature
    dn = np.einsum("ij,ij->i", vol.gradient(X), n)
    dnn = np.einsum("ij,ijk,ik->i", n, vol.hessian(X), n)
    f = vol.laplace(X) - 2.0 * H * dn - dnn
    g = vol.value(X)
    w = mesh.weights
    psi = g - (w @ g) / w.sum()
    return f, psi


def torus_point_sources(mesh, seed: int = SOURCE_SEED, n: int = 10, radius: float = 7.0):
    """Point sources with strength chosen so that the manufactured f has unit norm."""
    unit = PointSources(random_sources(seed, n, radius))
    f, _ = manufactured_rhs(mesh, unit)
    norm = np.sqrt(mesh.weights @ (f * f))
    return PointSources(unit.points, 1.0 / norm)


def biot_savart(L, x0, x) -> np.ndarray:
    """B(x) = L x (x - x0) / |x - x0|^3 for a point current element at x0."""
    L = np.asarray(L, dtype=float)
    r = np.asarray(x, dtype=float) - np.asarray(x0, dtype=float)
    d = np.linalg.norm(r, axis=-1, keepdims=True)
    if np.any(d == 0.0):
        raise ZeroDivisionError("Biot-Savart field evaluated at the source point")
    return np.cross(L, r) / d**3


def biot_savart_jacobian(L, x0, x) -> np.ndarray:
    """J[..., i, j] = dB_i / dx_j."""
    L = np.asarray(L, dtype=float)
    r = np.asarray(x, dtype=float) - np.asarray(x0, dtype=float)
    d = np.linalg.norm(r, axis=-1)[..., None, None]
    # column j of d(L x r)/dx is L x e_j
    LxE = np.cross(L, np.eye(3)).T  # [i, j] = (L x e_j)_i
    LxR = np.cross(L, r)
    return LxE / d**3 - 3.0 * LxR[..., :, None] * r[..., None, :] / d**5


@dataclass(frozen=True)
class VectorField:
    """Volume vector field V with Jacobian ``J[..., i, j] = dV_i/dx_j``."""

    value: Callable
    jacobian: Callable

    @classmethod
    def biot_savart(cls, L, x0, scale: float = 1.0) -> "VectorField":
        return cls(
            lambda x: scale * biot_savart(L, x0, x),
            lambda x: scale * biot_savart_jacobian(L, x0, x),
        )

    @classmethod
    def constant(cls, c) -> "VectorField":
        c = np.asarray(c, dtype=float)
        return cls(
            lambda x: np.broadcast_to(c, np.shape(x)).copy(),
            lambda x: np.zeros(np.shape(x)[:-1] + (3, 3)),
        )


def tangential_part(mesh, V: np.ndarray) -> np.ndarray:
    """F = -n x (n x V), the tangential projection of nodal vectors."""
    n = mesh.normals
    return V - np.einsum("ij,ij->i", n, V)[:, None] * n


def tangential_rhs(mesh, field: VectorField):
    """Surface divergences of F = -n x n x V and of n x F from volume data.

    div F     = div V - 2 H (n.V) - n.J.n
    div n x F = -n . curl V
    """
    X, n, H = mesh.positions, mesh.normals, mesh.curvature
    V = field.value(X)
    J = field.jacobian(X)
    div_V = np.trace(J, axis1=-2, axis2=-1)
    div_F = div_V - 2.0 * H * np.einsum("ij,ij->i", n, V) - np.einsum("ij,ijk,ik->i", n, J, n)
    curl = np.stack(
        [J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], axis=1
    )
    div_nxF = -np.einsum("ij,ij->i", n, curl)
    return div_F, div_nxF
