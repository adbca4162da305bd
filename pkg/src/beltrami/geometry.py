"""Surface charts and the differential geometry built on them.

A chart maps the reference triangle T0 = {u, v >= 0, u + v <= 1} onto one
curvilinear patch of the surface. Everything downstream (kernels, quadrature,
manufactured solutions) only needs what :func:`evaluate_jet` returns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import koornwinder

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class DegenerateElementError(ValueError):
    pass


class ContractViolation(ValueError):
    pass


class TriangleChart:
    """Base class for a smooth map T0 -> R^3.

    Subclasses implement :meth:`derivatives`, returning position and all first
    and second partials as arrays of shape ``(N, 3)``.
    """

    kind = "analytic"
    label: str = "?"

    def derivatives(self, u, v):
        raise NotImplementedError

    def first(self, u, v):
        """Position and first partials only."""
        return self.derivatives(u, v)[:3]

    def __call__(self, u, v):
        return self.derivatives(u, v)[0]

    @property
    def vertices(self) -> np.ndarray:
        return self(REFERENCE_VERTICES[:, 0], REFERENCE_VERTICES[:, 1])


class PolynomialChart(TriangleChart):
    """Chart whose coordinates are Koornwinder expansions of degree ``order``.

    ``coeffs`` has shape ``(3, n_modes(order))``.
    """

    kind = "polynomial"

    def __init__(self, coeffs, order: int, label: str = "?"):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (3, koornwinder.n_modes(order)):
            raise ValueError(
                f"expected coefficients of shape (3, {koornwinder.n_modes(order)}), "
                f"got {coeffs.shape}"
            )
        self.coeffs = coeffs
        self.order = order
        self.label = label

    @classmethod
    def from_samples(cls, uv, points, order: int, label: str = "?"):
        """Least-squares fit of the chart to nodal images ``points`` at ``uv``.

        Returns the chart and the max residual at the samples.
        """
        uv = np.asarray(uv, dtype=float)
        points = np.asarray(points, dtype=float)
        V = koornwinder.vandermonde(order, uv[:, 0], uv[:, 1])
        coeffs, *_ = np.linalg.lstsq(V, points, rcond=None)
        resid = np.abs(V @ coeffs - points).max() if len(points) else 0.0
        return cls(coeffs.T, order, label), resid

    @classmethod
    def flat(cls, a, b, c, label: str = "?"):
        chart, _ = cls.from_samples(REFERENCE_VERTICES, np.array([a, b, c]), 1, label)
        return chart

    def derivatives(self, u, v):
        E = koornwinder.evaluate(self.order, u, v, nderiv=2)
        return tuple(E[k] @ self.coeffs.T for k in range(6))

    def first(self, u, v):
        E = koornwinder.evaluate(self.order, u, v, nderiv=1)
        return tuple(E[k] @ self.coeffs.T for k in range(3))


class AnalyticChart(TriangleChart):
    """Chart backed by a user function ``func(u, v) -> (x, xu, xv, xuu, xuv, xvv)``."""

    def __init__(self, func, label: str = "?"):
        self.func = func
        self.label = label

    def derivatives(self, u, v):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return self.func(u, v)


class ProjectedSphereChart(TriangleChart):
    """Flat triangle (a, b, c) radially projected onto a sphere.

    ``x = center + radius * P / |P|`` with ``P = a + u (b - a) + v (c - a)``
    taken relative to ``center``.
    """

    def __init__(self, a, b, c, radius: float = 1.0, center=(0.0, 0.0, 0.0), label="?"):
        self.center = np.asarray(center, dtype=float)
        self.a = np.asarray(a, dtype=float) - self.center
        self.pu = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        self.pv = np.asarray(c, dtype=float) - np.asarray(a, dtype=float)
        self.radius = float(radius)
        self.label = label

    def _first(self, u, v):
        u = np.atleast_1d(np.asarray(u, dtype=float))[:, None]
        v = np.atleast_1d(np.asarray(v, dtype=float))[:, None]
        P = self.a + u * self.pu + v * self.pv
        s = np.linalg.norm(P, axis=1, keepdims=True)
        x = P / s
        su = x @ self.pu
        sv = x @ self.pv
        xu = (self.pu - x * su[:, None]) / s
        xv = (self.pv - x * sv[:, None]) / s
        return s, x, xu, xv, su, sv

    def first(self, u, v):
        _, x, xu, xv, _, _ = self._first(u, v)
        R = self.radius
        return self.center + R * x, R * xu, R * xv

    def derivatives(self, u, v):
        s, x, xu, xv, su, sv = self._first(u, v)

        def second(xa, xb, pa, sb):
            # d/db of (P_a - x (x.P_a)) / s with P_ab = 0
            xpa = x @ pa
            return (-xb * xpa[:, None] - x * (xb @ pa)[:, None]) / s - xa * sb[:, None] / s

        xuu = second(xu, xu, self.pu, su)
        xuv = second(xu, xv, self.pu, sv)
        xvv = second(xv, xv, self.pv, sv)
        R = self.radius
        return (self.center + R * x, R * xu, R * xv, R * xuu, R * xuv, R * xvv)


class TorusChart(TriangleChart):
    """Triangle in the (a, b) angle plane of the torus

        x = ((R + r cos a) cos b, (R + r cos a) sin b, r sin a).

    ``param_vertices`` (3 x 2) gives the angle-plane image of the reference
    vertices; the chart is affine in angle space.
    """

    def __init__(self, param_vertices, R: float = 3.0, r: float = 1.0, label="?"):
        pv = np.asarray(param_vertices, dtype=float)
        self.p0 = pv[0]
        self.J = np.column_stack([pv[1] - pv[0], pv[2] - pv[0]])  # d(a,b)/d(u,v)
        self.R = float(R)
        self.r = float(r)
        self.label = label

    def derivatives(self, u, v):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        a = self.p0[0] + self.J[0, 0] * u + self.J[0, 1] * v
        b = self.p0[1] + self.J[1, 0] * u + self.J[1, 1] * v
        R, r = self.R, self.r
        ca, sa, cb, sb = np.cos(a), np.sin(a), np.cos(b), np.sin(b)
        rho = R + r * ca
        zero = np.zeros_like(a)
        x = np.stack([rho * cb, rho * sb, r * sa], axis=1)
        xa = np.stack([-r * sa * cb, -r * sa * sb, r * ca], axis=1)
        xb = np.stack([-rho * sb, rho * cb, zero], axis=1)
        xaa = np.stack([-r * ca * cb, -r * ca * sb, -r * sa], axis=1)
        xab = np.stack([r * sa * sb, -r * sa * cb, zero], axis=1)
        xbb = np.stack([-rho * cb, -rho * sb, zero], axis=1)
        (au, av), (bu, bv) = self.J
        xu = au * xa + bu * xb
        xv = av * xa + bv * xb
        xuu = au * au * xaa + 2 * au * bu * xab + bu * bu * xbb
        xuv = au * av * xaa + (au * bv + av * bu) * xab + bu * bv * xbb
        xvv = av * av * xaa + 2 * av * bv * xab + bv * bv * xbb
        return x, xu, xv, xuu, xuv, xvv


@dataclass(frozen=True)
class GeometryJet:
    """Pointwise geometry; every field carries a leading batch shape."""

    x: np.ndarray
    xu: np.ndarray
    xv: np.ndarray
    xuu: np.ndarray
    xuv: np.ndarray
    xvv: np.ndarray
    normal: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    sqrt_g: np.ndarray
    H: np.ndarray

    def reshape(self, *shape):
        def rs(a, tail):
            return a.reshape(tuple(shape) + tuple(tail))

        return GeometryJet(
            *(rs(getattr(self, f), (3,)) for f in ("x", "xu", "xv", "xuu", "xuv", "xvv", "normal")),
            g=rs(self.g, (2, 2)),
            g_inv=rs(self.g_inv, (2, 2)),
            sqrt_g=rs(self.sqrt_g, ()),
            H=rs(self.H, ()),
        )


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def mean_curvature(jet: GeometryJet) -> np.ndarray:
    """H = -tr(II g^-1) / 2, positive on a sphere with outward normal."""
    n = jet.normal
    L, M, N = _dot(jet.xuu, n), _dot(jet.xuv, n), _dot(jet.xvv, n)
    gi = jet.g_inv
    return -0.5 * (L * gi[..., 0, 0] + 2.0 * M * gi[..., 0, 1] + N * gi[..., 1, 1])


def jet_from_derivatives(x, xu, xv, xuu, xuv, xvv, label="?") -> GeometryJet:
    cross = np.cross(xu, xv)
    area = np.linalg.norm(cross, axis=-1)
    scale = np.linalg.norm(xu, axis=-1) * np.linalg.norm(xv, axis=-1)
    bad = ~(area > 1e-14 * scale) | (scale == 0)
    if np.any(bad):
        raise DegenerateElementError(f"degenerate chart on triangle {label}")
    n = cross / area[..., None]
    guu, guv, gvv = _dot(xu, xu), _dot(xu, xv), _dot(xv, xv)
    det = guu * gvv - guv * guv
    g = np.stack([np.stack([guu, guv], -1), np.stack([guv, gvv], -1)], -2)
    g_inv = np.stack([np.stack([gvv, -guv], -1), np.stack([-guv, guu], -1)], -2) / det[..., None, None]
    jet = GeometryJet(x, xu, xv, xuu, xuv, xvv, n, g, g_inv, area, np.zeros_like(area))
    return GeometryJet(x, xu, xv, xuu, xuv, xvv, n, g, g_inv, area, mean_curvature(jet))


def evaluate_jet(chart: TriangleChart, u, v) -> GeometryJet:
    """Geometry of ``chart`` at reference points; scalars give an unbatched jet."""
    scalar = np.ndim(u) == 0 and np.ndim(v) == 0
    uu = np.atleast_1d(np.asarray(u, dtype=float)).ravel()
    vv = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
    if np.any(uu < -1e-12) or np.any(vv < -1e-12) or np.any(uu + vv > 1 + 1e-12):
        raise ValueError("reference point outside the closed simplex")
    jet = jet_from_derivatives(*chart.derivatives(uu, vv), label=chart.label)
    return jet.reshape() if scalar else jet


def _check_nodes(ref, values):
    if values.shape[-1] != ref.n_pol:
        raise ContractViolation(
            f"samples have {values.shape[-1]} nodes per element, reference element has {ref.n_pol}"
        )


def surface_gradient(ref, psi, jets: GeometryJet) -> np.ndarray:
    """Surface gradient of per-element nodal samples.

    ``psi`` has shape ``(..., n_pol)`` (one row per element) and ``jets`` the
    matching batch shape. Returns ``(..., n_pol, 3)``.
    """
    psi = np.asarray(psi)
    _check_nodes(ref, psi)
    pu = psi @ ref.Du.T
    pv = psi @ ref.Dv.T
    gi = jets.g_inv
    cu = gi[..., 0, 0] * pu + gi[..., 0, 1] * pv
    cv = gi[..., 1, 0] * pu + gi[..., 1, 1] * pv
    return cu[..., None] * jets.xu + cv[..., None] * jets.xv


def tangent_components(F, jets: GeometryJet, tol: float | None = 1e-10):
    """Contravariant components (F^u, F^v) of a tangential field."""
    F = np.asarray(F)
    if tol is not None:
        fn = np.abs(_dot(F, jets.normal))
        mag = np.linalg.norm(F, axis=-1)
        if np.any(fn > tol * np.maximum(mag, 1e-300) + 1e-300):
            raise ContractViolation("vector field is not tangential to the surface")
    fu, fv = _dot(F, jets.xu), _dot(F, jets.xv)
    gi = jets.g_inv
    return gi[..., 0, 0] * fu + gi[..., 0, 1] * fv, gi[..., 1, 0] * fu + gi[..., 1, 1] * fv


def surface_divergence(ref, F, jets: GeometryJet, tol: float | None = 1e-10) -> np.ndarray:
    """Spectral surface divergence of per-element tangential samples ``(..., n_pol, 3)``."""
    F = np.asarray(F)
    _check_nodes(ref, F[..., 0])
    Fu, Fv = tangent_components(F, jets, tol)
    sg = jets.sqrt_g
    return ((sg * Fu) @ ref.Du.T + (sg * Fv) @ ref.Dv.T) / sg


def surface_laplacian(ref, psi, jets: GeometryJet) -> np.ndarray:
    return surface_divergence(ref, surface_gradient(ref, psi, jets), jets, tol=None)
