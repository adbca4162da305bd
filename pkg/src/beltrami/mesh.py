"""Reference elements and surface meshes made of curvilinear triangles."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from . import koornwinder
from .geometry import (
    GeometryJet,
    ProjectedSphereChart,
    TorusChart,
    TriangleChart,
    jet_from_derivatives,
)

MAX_ORDER = 12


def _vioreanu_rokhlin(p: int):
    import modepy

    q = modepy.VioreanuRokhlinSimplexQuadrature(p, 2)
    # modepy works on the bi-unit triangle; T0 is its affine image with area 1/2
    nodes = 0.5 * (q.nodes.T + 1.0)
    return nodes, 0.25 * q.weights


# name -> callable(p) returning (nodes (n_pol, 2), weights (n_pol,)) on T0
NODE_FAMILIES = {"vioreanu-rokhlin": _vioreanu_rokhlin}


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    """Order-p interpolation nodes on T0 with smooth quadrature weights.

    ``V[i, l] = K_l(node_i)`` and ``U = V^{-1}`` maps nodal values to
    Koornwinder coefficients. ``Du``/``Dv`` differentiate nodal values.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    V: np.ndarray
    U: np.ndarray
    Du: np.ndarray
    Dv: np.ndarray
    family: str = "vioreanu-rokhlin"

    @property
    def n_pol(self) -> int:
        return self.nodes.shape[0]

    def coefficients(self, values):
        """Koornwinder coefficients of nodal samples along the last axis."""
        return np.asarray(values) @ self.U.T

    def interpolation_matrix(self, u, v) -> np.ndarray:
        """Matrix mapping nodal values to values at the points (u, v)."""
        return koornwinder.vandermonde(self.order, u, v) @ self.U

    def interpolate(self, values, u, v):
        return self.interpolation_matrix(u, v) @ np.asarray(values)


@lru_cache(maxsize=None)
def build_reference_element(p: int, family: str = "vioreanu-rokhlin") -> ReferenceElement:
    if not (isinstance(p, (int, np.integer)) and 1 <= p <= MAX_ORDER):
        raise ValueError(f"unsupported reference element order {p!r} (need 1..{MAX_ORDER})")
    p = int(p)
    nodes, weights = NODE_FAMILIES[family](p)
    E = koornwinder.evaluate(p, nodes[:, 0], nodes[:, 1], nderiv=1)
    V = E[0]
    U = np.linalg.inv(V)
    for a in (nodes, weights, V, U):
        a.setflags(write=False)
    Du, Dv = E[1] @ U, E[2] @ U
    return ReferenceElement(p, nodes, weights, V, U, Du, Dv, family)


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Collection of charts sampled at the nodes of one reference element.

    Global node ``j`` is node ``j % n_pol`` of triangle ``j // n_pol``.
    ``jets`` has batch shape ``(n_tri, n_pol)``.
    """

    charts: list
    ref: ReferenceElement
    jets: GeometryJet = field(repr=False)

    @property
    def n_tri(self) -> int:
        return len(self.charts)

    @property
    def n_pts(self) -> int:
        return self.n_tri * self.ref.n_pol

    @cached_property
    def positions(self) -> np.ndarray:
        return self.jets.x.reshape(-1, 3)

    @cached_property
    def normals(self) -> np.ndarray:
        return self.jets.normal.reshape(-1, 3)

    @cached_property
    def curvature(self) -> np.ndarray:
        return self.jets.H.reshape(-1)

    @cached_property
    def weights(self) -> np.ndarray:
        return (self.jets.sqrt_g * self.ref.weights).reshape(-1)

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    def per_element(self, values):
        """View global samples ``(n_pts, ...)`` as ``(n_tri, n_pol, ...)``."""
        values = np.asarray(values)
        return values.reshape(self.n_tri, self.ref.n_pol, *values.shape[1:])

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha1()
        h.update(np.int64([self.n_tri, self.ref.order]).tobytes())
        h.update(np.ascontiguousarray(self.positions).tobytes())
        return h.hexdigest()[:16]

    def permuted(self, order) -> "SurfaceMesh":
        """Same surface with triangles relabelled: new triangle k is old ``order[k]``."""
        return build_mesh([self.charts[k] for k in order], self.ref)


def build_mesh(charts, p) -> SurfaceMesh:
    """Sample ``charts`` at the nodes of an order-``p`` reference element."""
    ref = p if isinstance(p, ReferenceElement) else build_reference_element(p)
    u, v = ref.nodes[:, 0], ref.nodes[:, 1]
    parts = [[] for _ in range(6)]
    for chart in charts:
        d = chart.derivatives(u, v)
        for k in range(6):
            parts[k].append(d[k])
    stacked = [np.stack(a) for a in parts]
    labels = ",".join(str(c.label) for c in charts[:1])
    try:
        jets = jet_from_derivatives(*stacked, label=labels)
    except Exception:
        # rerun per chart to name the offending triangle
        for chart, *d in zip(charts, *parts):
            jet_from_derivatives(*d, label=chart.label)
        raise
    return SurfaceMesh(list(charts), ref, jets)


def _orient(a, b, c, outward):
    if np.dot(np.cross(b - a, c - a), outward) < 0:
        return a, c, b
    return a, b, c


def cube_triangles(n_refine: int) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Flat triangles on the surface of [-1, 1]^3, outward oriented.

    Each face is split into 8 triangles meeting at its centre, then every
    triangle is quadrisected ``n_refine`` times (midpoints on the cube).
    """
    tris = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            e = np.zeros(3)
            e[axis] = sign
            t1 = np.zeros(3)
            t1[(axis + 1) % 3] = 1.0
            t2 = np.cross(e, t1)
            pt = lambda a, b: e + a * t1 + b * t2  # noqa: E731
            for sa in (-1.0, 1.0):
                for sb in (-1.0, 1.0):
                    o, c = pt(0, 0), pt(sa, sb)
                    tris.append(_orient(o, pt(sa, 0), c, e))
                    tris.append(_orient(o, c, pt(0, sb), e))
    for _ in range(n_refine):
        finer = []
        for a, b, c in tris:
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            finer += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        tris = finer
    return tris


def sphere_charts(n_refine: int, radius: float = 1.0, center=(0.0, 0.0, 0.0)):
    center = np.asarray(center, dtype=float)
    return [
        ProjectedSphereChart(center + a, center + b, center + c, radius, center, label=k)
        for k, (a, b, c) in enumerate(cube_triangles(n_refine))
    ]


def sphere_mesh(n_refine: int, p: int = 4, radius: float = 1.0, center=(0.0, 0.0, 0.0)):
    """Cube-projection sphere with 48 * 4**n_refine analytic triangles."""
    if n_refine < 0:
        raise ValueError("n_refine must be >= 0")
    return build_mesh(sphere_charts(n_refine, radius, center), p)


def torus_charts(n_u: int, n_v: int, R: float = 3.0, r: float = 1.0):
    """Split [0, 2pi]^2 into n_u x n_v rectangles, two triangles each.

    The first angle is the tube angle (``sin a`` is the height), the second the
    azimuth. Vertex orderings are chosen so normals point out of the tube.
    """
    charts = []
    da, db = 2 * np.pi / n_u, 2 * np.pi / n_v
    k = 0
    for i in range(n_u):
        for j in range(n_v):
            a0, a1 = i * da, (i + 1) * da
            b0, b1 = j * db, (j + 1) * db
            # det d(a,b)/d(u,v) < 0 gives x_u x x_v along the outward normal
            for tri in (
                [(a0, b0), (a0, b1), (a1, b0)],
                [(a1, b1), (a1, b0), (a0, b1)],
            ):
                charts.append(TorusChart(tri, R, r, label=k))
                k += 1
    return charts


def torus_mesh(n_u: int, n_v: int | None = None, p: int = 8, R: float = 3.0, r: float = 1.0):
    """Analytic torus mesh with 2 * n_u * n_v triangles (4x4 -> 32)."""
    n_v = n_u if n_v is None else n_v
    return build_mesh(torus_charts(n_u, n_v, R, r), p)


def mesh_from_charts(charts: list[TriangleChart], p: int) -> SurfaceMesh:
    return build_mesh(charts, p)
