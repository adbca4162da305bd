"""Layer-potential integrals over one curvilinear triangle.

Every routine returns *basis integrals*: for each kernel kind, target and
Koornwinder mode ``l`` of the density order ``p``,

    I[kind, target, l] = int_T0 kernel(x, y(u, v)) K_l(u, v) sqrt|g| du dv.

Three regimes are used:

* far   -- one fixed smooth rule on T0,
* near  -- recursive quadrisection of T0 until parent and children agree,
* self  -- target is a node of the triangle: T0 is split into three
  sub-triangles with apex at the target, each integrated in polar form with a
  sinh substitution along the opposite edge, which removes the 1/r singularity
  and resolves targets that sit close to an edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import koornwinder
from .geometry import REFERENCE_VERTICES, TriangleChart
from ._pairs import kind_codes, pair_integrals, scatter_add
from .kernels import KernelKind, kernel_values


class AdaptiveQuadratureError(RuntimeError):
    def __init__(self, estimate, tol, depth):
        self.estimate = estimate
        self.tol = tol
        super().__init__(
            f"adaptive quadrature exceeded max depth {depth} before reaching tolerance {tol:g}"
        )


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature settings.

    ``rule_degree`` is the exactness degree of the smooth rule used for far
    interactions and on every adaptive leaf; ``None`` means ``2p + 4``.
    Polar orders default to ``max(2p, 12)``; below 12 points the rule does not
    reach 1e-9 on coarse curved patches.
    """

    tol_adaptive: float = 1e-10
    max_depth: int = 30
    near_factor: float = 2.5
    n_polar_radial: int | None = None
    n_polar_angular: int | None = None
    rule_degree: int | None = None
    adaptive_everywhere: bool = False
    polar_panel_length: float = 1.5

    def __post_init__(self):
        if not self.tol_adaptive > 0:
            raise ValueError("tol_adaptive must be positive")
        if not self.near_factor > 1:
            raise ValueError("near_factor must exceed 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    def polar_orders(self, p: int) -> tuple[int, int]:
        nr = self.n_polar_radial or max(2 * p, 12)
        na = self.n_polar_angular or max(2 * p, 12)
        if nr < p + 1 or na < p + 1:
            raise ValueError(f"polar orders ({nr}, {na}) must be >= p + 1 = {p + 1}")
        return nr, na

    def smooth_degree(self, p: int) -> int:
        d = self.rule_degree or 2 * p + 4
        if d < p + 1:
            raise ValueError(f"smooth rule degree {d} must be >= p + 1")
        return d


@lru_cache(maxsize=None)
def smooth_rule(degree: int):
    """Xiao-Gimbutas rule on T0: (barycentric-free) nodes (n, 2), weights (n,)."""
    import modepy

    q = modepy.XiaoGimbutasSimplexQuadrature(min(degree, 50), 2)
    nodes = 0.5 * (q.nodes.T + 1.0)
    return np.ascontiguousarray(nodes), 0.25 * q.weights


@lru_cache(maxsize=None)
def gauss_legendre01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def quadrisect(tri: np.ndarray) -> list[np.ndarray]:
    a, b, c = tri
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return [np.array(t) for t in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]


def polar_rule(apex, n_radial: int, n_angular: int, metric=None, panel_length: float = 1.5):
    """Weakly-singular rule on T0 for a singularity at ``apex`` (any point of T0).

    T0 is cut into three triangles sharing ``apex``. Each is swept by rays
    from the apex to its outer edge: Gauss-Legendre in the ray fraction and,
    along the edge, Gauss-Legendre panels in ``tau`` with
    ``s = d sinh(tau)`` (``d`` = apex-edge distance). The construction is done
    in coordinates where ``metric`` (the 2x2 first fundamental form at the
    apex) becomes the identity, so the leading 1/r behaviour is isotropic.

    Returns ``(uv (n, 2), weights (n,))``; weights carry every Jacobian, so
    ``sum w f`` approximates ``int_T0 f du dv`` for f = O(1/r).
    """
    apex = np.asarray(apex, dtype=float)
    if metric is None:
        L = np.eye(2)
    else:
        L = np.linalg.cholesky(np.asarray(metric, dtype=float)).T
    Linv = np.linalg.inv(L)
    det_inv = 1.0 / abs(L[0, 0] * L[1, 1] - L[0, 1] * L[1, 0])
    rho, wr = gauss_legendre01(n_radial)
    tg, wg = gauss_legendre01(n_angular)
    verts = (REFERENCE_VERTICES - apex) @ L.T
    pts, wts = [], []
    for k in range(3):
        A, B = verts[k], verts[(k + 1) % 3]
        t = (B - A) / np.linalg.norm(B - A)
        foot = A - np.dot(A, t) * t
        d = np.linalg.norm(foot)
        if d <= 1e-14 * np.linalg.norm(B - A):
            continue  # apex on this edge: the sub-triangle has no area
        ta, tb = np.arcsinh(np.dot(A - foot, t) / d), np.arcsinh(np.dot(B - foot, t) / d)
        n_pan = max(1, int(np.ceil((tb - ta) / panel_length)))
        bounds = np.linspace(ta, tb, n_pan + 1)
        tau = (bounds[:-1, None] + (bounds[1:] - bounds[:-1])[:, None] * tg).ravel()
        wtau = (np.diff(bounds)[:, None] * wg).ravel() * d * d * np.cosh(tau)
        edge = foot + d * np.sinh(tau)[:, None] * t
        xi = rho[:, None, None] * edge[None, :, :]
        pts.append(apex + xi.reshape(-1, 2) @ Linv.T)
        wts.append(((rho * wr)[:, None] * wtau[None, :]).reshape(-1) * det_inv)
    return np.concatenate(pts), np.concatenate(wts)


class SourcePatch:
    """One source triangle with cached smooth-rule data for order-``p`` densities."""

    def __init__(self, chart: TriangleChart, p: int, cfg: QuadConfig | None = None):
        self.chart = chart
        self.p = p
        self.cfg = cfg or QuadConfig()
        self.rule_nodes, self.rule_weights = smooth_rule(self.cfg.smooth_degree(p))
        self._cache: dict = {}
        c = chart(np.array([1 / 3]), np.array([1 / 3]))[0]
        verts = chart.vertices
        self.centroid = c
        self.diameter = max(
            np.linalg.norm(verts[i] - verts[j]) for i in range(3) for j in range(i)
        )

    def _points(self, uv, w):
        x, xu, xv = self.chart.first(uv[:, 0], uv[:, 1])
        cross = np.cross(xu, xv)
        sg = np.linalg.norm(cross, axis=1)
        ny = cross / sg[:, None]
        B = koornwinder.vandermonde(self.p, uv[:, 0], uv[:, 1])
        return x, ny, np.ascontiguousarray((w * sg)[:, None] * B)

    def rule_data(self, tri: np.ndarray):
        """(y, n_y, weighted basis (nq, n_pol)) of the smooth rule mapped onto ``tri``."""
        key = tri.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
        uv = tri[0] + self.rule_nodes[:, :1] * e1 + self.rule_nodes[:, 1:] * e2
        jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
        data = self._points(uv, self.rule_weights * jac)
        if len(self._cache) < 64:
            self._cache[key] = data
        return data

    def _apply(self, kinds, xt, nt, tri):
        y, ny, WB = self.rule_data(tri)
        K = kernel_values(kinds, xt[:, None, :], nt[:, None, :], y[None], ny[None])
        return K @ WB

    def far(self, kinds, xt, nt):
        return self._apply(kinds, xt, nt, REFERENCE_VERTICES)

    def _batch_data(self, tris):
        # smooth rule mapped onto many sub-triangles at once: (nb, nq, ...)
        e1 = tris[:, 1] - tris[:, 0]
        e2 = tris[:, 2] - tris[:, 0]
        r = self.rule_nodes
        uv = tris[:, None, 0] + r[None, :, :1] * e1[:, None] + r[None, :, 1:] * e2[:, None]
        jac = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        w = (jac[:, None] * self.rule_weights[None]).ravel()
        y, ny, WB = self._points(uv.reshape(-1, 2), w)
        nb, nq = tris.shape[0], r.shape[0]
        return y.reshape(nb, nq, 3), ny.reshape(nb, nq, 3), WB.reshape(nb, nq, -1)

    def near(self, kinds, xt, nt):
        """Adaptive quadrisection, refined level by level for all targets at once.

        A (sub-triangle, target) pair is accepted when the sum over its four
        children differs from the parent value by at most ``tol_adaptive`` in
        every kind and mode; the children sum is kept.
        """
        cfg = self.cfg
        nk, nm = len(kinds), koornwinder.n_modes(self.p)
        out = np.zeros((nk, len(xt), nm))
        if len(xt) == 0:
            return out
        codes = kind_codes(kinds)
        xt = np.ascontiguousarray(xt, dtype=float)
        nt = np.ascontiguousarray(nt, dtype=float)
        tris = REFERENCE_VERTICES[None].copy()
        tgt = np.arange(len(xt))
        blk = np.zeros(len(xt), dtype=np.int64)
        parent = self._apply(kinds, xt, nt, REFERENCE_VERTICES)
        for depth in range(1, cfg.max_depth + 1):
            kids = np.stack([np.stack(quadrisect(t)) for t in tris]).reshape(-1, 3, 2)
            y, ny, WB = self._batch_data(kids)
            ctgt = np.repeat(tgt, 4)
            cblk = (4 * blk[:, None] + np.arange(4)).ravel()
            est = pair_integrals(codes, xt, nt, ctgt, y, ny, WB, cblk)
            est = est.reshape(nk, len(tgt), 4, nm)
            total = est.sum(axis=2)
            err = np.abs(total - parent).max(axis=(0, 2))
            done = err <= cfg.tol_adaptive
            scatter_add(out, tgt[done], total[:, done])
            if done.all():
                return out
            todo = ~done
            if depth == cfg.max_depth:
                estimate = out.copy()
                scatter_add(estimate, tgt[todo], total[:, todo])
                raise AdaptiveQuadratureError(estimate, cfg.tol_adaptive, cfg.max_depth)
            # surviving child pairs become the next level's parents
            parent = est[:, todo].reshape(nk, -1, nm)
            cblk = cblk.reshape(-1, 4)[todo].ravel()
            tgt = np.repeat(tgt[todo], 4)
            used, blk = np.unique(cblk, return_inverse=True)
            tris = kids[used]
        raise AssertionError("unreachable")

    def singular(self, kinds, uv_targets, n_radial: int, n_angular: int):
        """Basis integrals for targets that are points of this triangle."""
        uv_targets = np.atleast_2d(uv_targets)
        xt, xtu, xtv = self.chart.first(uv_targets[:, 0], uv_targets[:, 1])
        cr = np.cross(xtu, xtv)
        nt = cr / np.linalg.norm(cr, axis=1, keepdims=True)
        plen = self.cfg.polar_panel_length
        rules = []
        for a, xa, xb in zip(uv_targets, xtu, xtv):
            metric = [[xa @ xa, xa @ xb], [xa @ xb, xb @ xb]]
            rules.append(polar_rule(a, n_radial, n_angular, metric, plen))
        sizes = [len(r[1]) for r in rules]
        uv = np.concatenate([r[0] for r in rules])
        w = np.concatenate([r[1] for r in rules])
        y, ny, WB = self._points(uv, w)
        out = np.empty((len(kinds), len(xt), WB.shape[1]))
        start = 0
        for i, n in enumerate(sizes):
            sl = slice(start, start + n)
            K = kernel_values(kinds, xt[i], nt[i], y[sl], ny[sl])
            out[:, i, :] = K @ WB[sl]
            start += n
        return out


def _as_kind(kind):
    return kind if isinstance(kind, KernelKind) else KernelKind(kind)


def _target_normal(target_normal):
    if target_normal is None:
        return np.zeros(3)
    return np.asarray(target_normal, dtype=float)


def integrate_far(kind, target, chart, ell: int, p: int, target_normal=None, cfg=None) -> float:
    """Smooth-rule value of int kernel K_ell sqrt|g| for a well-separated target."""
    patch = SourcePatch(chart, p, cfg)
    xt = np.asarray(target, dtype=float)[None]
    nt = _target_normal(target_normal)[None]
    return float(patch.far([_as_kind(kind)], xt, nt)[0, 0, ell])


def integrate_near(kind, target, chart, ell: int, p: int, target_normal=None, cfg=None) -> float:
    """Adaptive (quadrisection) value of int kernel K_ell sqrt|g|."""
    patch = SourcePatch(chart, p, cfg)
    xt = np.asarray(target, dtype=float)[None]
    nt = _target_normal(target_normal)[None]
    return float(patch.near([_as_kind(kind)], xt, nt)[0, 0, ell])


def integrate_self(kind, node: int, chart, ell: int, ref, cfg=None) -> float:
    """Weakly singular integral for the target at reference node ``node`` of ``chart``."""
    cfg = cfg or QuadConfig()
    patch = SourcePatch(chart, ref.order, cfg)
    nr, na = cfg.polar_orders(ref.order)
    return float(patch.singular([_as_kind(kind)], ref.nodes[node], nr, na)[0, 0, ell])


def integrate_self_at(kind, uv, chart, ell: int, p: int, n_radial: int, n_angular: int) -> float:
    """Like :func:`integrate_self` for an arbitrary interior target ``uv``."""
    patch = SourcePatch(chart, p)
    return float(patch.singular([_as_kind(kind)], uv, n_radial, n_angular)[0, 0, ell])
