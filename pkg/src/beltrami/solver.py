"""Solve Lap_G psi = f through the second-kind system A sigma = S f, psi = S sigma."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernels import ALL_KINDS, KernelKind
from .operators import assemble_many, compose_system
from .quadrature import QuadConfig

log = logging.getLogger(__name__)


class SolveError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class GMRESStagnation(SolveError):
    pass


class MeanNotZeroWarning(UserWarning):
    pass


def weighted_mean(mesh, values):
    """sum_j w_j v_j (the integral of v over the surface)."""
    return mesh.weights @ np.asarray(values)


def l2_surface_norm(mesh, values) -> float:
    v = np.asarray(values)
    if v.ndim > 1:
        a2 = (np.abs(v) ** 2).reshape(v.shape[0], -1).sum(axis=1)
    else:
        a2 = np.abs(v) ** 2
    return float(np.sqrt(mesh.weights @ a2))


@dataclass
class GMRESResult:
    x: np.ndarray
    history: list
    converged: bool
    reason: str = ""

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def gmres(
    matrix,
    rhs,
    tol: float = 1e-14,
    max_iter: int | None = None,
    stagnation_window: int = 50,
) -> GMRESResult:
    """Restart-free GMRES (Arnoldi with twice-applied modified Gram-Schmidt).

    ``history[k]`` is the relative residual after ``k`` iterations, as tracked
    by the Givens-rotated least-squares problem. The run stops early, with
    ``converged=False``, if the residual fails to drop by 10x over
    ``stagnation_window`` iterations.
    """
    A = matrix.entries if hasattr(matrix, "entries") else matrix
    matvec = A if callable(A) else (lambda v: A @ v)
    b = np.asarray(rhs, dtype=float)
    n = b.shape[0]
    max_iter = n if max_iter is None else min(max_iter, n)
    beta = np.linalg.norm(b)
    if beta == 0.0:
        return GMRESResult(np.zeros(n), [0.0], True)
    Q = np.zeros((max_iter + 1, n))
    Hs = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta
    Q[0] = b / beta
    history = [1.0]
    k = 0
    converged, reason = False, "max_iter"
    while k < max_iter:
        w = matvec(Q[k])
        for _ in range(2):
            h = Q[: k + 1] @ w
            w -= h @ Q[: k + 1]
            Hs[: k + 1, k] += h
        hn = np.linalg.norm(w)
        Hs[k + 1, k] = hn
        for i in range(k):
            a, c = Hs[i, k], Hs[i + 1, k]
            Hs[i, k] = cs[i] * a + sn[i] * c
            Hs[i + 1, k] = -sn[i] * a + cs[i] * c
        r = np.hypot(Hs[k, k], Hs[k + 1, k])
        cs[k], sn[k] = Hs[k, k] / r, Hs[k + 1, k] / r
        Hs[k, k], Hs[k + 1, k] = r, 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        k += 1
        res = abs(g[k]) / beta
        history.append(min(res, history[-1]))
        if res <= tol:
            converged, reason = True, ""
            break
        if hn == 0.0:
            reason = "breakdown"
            break
        Q[k] = w / hn
        if k >= stagnation_window and history[k] > 0.1 * history[k - stagnation_window]:
            reason = "stagnation"
            break
    y = scipy.linalg.solve_triangular(Hs[:k, :k], g[:k])
    x = y @ Q[:k]
    return GMRESResult(x, history, converged, reason)


@dataclass(frozen=True)
class SolverConfig:
    method: str = "lu"
    gmres_tol: float = 1e-14
    max_iter: int = 500
    stagnation_window: int = 50
    estimate_condition: bool = False
    quad: QuadConfig = field(default_factory=QuadConfig)

    def __post_init__(self):
        if self.method not in ("lu", "gmres"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not self.gmres_tol > 0:
            raise ValueError("gmres_tol must be positive")


@dataclass
class SolveReport:
    psi: np.ndarray
    sigma: np.ndarray
    residual: float
    iterations: int
    mean_psi: complex | float
    condition: float | None = None
    method: str = "lu"
    history: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    converged: bool = True

    def summary(self) -> dict:
        m = self.mean_psi
        return {
            "method": self.method,
            "residual": float(self.residual),
            "iterations": int(self.iterations),
            "mean_psi": abs(m) if np.iscomplexobj(m) else float(m),
            "condition": self.condition,
            "converged": self.converged,
            "timings": dict(self.timings),
        }


def condition_number(A: np.ndarray, lu=None) -> float:
    """2-norm condition number for modest sizes; LAPACK 1-norm estimate beyond."""
    n = A.shape[0]
    if n <= 3000 or lu is None:
        s = np.linalg.svd(A, compute_uv=False)
        return float(s[0] / s[-1])
    anorm = np.abs(A).sum(axis=0).max()
    rcond, info = scipy.linalg.lapack.dgecon(lu[0], anorm, norm="1")
    return float(1.0 / rcond)


class LaplaceBeltramiSolver:
    """Assembles the system once; :meth:`solve` may then be called repeatedly."""

    def __init__(self, mesh, cfg: SolverConfig | None = None):
        self.mesh = mesh
        self.cfg = cfg or SolverConfig()
        self.timings = {}
        t0 = time.perf_counter()
        ops = assemble_many(ALL_KINDS, mesh, self.cfg.quad)
        t1 = time.perf_counter()
        self.S = ops[KernelKind.SINGLE].entries
        self.A = compose_system(mesh, ops=ops).entries
        del ops
        t2 = time.perf_counter()
        self.timings.update(assemble_s=t1 - t0, compose_s=t2 - t1)
        self._lu = None
        self.condition = None
        if self.cfg.method == "lu":
            self._factor()
        if self.cfg.estimate_condition:
            self.condition = condition_number(self.A, self._lu)

    def _factor(self):
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            try:
                self._lu = scipy.linalg.lu_factor(self.A, check_finite=True)
            except (scipy.linalg.LinAlgWarning, np.linalg.LinAlgError) as exc:
                raise SolveError(f"LU factorization failed: {exc}") from exc
        if np.any(np.diag(self._lu[0]) == 0.0):
            raise SolveError("system matrix is singular")
        self.timings["factor_s"] = time.perf_counter() - t0

    def _solve_real(self, b):
        # returns (sigma, iterations, history, converged, reason)
        if self.cfg.method == "lu":
            return scipy.linalg.lu_solve(self._lu, b), 0, [], True, ""
        r = gmres(self.A, b, self.cfg.gmres_tol, self.cfg.max_iter, self.cfg.stagnation_window)
        return r.x, r.iterations, r.history, r.converged, r.reason

    def solve(self, f) -> SolveReport:
        mesh = self.mesh
        f = np.asarray(f)
        if f.shape != (mesh.n_pts,):
            raise ValueError(f"right-hand side has shape {f.shape}, expected ({mesh.n_pts},)")
        if not np.all(np.isfinite(f)):
            raise ValueError("right-hand side contains non-finite values")
        fn = l2_surface_norm(mesh, f)
        if abs(weighted_mean(mesh, f)) > 1e-6 * fn:
            warnings.warn(
                "right-hand side is not mean-zero; psi solves the problem for f minus its mean, "
                "shifted so that its integral is the integral of f over the area",
                MeanNotZeroWarning,
                stacklevel=2,
            )
        t0 = time.perf_counter()
        parts = [f.real, f.imag] if np.iscomplexobj(f) else [f]
        sig, iters, hist, ok, why = [], 0, [], True, ""
        for part in parts:
            rhs = self.S @ part
            s, it, h, conv, reason = self._solve_real(rhs)
            sig.append(s)
            iters = max(iters, it)
            hist = h if len(h) > len(hist) else hist
            ok &= conv
            why = why or reason
        sigma = sig[0] + 1j * sig[1] if len(sig) == 2 else sig[0]
        psi = self.S @ sigma
        rhs = self.S @ f
        bn = np.linalg.norm(rhs)
        residual = float(np.linalg.norm(self.A @ sigma - rhs) / bn) if bn > 0 else 0.0
        timings = dict(self.timings, solve_s=time.perf_counter() - t0)
        report = SolveReport(
            psi=psi,
            sigma=sigma,
            residual=residual,
            iterations=iters,
            mean_psi=weighted_mean(mesh, psi),
            condition=self.condition,
            method=self.cfg.method,
            history=hist,
            timings=timings,
            converged=ok,
        )
        if not ok:
            cls = GMRESStagnation if why == "stagnation" else SolveError
            raise cls(f"GMRES did not converge ({why}); residual {residual:.3e}", report)
        return report


def lb_solve(mesh, f, method: str = "lu", cfg: SolverConfig | None = None) -> SolveReport:
    """Solve the Laplace-Beltrami problem for samples ``f`` on ``mesh``."""
    cfg = cfg or SolverConfig(method=method)
    if cfg.method != method:
        cfg = SolverConfig(**{**cfg.__dict__, "method": method})
    return LaplaceBeltramiSolver(mesh, cfg).solve(f)
