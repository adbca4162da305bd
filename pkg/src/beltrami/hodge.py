"""Hodge decomposition F = grad a + n x grad b + H of tangential fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ContractViolation, surface_divergence, surface_gradient
from .solver import LaplaceBeltramiSolver, SolverConfig, l2_surface_norm


@dataclass
class HodgeResult:
    alpha: np.ndarray
    beta: np.ndarray
    grad_alpha: np.ndarray
    nx_grad_beta: np.ndarray
    harmonic: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    reports: tuple = ()


def _per_element(mesh, values):
    return mesh.per_element(values)


def spectral_divergence(mesh, F, tol: float | None = 1e-10) -> np.ndarray:
    """Per-element spectral surface divergence of nodal tangential vectors ``(n_pts, 3)``."""
    d = surface_divergence(mesh.ref, _per_element(mesh, F), mesh.jets, tol=tol)
    return d.reshape(-1)


def spectral_gradient(mesh, psi) -> np.ndarray:
    g = surface_gradient(mesh.ref, _per_element(mesh, psi), mesh.jets)
    return g.reshape(-1, 3)


def hodge_decompose(
    mesh,
    F,
    cfg: SolverConfig | None = None,
    div_F=None,
    div_nxF=None,
    solver: LaplaceBeltramiSolver | None = None,
    tol: float = 1e-10,
) -> HodgeResult:
    """Split the tangential field ``F`` (nodal, ``(n_pts, 3)``) into its Hodge parts.

    Solves Lap a = div F and Lap b = -div(n x F) with one factorization. The
    divergences default to spectral differentiation of ``F``; pass them
    explicitly when they are known from volume data.
    """
    F = np.asarray(F, dtype=float)
    if F.shape != (mesh.n_pts, 3):
        raise ValueError(f"expected F of shape ({mesh.n_pts}, 3), got {F.shape}")
    n = mesh.normals
    fn = np.abs(np.einsum("ij,ij->i", F, n))
    if np.any(fn > tol * np.linalg.norm(F, axis=1) + 1e-300):
        raise ContractViolation("input field is not tangential")
    nxF = np.cross(n, F)
    # divergences are exact differentials; a spectral estimate is only mean-zero
    # up to discretization error, which is removed here
    w = mesh.weights
    if div_F is None:
        div_F = spectral_divergence(mesh, F, tol=None)
        div_F = div_F - (w @ div_F) / w.sum()
    if div_nxF is None:
        div_nxF = spectral_divergence(mesh, nxF, tol=None)
        div_nxF = div_nxF - (w @ div_nxF) / w.sum()

    solver = solver or LaplaceBeltramiSolver(mesh, cfg or SolverConfig())
    ra = solver.solve(np.asarray(div_F))
    rb = solver.solve(-np.asarray(div_nxF))
    alpha, beta = ra.psi, rb.psi
    grad_alpha = spectral_gradient(mesh, alpha)
    nx_grad_beta = np.cross(n, spectral_gradient(mesh, beta))
    harmonic = F - grad_alpha - nx_grad_beta

    nrm = lambda v: l2_surface_norm(mesh, v)  # noqa: E731
    diagnostics = {
        "norm_F": nrm(F),
        "norm_grad_alpha": nrm(grad_alpha),
        "norm_nx_grad_beta": nrm(nx_grad_beta),
        "norm_harmonic": nrm(harmonic),
        "div_harmonic": nrm(spectral_divergence(mesh, harmonic, tol=None)),
        "div_nx_harmonic": nrm(spectral_divergence(mesh, np.cross(n, harmonic), tol=None)),
        "reconstruction": float(np.abs(grad_alpha + nx_grad_beta + harmonic - F).max()),
    }
    return HodgeResult(alpha, beta, grad_alpha, nx_grad_beta, harmonic, diagnostics, (ra, rb))
