"""Dense Nystrom matrices for layer potentials and the Laplace-Beltrami system.

Rows are target nodes and columns source nodes. For source triangle T and a
target x_i, the per-mode integrals ``I_T(x_i, K_l)`` are mapped to nodal
columns through the coefficient matrix U:

    A[i, j] = sum_l U[l, j_loc] I_T(x_i, K_l).
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

from .kernels import ALL_KINDS, KernelKind
from .mesh import SurfaceMesh
from .quadrature import AdaptiveQuadratureError, QuadConfig, SourcePatch

log = logging.getLogger(__name__)


class FingerprintMismatch(ValueError):
    pass


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    kind: str
    entries: np.ndarray
    fingerprint: str

    def __matmul__(self, other):
        return self.entries @ (other.entries if isinstance(other, OperatorMatrix) else other)

    @property
    def shape(self):
        return self.entries.shape


def assemble_many(kinds, mesh: SurfaceMesh, cfg: QuadConfig | None = None) -> dict:
    """Assemble several kernel kinds in one pass over source triangles."""
    cfg = cfg or QuadConfig()
    kinds = [k if isinstance(k, KernelKind) else KernelKind(k) for k in kinds]
    ref = mesh.ref
    p, npol, N = ref.order, ref.n_pol, mesh.n_pts
    nr, na = cfg.polar_orders(p)
    X, NX = mesh.positions, mesh.normals
    mats = [np.empty((N, N)) for _ in kinds]
    for t, chart in enumerate(mesh.charts):
        patch = SourcePatch(chart, p, cfg)
        cols = slice(t * npol, (t + 1) * npol)
        dist = np.linalg.norm(X - patch.centroid, axis=1)
        is_self = np.zeros(N, dtype=bool)
        is_self[cols] = True
        if cfg.adaptive_everywhere:
            near = ~is_self
        else:
            near = (dist < cfg.near_factor * patch.diameter) & ~is_self
        far = ~near & ~is_self
        I = np.empty((len(kinds), N, npol))
        try:
            if far.any():
                I[:, far] = patch.far(kinds, X[far], NX[far])
            if near.any():
                I[:, near] = patch.near(kinds, X[near], NX[near])
        except AdaptiveQuadratureError as exc:
            raise AssemblyError(f"near-field quadrature failed on triangle {t}: {exc}") from exc
        I[:, cols] = patch.singular(kinds, ref.nodes, nr, na)
        block = I @ ref.U
        for k, M in enumerate(mats):
            M[:, cols] = block[k]
    fp = mesh.fingerprint
    return {k: OperatorMatrix(k.value, M, fp) for k, M in zip(kinds, mats)}


def assemble(kind, mesh: SurfaceMesh, cfg: QuadConfig | None = None) -> OperatorMatrix:
    kind = kind if isinstance(kind, KernelKind) else KernelKind(kind)
    return assemble_many([kind], mesh, cfg)[kind]


def assemble_W(mesh: SurfaceMesh) -> OperatorMatrix:
    """Rank-one operator whose every row is the smooth weight vector."""
    w = mesh.weights
    return OperatorMatrix("W", np.broadcast_to(w, (mesh.n_pts, mesh.n_pts)).copy(), mesh.fingerprint)


def _check(mesh, ops):
    for op in ops:
        if op.fingerprint != mesh.fingerprint:
            raise FingerprintMismatch(f"operator {op.kind} was assembled on a different mesh")


def _components(mesh, cfg, ops):
    if ops is None:
        ops = assemble_many(ALL_KINDS, mesh, cfg)
    _check(mesh, ops.values())
    return ops


def _sub_product(out, X, Y, rows: int = 1024):
    # out -= X @ Y in row blocks, avoiding a full-size temporary
    for i in range(0, out.shape[0], rows):
        out[i : i + rows] -= X[i : i + rows] @ Y


def compose_system(mesh: SurfaceMesh, cfg: QuadConfig | None = None, ops=None) -> OperatorMatrix:
    """A = -I/4 - 2 S H S' - S (S'' + D') + D^2 + S W S.

    ``ops`` may hold pre-assembled component matrices keyed by
    :class:`KernelKind`; they must share the mesh fingerprint.
    """
    ops = _components(mesh, cfg, ops)
    S = ops[KernelKind.SINGLE].entries
    D = ops[KernelKind.DOUBLE].entries
    Sp = ops[KernelKind.SINGLE_PRIME].entries
    K = ops[KernelKind.DIFF_SUM].entries
    H = mesh.curvature
    w = mesh.weights
    M = 2.0 * H[:, None] * Sp
    M += K
    A = D @ D
    _sub_product(A, S, M)
    del M
    A += np.outer(S.sum(axis=1), w @ S)
    A[np.diag_indices_from(A)] -= 0.25
    return OperatorMatrix("A", A, mesh.fingerprint)


def right_precondition_system(mesh: SurfaceMesh, cfg: QuadConfig | None = None, ops=None) -> OperatorMatrix:
    """B = -I/4 + S'^2 - (S'' + D') S - 2 H S' S + W S^2."""
    ops = _components(mesh, cfg, ops)
    S = ops[KernelKind.SINGLE].entries
    Sp = ops[KernelKind.SINGLE_PRIME].entries
    K = ops[KernelKind.DIFF_SUM].entries
    H = mesh.curvature
    w = mesh.weights
    M = 2.0 * H[:, None] * Sp
    M += K
    B = Sp @ Sp
    _sub_product(B, M, S)
    del M
    B += np.outer(np.ones(mesh.n_pts), (w @ S) @ S)
    B[np.diag_indices_from(B)] -= 0.25
    return OperatorMatrix("B", B, mesh.fingerprint)


_MAGIC = b"LBOPMAT1"


def dump_matrix(op: OperatorMatrix, path) -> None:
    """Row-major float64 dump: magic, int64 n, 16-byte kind label, entries."""
    n = op.entries.shape[0]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<q", n))
        fh.write(op.kind.encode("utf-8")[:16].ljust(16, b"\0"))
        fh.write(np.ascontiguousarray(op.entries, dtype="<f8").tobytes())


def load_matrix(path) -> OperatorMatrix:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError("not an operator dump")
        (n,) = struct.unpack("<q", fh.read(8))
        kind = fh.read(16).rstrip(b"\0").decode("utf-8")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError("truncated operator dump")
    return OperatorMatrix(kind, data.reshape(n, n).copy(), "")
