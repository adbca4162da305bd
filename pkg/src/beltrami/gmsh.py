"""Reader and writer for curvilinear triangle meshes in Gmsh MSH 2.2 ASCII format."""

from __future__ import annotations

import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .geometry import PolynomialChart
from .mesh import build_mesh

log = logging.getLogger(__name__)

# element type -> geometric order of the triangle
TRIANGLE_TYPES = {2: 1, 9: 2, 21: 3, 23: 4}
ORDER_TO_TYPE = {q: t for t, q in TRIANGLE_TYPES.items()}


class GmshFormatError(ValueError):
    pass


class ChartFitWarning(UserWarning):
    pass


@lru_cache(maxsize=None)
def gmsh_triangle_nodes(q: int) -> np.ndarray:
    """Reference (u, v) of the nodes of an order-``q`` Gmsh triangle, in file order.

    Vertices first, then the ``q - 1`` points of edges 0-1, 1-2, 2-0, then the
    interior nodes, which follow the same layout recursively on the inner
    triangle of order ``q - 3``.
    """
    if q == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    pts = list(verts)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        for k in range(1, q):
            pts.append(verts[a] + (verts[b] - verts[a]) * k / q)
    if q >= 3:
        inner = gmsh_triangle_nodes(q - 3)
        if q - 3 == 0:
            pts.extend(inner)
        else:
            c0 = np.array([1.0, 1.0]) / q
            e1 = np.array([q - 3.0, 0.0]) / q
            e2 = np.array([0.0, q - 3.0]) / q
            pts.extend(c0 + inner[:, :1] * e1 + inner[:, 1:] * e2)
    out = np.array(pts)
    out.setflags(write=False)
    return out


@dataclass
class GmshData:
    charts: list
    element_ids: list
    skipped: Counter = field(default_factory=Counter)
    residuals: list = field(default_factory=list)


def _sections(lines):
    out, name, body = {}, None, []
    for line in lines:
        s = line.strip()
        if s.startswith("$"):
            if name is None:
                name, body = s[1:], []
            elif s == "$End" + name:
                out.setdefault(name, body)
                name = None
            else:
                raise GmshFormatError(f"unterminated section ${name}")
        elif name is not None:
            body.append(s)
    if name is not None:
        raise GmshFormatError(f"unterminated section ${name}")
    return out


def read_gmsh(path) -> GmshData:
    """Parse triangles of a v2.2 ASCII file into least-squares polynomial charts."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise GmshFormatError("binary or non-ASCII MSH files are not supported") from exc
    sec = _sections(text.splitlines())
    if "MeshFormat" not in sec:
        raise GmshFormatError("missing $MeshFormat section")
    fmt = sec["MeshFormat"][0].split()
    if not fmt or not fmt[0].startswith("2."):
        raise GmshFormatError(f"unsupported MSH version {fmt[0] if fmt else '?'} (need 2.2)")
    if len(fmt) > 1 and fmt[1] != "0":
        raise GmshFormatError("binary MSH files are not supported")
    for key in ("Nodes", "Elements"):
        if key not in sec:
            raise GmshFormatError(f"missing ${key} section")

    try:
        nodes = {}
        body = sec["Nodes"]
        for line in body[1 : 1 + int(body[0])]:
            tok = line.split()
            nodes[int(tok[0])] = np.array([float(t) for t in tok[1:4]])
        body = sec["Elements"]
        elements = [[int(t) for t in line.split()] for line in body[1 : 1 + int(body[0])]]
    except (ValueError, IndexError) as exc:
        raise GmshFormatError(f"malformed node or element record: {exc}") from None

    data = GmshData([], [])
    for tok in elements:
        eid, etype, ntags = tok[0], tok[1], tok[2]
        if etype not in TRIANGLE_TYPES:
            data.skipped[etype] += 1
            continue
        q = TRIANGLE_TYPES[etype]
        ids = tok[3 + ntags :]
        uv = gmsh_triangle_nodes(q)
        if len(ids) != len(uv):
            raise GmshFormatError(f"element {eid}: expected {len(uv)} nodes, got {len(ids)}")
        try:
            pts = np.array([nodes[i] for i in ids])
        except KeyError as exc:
            raise GmshFormatError(f"element {eid} references unknown node {exc}") from None
        chart, resid = PolynomialChart.from_samples(uv, pts, q, label=eid)
        scale = max(np.linalg.norm(pts[a] - pts[b]) for a in range(3) for b in range(a))
        if resid > 1e-6 * scale:
            warnings.warn(
                f"element {eid}: chart fit residual {resid:.2e} exceeds 1e-6 x element size",
                ChartFitWarning,
                stacklevel=2,
            )
        data.charts.append(chart)
        data.element_ids.append(eid)
        data.residuals.append(resid)
    if data.skipped:
        log.info("skipped non-triangle elements: %s", dict(data.skipped))
    if not data.charts:
        raise GmshFormatError("file contains no supported triangle elements")
    return data


def load_gmsh(path, p: int = 4):
    """SurfaceMesh of order-``p`` densities on the triangles of a Gmsh file."""
    return build_mesh(read_gmsh(path).charts, p)


def write_gmsh(charts, path, order: int) -> None:
    """Write each chart as an order-``order`` Gmsh triangle (no node sharing)."""
    if order not in ORDER_TO_TYPE:
        raise ValueError(f"unsupported triangle order {order} (need 1..4)")
    uv = gmsh_triangle_nodes(order)
    etype = ORDER_TO_TYPE[order]
    node_lines, elem_lines = [], []
    nid = 0
    for k, chart in enumerate(charts, start=1):
        pts = chart(uv[:, 0], uv[:, 1])
        ids = []
        for x in pts:
            nid += 1
            ids.append(nid)
            node_lines.append(f"{nid} {x[0]:.17g} {x[1]:.17g} {x[2]:.17g}")
        elem_lines.append(f"{k} {etype} 2 0 1 " + " ".join(map(str, ids)))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n{len(node_lines)}\n" + "\n".join(node_lines) + "\n$EndNodes\n")
        fh.write(f"$Elements\n{len(elem_lines)}\n" + "\n".join(elem_lines) + "\n$EndElements\n")


def polynomial_charts(charts, order: int) -> list:
    """Replace charts by order-``order`` interpolants through their Gmsh nodes."""
    uv = gmsh_triangle_nodes(order)
    return [
        PolynomialChart.from_samples(uv, c(uv[:, 0], uv[:, 1]), order, label=c.label)[0]
        for c in charts
    ]
