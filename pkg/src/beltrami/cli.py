"""Command-line experiment driver.

    beltrami --experiment sphere-convergence --p 4 --levels 48,192
    beltrami --experiment torus-convergence --p 8 --levels 32,128 --format json
    beltrami --experiment hodge --levels 128 --out hodge.json --format json
    beltrami --experiment gmsh-solve --mesh part.msh --p 4
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .analytic import (
    PointSources,
    SOURCE_SEED,
    VectorField,
    manufactured_rhs,
    random_sources,
    sphere_harmonic_on_mesh,
    tangential_part,
    tangential_rhs,
    torus_point_sources,
)
from .gmsh import polynomial_charts, read_gmsh
from .hodge import hodge_decompose
from .mesh import MAX_ORDER, build_mesh, sphere_charts, torus_charts
from .operators import OperatorMatrix, dump_matrix
from .quadrature import QuadConfig
from .solver import LaplaceBeltramiSolver, SolveError, SolverConfig, l2_surface_norm

log = logging.getLogger("beltrami")

EXPERIMENTS = ("sphere-convergence", "torus-convergence", "gmsh-solve", "hodge")
CSV_COLUMNS = ("p", "n_tri", "n_pts", "l2_error", "mean_psi", "iterations", "residual", "wall_time_s")
HODGE_COLUMNS = (
    "norm_F",
    "norm_grad_alpha",
    "norm_nx_grad_beta",
    "norm_harmonic",
    "div_harmonic",
    "div_nx_harmonic",
    "reconstruction",
)
DEFAULT_LEVELS = {
    "sphere-convergence": "48,192",
    "torus-convergence": "32,128",
    "hodge": "128",
    "gmsh-solve": "0",
}
# beyond this many nodes a run needs --allow-large
LARGE_N = 12000

BIOT_SAVART_SOURCE = (0.1, 0.2, 2.1)
BIOT_SAVART_DIRECTION = (0.37, 0.48, -0.80)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    p: int
    levels: tuple
    geom_order: int | None = None
    ell: int = 1
    m: int = 1
    mesh: str | None = None
    surface: str = "torus"
    solver: str = "lu"
    gmres_tol: float = 1e-14
    quad_tol: float = 1e-10
    far_rule: str = "adaptive"
    seed: int = SOURCE_SEED
    threads: int | None = None
    allow_large: bool = False
    dump_matrix: str | None = None

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not 1 <= self.p <= MAX_ORDER:
            raise ConfigError(f"--p must be in 1..{MAX_ORDER}")
        if self.geom_order is not None and not 1 <= self.geom_order <= 4:
            raise ConfigError("--geom-order must be in 1..4")
        if self.experiment == "gmsh-solve" and not self.mesh:
            raise ConfigError("gmsh-solve needs --mesh")
        if self.experiment == "sphere-convergence" and not (1 <= self.ell <= 20 and abs(self.m) <= self.ell):
            raise ConfigError("need 1 <= ell <= 20 and |m| <= ell")
        if self.far_rule not in ("adaptive", "smooth"):
            raise ConfigError("--far-rule must be adaptive or smooth")
        if not self.levels:
            raise ConfigError("--levels is empty")
        for lev in self.levels:
            if self.experiment in ("torus-convergence", "hodge") and self.surface == "torus":
                _torus_tiling(lev)
            elif self.experiment != "gmsh-solve":
                _sphere_level(lev)
        if self.threads is not None and self.threads < 1:
            raise ConfigError("--threads must be positive")
        QuadConfig(tol_adaptive=self.quad_tol)
        SolverConfig(method=self.solver, gmres_tol=self.gmres_tol)
        return self

    def quad(self) -> QuadConfig:
        return QuadConfig(tol_adaptive=self.quad_tol, adaptive_everywhere=self.far_rule == "adaptive")

    def solver_config(self, condition=False) -> SolverConfig:
        return SolverConfig(
            method=self.solver, gmres_tol=self.gmres_tol, quad=self.quad(), estimate_condition=condition
        )


def _sphere_level(value: int) -> int:
    # small numbers are refinement levels, larger ones triangle counts
    if value < 32:
        return value
    k = round(math.log(value / 48, 4)) if value >= 48 else -1
    if k < 0 or 48 * 4**k != value:
        raise ConfigError(f"sphere meshes have 48 * 4^k triangles, not {value}")
    return k


def _torus_tiling(value: int) -> int:
    if value < 32:
        return 4 * 2**value
    n = math.isqrt(value // 2)
    if 2 * n * n != value:
        raise ConfigError(f"torus meshes have 2 n^2 triangles, not {value}")
    return n


def _maybe_polynomial(charts, cfg):
    return charts if cfg.geom_order is None else polynomial_charts(charts, cfg.geom_order)


def _check_size(mesh, cfg):
    if mesh.n_pts > LARGE_N and not cfg.allow_large:
        raise ConfigError(
            f"{mesh.n_pts} nodes exceeds the desk-scale limit {LARGE_N}; pass --allow-large"
        )


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6e}"


def _row(mesh, cfg, err, report, wall, converged=True, extra=None):
    row = {
        "p": cfg.p,
        "n_tri": mesh.n_tri,
        "n_pts": mesh.n_pts,
        "l2_error": err,
        "mean_psi": abs(report.mean_psi) if report is not None else None,
        "iterations": report.iterations if report is not None else None,
        "residual": report.residual if report is not None else None,
        "wall_time_s": wall,
        "converged": converged,
    }
    if report is not None:
        row["condition"] = report.condition
    row.update(extra or {})
    return row


def _solve_level(mesh, f, exact, cfg, condition=False):
    t0 = time.perf_counter()
    solver = LaplaceBeltramiSolver(mesh, cfg.solver_config(condition))
    if cfg.dump_matrix:
        dump_matrix(OperatorMatrix("A", solver.A, mesh.fingerprint), f"{cfg.dump_matrix}.{mesh.n_tri}")
    try:
        report = solver.solve(f)
        ok = True
    except SolveError as exc:
        report, ok = exc.report, False
        log.error("solve failed on %d triangles: %s", mesh.n_tri, exc)
    wall = time.perf_counter() - t0
    err = l2_surface_norm(mesh, report.psi - exact) if exact is not None else None
    return _row(mesh, cfg, err, report, wall, ok)


def run_sphere(cfg):
    rows = []
    ell, m = cfg.ell, cfg.m
    for lev in cfg.levels:
        mesh = build_mesh(_maybe_polynomial(sphere_charts(_sphere_level(lev)), cfg), cfg.p)
        _check_size(mesh, cfg)
        f = sphere_harmonic_on_mesh(mesh, ell, m)
        if m == 0:
            f = f.real
        rows.append(_solve_level(mesh, f, -f / (ell * (ell + 1)), cfg))
    return rows


def run_torus(cfg):
    rows = []
    for lev in cfg.levels:
        n = _torus_tiling(lev)
        mesh = build_mesh(_maybe_polynomial(torus_charts(n, n), cfg), cfg.p)
        _check_size(mesh, cfg)
        src = torus_point_sources(mesh, seed=cfg.seed)
        f, exact = manufactured_rhs(mesh, src)
        rows.append(_solve_level(mesh, f, exact, cfg, condition=mesh.n_pts <= 3000))
    return rows


def run_gmsh(cfg):
    data = read_gmsh(cfg.mesh)
    mesh = build_mesh(data.charts, cfg.p)
    _check_size(mesh, cfg)
    X = mesh.positions
    c = X.mean(axis=0)
    rad = np.linalg.norm(X - c, axis=1).max()
    # sources on a sphere well outside the geometry, same construction as the torus test
    pts = c + random_sources(cfg.seed, 10, 1.0) * 2.0 * rad
    f, exact = manufactured_rhs(mesh, PointSources(pts))
    scale = 1.0 / l2_surface_norm(mesh, f)
    row = _solve_level(mesh, scale * f, scale * exact, cfg)
    row["skipped_elements"] = sum(data.skipped.values())
    row["max_fit_residual"] = max(data.residuals)
    return [row]


def run_hodge(cfg):
    rows = []
    for lev in cfg.levels:
        if cfg.surface == "torus":
            n = _torus_tiling(lev)
            charts = torus_charts(n, n)
        else:
            charts = sphere_charts(_sphere_level(lev))
        mesh = build_mesh(_maybe_polynomial(charts, cfg), cfg.p)
        _check_size(mesh, cfg)
        t0 = time.perf_counter()
        field = VectorField.biot_savart(BIOT_SAVART_DIRECTION, BIOT_SAVART_SOURCE)
        B = field.value(mesh.positions)
        scale = 1.0 / l2_surface_norm(mesh, np.cross(mesh.normals, B))
        field = VectorField.biot_savart(BIOT_SAVART_DIRECTION, BIOT_SAVART_SOURCE, scale)
        F = tangential_part(mesh, field.value(mesh.positions))
        div_F, div_nxF = tangential_rhs(mesh, field)
        ok = True
        try:
            res = hodge_decompose(mesh, F, cfg.solver_config(), div_F=div_F, div_nxF=div_nxF)
            report, diag = res.reports[0], res.diagnostics
        except SolveError as exc:
            ok, report, diag = False, exc.report, {}
        wall = time.perf_counter() - t0
        rows.append(_row(mesh, cfg, None, report, wall, ok, {k: diag.get(k) for k in HODGE_COLUMNS}))
    return rows


RUNNERS = {
    "sphere-convergence": run_sphere,
    "torus-convergence": run_torus,
    "gmsh-solve": run_gmsh,
    "hodge": run_hodge,
}


def run_experiment(cfg: ExperimentConfig):
    """Run the experiment; returns ``(rows, all_converged)``."""
    cfg.validate()
    if cfg.threads:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=cfg.threads):
            rows = RUNNERS[cfg.experiment](cfg)
    else:
        rows = RUNNERS[cfg.experiment](cfg)
    return rows, all(r["converged"] for r in rows)


def format_csv(rows, cfg) -> str:
    cols = list(CSV_COLUMNS)
    if cfg.experiment == "hodge":
        cols += list(HODGE_COLUMNS)
    buf = io.StringIO()
    buf.write(f"# beltrami {__version__}\n")
    buf.write(f"# config {json.dumps(dataclasses.asdict(cfg), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def format_json(rows, cfg, converged) -> str:
    doc = {
        "version": f"beltrami {__version__}",
        "config": dataclasses.asdict(cfg),
        "converged": converged,
        "rows": rows,
    }
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="beltrami", description=__doc__.splitlines()[0])
    ap.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    ap.add_argument("--p", type=int, default=None, help="density order (default 4 on spheres, 8 otherwise)")
    ap.add_argument("--geom-order", type=int, default=None, help="replace analytic charts by order-q polynomials")
    ap.add_argument("--levels", type=_int_list, default=None,
                    help="comma list; values < 32 are refinement levels, others triangle counts")
    ap.add_argument("--ell", type=int, default=1)
    ap.add_argument("--m", type=int, default=1)
    ap.add_argument("--mesh", default=None, help="Gmsh 2.2 ASCII file for gmsh-solve")
    ap.add_argument("--surface", choices=("torus", "sphere"), default="torus", help="surface for hodge")
    ap.add_argument("--solver", choices=("lu", "gmres"), default="lu")
    ap.add_argument("--gmres-tol", type=float, default=1e-14)
    ap.add_argument("--quad-tol", type=float, default=1e-10)
    ap.add_argument("--far-rule", choices=("adaptive", "smooth"), default="adaptive",
                    help="adaptive quadrature for every non-self pair, or smooth rule when well separated")
    ap.add_argument("--seed", type=int, default=SOURCE_SEED)
    ap.add_argument("--out", default="-")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--allow-large", action="store_true", help=f"permit runs above {LARGE_N} nodes")
    ap.add_argument("--dump-matrix", default=None, help="write A as raw float64 to PATH.<n_tri>")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args) -> ExperimentConfig:
    p = args.p if args.p is not None else (4 if args.experiment == "sphere-convergence" else 8)
    levels = args.levels or _int_list(DEFAULT_LEVELS[args.experiment])
    return ExperimentConfig(
        experiment=args.experiment,
        p=p,
        levels=tuple(levels),
        geom_order=args.geom_order,
        ell=args.ell,
        m=args.m,
        mesh=args.mesh,
        surface=args.surface,
        solver=args.solver,
        gmres_tol=args.gmres_tol,
        quad_tol=args.quad_tol,
        far_rule=args.far_rule,
        seed=args.seed,
        threads=args.threads,
        allow_large=args.allow_large,
        dump_matrix=args.dump_matrix,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    stage = "config"
    try:
        cfg = config_from_args(args).validate()
        stage = "run"
        rows, ok = run_experiment(cfg)
        stage = "output"
        text = format_csv(rows, cfg) if args.format == "csv" else format_json(rows, cfg, ok)
        if args.out == "-":
            sys.stdout.write(text)
        else:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
    except Exception as exc:  # structured failure report
        err = {"error": type(exc).__name__, "stage": stage, "message": str(exc)}
        sys.stderr.write(json.dumps(err) + "\n")
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
