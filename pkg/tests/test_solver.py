import numpy as np
import pytest
import scipy.linalg

from beltrami.analytic import sphere_harmonic_on_mesh
from beltrami.mesh import sphere_mesh
from beltrami.solver import (
    GMRESStagnation,
    LaplaceBeltramiSolver,
    MeanNotZeroWarning,
    SolveError,
    SolverConfig,
    condition_number,
    gmres,
    l2_surface_norm,
    lb_solve,
    weighted_mean,
)


@pytest.fixture(scope="module")
def sphere_solver():
    return LaplaceBeltramiSolver(sphere_mesh(0, 4))


def test_gmres_identity_one_iteration():
    r = gmres(np.eye(5), np.arange(1.0, 6.0))
    assert r.converged and r.iterations == 1
    assert np.allclose(r.x, np.arange(1.0, 6.0), atol=1e-15)


def test_gmres_diagonal_two_iterations():
    r = gmres(np.diag([1.0, 2.0]), np.array([1.0, 1.0]))
    assert r.converged and r.iterations <= 2
    assert np.allclose(r.x, [1.0, 0.5], atol=1e-14)


def test_gmres_zero_rhs():
    r = gmres(np.eye(3), np.zeros(3))
    assert r.converged and r.iterations == 0 and not r.x.any()


def test_gmres_matches_direct_solve():
    rng = np.random.default_rng(0)
    A = np.eye(60) + 0.3 * rng.normal(size=(60, 60)) / np.sqrt(60)
    b = rng.normal(size=60)
    r = gmres(A, b, tol=1e-13)
    assert r.converged
    assert np.abs(r.x - np.linalg.solve(A, b)).max() <= 1e-11
    assert all(a >= b for a, b in zip(r.history, r.history[1:]))


def test_gmres_accepts_callable():
    r = gmres(lambda v: 3.0 * v, np.ones(4))
    assert np.allclose(r.x, 1 / 3)


def test_gmres_stagnation_on_cyclic_shift():
    # GMRES makes no progress on the cyclic shift until the last iteration
    n = 120
    P = np.roll(np.eye(n), 1, axis=0)
    b = np.zeros(n)
    b[0] = 1.0
    r = gmres(P, b, stagnation_window=20)
    assert not r.converged and r.reason == "stagnation"
    assert r.iterations == 20


def test_gmres_iteration_cap():
    P = np.roll(np.eye(30), 1, axis=0)
    b = np.eye(30)[0]
    r = gmres(P, b, max_iter=5)
    assert not r.converged and r.reason == "max_iter" and r.iterations == 5


def test_norms_on_sphere():
    mesh = sphere_mesh(1, 8)
    assert l2_surface_norm(mesh, np.ones(mesh.n_pts)) == pytest.approx(np.sqrt(4 * np.pi), rel=1e-12)
    y = sphere_harmonic_on_mesh(mesh, 1, 1)
    assert l2_surface_norm(mesh, y) == pytest.approx(1.0, abs=1e-8)
    assert abs(weighted_mean(mesh, y)) <= 1e-8
    field = np.stack([y, y, 0 * y], 1)
    assert l2_surface_norm(mesh, field) == pytest.approx(np.sqrt(2.0), abs=1e-8)


def test_zero_rhs_gives_zero(sphere_solver):
    rep = sphere_solver.solve(np.zeros(sphere_solver.mesh.n_pts))
    assert not rep.psi.any() and rep.residual == 0.0


def test_real_harmonic(sphere_solver):
    mesh = sphere_solver.mesh
    y = sphere_harmonic_on_mesh(mesh, 1, 0).real
    rep = sphere_solver.solve(y)
    assert l2_surface_norm(mesh, rep.psi + y / 2) <= 5e-5
    assert abs(rep.mean_psi) <= 1e-10
    assert rep.residual <= 1e-12


def test_complex_rhs_is_split(sphere_solver):
    mesh = sphere_solver.mesh
    y = sphere_harmonic_on_mesh(mesh, 2, 1)
    rep = sphere_solver.solve(y)
    assert np.iscomplexobj(rep.psi)
    re = sphere_solver.solve(y.real).psi
    im = sphere_solver.solve(y.imag).psi
    assert np.abs(rep.psi - (re + 1j * im)).max() <= 1e-14
    assert l2_surface_norm(mesh, rep.psi + y / 6) <= 1e-4


def test_lu_and_gmres_agree(sphere_solver):
    mesh = sphere_solver.mesh
    y = sphere_harmonic_on_mesh(mesh, 3, 2).real
    lu = sphere_solver.solve(y)
    r = gmres(sphere_solver.A, sphere_solver.S @ y, tol=1e-14)
    assert r.converged and r.iterations <= 60
    assert np.abs(sphere_solver.S @ r.x - lu.psi).max() <= 1e-10


def test_gmres_solver_path():
    mesh = sphere_mesh(0, 2)
    y = sphere_harmonic_on_mesh(mesh, 1, 0).real
    a = lb_solve(mesh, y, "gmres")
    b = lb_solve(mesh, y, "lu")
    assert a.method == "gmres" and a.iterations > 0 and a.converged
    assert np.abs(a.psi - b.psi).max() <= 1e-10
    s = a.summary()
    assert s["iterations"] == a.iterations and "assemble_s" in s["timings"]


def test_gmres_failure_raises_with_report():
    mesh = sphere_mesh(0, 2)
    y = sphere_harmonic_on_mesh(mesh, 2, 0).real
    cfg = SolverConfig(method="gmres", max_iter=3)
    with pytest.raises(SolveError) as info:
        LaplaceBeltramiSolver(mesh, cfg).solve(y)
    assert info.value.report is not None and not info.value.report.converged
    cfg = SolverConfig(method="gmres", stagnation_window=1)
    with pytest.raises(GMRESStagnation):
        LaplaceBeltramiSolver(mesh, cfg).solve(y)


def test_nonzero_mean_warns(sphere_solver):
    # the W term turns (Lap + W) psi = f into Lap psi = f - mean f, int psi = int f / area
    mesh = sphere_solver.mesh
    z = mesh.positions[:, 2]
    with pytest.warns(MeanNotZeroWarning):
        rep = sphere_solver.solve(np.ones(mesh.n_pts) + z)
    assert rep.mean_psi == pytest.approx(1.0, abs=1e-6)
    shift = 1.0 / mesh.area
    assert l2_surface_norm(mesh, rep.psi - shift + z / 2) <= 5e-5


def test_bad_rhs(sphere_solver):
    with pytest.raises(ValueError):
        sphere_solver.solve(np.zeros(3))
    f = np.zeros(sphere_solver.mesh.n_pts)
    f[0] = np.nan
    with pytest.raises(ValueError):
        sphere_solver.solve(f)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(method="cg")
    with pytest.raises(ValueError):
        SolverConfig(gmres_tol=0.0)


def test_condition_number_paths():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(40, 40))
    assert condition_number(A) == pytest.approx(np.linalg.cond(A), rel=1e-10)
    n = 3001
    D = np.diag(np.arange(1.0, n + 1))
    est = condition_number(D, scipy.linalg.lu_factor(D))
    assert est == pytest.approx(float(n), rel=1e-12)
