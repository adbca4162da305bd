import numpy as np
import pytest

from beltrami import koornwinder
from beltrami.mesh import (
    MAX_ORDER,
    build_mesh,
    build_reference_element,
    sphere_mesh,
    torus_charts,
    torus_mesh,
)


@pytest.mark.parametrize("p", range(1, MAX_ORDER + 1))
def test_reference_element_invariants(p):
    ref = build_reference_element(p)
    assert ref.n_pol == (p + 1) * (p + 2) // 2
    assert np.abs(ref.U @ ref.V - np.eye(ref.n_pol)).max() < 1e-10
    assert np.all(ref.weights > 0)
    assert np.all(ref.nodes >= 0) and np.all(ref.nodes.sum(1) <= 1)
    # weights integrate every mode: sqrt(2) * area for K_00, zero otherwise
    integrals = ref.weights @ ref.V
    exact = np.zeros(ref.n_pol)
    exact[0] = np.sqrt(2.0) / 2.0
    assert np.abs(integrals - exact).max() < 1e-10


@pytest.mark.parametrize("p", range(1, MAX_ORDER + 1))
def test_interpolation_reproduces_polynomials(p):
    ref = build_reference_element(p)
    rng = np.random.default_rng(p)
    c = rng.normal(size=koornwinder.n_modes(p))
    vals = ref.V @ c
    u, v = rng.uniform(0, 0.5, 20), rng.uniform(0, 0.5, 20)
    exact = koornwinder.vandermonde(p, u, v) @ c
    assert np.abs(ref.interpolate(vals, u, v) - exact).max() < 1e-10 * np.abs(c).sum()


def test_interpolate_u2v2():
    ref = build_reference_element(4)
    f = ref.nodes[:, 0] ** 2 * ref.nodes[:, 1] ** 2
    assert ref.interpolate(f, [1 / 3], [1 / 3])[0] == pytest.approx(1 / 81, abs=1e-13)


@pytest.mark.parametrize("p", [0, 13, 2.5])
def test_unsupported_orders(p):
    with pytest.raises(ValueError):
        build_reference_element(p)


def test_sphere_counts():
    assert sphere_mesh(0, 4).n_tri == 48
    assert sphere_mesh(0, 4).n_pts == 720
    assert sphere_mesh(1, 4).n_tri == 192
    assert sphere_mesh(0, 8).n_pts == 2160


def test_sphere_area_level2():
    mesh = sphere_mesh(2, 8)
    assert mesh.area == pytest.approx(4 * np.pi, rel=1e-12)


def test_sphere_area_converges():
    errs = [abs(sphere_mesh(k, 4).area - 4 * np.pi) for k in range(3)]
    assert errs[0] / max(errs[1], 1e-15) > 2**4


def test_sphere_normals_and_curvature():
    mesh = sphere_mesh(0, 6, radius=2.0, center=(1.0, 0.0, -1.0))
    rel = mesh.positions - np.array([1.0, 0.0, -1.0])
    assert np.allclose(np.linalg.norm(rel, axis=1), 2.0)
    assert np.allclose(mesh.normals, rel / 2.0, atol=1e-12)
    assert np.allclose(mesh.curvature, 0.5)


def test_torus_counts_and_area():
    mesh = torus_mesh(4, p=8)
    assert mesh.n_tri == 32 and mesh.n_pts == 1440
    m128 = torus_mesh(8, p=8)
    assert m128.area == pytest.approx(12 * np.pi**2, rel=1e-10)


def test_torus_normals_point_out_of_tube():
    mesh = torus_mesh(4, p=4)
    x = mesh.positions
    rho = np.hypot(x[:, 0], x[:, 1])
    core = np.stack([3 * x[:, 0] / rho, 3 * x[:, 1] / rho, 0 * rho], 1)
    assert np.all(np.einsum("ij,ij->i", mesh.normals, x - core) > 0.99)


def test_torus_seams_coincide():
    charts = torus_charts(4, 4)
    corners = np.concatenate([c.vertices for c in charts])
    # every vertex of the tiling is shared by several triangles
    d = np.linalg.norm(corners[:, None] - corners[None], axis=-1)
    partners = (d < 1e-14).sum(1)
    assert partners.min() >= 3


def test_global_weights_and_fingerprint():
    mesh = sphere_mesh(0, 3)
    assert mesh.weights.shape == (mesh.n_pts,)
    assert mesh.per_element(mesh.weights).shape == (48, 10)
    other = sphere_mesh(0, 3)
    assert other.fingerprint == mesh.fingerprint
    assert sphere_mesh(0, 4).fingerprint != mesh.fingerprint


def test_permuted_mesh_relabels_nodes():
    mesh = sphere_mesh(0, 2)
    order = np.random.default_rng(0).permutation(mesh.n_tri)
    pm = mesh.permuted(order)
    assert np.allclose(pm.per_element(pm.positions), mesh.per_element(mesh.positions)[order])


def test_build_mesh_accepts_reference_element():
    ref = build_reference_element(3)
    mesh = build_mesh(torus_charts(2, 2), ref)
    assert mesh.ref is ref
