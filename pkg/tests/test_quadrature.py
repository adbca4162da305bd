import numpy as np
import pytest
from scipy import integrate

from beltrami.geometry import PolynomialChart
from beltrami.kernels import ALL_KINDS, KernelKind
from beltrami.mesh import build_reference_element, sphere_charts, torus_charts
from beltrami.quadrature import (
    AdaptiveQuadratureError,
    QuadConfig,
    SourcePatch,
    integrate_far,
    integrate_near,
    integrate_self,
    integrate_self_at,
    polar_rule,
    smooth_rule,
)

K = KernelKind
SQRT2 = np.sqrt(2.0)


def _flat():
    return PolynomialChart.flat([0, 0, 0], [1, 0, 0], [0, 1, 0])


def test_smooth_rule_integrates_polynomials():
    x, w = smooth_rule(12)
    assert w.sum() == pytest.approx(0.5, abs=1e-14)
    # int_T0 u^a v^b = a! b! / (a + b + 2)!
    assert w @ (x[:, 0] ** 5 * x[:, 1] ** 4) == pytest.approx(120 * 24 / 39916800, rel=1e-12)


@pytest.mark.parametrize("apex", [(0.3, 0.2), (0.0, 0.0), (0.5, 0.0), (0.25, 0.75)])
def test_polar_rule_integrates_smooth_and_singular(apex):
    uv, w = polar_rule(apex, 12, 12)
    assert w.sum() == pytest.approx(0.5, abs=1e-12)
    assert w @ (uv[:, 0] ** 2 * uv[:, 1]) == pytest.approx(2 / 120, abs=1e-12)
    assert np.all(uv >= -1e-14) and np.all(uv.sum(1) <= 1 + 1e-14)


def test_polar_rule_with_metric_keeps_area():
    uv, w = polar_rule((0.2, 0.3), 10, 10, metric=[[4.0, 1.0], [1.0, 1.0]])
    assert w.sum() == pytest.approx(0.5, abs=1e-12)


def test_far_and_near_agree_for_distant_target():
    chart = _flat()
    for kind in ALL_KINDS:
        for ell in (0, 3, 14):
            f = integrate_far(kind, [0, 0, 10], chart, ell, 4, target_normal=[0, 0, 1])
            n = integrate_near(kind, [0, 0, 10], chart, ell, 4, target_normal=[0, 0, 1])
            assert abs(f - n) <= 1e-10


def test_single_layer_far_value():
    # distant target sees a point charge of total mass sqrt(2)/2
    v = integrate_far(K.SINGLE, [0, 0, 1000], _flat(), 0, 4)
    assert v == pytest.approx(SQRT2 / 2 / (4 * np.pi * 1000), rel=1e-6)


def test_in_plane_double_layer_vanishes():
    chart = _flat()
    assert abs(integrate_near(K.DOUBLE, [2.0, 2.0, 0.0], chart, 0, 4)) <= 1e-12
    assert abs(integrate_far(K.DOUBLE, [0.4, -0.5, 0.0], chart, 2, 4)) <= 1e-12
    ref = build_reference_element(4)
    for node in (0, 7):
        assert abs(integrate_self(K.DOUBLE, node, chart, 5, ref)) <= 1e-12


def test_near_target_stable_in_depth():
    chart = _flat()
    tgt = [0.3, 0.3, 1e-3]
    vals = [
        integrate_near(K.SINGLE, tgt, chart, 4, 4, cfg=QuadConfig(max_depth=d)) for d in (20, 30)
    ]
    assert abs(vals[0] - vals[1]) <= 1e-9


def test_near_close_target_matches_scipy():
    # oracle: iterated scipy quad of 1/(4 pi r) times K_00 = sqrt(2)
    h = 0.05
    tgt = np.array([0.3, 0.3, h])

    def f(v, u):
        return SQRT2 / (4 * np.pi * np.sqrt((u - tgt[0]) ** 2 + (v - tgt[1]) ** 2 + h * h))

    exact, _ = integrate.dblquad(f, 0, 1, 0, lambda u: 1 - u, epsabs=1e-13, epsrel=1e-13)
    got = integrate_near(K.SINGLE, tgt, _flat(), 0, 4)
    assert got == pytest.approx(exact, abs=1e-9)


def test_depth_limit_raises():
    cfg = QuadConfig(max_depth=2, tol_adaptive=1e-14)
    with pytest.raises(AdaptiveQuadratureError) as info:
        integrate_near(K.SINGLE, [0.3, 0.3, 1e-4], _flat(), 0, 4, cfg=cfg)
    assert info.value.estimate.shape == (1, 1, 15)


def test_vertex_self_integral():
    # oracle: polar form int_0^{pi/2} R(theta) dtheta, R = 1/(cos + sin)
    angular, _ = integrate.quad(lambda t: 1.0 / (np.cos(t) + np.sin(t)), 0, np.pi / 2, epsabs=1e-14)
    expected = SQRT2 * angular / (4 * np.pi)
    assert expected == pytest.approx(SQRT2 * SQRT2 * np.log1p(SQRT2) / (4 * np.pi), rel=1e-13)
    got = integrate_self_at(K.SINGLE, [0.0, 0.0], _flat(), 0, 4, 12, 12)
    assert got == pytest.approx(expected, rel=1e-12)


def test_interior_self_integral_matches_scipy():
    # singular point in the interior: scipy quad over each polar wedge
    a = np.array([0.2, 0.3])
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    total = 0.0
    for k in range(3):
        A, B = verts[k] - a, verts[(k + 1) % 3] - a
        t0, t1 = np.arctan2(A[1], A[0]), np.arctan2(B[1], B[0])
        if t1 < t0:
            t1 += 2 * np.pi
        nrm = np.array([B[1] - A[1], A[0] - B[0]])
        c = nrm @ A

        def R(t):
            return c / (nrm @ np.array([np.cos(t), np.sin(t)]))

        total += integrate.quad(R, t0, t1, epsabs=1e-13, epsrel=1e-13)[0]
    expected = SQRT2 * total / (4 * np.pi)
    got = integrate_self_at(K.SINGLE, a, _flat(), 0, 4, 12, 12)
    assert got == pytest.approx(expected, rel=1e-11)


def _self_change(chart, p, cfg):
    ref = build_reference_element(p)
    patch = SourcePatch(chart, p, cfg)
    nr, na = cfg.polar_orders(p)
    a = patch.singular(ALL_KINDS, ref.nodes, nr, na)
    b = patch.singular(ALL_KINDS, ref.nodes, 2 * nr, 2 * na)
    return np.abs(a - b).max()


@pytest.mark.parametrize("p", [4, 8])
def test_self_rule_converged_under_doubling(p):
    cfg = QuadConfig()
    charts = [sphere_charts(0)[0], sphere_charts(0)[29], sphere_charts(1)[100], torus_charts(4, 4)[5]]
    for chart in charts:
        assert _self_change(chart, p, cfg) <= 10 * cfg.tol_adaptive


def test_regimes_agree_at_boundary_distance():
    # a target just inside the near radius is also accurate with a rich far rule
    chart = sphere_charts(1)[10]
    patch = SourcePatch(chart, 4)
    direction = patch.centroid / np.linalg.norm(patch.centroid)
    xt = (patch.centroid + 2.4 * patch.diameter * direction)[None]
    nt = direction[None]
    near = patch.near(ALL_KINDS, xt, nt)
    rich = SourcePatch(chart, 4, QuadConfig(rule_degree=40)).far(ALL_KINDS, xt, nt)
    assert np.abs(near - rich).max() <= 1e-10


def _sphere_sum(kind, x, n_x):
    total = 0.0
    for chart in sphere_charts(0):
        patch = SourcePatch(chart, 6)
        total += patch.near([kind], np.array([x], float), np.array([n_x], float))[0, 0, 0]
    return total / SQRT2  # density 1 = K_00 / sqrt(2)


def test_exterior_single_layer_of_unit_density():
    assert _sphere_sum(K.SINGLE, [0, 0, 2], [0, 0, 1]) == pytest.approx(0.5, abs=1e-9)


def test_double_layer_jump():
    n = [0.0, 0.0, 1.0]
    inside = _sphere_sum(K.DOUBLE, [0, 0, 0.9], n)
    outside = _sphere_sum(K.DOUBLE, [0, 0, 1.1], n)
    assert inside == pytest.approx(-1.0, abs=1e-9)
    assert outside == pytest.approx(0.0, abs=1e-9)
    # on the surface the principal value is the average of the two limits
    ref = build_reference_element(6)
    on = 0.0
    x0 = sphere_charts(0)[0](ref.nodes[:1, 0], ref.nodes[:1, 1])[0]
    for t, chart in enumerate(sphere_charts(0)):
        patch = SourcePatch(chart, 6)
        if t == 0:
            nr, na = QuadConfig().polar_orders(6)
            on += patch.singular([K.DOUBLE], ref.nodes[:1], nr, na)[0, 0, 0]
        else:
            on += patch.near([K.DOUBLE], x0[None], x0[None])[0, 0, 0]
    assert on / SQRT2 == pytest.approx(-0.5, abs=1e-8)


def test_config_validation():
    with pytest.raises(ValueError):
        QuadConfig(tol_adaptive=0)
    with pytest.raises(ValueError):
        QuadConfig(near_factor=1.0)
    with pytest.raises(ValueError):
        QuadConfig(n_polar_radial=3).polar_orders(4)
    assert QuadConfig().polar_orders(8) == (16, 16)
