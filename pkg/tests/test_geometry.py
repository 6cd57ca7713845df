import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mcflab.errors import SingularConfiguration
from mcflab.geometry import (
    GraphJet2,
    HypersurfacePatch,
    SpacetimeJet,
    arrival_time_A2,
    graph_A2,
    graph_mean_curvature,
    mcf_operator,
    normal_graph_metric,
    normal_graph_second_ff,
    parametrized_forms,
    shrinking_sphere_jet,
    spacetime_A2,
)
from mcflab.verify import normal_graph_errors, random_monge_patch

finite = st.floats(-10, 10, allow_nan=False)


def dense_operator(p, hess):
    """Independent path: g^{ij} u_ij with g = I + Du Du^T inverted densely."""
    g = np.eye(p.size) + np.outer(p, p)
    return np.einsum("ij,ij", np.linalg.inv(g), hess)


def test_operator_examples():
    assert mcf_operator(GraphJet2(0.0, np.zeros(2), np.eye(2))) == pytest.approx(2.0, abs=1e-15)
    assert mcf_operator(GraphJet2(0.0, np.array([0.3, -2.0]), np.zeros((2, 2)))) == 0.0
    assert mcf_operator(GraphJet2(0.0, np.array([1.0, 0.0]), np.eye(2))) == pytest.approx(1.5, abs=1e-15)


@given(arrays(float, 3, elements=finite), arrays(float, (3, 3), elements=finite))
def test_operator_matches_dense_contraction(p, m):
    hess = 0.5 * (m + m.T)
    got = mcf_operator(GraphJet2(0.0, p, hess))
    assert got == pytest.approx(dense_operator(p, hess), rel=1e-12, abs=1e-12 * (1 + np.abs(hess).max()))


def test_jet_hessian_is_stored_symmetric():
    jet = GraphJet2(0.0, np.zeros(2), np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert np.array_equal(jet.hessian, jet.hessian.T)


def test_mean_curvature_examples():
    assert graph_mean_curvature(GraphJet2(0.0, np.zeros(2), np.zeros((2, 2)))) == 0.0
    # unit sphere through the lowest point: u = 1 - sqrt(1 - |x|^2), Hessian I at 0
    assert graph_mean_curvature(GraphJet2(0.0, np.zeros(2), np.eye(2))) == pytest.approx(2.0)
    # upper hemisphere sqrt(1 - |x|^2) has Hessian -I at 0; opens downward
    assert abs(graph_mean_curvature(GraphJet2(1.0, np.zeros(2), -np.eye(2)))) == pytest.approx(2.0)
    # grim reaper: u'' = lam / cos^2 = 1 at x = 0
    assert graph_mean_curvature(GraphJet2(0.0, np.zeros(1), np.ones((1, 1)))) == pytest.approx(1.0)


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_hemisphere_mean_curvature_everywhere(x, y):
    if x * x + y * y > 0.8:
        return
    z = math.sqrt(1 - x * x - y * y)
    p = np.array([-x, -y]) / z
    hess = -(np.eye(2) / z + np.outer([x, y], [x, y]) / z**3)
    assert graph_mean_curvature(GraphJet2(z, p, hess)) == pytest.approx(-2.0, rel=1e-10)


def sphere_patch(height, center=(0.1, 0.2), spacing=2e-3):
    def embed(x):
        th, ph = x
        return np.array([math.cos(th) * math.cos(ph), math.cos(th) * math.sin(ph), math.sin(th)])

    def jac(x):
        th, ph = x
        return np.array([
            [-math.sin(th) * math.cos(ph), -math.cos(th) * math.sin(ph)],
            [-math.sin(th) * math.sin(ph), math.cos(th) * math.cos(ph)],
            [math.cos(th), 0.0],
        ])

    def hess(x):
        th, ph = x
        X = embed(x)
        out = np.zeros((3, 2, 2))
        out[:, 0, 0] = -X
        out[:, 0, 1] = out[:, 1, 0] = [math.sin(th) * math.sin(ph), -math.sin(th) * math.cos(ph), 0.0]
        out[:, 1, 1] = [-math.cos(th) * math.cos(ph), -math.cos(th) * math.sin(ph), 0.0]
        return out

    return HypersurfacePatch.from_parametrization(embed, jac, hess, embed, height, center, spacing)


def test_unit_sphere_has_h_equal_g():
    p = sphere_patch(lambda x: 0.0)
    assert np.allclose(p.second_ff, p.metric, atol=1e-13)
    assert np.allclose(p.weingarten, np.eye(2), atol=1e-12)


@pytest.mark.parametrize("d", [0.3, -0.5, 0.9])
def test_concentric_sphere(d):
    p = sphere_patch(lambda x: d)
    node = (4, 4)
    gN = p.metric[node]
    gM = normal_graph_metric(p, node)
    hM = normal_graph_second_ff(p, node)
    assert np.allclose(gM, (1 - d) ** 2 * gN, rtol=1e-12, atol=1e-14)
    # radius 1 - d sphere, outward normal kept: principal curvatures 1/(1-d)
    assert np.allclose(np.linalg.solve(gM, hM), np.eye(2) / (1 - d), rtol=1e-9)
    # and the direct parametrization agrees
    g0, h0 = parametrized_forms(p, node)
    assert np.allclose(hM, h0, rtol=1e-8, atol=1e-10)


def test_concentric_sphere_at_centre_is_singular():
    p = sphere_patch(lambda x: 1.0)
    with pytest.raises(SingularConfiguration):
        normal_graph_metric(p, (4, 4))


def test_zero_height_reduces_to_base():
    rng = np.random.default_rng(3)
    p = random_monge_patch(rng)
    p.height[...] = 0.0
    for node in p.interior_nodes()[:5]:
        assert np.array_equal(normal_graph_metric(p, node), p.metric[node])
        assert np.allclose(normal_graph_second_ff(p, node), p.second_ff[node], rtol=0, atol=1e-15)


def test_interior_only():
    p = random_monge_patch(np.random.default_rng(4))
    with pytest.raises(ValueError, match="boundary"):
        normal_graph_metric(p, (1, 4))


@pytest.mark.parametrize("seed", range(4))
def test_normal_graph_forms_match_parametrization(seed):
    rng = np.random.default_rng(100 + seed)
    em, es = normal_graph_errors(random_monge_patch(rng, dim=2 + seed % 2),
                                 nodes=[(4, 4)] if seed % 2 == 0 else [(4, 4, 4)])
    assert em <= 1e-8
    assert es <= 1e-6


def test_spacetime_examples():
    assert spacetime_A2(SpacetimeJet(0, 0, 0, 0)) == 0.0
    n, r = 3, 0.7
    q = 1 + n**2 / r**2
    expected = (n / r**2) / q + (n**2 / r**3) ** 2 / q**3
    assert spacetime_A2(shrinking_sphere_jet(n, r)) == pytest.approx(expected, rel=1e-15)
    base = SpacetimeJet(2.0, 1.0, 0.5, 0.3)
    double = SpacetimeJet(2.0, 1.0, 1.0, 0.3)
    assert spacetime_A2(double) - spacetime_A2(base) == pytest.approx(2 * 0.5 / 4, rel=1e-14)


@given(st.floats(0, 1e3), st.floats(-30, 30), st.floats(0, 1e3), st.floats(-1e3, 1e3))
def test_spacetime_dominates_spatial_term(a2, H, g2, dt):
    jet = SpacetimeJet(a2, H, g2, dt)
    assert spacetime_A2(jet) >= a2 / (1 + H * H)


def test_spacetime_jet_validation():
    with pytest.raises(ValueError):
        SpacetimeJet(-1.0, 0, 0, 0)
    with pytest.raises(ValueError):
        SpacetimeJet(1.0, 3.0, 0, 0, n=2)   # needs A2 >= 9/2


@pytest.mark.parametrize("n,r", [(2, 0.5), (3, 0.3), (4, 0.8)])
def test_sphere_track_matches_arrival_time_graph(n, r):
    tau = lambda y: (1 - y @ y) / (2 * n)
    p = np.zeros(n + 1)
    p[-1] = r
    fd = arrival_time_A2(tau, p, step=1e-3 * r)
    assert fd == pytest.approx(spacetime_A2(shrinking_sphere_jet(n, r)), rel=1e-4)


def test_graph_A2_paraboloid():
    # |A|^2 of a paraboloid |x|^2 / 2 at the vertex is n
    assert graph_A2(np.zeros(3), np.eye(3)) == pytest.approx(3.0)
