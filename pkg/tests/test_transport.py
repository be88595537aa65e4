import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.exceptions import LeftChart, NotClosed
from src.services.manifold_service import build_manifold, norm
from src.services.transport_service import (
    _wrapped_difference,
    chart_circle,
    exp_map,
    geodesic_speed_drift,
    integrate_geodesic,
    latitude_circle,
    loop_holonomy,
    parallel_transport,
    serialize_path,
)


def test_euclidean_geodesic_is_a_segment(e3):
    path = integrate_geodesic(e3, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 2.0)
    assert not path.left_chart
    assert np.allclose(path.points[-1], [2.0, 0.0, 0.0], atol=1e-10)
    assert path.s[-1] == pytest.approx(2.0)

def test_exp_map_in_euclidean_space(e3):
    assert np.allclose(exp_map(e3, [1.0, 2.0, 3.0], [0.5, -0.5, 1.0]), [1.5, 1.5, 4.0], atol=1e-10)

def test_great_circle_closes_on_the_sphere(s3):
    # stereographic chart: 4 I at the origin, so this vector has unit length
    v0 = np.array([0.5, 0.0, 0.0])
    quarter = exp_map(s3, [0.0, 0.0, 0.0], v0 * math.pi / 2)
    # a quarter great circle lands on the unit chart sphere
    assert np.linalg.norm(quarter) == pytest.approx(1.0, abs=1e-7)

@pytest.mark.parametrize("kind,factor", [("sphere3", None), ("hyperbolic3", None), ("product", "sphere2")])
def test_geodesics_keep_unit_speed(kind, factor, rng):
    M = build_manifold(kind, factor=factor)
    p = np.array([0.1, 0.2, 0.0])
    for _ in range(3):
        w = rng.normal(size=3)
        path = integrate_geodesic(M, p, w / norm(M, p, w), 1.0).require_complete()
        assert geodesic_speed_drift(path) < 1e-6

def test_exp_semigroup(s3):
    p = np.array([0.1, -0.2, 0.05])
    v = np.array([0.3, 0.1, -0.2])
    v = v / norm(s3, p, v)
    full = integrate_geodesic(s3, p, v, 1.1)
    first = integrate_geodesic(s3, p, v, 0.6)
    q, w = first.points[-1], first.tangents[-1]
    second = integrate_geodesic(s3, q, w / norm(s3, q, w), 0.5)
    assert np.allclose(full.points[-1], second.points[-1], atol=1e-7)

def test_geodesic_leaving_the_ball_is_truncated(h3):
    path = integrate_geodesic(h3, [0.0, 0.0, 0.0], [0.5, 0.0, 0.0], 20.0)
    assert path.left_chart
    assert path.s[-1] < 20.0
    with pytest.raises(LeftChart):
        path.require_complete()

@given(st.floats(min_value=-1, max_value=1), st.floats(min_value=-1, max_value=1), st.floats(min_value=-1, max_value=1))
@settings(max_examples=15, deadline=None)
def test_transport_preserves_inner_products(a, b, c):
    M = build_manifold("hyperbolic3")
    if abs(a) + abs(b) + abs(c) < 1e-3:
        return
    v0 = np.array([0.0, 1.5, 0.5])
    path = integrate_geodesic(M, [0.1, 0.0, 0.0], v0 / norm(M, [0.1, 0.0, 0.0], v0), 0.8)
    p0 = path.points[0]
    V0 = np.array([[a, b, c], [0.2, -0.4, 1.0]])
    W = parallel_transport(M, path, V0)
    g0 = M.chart.metric(p0)
    g1 = M.chart.metric(path.points[-1])
    assert W[-1, 0] @ g1 @ W[-1, 1] == pytest.approx(V0[0] @ g0 @ V0[1], abs=1e-8)
    assert W[-1, 0] @ g1 @ W[-1, 0] == pytest.approx(V0[0] @ g0 @ V0[0], abs=1e-8)

def test_geodesic_tangent_is_parallel(s3):
    path = integrate_geodesic(s3, [0.0, 0.0, 0.0], [0.0, 0.5, 0.0], 1.5)
    W = parallel_transport(s3, path, path.tangents[0])
    assert np.allclose(W, path.tangents, atol=1e-7)

def test_euclidean_transport_is_constant(e3):
    loop = chart_circle(e3, 1.0)
    W = parallel_transport(e3, loop, [0.3, -0.2, 0.9])
    assert np.allclose(W, [0.3, -0.2, 0.9], atol=1e-12)
    assert loop_holonomy(e3, loop) < 1e-6

@pytest.mark.parametrize("colatitude", [math.pi / 6, math.pi / 4, math.pi / 3])
def test_latitude_circle_holonomy_is_cap_area(s2, colatitude):
    loop = latitude_circle(s2, colatitude)
    expected = 2 * math.pi * (1.0 - math.cos(colatitude))
    assert loop_holonomy(s2, loop) == pytest.approx(expected, abs=1e-4)

def test_small_circle_holonomy_in_the_hyperbolic_plane(h2):
    rho = 0.3
    d = 2.0 * math.atanh(rho)
    loop = chart_circle(h2, rho)
    assert loop_holonomy(h2, loop) == pytest.approx(2 * math.pi * (math.cosh(d) - 1.0), abs=1e-4)

def test_open_path_is_not_a_loop(s3):
    path = integrate_geodesic(s3, [0.0, 0.0, 0.0], [0.5, 0.0, 0.0], 1.0)
    with pytest.raises(NotClosed):
        loop_holonomy(s3, path)

def test_longitude_difference_wraps(s2):
    d = _wrapped_difference(s2, np.array([0.0, -math.pi + 0.01]), np.array([0.0, math.pi - 0.01]))
    assert d[1] == pytest.approx(-0.02, abs=1e-12)

def test_serialized_path_has_header_and_rows(e3, tmp_path):
    path = integrate_geodesic(e3, [0.0, 0.0, 0.0], [0.0, 1.0, 0.0], 0.5)
    out = serialize_path(path, tmp_path / "path.csv")
    lines = out.read_text().splitlines()
    assert lines[0] == "s,x1,x2,x3,T1,T2,T3"
    assert len(lines) == path.n + 1
    # 17 significant digits reproduce the samples exactly
    assert float(lines[-1].split(",")[2]) == path.points[-1][1]
