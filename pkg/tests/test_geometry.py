import numpy as np
import pytest

from occlearn.geometry import (
    GeodesicPath,
    GeodesicShootingError,
    MetricField,
    ShootingConfig,
    christoffel,
    constant_metric,
    estimate_rate,
    euclidean_metric,
    geodesic_distance,
    geodesic_step_euler,
    halfplane_metric,
    integrate_geodesic,
    path_length,
    polar_metric,
)
from occlearn.tensor import Rng


def halfplane_geodesic(t):
    """Closed-form unit-speed geodesic from (0, 1) with v0 = (1, 0)."""
    return np.array([np.tanh(t), 1.0 / np.cosh(t)])


def halfplane_distance(p, q):
    """arccosh formula for the hyperbolic upper half-plane."""
    num = (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2
    return np.arccosh(1.0 + num / (2.0 * p[1] * q[1]))


def test_constant_metric_has_zero_symbols():
    gamma = christoffel(euclidean_metric(3), np.array([0.3, -0.2, 1.0]))
    assert np.all(gamma == 0.0)


def test_polar_christoffel_closed_form_at_r2():
    gamma = christoffel(polar_metric(), np.array([2.0, 0.7]))
    expected = np.zeros((2, 2, 2))
    expected[0, 1, 1] = -2.0      # r index 0, phi index 1: Gamma^r_pp = -r
    expected[1, 0, 1] = 0.5       # Gamma^phi_rp = 1/r
    expected[1, 1, 0] = 0.5
    assert np.max(np.abs(gamma - expected)) <= 1e-5


def test_halfplane_christoffel_closed_form_at_y1():
    gamma = christoffel(halfplane_metric(), np.array([0.4, 1.0]))
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 1] = -1.0      # Gamma^x_xy = -1/y
    expected[0, 1, 0] = -1.0
    expected[1, 0, 0] = 1.0       # Gamma^y_xx = 1/y
    expected[1, 1, 1] = -1.0      # Gamma^y_yy = -1/y
    assert np.max(np.abs(gamma - expected)) <= 1e-5


def test_christoffel_lower_symmetry_at_random_points():
    rng = Rng(55)
    for g, sampler in (
        (polar_metric(), lambda: np.array([rng.uniform(0.5, 3), rng.uniform(-2, 2)])),
        (halfplane_metric(), lambda: np.array([rng.uniform(-2, 2), rng.uniform(0.3, 3)])),
    ):
        for _ in range(100):
            gamma = christoffel(g, sampler())
            assert np.max(np.abs(gamma - gamma.transpose(0, 2, 1))) <= 1e-8


def test_christoffel_rejects_bad_metrics():
    asym = MetricField(dim=2, evaluate=lambda x: np.array([[1.0, 0.2], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="symmetric"):
        christoffel(asym, np.zeros(2))
    indef = MetricField(dim=2, evaluate=lambda x: np.diag([1.0, -1.0]))
    with pytest.raises(ValueError, match="positive-definite"):
        christoffel(indef, np.zeros(2))


def test_euler_step_identity_metric_straight_line():
    x, v = geodesic_step_euler(np.zeros(2), np.array([1.0, 0.0]), euclidean_metric(2), 0.1)
    assert np.allclose(x, [0.1, 0.0], atol=1e-15)
    assert np.allclose(v, [1.0, 0.0], atol=1e-15)


def test_euler_step_at_rest_stays_at_rest():
    x0 = np.array([1.5, 0.3])
    x, v = geodesic_step_euler(x0, np.zeros(2), polar_metric(), 0.05)
    assert np.allclose(x, x0, atol=1e-15)
    assert np.allclose(v, 0.0, atol=1e-12)


def test_euler_step_polar_centripetal_term():
    # from (r=1, phi=0) with v=(0,1): dv_r = -h * Gamma^r_pp * 1 = +h * r
    h = 0.01
    x, v = geodesic_step_euler(
        np.array([1.0, 0.0]), np.array([0.0, 1.0]), polar_metric(), h
    )
    assert v[0] == pytest.approx(h * 1.0, abs=1e-6)
    assert np.allclose(x, [1.0, h], atol=1e-15)


def test_integrate_identity_metric_is_exactly_linear():
    x0 = np.array([1.0, -2.0])
    v0 = np.array([0.5, 2.0])
    for method in ("euler", "rk4"):
        path = integrate_geodesic(x0, v0, euclidean_metric(2), 0.1, 10, method=method)
        for k in range(11):
            assert np.allclose(path.points[k], x0 + 0.1 * k * v0, atol=1e-12)


def test_halfplane_geodesic_follows_unit_circle():
    path = integrate_geodesic(
        np.array([0.0, 1.0]), np.array([1.0, 0.0]), halfplane_metric(),
        1e-3, 1000, method="rk4",
    )
    endpoint_err = np.linalg.norm(path.endpoint - halfplane_geodesic(1.0))
    assert endpoint_err <= 1e-3
    radii = np.linalg.norm(path.points, axis=1)
    assert np.max(np.abs(radii - 1.0)) <= 1e-3


def test_rk4_beats_euler_by_an_order_of_magnitude():
    target = halfplane_geodesic(1.0)
    errs = {}
    for method in ("euler", "rk4"):
        path = integrate_geodesic(
            np.array([0.0, 1.0]), np.array([1.0, 0.0]), halfplane_metric(),
            1e-2, 100, method=method,
        )
        errs[method] = np.linalg.norm(path.endpoint - target)
    assert errs["rk4"] * 10 <= errs["euler"]


def test_convergence_orders_under_step_halving():
    target = halfplane_geodesic(1.0)

    def endpoint_error(method, steps):
        path = integrate_geodesic(
            np.array([0.0, 1.0]), np.array([1.0, 0.0]), halfplane_metric(),
            1.0 / steps, steps, method=method, fd_step=1e-5,
        )
        return np.linalg.norm(path.endpoint - target)

    rk4_ratio = endpoint_error("rk4", 10) / endpoint_error("rk4", 20)
    euler_ratio = endpoint_error("euler", 10) / endpoint_error("euler", 20)
    assert 8.0 <= rk4_ratio <= 32.0
    assert 1.4 <= euler_ratio <= 2.9


def test_geodesic_speed_is_conserved():
    g = halfplane_metric()
    path = integrate_geodesic(
        np.array([0.0, 1.0]), np.array([1.0, 0.0]), g, 1e-3, 1000, method="rk4"
    )
    speeds = [
        float(v @ g(x) @ v) for x, v in zip(path.points, path.velocities)
    ]
    drift = (max(speeds) - min(speeds)) / speeds[0]
    assert drift <= 1e-4


def test_path_length_euclidean_345():
    pts = np.linspace([0.0, 0.0], [3.0, 4.0], 50)
    path = GeodesicPath(points=pts, velocities=np.zeros_like(pts), step=1.0)
    assert path_length(path, euclidean_metric(2)) == pytest.approx(5.0, abs=1e-9)


def test_path_length_halfplane_vertical_segment():
    ys = np.linspace(1.0, np.e, 1000)
    pts = np.column_stack([np.zeros_like(ys), ys])
    path = GeodesicPath(points=pts, velocities=np.zeros_like(pts), step=1.0)
    assert path_length(path, halfplane_metric()) == pytest.approx(1.0, abs=1e-3)


def test_path_length_single_point_is_zero():
    path = GeodesicPath(points=np.zeros((1, 2)), velocities=np.zeros((1, 2)), step=1.0)
    assert path_length(path, euclidean_metric(2)) == 0.0


def test_geodesic_distance_euclidean():
    d = geodesic_distance(np.array([0.0, 0.0]), np.array([3.0, 4.0]), euclidean_metric(2))
    assert d == pytest.approx(5.0, abs=1e-6)


def test_geodesic_distance_identical_points_is_zero():
    assert geodesic_distance(np.ones(2), np.ones(2), polar_metric()) == 0.0


def test_geodesic_distance_halfplane_arccosh3():
    d = geodesic_distance(
        np.array([-1.0, 1.0]), np.array([1.0, 1.0]), halfplane_metric(),
        ShootingConfig(h=1e-3),
    )
    assert d == pytest.approx(np.arccosh(3.0), abs=1e-3)


def test_geodesic_distance_polar_matches_law_of_cosines():
    a = np.array([1.0, 0.2])
    b = np.array([2.0, 1.0])
    expected = np.sqrt(1.0 + 4.0 - 2.0 * 1.0 * 2.0 * np.cos(0.8))
    d = geodesic_distance(a, b, polar_metric(), ShootingConfig(h=1e-2))
    assert d == pytest.approx(expected, abs=1e-4)


def test_geodesic_distance_symmetry():
    cfg = ShootingConfig(h=1e-2)
    g = halfplane_metric()
    a, b = np.array([-1.0, 1.0]), np.array([1.0, 1.0])
    assert abs(geodesic_distance(a, b, g, cfg) - geodesic_distance(b, a, g, cfg)) <= 1e-6


def test_geodesic_distance_failure_carries_residual():
    # an unreachable target: force a tiny iteration budget
    cfg = ShootingConfig(h=1e-2, max_iter=1)
    with pytest.raises(GeodesicShootingError) as err:
        geodesic_distance(
            np.array([-2.0, 0.5]), np.array([2.0, 0.5]), halfplane_metric(), cfg
        )
    assert err.value.residual > 0


def test_constant_metric_distance_is_mahalanobis():
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    g = constant_metric(M)
    a, b = np.zeros(2), np.array([1.0, 2.0])
    expected = np.sqrt((b - a) @ M @ (b - a))
    assert geodesic_distance(a, b, g, ShootingConfig(h=0.05)) == pytest.approx(
        expected, abs=1e-9
    )


def test_estimate_rate_geometric_sequence():
    errors = 0.5 ** np.arange(20)
    trace = estimate_rate(errors)
    assert trace.estimated_rate == 0.5


def test_estimate_rate_gradient_descent_quadratic():
    # x_{n+1} = (1 - eta*lam) x_n, eta=0.1, lam=1 -> rate 0.9
    x = 1.0
    errors = []
    for _ in range(40):
        errors.append(abs(x))
        x = x - 0.1 * x
    trace = estimate_rate(errors)
    assert abs(trace.estimated_rate - 0.9) <= 1e-9


def test_estimate_rate_non_contracting_reported():
    trace = estimate_rate([1.0, 1.5, 2.25, 3.375])
    assert trace.estimated_rate == pytest.approx(1.5)


def test_estimate_rate_truncates_at_zero():
    trace = estimate_rate([1.0, 0.5, 0.25, 0.125, 0.0, 7.0])
    assert trace.errors.size == 4
    assert trace.estimated_rate == 0.5


def test_estimate_rate_needs_three_entries():
    with pytest.raises(ValueError, match="at least 3"):
        estimate_rate([1.0, 0.5, 0.0, 0.1])
    with pytest.raises(ValueError, match="non-negative"):
        estimate_rate([1.0, -0.5, 0.2])
