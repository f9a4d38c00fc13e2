"""Riemannian machinery on low-dimensional coordinate patches.

A :class:`MetricField` maps a point to a symmetric positive-definite matrix.
Christoffel symbols come from central finite differences of the metric, the
geodesic ODE is integrated as a first-order system (explicit Euler or
classical RK4), and two-point distances are solved by shooting: a damped
Newton iteration on the initial velocity until the integrated endpoint hits
the target. Closed-form test manifolds (Euclidean plane, polar coordinates,
hyperbolic half-plane) anchor the numerics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ConvergenceTrace",
    "GeodesicPath",
    "GeodesicShootingError",
    "MetricField",
    "ShootingConfig",
    "christoffel",
    "constant_metric",
    "estimate_rate",
    "euclidean_metric",
    "geodesic_distance",
    "geodesic_step_euler",
    "halfplane_metric",
    "integrate_geodesic",
    "path_length",
    "polar_metric",
]

_SYM_TOL = 1e-12


class GeodesicShootingError(RuntimeError):
    """Shooting solver failed to hit the target endpoint."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class MetricField:
    """Point-dependent metric tensor g_ij on a d-dimensional patch.

    ``evaluate`` must return a d-by-d matrix, symmetric to 1e-12 and
    positive-definite (checked by Cholesky) at every queried point.
    ``constant`` marks fields whose value does not depend on the point, which
    lets the integrator skip finite differencing (the symbols vanish).
    """

    dim: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    constant: bool = False
    name: str = "custom"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        g = np.asarray(self.evaluate(x), dtype=np.float64)
        if g.shape != (self.dim, self.dim):
            raise ValueError(
                f"metric returned shape {g.shape}, expected {(self.dim, self.dim)}"
            )
        if not np.all(np.isfinite(g)):
            raise ValueError(f"metric is not finite at {x.tolist()}")
        if np.max(np.abs(g - g.T)) > _SYM_TOL:
            raise ValueError(f"metric is not symmetric at {x.tolist()}")
        g = 0.5 * (g + g.T)
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise ValueError(f"metric is not positive-definite at {x.tolist()}")
        return g


def euclidean_metric(dim: int = 2) -> MetricField:
    eye = np.eye(dim)
    return MetricField(dim=dim, evaluate=lambda x: eye, constant=True, name="euclidean")


def polar_metric() -> MetricField:
    """Euclidean plane in polar coordinates (r, phi): g = diag(1, r^2)."""

    def g(x):
        return np.diag([1.0, float(x[0]) ** 2])

    return MetricField(dim=2, evaluate=g, name="polar")


def halfplane_metric() -> MetricField:
    """Hyperbolic upper half-plane (x, y), y > 0: g = diag(1/y^2, 1/y^2)."""

    def g(p):
        y = float(p[1])
        if y <= 0:
            raise ValueError(f"half-plane metric needs y > 0, got y={y}")
        return np.diag([1.0 / y**2, 1.0 / y**2])

    return MetricField(dim=2, evaluate=g, name="halfplane")


def constant_metric(matrix: np.ndarray, name: str = "constant") -> MetricField:
    m = np.ascontiguousarray(matrix, dtype=np.float64)
    field_ = MetricField(dim=m.shape[0], evaluate=lambda x: m, constant=True, name=name)
    field_(np.zeros(m.shape[0]))  # validate SPD up front
    return field_


def christoffel(g: MetricField, x, fd_step: float = 1e-4) -> np.ndarray:
    """Christoffel symbols of the second kind at x, indexed [lam, mu, nu].

    Metric derivatives are central finite differences with step ``fd_step``;
    the inverse metric enters through a direct solve. The result is exactly
    symmetric in the two lower indices.
    """
    if fd_step <= 0:
        raise ValueError(f"fd_step must be positive, got {fd_step}")
    x = np.asarray(x, dtype=np.float64)
    d = g.dim
    if g.constant:
        return np.zeros((d, d, d))
    g0 = g(x)
    dg = np.empty((d, d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = fd_step
        dg[k] = (g(x + e) - g(x - e)) / (2.0 * fd_step)
    # lower[s, m, n] = (d_n g_ms + d_m g_ns - d_s g_mn) / 2
    lower = 0.5 * (dg.transpose(2, 1, 0) + dg.transpose(2, 0, 1) - dg)
    try:
        gamma = np.linalg.solve(g0, lower.reshape(d, d * d)).reshape(d, d, d)
    except np.linalg.LinAlgError:
        raise ValueError(f"singular metric at {x.tolist()}")
    return gamma


def _acceleration(g: MetricField, x, v, fd_step: float) -> np.ndarray:
    gamma = christoffel(g, x, fd_step)
    return -np.einsum("lmn,m,n->l", gamma, v, v)


def geodesic_step_euler(x, v, g: MetricField, h: float, fd_step: float = 1e-4):
    """One explicit Euler step of the geodesic system.

    x' = x + h v and v' = v - h Gamma(x) v v, with the symbols evaluated at
    the pre-step point.
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return x + h * v, v + h * _acceleration(g, x, v, fd_step)


@dataclass(frozen=True)
class GeodesicPath:
    """Integrated trajectory: points x(t_k), velocities v(t_k), step h."""

    points: np.ndarray
    velocities: np.ndarray
    step: float

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        vel = np.ascontiguousarray(self.velocities, dtype=np.float64)
        if pts.shape != vel.shape or pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points and velocities must be matching (k, d) arrays")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "velocities", vel)

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]


def integrate_geodesic(
    x0,
    v0,
    g: MetricField,
    h: float,
    steps: int,
    method: str = "rk4",
    fd_step: float = 1e-4,
) -> GeodesicPath:
    """Integrate the geodesic ODE for ``steps`` fixed-size steps.

    ``method`` is "euler" (the first-order update pair) or "rk4" (classical
    four-stage scheme applied to the first-order system). A metric failure
    mid-trajectory raises with the offending step index.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    if method not in ("euler", "rk4"):
        raise ValueError(f"unknown integration method {method!r}")
    x = np.asarray(x0, dtype=np.float64).copy()
    v = np.asarray(v0, dtype=np.float64).copy()
    pts = np.empty((steps + 1, g.dim))
    vel = np.empty((steps + 1, g.dim))
    pts[0], vel[0] = x, v
    for k in range(steps):
        try:
            if method == "euler":
                x, v = x + h * v, v + h * _acceleration(g, x, v, fd_step)
            else:
                ax1 = _acceleration(g, x, v, fd_step)
                x2 = x + 0.5 * h * v
                v2 = v + 0.5 * h * ax1
                ax2 = _acceleration(g, x2, v2, fd_step)
                x3 = x + 0.5 * h * v2
                v3 = v + 0.5 * h * ax2
                ax3 = _acceleration(g, x3, v3, fd_step)
                x4 = x + h * v3
                v4 = v + h * ax3
                ax4 = _acceleration(g, x4, v4, fd_step)
                x = x + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
                v = v + (h / 6.0) * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4)
        except ValueError as exc:
            raise ValueError(f"metric failure at step {k + 1}: {exc}") from exc
        pts[k + 1], vel[k + 1] = x, v
    return GeodesicPath(points=pts, velocities=vel, step=h)


def path_length(path: GeodesicPath, g: MetricField) -> float:
    """Riemannian length by midpoint quadrature over consecutive points."""
    pts = path.points
    if pts.shape[0] < 2:
        return 0.0
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (a + b)
        delta = b - a
        quad = float(delta @ g(mid) @ delta)
        total += np.sqrt(max(quad, 0.0))
    return total


@dataclass(frozen=True)
class ShootingConfig:
    """Boundary-value solve settings: unit-time integration at step h."""

    h: float = 1e-3
    method: str = "rk4"
    fd_step: float = 1e-4
    tol: float = 1e-8
    max_iter: int = 100
    jacobian_step: float = 1e-6


def geodesic_distance(a, b, g: MetricField, cfg: ShootingConfig | None = None) -> float:
    """Length of the geodesic from a to b, found by shooting.

    Integrates over unit time and Newton-iterates the initial velocity until
    the endpoint lands on ``b`` within ``cfg.tol`` (damped with backtracking;
    trial velocities that drive the trajectory off the chart count as
    non-improving). Raises :class:`GeodesicShootingError` carrying the best
    residual when it cannot converge.
    """
    cfg = cfg or ShootingConfig()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (g.dim,) or b.shape != (g.dim,):
        raise ValueError(f"endpoints must be {g.dim}-vectors")
    if np.array_equal(a, b):
        return 0.0
    steps = max(1, round(1.0 / cfg.h))
    h = 1.0 / steps

    def endpoint(v0):
        return integrate_geodesic(
            a, v0, g, h, steps, method=cfg.method, fd_step=cfg.fd_step
        ).endpoint

    def residual(v0):
        try:
            return endpoint(v0) - b
        except ValueError:
            return None

    v = b - a
    r = residual(v)
    if r is None:
        raise GeodesicShootingError(
            "initial straight-line velocity leaves the chart", float("inf")
        )
    best = float(np.linalg.norm(r))
    for _ in range(cfg.max_iter):
        if best <= cfg.tol:
            break
        J = np.empty((g.dim, g.dim))
        ok = True
        for i in range(g.dim):
            dv = np.zeros(g.dim)
            dv[i] = cfg.jacobian_step * (1.0 + abs(v[i]))
            r_i = residual(v + dv)
            if r_i is None:
                ok = False
                break
            J[:, i] = (r_i - r) / dv[i]
        if not ok:
            raise GeodesicShootingError("jacobian probe left the chart", best)
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise GeodesicShootingError("singular shooting jacobian", best)
        alpha = 1.0
        improved = False
        while alpha >= 2.0**-20:
            r_new = residual(v + alpha * delta)
            if r_new is not None:
                norm_new = float(np.linalg.norm(r_new))
                if norm_new < best:
                    v = v + alpha * delta
                    r, best = r_new, norm_new
                    improved = True
                    break
            alpha *= 0.5
        if not improved:
            raise GeodesicShootingError("line search stalled", best)
    if best > cfg.tol:
        raise GeodesicShootingError(
            f"no convergence in {cfg.max_iter} iterations", best
        )
    path = integrate_geodesic(a, v, g, h, steps, method=cfg.method, fd_step=cfg.fd_step)
    return path_length(path, g)


@dataclass(frozen=True)
class ConvergenceTrace:
    """Error sequence toward a fixed point and its worst tail contraction."""

    errors: np.ndarray
    estimated_rate: float


def estimate_rate(errors: Sequence[float]) -> ConvergenceTrace:
    """Geometric-rate estimate: max successive error ratio over the tail.

    The sequence is truncated at the first exact zero; at least three
    positive entries must remain. The tail is the final two-thirds of the
    ratio list, which skips transient behavior. Rates above 1 are reported
    as observed (the estimator describes, it does not judge).
    """
    e = np.asarray(errors, dtype=np.float64).ravel()
    if np.any(e < 0):
        raise ValueError("errors must be non-negative")
    zeros = np.flatnonzero(e == 0.0)
    if zeros.size:
        e = e[: zeros[0]]
    if e.size < 3:
        raise ValueError("need at least 3 positive entries to estimate a rate")
    ratios = e[1:] / e[:-1]
    tail = ratios[ratios.size // 3 :]
    return ConvergenceTrace(errors=e, estimated_rate=float(tail.max()))
