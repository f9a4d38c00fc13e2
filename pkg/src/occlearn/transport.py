"""Wasserstein distances between discrete distributions.

Three routes are provided and cross-validate each other:

* :func:`w1_1d` — closed-form W1 for the 1-D bin-index cost, via the CDF
  difference;
* :func:`solve_transport` — an exact transportation-problem solver
  (successive shortest paths with node potentials) for arbitrary
  non-negative costs, small support (b <= 256);
* :func:`sinkhorn` — entropic regularization in the log domain with
  epsilon scaling, for the approximate regime.

The curriculum uses these to measure how far apart the occlusion
distributions of consecutive stages are.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .occlusion import Histogram, occlusion_histogram

__all__ = [
    "CostMatrix",
    "SinkhornResult",
    "TransportPlan",
    "index_cost_matrix",
    "sinkhorn",
    "solve_transport",
    "stage_transition_distance",
    "w1_1d",
]

MAX_EXACT_BINS = 256

_MARGINAL_TOL = 1e-9
_ACTIVE_EPS = 1e-13


@dataclass(frozen=True)
class CostMatrix:
    """Ground costs between bins; non-negative, zero diagonal when square."""

    costs: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.costs, dtype=np.float64)
        if c.ndim != 2:
            raise ValueError(f"cost matrix must be 2-D, got shape {c.shape}")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("costs must be finite and non-negative")
        object.__setattr__(self, "costs", c)

    @property
    def shape(self) -> tuple[int, int]:
        return self.costs.shape


def index_cost_matrix(b: int, power: float = 1.0, bin_width_scaled: bool = False) -> CostMatrix:
    """|i - j|^p on bin indices; optionally scaled by the bin width (1/b)^p."""
    if b < 1:
        raise ValueError(f"bin count must be >= 1, got {b}")
    idx = np.arange(b, dtype=np.float64)
    c = np.abs(idx[:, None] - idx[None, :]) ** power
    if bin_width_scaled:
        c = c / float(b) ** power
    return CostMatrix(c)


@dataclass(frozen=True)
class TransportPlan:
    """Coupling gamma whose marginals are the two input histograms."""

    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if np.any(m < 0):
            raise ValueError("transport plan entries must be non-negative")
        row = np.ascontiguousarray(self.row_marginal, dtype=np.float64)
        col = np.ascontiguousarray(self.col_marginal, dtype=np.float64)
        if np.max(np.abs(m.sum(axis=1) - row)) > _MARGINAL_TOL:
            raise ValueError("plan row sums do not match the source marginal")
        if np.max(np.abs(m.sum(axis=0) - col)) > _MARGINAL_TOL:
            raise ValueError("plan column sums do not match the target marginal")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "row_marginal", row)
        object.__setattr__(self, "col_marginal", col)


def _masses(h) -> np.ndarray:
    if isinstance(h, Histogram):
        return h.masses
    m = np.ascontiguousarray(h, dtype=np.float64)
    if m.ndim != 1 or np.any(m < 0):
        raise ValueError("histogram masses must be a non-negative 1-D vector")
    return m


def w1_1d(p, q) -> float:
    """W1 for the 1-D bin-index cost |i - j|: the L1 norm of the CDF difference.

    Accepts Histograms (bin edges must agree) or raw mass vectors of equal
    length. Equals the exact LP optimum for this cost.
    """
    if isinstance(p, Histogram) and isinstance(q, Histogram):
        if p.bins != q.bins or not np.array_equal(p.bin_edges, q.bin_edges):
            raise ValueError(
                f"histograms must share bins: {p.bins} vs {q.bins} "
                "or differing bin edges"
            )
    pm, qm = _masses(p), _masses(q)
    if pm.size != qm.size:
        raise ValueError(f"bin count mismatch: {pm.size} vs {qm.size}")
    return float(np.abs(np.cumsum(pm - qm)).sum())


def solve_transport(p, q, cost: CostMatrix) -> tuple[TransportPlan, float]:
    """Exact optimal transport plan and objective for a discrete cost.

    Successive-shortest-path solver with Johnson-style node potentials:
    each augmentation runs a multi-source Dijkstra over the residual
    bipartite graph (reduced costs stay non-negative), pushes the bottleneck
    mass along the shortest source-to-demand path, and shifts potentials.
    Intended for small supports; refuses b > 256.
    """
    pm, qm = _masses(p), _masses(q)
    m, n = pm.size, qm.size
    if cost.shape != (m, n):
        raise ValueError(f"cost shape {cost.shape} does not match ({m}, {n})")
    if max(m, n) > MAX_EXACT_BINS:
        raise ValueError(f"exact solver is limited to {MAX_EXACT_BINS} bins")
    if abs(pm.sum() - qm.sum()) > _MARGINAL_TOL:
        raise ValueError(
            f"infeasible transport: mass {pm.sum()!r} vs {qm.sum()!r} "
            f"differs by more than {_MARGINAL_TOL}"
        )

    C = cost.costs
    flow = np.zeros((m, n))
    a = pm.copy()  # residual supply
    b = qm.copy()  # residual demand
    u = np.zeros(m)  # supply potentials
    v = np.zeros(n)  # demand potentials

    while np.any(a > _ACTIVE_EPS) and np.any(b > _ACTIVE_EPS):
        ds, dd, par_d, par_s, t = _dijkstra(C, flow, a, b, u, v)
        if t < 0:
            break  # numerically exhausted
        _augment(flow, a, b, par_d, par_s, t)
        cap = dd[t]
        u -= np.minimum(ds, cap)
        v += np.minimum(dd, cap)

    np.clip(flow, 0.0, None, out=flow)
    plan = TransportPlan(matrix=flow, row_marginal=pm, col_marginal=qm)
    return plan, float((flow * C).sum())


def _dijkstra(C, flow, a, b, u, v):
    """Multi-source shortest paths over the residual transportation graph.

    Sources are supplies with residual mass; forward arcs i->j carry reduced
    cost C[i,j] - u[i] - v[j] (clipped at 0 against float drift), backward
    arcs j->i exist where flow is positive and are tight. Stops when the
    nearest demand with residual mass is settled.
    """
    m, n = C.shape
    inf = np.inf
    ds = np.where(a > _ACTIVE_EPS, 0.0, inf)  # supply distances
    dd = np.full(n, inf)  # demand distances
    done_s = np.zeros(m, dtype=bool)
    done_d = np.zeros(n, dtype=bool)
    par_d = np.full(n, -1, dtype=int)  # demand's parent supply
    par_s = np.full(m, -1, dtype=int)  # supply's parent demand (backward arc)

    rc = np.maximum(C - u[:, None] - v[None, :], 0.0)

    while True:
        i = int(np.argmin(np.where(done_s, inf, ds)))
        j = int(np.argmin(np.where(done_d, inf, dd)))
        di = ds[i] if not done_s[i] else inf
        dj = dd[j] if not done_d[j] else inf
        if di == inf and dj == inf:
            return ds, dd, par_d, par_s, -1
        if dj <= di:
            if b[j] > _ACTIVE_EPS:
                return ds, dd, par_d, par_s, j
            done_d[j] = True
            # relax backward arcs j -> i over positive flow (tight, cost 0)
            back = (flow[:, j] > _ACTIVE_EPS) & ~done_s & (dj < ds)
            if np.any(back):
                ds[back] = dj
                par_s[back] = j
        else:
            done_s[i] = True
            nd = di + rc[i]
            upd = ~done_d & (nd < dd)
            if np.any(upd):
                dd[upd] = nd[upd]
                par_d[upd] = i


def _augment(flow, a, b, par_d, par_s, t):
    """Push the bottleneck along the alternating path ending at demand t."""
    path: list[tuple[int, int, bool]] = []  # (i, j, forward?)
    j = t
    while True:
        i = par_d[j]
        path.append((i, j, True))
        if par_s[i] < 0:
            root = i
            break
        j = par_s[i]
        path.append((i, j, False))

    delta = min(a[root], b[t])
    for i, j, forward in path:
        if not forward:
            delta = min(delta, flow[i, j])
    for i, j, forward in path:
        if forward:
            flow[i, j] += delta
        else:
            flow[i, j] -= delta
    a[root] -= delta
    b[t] -= delta
    np.clip(a, 0.0, None, out=a)
    np.clip(b, 0.0, None, out=b)


@dataclass(frozen=True)
class SinkhornResult:
    """Entropic-OT outcome: transport cost of the regularized plan plus status."""

    cost: float
    plan: np.ndarray
    converged: bool
    iterations: int
    marginal_error: float

    def __float__(self) -> float:
        return self.cost


def sinkhorn(
    p,
    q,
    cost: CostMatrix,
    epsilon: float,
    max_iter: int = 50_000,
    tol: float = 1e-6,
) -> SinkhornResult:
    """Entropic-regularized transport cost via log-domain Sinkhorn iterations.

    Runs on the support of p and q only (zero bins carry no potential) and
    warm-starts through a geometric epsilon-scaling schedule down to the
    requested ``epsilon``, which keeps small epsilons practical. Updates are
    overrelaxed and an Aitken extrapolation periodically jumps past the slow
    near-null drift mode of nearly decomposable problems. ``tol`` bounds the
    L1 marginal violation of the scaling iterations; the violation reached is
    reported, and falling short of ``tol`` within ``max_iter`` total
    iterations is flagged, not fatal. The returned plan is rounded to exact
    marginals (row/column rescale plus a rank-one filler), so the reported
    cost <gamma, C> is the cost of a genuinely feasible coupling and
    upper-bounds the exact optimum.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    pm, qm = _masses(p), _masses(q)
    if cost.shape != (pm.size, qm.size):
        raise ValueError(f"cost shape {cost.shape} does not match ({pm.size}, {qm.size})")
    if abs(pm.sum() - qm.sum()) > _MARGINAL_TOL:
        raise ValueError("infeasible transport: marginal masses differ")

    si = np.flatnonzero(pm > 0)
    sj = np.flatnonzero(qm > 0)
    ps, qs = pm[si], qm[sj]
    C = cost.costs[np.ix_(si, sj)]
    log_p, log_q = np.log(ps), np.log(qs)
    nf, ng = ps.size, qs.size
    theta = 1.5  # overrelaxation

    def marginal_err(f, g, eps: float) -> float:
        with np.errstate(over="ignore"):
            gamma = np.exp(np.minimum((f[:, None] + g[None, :] - C) / eps, 500.0))
        return float(
            np.abs(gamma.sum(axis=1) - ps).sum() + np.abs(gamma.sum(axis=0) - qs).sum()
        )

    # Geometric schedule from a loose epsilon down to the target. Coarse
    # stages converge to a tolerance proportional to their own epsilon, which
    # is what keeps the warm start on track.
    eps_path = [epsilon]
    e = epsilon
    scale = max(1.0, float(C.max()))
    while e < 0.1 * scale:
        e *= 4.0
        eps_path.append(min(e, 0.1 * scale))

    f = np.zeros(nf)
    g = np.zeros(ng)
    iters = 0
    for eps in reversed(eps_path):
        final = eps == epsilon
        stage_tol = tol if final else max(tol, 1e-3 * eps)
        hist: list[np.ndarray] = []
        while iters < max_iter:
            f = theta * (eps * (log_p - _lse((g[None, :] - C) / eps, axis=1))) + (1 - theta) * f
            g = theta * (eps * (log_q - _lse((f[:, None] - C) / eps, axis=0))) + (1 - theta) * g
            iters += 1
            hist.append(np.concatenate([f, g]))
            if len(hist) > 3:
                hist.pop(0)
            if len(hist) == 3 and iters % 7 == 0:
                d1 = hist[1] - hist[0]
                d2 = hist[2] - hist[1]
                den = float(d1 @ d1)
                if den > 0:
                    rho = float(d2 @ d1) / den
                    if 0.0 < rho < 0.9999:
                        z = hist[2] + d2 * (rho / (1.0 - rho))
                        if marginal_err(z[:nf], z[nf:], eps) < marginal_err(f, g, eps):
                            f, g = z[:nf], z[nf:]
                            hist = []
            if iters % 5 == 0 and marginal_err(f, g, eps) <= stage_tol:
                break
        if final:
            break

    err = marginal_err(f, g, epsilon)
    converged = err <= tol
    plan = np.exp((f[:, None] + g[None, :] - C) / epsilon)
    plan = _round_to_marginals(plan, ps, qs)
    full = np.zeros(cost.shape)
    full[np.ix_(si, sj)] = plan
    return SinkhornResult(
        cost=float((plan * C).sum()),
        plan=full,
        converged=converged,
        iterations=iters,
        marginal_error=err,
    )


def _round_to_marginals(plan: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Project an almost-feasible plan onto the transportation polytope.

    Scales down overfull rows then columns and spreads the leftover mass as
    a rank-one term, preserving non-negativity.
    """
    rows = plan.sum(axis=1)
    plan = plan * np.minimum(1.0, np.divide(p, rows, out=np.ones_like(p), where=rows > 0))[:, None]
    cols = plan.sum(axis=0)
    plan = plan * np.minimum(1.0, np.divide(q, cols, out=np.ones_like(q), where=cols > 0))[None, :]
    u = np.maximum(p - plan.sum(axis=1), 0.0)
    v = np.maximum(q - plan.sum(axis=0), 0.0)
    total = u.sum()
    if total > 0:
        plan = plan + np.outer(u, v) / total
    return plan


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    hi = np.max(x, axis=axis, keepdims=True)
    out = hi + np.log(np.exp(x - hi).sum(axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def stage_transition_distance(levels_t, levels_t1, b: int) -> float:
    """W1 between the occlusion histograms of two consecutive stages."""
    levels_t = np.asarray(levels_t, dtype=np.float64)
    levels_t1 = np.asarray(levels_t1, dtype=np.float64)
    if levels_t.size == 0 or levels_t1.size == 0:
        raise ValueError("stage transition needs two nonempty stages")
    return w1_1d(occlusion_histogram(levels_t, b), occlusion_histogram(levels_t1, b))
