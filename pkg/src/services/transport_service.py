"""
Geodesics, exponential map and parallel transport.

All integration goes through scipy's embedded Runge–Kutta 4(5) with dense
output; samples are stored on a uniform arc-length grid and the curve is
re-interpolated by cubic Hermite splines between them.
"""
import logging
import math
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from ..core.exceptions import LeftChart, NonUnitSpeed, NotClosed, StepFailure
from ..schemas.curve_schemas import CurvePath, IntegratorSettings
from ..schemas.manifold_schemas import ManifoldDescriptor
from .export_service import write_csv
from .manifold_service import _gamma_raw, check_point, norm

logger = logging.getLogger(__name__)

UNIT_SPEED_INPUT_TOL = 1e-8
UNIT_SPEED_PATH_TOL = 1e-6


def _settings(settings: Optional[IntegratorSettings]) -> IntegratorSettings:
    return settings if settings is not None else IntegratorSettings()

def sample_grid(s0: float, s1: float, spacing: float) -> np.ndarray:
    """Uniform grid from s0 to s1 (either direction) with spacing at most `spacing`."""
    n = max(2, int(math.ceil(abs(s1 - s0) / spacing - 1e-9)) + 1)
    return np.linspace(s0, s1, n)

def chart_exit_event(M: ManifoldDescriptor, dim: int) -> Callable:
    """Terminal event: zero when the position block of the state reaches the chart boundary."""
    def event(t, y):
        return M.chart.margin(y[:dim])
    event.terminal = True
    event.direction = -1
    return event

def integrate_ode(
    rhs: Callable,
    y0: np.ndarray,
    s_end: float,
    settings: IntegratorSettings,
    events: Sequence[Callable] = (),
    s_start: float = 0.0,
):
    """
    Run solve_ivp from s_start to s_end and evaluate the dense output on a uniform grid.

    Returns (grid, states, status, nfev); `status` is 'done' or 'event'.
    """
    dense, reached, status, nfev = solve_dense(rhs, y0, s_start, s_end, settings, events)
    if abs(reached - s_start) < 1e-14:
        return np.array([s_start]), y0[None, :].copy(), status, nfev
    grid = sample_grid(s_start, reached, settings.sample_spacing)
    states = dense(grid).T
    states[0] = y0
    return grid, states, status, nfev

def solve_dense(
    rhs: Callable,
    y0: np.ndarray,
    s_start: float,
    s_end: float,
    settings: IntegratorSettings,
    events: Sequence[Callable] = (),
):
    """solve_ivp with dense output. Returns (dense, reached, status, nfev)."""
    y0 = np.asarray(y0, dtype=float)
    if s_end == s_start:
        return (lambda s: np.repeat(y0[:, None], np.size(s), axis=1)), s_start, "done", 0
    sol = solve_ivp(
        rhs,
        (s_start, s_end),
        y0,
        method=settings.method,
        rtol=settings.rel_tol,
        atol=settings.abs_tol,
        max_step=settings.max_step,
        dense_output=True,
        events=list(events) or None,
    )
    if sol.status == -1:
        raise StepFailure(f"integration failed at s = {sol.t[-1]:.6g}: {sol.message}")
    reached = float(sol.t[-1])
    status = "event" if sol.status == 1 else "done"
    logger.debug(f"solve_ivp: {len(sol.t)} accepted steps, nfev={sol.nfev}, reached s={reached:.6g}")
    if len(sol.t) < 2:
        return (lambda s: np.repeat(y0[:, None], np.size(s), axis=1)), reached, status, sol.nfev
    return sol.sol, reached, status, sol.nfev

def integrate_two_sided(
    rhs: Callable,
    y0: np.ndarray,
    s0: float,
    s_lo: float,
    s_hi: float,
    settings: IntegratorSettings,
    events: Sequence[Callable] = (),
):
    """
    Integrate from s0 forward to s_hi and backward to s_lo, then sample both dense
    outputs on one uniform grid over the reached interval.

    Returns (grid, states, (status_lo, status_hi), nfev).
    """
    back, lo, status_lo, nfev_lo = solve_dense(rhs, y0, s0, s_lo, settings, events)
    fwd, hi, status_hi, nfev_hi = solve_dense(rhs, y0, s0, s_hi, settings, events)
    grid = sample_grid(lo, hi, settings.sample_spacing) if hi > lo else np.array([s0])
    states = np.empty((len(grid), len(y0)))
    left = grid < s0
    if left.any():
        states[left] = back(grid[left]).T
    if (~left).any():
        states[~left] = fwd(grid[~left]).T
    return grid, states, (status_lo, status_hi), nfev_lo + nfev_hi

# --- Geodesics ---

def geodesic_rhs(M: ManifoldDescriptor) -> Callable:
    n = M.dim
    def rhs(s, y):
        x, v = y[:n], y[n:]
        gamma = _gamma_raw(M, x)
        return np.concatenate([v, -np.einsum("kij,i,j->k", gamma, v, v)])
    return rhs

def integrate_geodesic(
    M: ManifoldDescriptor,
    p0,
    v0,
    s_max: float,
    settings: Optional[IntegratorSettings] = None,
) -> CurvePath:
    """
    Unit-speed geodesic from p0 with initial velocity v0 for arc length s_max (may be negative).

    A chart exit returns the partial path with `left_chart=True`.
    """
    settings = _settings(settings)
    p0 = check_point(M, p0, strict=True)
    v0 = np.asarray(v0, dtype=float)
    speed = norm(M, p0, v0)
    if abs(speed - 1.0) > UNIT_SPEED_INPUT_TOL:
        raise NonUnitSpeed(f"|v0| = {speed:.12g}, expected a unit vector")
    v0 = v0 / speed
    rhs = geodesic_rhs(M)
    n = M.dim
    grid, states, status, nfev = integrate_ode(
        rhs, np.concatenate([p0, v0]), float(s_max), settings, events=[chart_exit_event(M, n)]
    )
    acc = np.array([rhs(0.0, y)[n:] for y in states])
    if s_max < 0:
        # store with increasing s
        grid, states, acc = grid[::-1], states[::-1], acc[::-1]
    path = CurvePath(
        manifold=M,
        s=grid,
        points=states[:, :n],
        tangents=states[:, n:],
        accelerations=acc,
        left_chart=status == "event",
        nfev=nfev,
    )
    if path.left_chart:
        logger.warning(f"geodesic on {M.name} left the chart after arc length {path.length:.6g}")
    return path

def exp_map(M: ManifoldDescriptor, p, v, settings: Optional[IntegratorSettings] = None) -> np.ndarray:
    p = check_point(M, p, strict=True)
    v = np.asarray(v, dtype=float)
    length = norm(M, p, v)
    if length == 0.0:
        return p.copy()
    path = integrate_geodesic(M, p, v / length, length, settings).require_complete()
    return path.points[-1].copy()

def geodesic_speed_drift(path: CurvePath) -> float:
    """max over samples of ||ẋ|_g − 1|."""
    M = path.manifold
    return max(abs(norm(M, x, t) - 1.0) for x, t in zip(path.points, path.tangents))

# --- Paths from explicit data ---

def path_from_samples(
    M: ManifoldDescriptor,
    s,
    points,
    tangents,
    accelerations=None,
    check_unit_speed: bool = True,
) -> CurvePath:
    s = np.asarray(s, dtype=float)
    points = np.asarray(points, dtype=float)
    tangents = np.asarray(tangents, dtype=float)
    if s.ndim != 1 or len(s) < 1 or (len(s) > 1 and np.any(np.diff(s) <= 0)):
        raise ValueError("arc-length samples must be strictly increasing")
    for x in points:
        check_point(M, x)
    if check_unit_speed:
        drift = max(abs(norm(M, x, t) - 1.0) for x, t in zip(points, tangents))
        if drift > UNIT_SPEED_PATH_TOL:
            raise NonUnitSpeed(f"path is not unit speed (max deviation {drift:.3e})")
    return CurvePath(
        manifold=M,
        s=s,
        points=points,
        tangents=tangents,
        accelerations=None if accelerations is None else np.asarray(accelerations, dtype=float),
    )

def latitude_circle(M: ManifoldDescriptor, colatitude: float, n: int = 721, height: float = 0.0) -> CurvePath:
    """
    Closed unit-speed latitude circle on S²(r) (or on S²(r)×ℝ at height t).

    `colatitude` is the polar angle measured from the north pole.
    """
    r = M.radius
    lat = math.pi / 2 - colatitude
    c = math.cos(lat)
    length = 2 * math.pi * r * c
    s = np.linspace(0.0, length, n)
    psi = s / (r * c)
    pts = [np.full(n, lat), psi]
    tng = [np.zeros(n), np.full(n, 1.0 / (r * c))]
    if M.dim == 3:
        pts.append(np.full(n, height))
        tng.append(np.zeros(n))
    return path_from_samples(M, s, np.array(pts).T, np.array(tng).T, accelerations=np.zeros((n, M.dim)))

def chart_circle(
    M: ManifoldDescriptor,
    chart_radius: float,
    n: int = 721,
    center=None,
    plane: Tuple[int, int] = (0, 1),
    turns: float = 1.0,
) -> CurvePath:
    """
    Unit-speed coordinate circle |x − c| = chart_radius in the (i, j) coordinate plane.

    Valid for charts whose metric is a rotation-invariant multiple of the identity
    around `center` (Cartesian, stereographic, Poincaré) or any product with ℝ.
    """
    dim = M.dim
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    i, j = plane
    edge = c.copy()
    edge[i] += chart_radius
    scale = math.sqrt(M.chart.metric(edge)[i, i]) # conformal factor √ψ on the circle
    length = 2 * math.pi * chart_radius * scale * turns
    s = np.linspace(0.0, length, n)
    a = s / (chart_radius * scale)
    pts = np.tile(c, (n, 1))
    pts[:, i] += chart_radius * np.cos(a)
    pts[:, j] += chart_radius * np.sin(a)
    tng = np.zeros((n, dim))
    tng[:, i] = -np.sin(a) / scale
    tng[:, j] = np.cos(a) / scale
    acc = np.zeros((n, dim))
    acc[:, i] = -np.cos(a) / (scale ** 2 * chart_radius)
    acc[:, j] = -np.sin(a) / (scale ** 2 * chart_radius)
    return path_from_samples(M, s, pts, tng, accelerations=acc)

# --- Parallel transport ---

def transport_rhs(M: ManifoldDescriptor, path: CurvePath, k: int) -> Callable:
    n = M.dim
    def rhs(s, y):
        x = path.position(s)
        xdot = path.velocity(s)
        gamma = _gamma_raw(M, x)
        V = y.reshape(k, n)
        return (-np.einsum("kij,i,aj->ak", gamma, xdot, V)).ravel()
    return rhs

def parallel_transport(
    M: ManifoldDescriptor,
    path: CurvePath,
    V0,
    settings: Optional[IntegratorSettings] = None,
    at=None,
) -> np.ndarray:
    """
    Transport V0 (shape (d,) or (k, d)) from the start of `path` along it.

    Returns the field at the path samples (or at `at`), shape (n, d) or (n, k, d).
    """
    settings = _settings(settings)
    V0 = np.asarray(V0, dtype=float)
    single = V0.ndim == 1
    V0 = np.atleast_2d(V0)
    k, n = V0.shape
    eval_s = path.s if at is None else np.asarray(at, dtype=float)
    if path.n == 1 or path.length == 0.0:
        out = np.repeat(V0[None, :, :], len(eval_s), axis=0)
        return out[:, 0, :] if single else out
    sol = solve_ivp(
        transport_rhs(M, path, k),
        (float(path.s[0]), float(path.s[-1])),
        V0.ravel(),
        method=settings.method,
        rtol=settings.rel_tol,
        atol=settings.abs_tol,
        max_step=settings.max_step,
        dense_output=True,
    )
    if sol.status == -1:
        raise StepFailure(f"parallel transport failed at s = {sol.t[-1]:.6g}: {sol.message}")
    out = sol.sol(eval_s).T.reshape(len(eval_s), k, n)
    if at is None:
        out[0] = V0
    return out[:, 0, :] if single else out

def _wrapped_difference(M: ManifoldDescriptor, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    for i, period in enumerate(M.chart.periods):
        if period:
            d[i] = (d[i] + period / 2) % period - period / 2
    return d

def loop_holonomy(M: ManifoldDescriptor, loop: CurvePath, settings: Optional[IntegratorSettings] = None) -> float:
    """Rotation angle in [0, π] of the holonomy of a closed loop."""
    if loop.n < 2 or loop.length == 0.0:
        return 0.0
    gap = float(np.max(np.abs(_wrapped_difference(M, loop.points[0], loop.points[-1]))))
    if gap > 1e-8:
        raise NotClosed(f"loop endpoints differ by {gap:.3e} in chart coordinates")
    p0 = loop.points[0]
    g = M.chart.metric(p0)
    # orthonormal basis at p0 and its transport
    w, U = np.linalg.eigh(g)
    E0 = (U / np.sqrt(w)).T
    E1 = parallel_transport(M, loop, E0, settings)[-1]
    H = E0 @ g @ E1.T # H[a, b] = ⟨E0_a, E1_b⟩
    if M.dim == 2:
        return abs(math.atan2(H[0, 1] - H[1, 0], H[0, 0] + H[1, 1]))
    axis = np.array([H[2, 1] - H[1, 2], H[0, 2] - H[2, 0], H[1, 0] - H[0, 1]])
    return math.atan2(float(np.linalg.norm(axis)), float(np.trace(H) - 1.0))

# --- Serialization ---

def serialize_path(path: CurvePath, destination: Union[str, Path]) -> Path:
    """CSV `s,x1..,T1..[,field columns]` with 17 significant digits."""
    d = path.manifold.dim
    names = sorted(path.fields)
    header = ["s"] + [f"x{i + 1}" for i in range(d)] + [f"T{i + 1}" for i in range(d)]
    columns = [path.s[:, None], path.points, path.tangents]
    for name in names:
        field = path.fields[name].reshape(path.n, -1)
        header += [f"{name}{i + 1}" for i in range(field.shape[1])]
        columns.append(field)
    return write_csv(destination, header, np.hstack(columns))
