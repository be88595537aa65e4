"""
Ruled patches over curves, their fundamental forms and curvatures, and the
constant-angle criteria evaluated on them.

Grid conventions: arrays are indexed [i_u, j_v, ...]; u is the directrix
parameter and v the arc length along the rulings. Partials in v come from the
geodesic integrator, partials in u from 4th-order differences across columns.
The normal ν makes (X_u, X_v, ν) positively oriented.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RectBivariateSpline

from ..core.config import settings
from ..core.exceptions import (
    DegeneratePatch,
    DegenerateRuling,
    KappaVanishes,
    LeftChart,
    LeftPatch,
    MissingForms,
    SurfaceError,
)
from ..schemas.curve_schemas import CurvePath, FrenetData, IntegratorSettings
from ..schemas.manifold_schemas import ManifoldDescriptor, MetricKind
from ..schemas.surface_schemas import (
    AngleDefect,
    ConnectionTable,
    CurvatureOperatorField,
    PatchKind,
    RuledPatch,
    SurfaceAxisField,
    SurfaceCurve,
)
from .export_service import write_obj, write_patch_csv
from .frenet_service import _assemble, fourth_order_derivative, grid_step, is_uniform, resample_uniform
from .manifold_service import (
    _gamma_raw,
    build_manifold,
    christoffel_from_derivatives,
    cross,
    curvature_form,
    gaussian_curvature,
    riemann_raw,
    rotate_j,
    sectional_curvature,
)
from .transport_service import chart_exit_event, integrate_ode, parallel_transport, solve_dense

logger = logging.getLogger(__name__)

LAMBDA_TOL = 1e-3
FLAT_TOL = 1e-5

# --- Grids ---

def ruling_grid(v_min: float, v_max: float, nv: int) -> np.ndarray:
    """
    Uniform v-grid over [v_min, v_max]. When the range straddles 0 the grid is
    shifted by less than half a step so that v = 0 is a node.
    """
    if v_min > v_max:
        raise SurfaceError(f"empty ruling range [{v_min}, {v_max}]")
    if v_min == v_max:
        return np.array([float(v_min)])
    if nv < 2:
        raise SurfaceError("a ruling range needs at least two samples")
    h = (v_max - v_min) / (nv - 1)
    if v_min < 0.0 < v_max:
        k0 = int(round(-v_min / h))
        return (np.arange(nv) - k0) * h
    return np.linspace(v_min, v_max, nv)

def column_indices(s: np.ndarray, nu: Optional[int] = None, u_range: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """Uniform-stride subset of a directrix grid with about `nu` columns."""
    nu = nu or settings.DEFAULT_NU
    idx = np.arange(len(s))
    if u_range is not None:
        idx = idx[(s >= u_range[0] - 1e-12) & (s <= u_range[1] + 1e-12)]
    if len(idx) == 0:
        raise SurfaceError(f"u_range {u_range} selects no directrix samples")
    stride = max(1, int(round((len(idx) - 1) / max(nu - 1, 1))))
    return idx[::stride]

def _d(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    moved = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    return np.moveaxis(fourth_order_derivative(moved, h), 0, axis)

def _map_columns(fn: Callable, items: Sequence):
    threads = max(1, int(settings.THREADS))
    if threads == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))

# --- Ruling shots ---

def shoot_ruling(
    M: ManifoldDescriptor,
    p,
    w,
    v_grid: np.ndarray,
    integrator: IntegratorSettings,
    carried: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Geodesic v ↦ exp_p(v w) sampled on v_grid (integrated two-sided from v = 0),
    optionally transporting the rows of `carried` along it.

    Returns states (nv, 2d [+ k d]): position, velocity, carried vectors.
    """
    d = M.dim
    k = 0 if carried is None else len(carried)

    def rhs(s, y):
        x, xd = y[:d], y[d:2 * d]
        gamma = _gamma_raw(M, x)
        out = [xd, -np.einsum("kij,i,j->k", gamma, xd, xd)]
        if k:
            W = y[2 * d:].reshape(k, d)
            out.append((-np.einsum("kij,i,aj->ak", gamma, xd, W)).ravel())
        return np.concatenate(out)

    parts = [np.asarray(p, dtype=float), np.asarray(w, dtype=float)]
    if k:
        parts.append(np.asarray(carried, dtype=float).ravel())
    y0 = np.concatenate(parts)
    lo, hi = min(float(v_grid[0]), 0.0), max(float(v_grid[-1]), 0.0)
    events = [chart_exit_event(M, d)]
    back, reached_lo, _, _ = solve_dense(rhs, y0, 0.0, lo, integrator, events)
    fwd, reached_hi, _, _ = solve_dense(rhs, y0, 0.0, hi, integrator, events)
    if reached_lo > lo + 1e-12 or reached_hi < hi - 1e-12:
        raise LeftChart(f"ruling from {np.round(p, 6)} left the chart of {M.name} at v in [{reached_lo:.6g}, {reached_hi:.6g}]")
    states = np.empty((len(v_grid), len(y0)))
    neg = v_grid < 0.0
    if neg.any():
        states[neg] = back(v_grid[neg]).T
    if (~neg).any():
        states[~neg] = fwd(v_grid[~neg]).T
    states[np.abs(v_grid) < 1e-15] = y0
    return states

def _geodesic_acceleration(M: ManifoldDescriptor, points: np.ndarray, velocities: np.ndarray) -> np.ndarray:
    out = np.empty_like(velocities)
    for idx in np.ndindex(points.shape[:-1]):
        out[idx] = -np.einsum("kij,i,j->k", _gamma_raw(M, points[idx]), velocities[idx], velocities[idx])
    return out

def _assemble_patch(
    M: ManifoldDescriptor,
    kind: PatchKind,
    u: np.ndarray,
    v: np.ndarray,
    points: np.ndarray,
    X_v: np.ndarray,
    **extra,
) -> RuledPatch:
    du = float(u[1] - u[0]) if len(u) > 1 else 1.0
    X_u = _d(points, du, 0)
    return RuledPatch(
        manifold=M,
        kind=kind,
        u=u,
        v=v,
        points=points,
        X_u=X_u,
        X_v=X_v,
        X_uu=_d(X_u, du, 0),
        X_uv=_d(X_v, du, 0),
        X_vv=_geodesic_acceleration(M, points, X_v),
        **extra,
    )

def _directrix_grid(path: CurvePath) -> CurvePath:
    return path if is_uniform(path.s) else resample_uniform(path)

# --- Constructions ---

def build_cylinder(
    M: ManifoldDescriptor,
    beta: CurvePath,
    V0,
    v_range: Tuple[float, float],
    nu: Optional[int] = None,
    nv: Optional[int] = None,
    integrator: Optional[IntegratorSettings] = None,
    u_range: Optional[Tuple[float, float]] = None,
) -> RuledPatch:
    """Intrinsic cylinder exp_{β(u)}(v V(u)) with V the parallel transport of V0 along β."""
    integrator = integrator or IntegratorSettings()
    beta = _directrix_grid(beta)
    cols = column_indices(beta.s, nu, u_range)
    u = beta.s[cols]
    v = ruling_grid(v_range[0], v_range[1], nv or settings.DEFAULT_NV)
    V = parallel_transport(M, beta, np.asarray(V0, dtype=float), integrator, at=u)

    directions = []
    for x, t, w, uu in zip(beta.points[cols], beta.tangents[cols], V, u):
        g = M.chart.metric(x)
        gram = (t @ g @ t) * (w @ g @ w) - (t @ g @ w) ** 2
        if gram <= settings.DEGENERATE_RULING_GRAM:
            raise DegenerateRuling(f"axis is tangent to the directrix at u = {uu:.6g} (Gram {gram:.3e})")
        directions.append(w / math.sqrt(w @ g @ w))

    d = M.dim
    shots = _map_columns(lambda i: shoot_ruling(M, beta.points[cols][i], directions[i], v, integrator), range(len(u)))
    states = np.array(shots)
    logger.info(f"cylinder on {M.name}: {len(u)} x {len(v)} grid")
    return _assemble_patch(M, PatchKind.CYLINDER, u, v, states[:, :, :d], states[:, :, d:2 * d])

def _subset_frenet(fd: FrenetData, idx: np.ndarray) -> FrenetData:
    update = {
        name: getattr(fd, name)[idx]
        for name in ("s", "points", "T", "N", "B", "kappa", "tau", "omega", "sigma", "D")
    }
    for name in ("kappa_prime", "tau_prime"):
        value = getattr(fd, name)
        update[name] = None if value is None else value[idx]
    return fd.model_copy(update=update)

def build_rectifying_surface(
    M: ManifoldDescriptor,
    path: CurvePath,
    fd: FrenetData,
    v_range: Tuple[float, float],
    nu: Optional[int] = None,
    nv: Optional[int] = None,
    integrator: Optional[IntegratorSettings] = None,
) -> RuledPatch:
    """Rectifying surface exp_{γ(u)}(v D(u)) along the unit Darboux field."""
    integrator = integrator or IntegratorSettings()
    small = fd.kappa <= settings.KAPPA_MIN
    if small.any():
        idx = np.flatnonzero(small)
        raise KappaVanishes("rectifying surface needs κ > 0", (float(fd.s[idx[0]]), float(fd.s[idx[-1]])))
    grid_step(fd.s)
    cols = column_indices(fd.s, nu)
    u = fd.s[cols]
    v = ruling_grid(v_range[0], v_range[1], nv or settings.DEFAULT_NV)
    d = M.dim
    shots = _map_columns(lambda i: shoot_ruling(M, fd.points[i], fd.D[i], v, integrator), cols)
    states = np.array(shots)
    logger.info(f"rectifying surface on {M.name}: {len(u)} x {len(v)} grid")
    return _assemble_patch(
        M, PatchKind.RECTIFYING, u, v, states[:, :, :d], states[:, :, d:2 * d], directrix=_subset_frenet(fd, cols)
    )

def product_manifold(M2: ManifoldDescriptor) -> ManifoldDescriptor:
    if M2.dim != 2:
        raise SurfaceError(f"product surfaces need a 2-dimensional factor, got {M2.name}")
    return build_manifold(MetricKind.PRODUCT.value, radius=M2.radius, factor=M2.metric_kind.value)

def build_product_constant_angle_surface(
    M2: ManifoldDescriptor,
    alpha: CurvePath,
    theta: float,
    v_range: Tuple[float, float],
    u_range: Optional[Tuple[float, float]] = None,
    nu: Optional[int] = None,
    nv: Optional[int] = None,
    integrator: Optional[IntegratorSettings] = None,
) -> RuledPatch:
    """X(u, v) = (exp_{α(u)}(v cos θ Jα′(u)), v sin θ) in M²×ℝ."""
    if not 0.0 < theta < math.pi / 2:
        raise DegeneratePatch(f"theta must lie in (0, pi/2), got {theta}")
    integrator = integrator or IntegratorSettings()
    M = product_manifold(M2)
    alpha = _directrix_grid(alpha)
    cols = column_indices(alpha.s, nu, u_range)
    u = alpha.s[cols]
    v = ruling_grid(v_range[0], v_range[1], nv or settings.DEFAULT_NV)
    c, s = math.cos(theta), math.sin(theta)

    def column(i):
        p, t = alpha.points[i], alpha.tangents[i]
        try:
            return shoot_ruling(M2, p, rotate_j(M2, p, t), v * c, integrator)
        except LeftChart as e:
            raise LeftChart(f"{e} (horizontal part in {M2.name})") from e

    states = np.array(_map_columns(column, cols))
    height = np.broadcast_to(v * s, states.shape[:2])[..., None]
    points = np.concatenate([states[:, :, :2], height], axis=2)
    X_v = np.concatenate([c * states[:, :, 2:4], np.full(states.shape[:2] + (1,), s)], axis=2)
    logger.info(f"constant-angle surface in {M.name}: theta={theta:.6g}, {len(u)} x {len(v)} grid")
    return _assemble_patch(M, PatchKind.PRODUCT_ANGLE, u, v, points, X_v, theta=float(theta))

def _unit_sphere(u, v):
    return np.array([np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)])

def _plane(u, v):
    return np.array([u, v, 0.0 * u])

def _saddle(u, v):
    return np.array([u, v, u * v])

CUSTOM_PATCHES: Dict[str, Callable] = {
    "sphere": _unit_sphere,
    "plane": _plane,
    "saddle": _saddle,
}

def build_custom_patch(
    M: ManifoldDescriptor,
    name: str,
    u_range: Tuple[float, float],
    v_range: Tuple[float, float],
    nu: Optional[int] = None,
    nv: Optional[int] = None,
) -> RuledPatch:
    """An explicit parametrisation in chart coordinates; all partials by grid differences."""
    if name not in CUSTOM_PATCHES:
        raise SurfaceError(f"unknown custom patch '{name}'; known: {sorted(CUSTOM_PATCHES)}")
    fn = CUSTOM_PATCHES[name]
    u = np.linspace(u_range[0], u_range[1], nu or settings.DEFAULT_NU)
    v = ruling_grid(v_range[0], v_range[1], nv or settings.DEFAULT_NV)
    U, W = np.meshgrid(u, v, indexing="ij")
    points = np.moveaxis(fn(U, W), 0, -1)
    du, dv = float(u[1] - u[0]), float(v[1] - v[0])
    X_u, X_v = _d(points, du, 0), _d(points, dv, 1)
    return RuledPatch(
        manifold=M, kind=PatchKind.CUSTOM, u=u, v=v, points=points,
        X_u=X_u, X_v=X_v, X_uu=_d(X_u, du, 0), X_uv=_d(X_v, du, 0), X_vv=_d(X_v, dv, 1),
    )

# --- Fundamental forms ---

def _node_forms(M: ManifoldDescriptor, patch: RuledPatch, i: int):
    nv = patch.nv
    out = np.empty((nv, 10))
    normals = np.empty((nv, M.dim))
    for j in range(nv):
        x = patch.points[i, j]
        g = M.chart.metric(x)
        gamma = _gamma_raw(M, x)
        Xu, Xv = patch.X_u[i, j], patch.X_v[i, j]
        E, F, G = Xu @ g @ Xu, Xu @ g @ Xv, Xv @ g @ Xv
        det = E * G - F * F
        if det <= settings.DEGENERATE_PATCH_DET:
            raise DegeneratePatch(f"first fundamental form is singular at (u, v) = ({patch.u[i]:.6g}, {patch.v[j]:.6g})")
        n = cross(M, x, Xu, Xv)
        n = n / math.sqrt(n @ g @ n)
        cov = lambda A, Y, Z: A + np.einsum("kij,i,j->k", gamma, Y, Z)
        h11 = cov(patch.X_uu[i, j], Xu, Xu) @ g @ n
        h12 = cov(patch.X_uv[i, j], Xu, Xv) @ g @ n
        h22 = cov(patch.X_vv[i, j], Xv, Xv) @ g @ n

        # λ in the frame e₁ = X_v/|X_v|, e₂ = ν × e₁
        e1 = Xv / math.sqrt(G)
        e2 = cross(M, x, n, e1)
        a, b = np.linalg.solve(np.array([[E, F], [F, G]]), np.array([e2 @ g @ Xu, e2 @ g @ Xv]))
        h_e1e1 = h22 / G
        h_e1e2 = (a * h12 + b * h22) / math.sqrt(G)
        h_e2e2 = a * a * h11 + 2 * a * b * h12 + b * b * h22
        tol = LAMBDA_TOL * (1.0 + abs(h_e2e2))
        lam = h_e2e2 if abs(h_e1e1) < tol and abs(h_e1e2) < tol else math.nan
        out[j] = (E, F, G, h11, h12, h22, lam, a, b, det)
        normals[j] = n
    return out, normals

def fundamental_forms(M: ManifoldDescriptor, patch: RuledPatch) -> RuledPatch:
    """g_ij, h_ij = ⟨∇_{X_i} X_j, ν⟩, the unit normal and λ at every node."""
    results = _map_columns(lambda i: _node_forms(M, patch, i), range(patch.nu))
    vals = np.array([r[0] for r in results])
    normals = np.array([r[1] for r in results])
    return patch.model_copy(update={
        "normal": normals,
        "g11": vals[..., 0], "g12": vals[..., 1], "g22": vals[..., 2],
        "h11": vals[..., 3], "h12": vals[..., 4], "h22": vals[..., 5],
        "lam": vals[..., 6],
    })

def shape_operator(patch: RuledPatch) -> np.ndarray:
    """S = g⁻¹h in the (∂u, ∂v) basis, shape (nu, nv, 2, 2)."""
    patch.require_forms()
    g = np.stack([np.stack([patch.g11, patch.g12], -1), np.stack([patch.g12, patch.g22], -1)], -2)
    h = np.stack([np.stack([patch.h11, patch.h12], -1), np.stack([patch.h12, patch.h22], -1)], -2)
    return np.linalg.solve(g, h)

def principal_curvatures(patch: RuledPatch) -> np.ndarray:
    """Eigenvalues of the shape operator, ascending, shape (nu, nv, 2)."""
    return np.sort(np.linalg.eigvals(shape_operator(patch)).real, axis=-1)

def extrinsic_curvature(patch: RuledPatch) -> np.ndarray:
    patch.require_forms()
    det = patch.metric_det()
    if np.any(det <= settings.DEGENERATE_PATCH_DET):
        raise DegeneratePatch("first fundamental form is singular on the grid")
    return (patch.h11 * patch.h22 - patch.h12 ** 2) / det

def intrinsic_curvature(patch: RuledPatch) -> np.ndarray:
    """Brioschi formula on the grid of g_ij."""
    patch.require_forms()
    if patch.nu < 5 or patch.nv < 5:
        raise DegeneratePatch("the Brioschi formula needs at least 5 x 5 grid nodes")
    du, dv = patch.du, patch.dv
    E, F, G = patch.g11, patch.g12, patch.g22
    Eu, Ev = _d(E, du, 0), _d(E, dv, 1)
    Fu, Fv = _d(F, du, 0), _d(F, dv, 1)
    Gu, Gv = _d(G, du, 0), _d(G, dv, 1)
    Evv, Guu, Fuv = _d(Ev, dv, 1), _d(Gu, du, 0), _d(Fu, dv, 1)
    zero = np.zeros_like(E)
    A = np.stack([
        np.stack([-Evv / 2 + Fuv - Guu / 2, Eu / 2, Fu - Ev / 2], -1),
        np.stack([Fv - Gu / 2, E, F], -1),
        np.stack([Gv / 2, F, G], -1),
    ], -2)
    B = np.stack([
        np.stack([zero, Ev / 2, Gu / 2], -1),
        np.stack([Ev / 2, E, F], -1),
        np.stack([Gu / 2, F, G], -1),
    ], -2)
    return (np.linalg.det(A) - np.linalg.det(B)) / (E * G - F ** 2) ** 2

def ambient_sectional_field(M: ManifoldDescriptor, patch: RuledPatch) -> np.ndarray:
    """K_sec(span X_u, X_v) at every node."""
    out = np.empty((patch.nu, patch.nv))
    for i, j in np.ndindex(out.shape):
        out[i, j] = sectional_curvature(M, patch.points[i, j], patch.X_u[i, j], patch.X_v[i, j])
    return out

def gauss_residual(M: ManifoldDescriptor, patch: RuledPatch) -> np.ndarray:
    """K_int − K_ext − K_sec(span X_u, X_v)."""
    return intrinsic_curvature(patch) - extrinsic_curvature(patch) - ambient_sectional_field(M, patch)

def normal_component(M: ManifoldDescriptor, patch: RuledPatch, V: np.ndarray) -> np.ndarray:
    """⟨V, ν⟩ at every node."""
    patch.require_forms()
    out = np.empty((patch.nu, patch.nv))
    for i, j in np.ndindex(out.shape):
        out[i, j] = V[i, j] @ M.chart.metric(patch.points[i, j]) @ patch.normal[i, j]
    return out

# --- Axis fields on patches ---

def columns_of(patch: RuledPatch, s: np.ndarray) -> np.ndarray:
    """Indices of the patch u-values in a uniform directrix grid s."""
    h = grid_step(s)
    idx = np.rint((patch.u - s[0]) / h).astype(int)
    if np.any(np.abs(s[idx] - patch.u) > 1e-9 * max(1.0, h)):
        raise SurfaceError("patch columns are not samples of the given directrix")
    return idx

def _ruling_residual(M: ManifoldDescriptor, patch: RuledPatch, V: np.ndarray) -> np.ndarray:
    if patch.nv < 2:
        return np.zeros((patch.nu, patch.nv))
    dV = _d(V, patch.dv, 1)
    out = np.empty((patch.nu, patch.nv))
    for i, j in np.ndindex(out.shape):
        x = patch.points[i, j]
        w = dV[i, j] + np.einsum("kij,i,j->k", _gamma_raw(M, x), patch.X_v[i, j], V[i, j])
        out[i, j] = math.sqrt(max(w @ M.chart.metric(x) @ w, 0.0))
    return out

def extend_axis(
    M: ManifoldDescriptor,
    patch: RuledPatch,
    V0,
    theta: float,
    integrator: Optional[IntegratorSettings] = None,
) -> SurfaceAxisField:
    """Extend the directrix axis V(u, 0) (shape (nu, d)) by parallel transport along every ruling."""
    if not patch.is_ruled:
        raise SurfaceError("axis extension needs a ruled patch")
    j0 = patch.v0_index
    if j0 is None:
        raise SurfaceError("axis extension needs the directrix v = 0 on the grid")
    integrator = integrator or IntegratorSettings()
    V0 = np.asarray(V0, dtype=float)
    if V0.shape != (patch.nu, M.dim):
        raise SurfaceError(f"directrix axis must have shape {(patch.nu, M.dim)}, got {V0.shape}")
    d = M.dim

    def column(i):
        states = shoot_ruling(M, patch.points[i, j0], patch.X_v[i, j0], patch.v, integrator, carried=V0[i][None, :])
        return states[:, 2 * d:3 * d]

    V = np.array(_map_columns(column, range(patch.nu)))
    return SurfaceAxisField(V=V, theta=float(theta), ruling_residual=_ruling_residual(M, patch, V))

def constant_axis(M: ManifoldDescriptor, patch: RuledPatch, vector, theta: float) -> SurfaceAxisField:
    """A coordinate-constant axis (e.g. ∂t on M²×ℝ), for fields that are parallel by construction."""
    V = np.broadcast_to(np.asarray(vector, dtype=float), patch.points.shape).copy()
    return SurfaceAxisField(V=V, theta=float(theta), construction="constant", ruling_residual=_ruling_residual(M, patch, V))

def surface_axis_from_rectifying(patch: RuledPatch, theta: float) -> np.ndarray:
    """sin θ ∂v − cos θ ν at every node."""
    patch.require_forms()
    return math.sin(theta) * patch.X_v - math.cos(theta) * patch.normal

def axis_transport_residual(M: ManifoldDescriptor, patch: RuledPatch, axis: SurfaceAxisField) -> np.ndarray:
    """|∇_{∂u} V| at every node."""
    dV = _d(axis.V, patch.du, 0)
    out = np.empty((patch.nu, patch.nv))
    for i, j in np.ndindex(out.shape):
        x = patch.points[i, j]
        w = dV[i, j] + np.einsum("kij,i,j->k", _gamma_raw(M, x), patch.X_u[i, j], axis.V[i, j])
        out[i, j] = math.sqrt(max(w @ M.chart.metric(x) @ w, 0.0))
    return out

# --- Constant-angle criteria ---

def parallel_angle_defect(M: ManifoldDescriptor, patch: RuledPatch, axis: SurfaceAxisField) -> AngleDefect:
    """
    δ = ⟨∂u, ∇_{∂u} V⟩ computed from the transported axis, and the closed form
    (∂v g11 / 2)·a − h11·b where V = a ∂v + b ν along the directrix.
    """
    if not patch.has_forms:
        raise MissingForms("the angle defect needs fundamental forms")
    j0 = patch.v0_index
    if j0 is None:
        raise SurfaceError("the angle defect needs the directrix v = 0 on the grid")
    dV = _d(axis.V, patch.du, 0)
    direct = np.empty((patch.nu, patch.nv))
    for i, j in np.ndindex(direct.shape):
        x = patch.points[i, j]
        Xu = patch.X_u[i, j]
        w = dV[i, j] + np.einsum("kij,i,j->k", _gamma_raw(M, x), Xu, axis.V[i, j])
        direct[i, j] = Xu @ M.chart.metric(x) @ w

    a = np.empty(patch.nu)
    b = np.empty(patch.nu)
    for i in range(patch.nu):
        g = M.chart.metric(patch.points[i, j0])
        a[i] = axis.V[i, j0] @ g @ patch.X_v[i, j0]
        b[i] = axis.V[i, j0] @ g @ patch.normal[i, j0]
    dg11 = _d(patch.g11, patch.dv, 1) if patch.nv > 1 else np.zeros_like(patch.g11)
    closed = 0.5 * dg11 * a[:, None] - patch.h11 * b[:, None]
    flat = np.abs(extrinsic_curvature(patch)) < FLAT_TOL
    return AngleDefect(direct=direct, closed_form=closed, flat_mask=flat)

def sphere_defect_oracle(kappa, tau, sigma, theta: float, r: float, v):
    """
    Closed-form constant-angle defect on the rectifying surface of a curve in S³(r):

        −sin θ · tan(v/r) (κ cos(v/r) + r ω² σ sin(v/r))² / (r ω²),   ω² = κ² + τ².
    """
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) >= math.pi * r / 2):
        raise ValueError("|v| must stay below pi r / 2")
    kappa, tau, sigma = (np.asarray(a, dtype=float) for a in (kappa, tau, sigma))
    w2 = kappa ** 2 + tau ** 2
    t = v / r
    return -math.sin(theta) * np.tan(t) * (kappa * np.cos(t) + r * w2 * sigma * np.sin(t)) ** 2 / (r * w2)

def curvature_operator_on_axis(M: ManifoldDescriptor, patch: RuledPatch, axis: SurfaceAxisField) -> CurvatureOperatorField:
    """R(∂u, ∂v)V, its ∂u-projection and the scalar sin θ R_uvvu − cos θ R_uvnu."""
    if not patch.has_forms:
        raise MissingForms("the curvature-operator condition needs the patch normal")
    shape = (patch.nu, patch.nv)
    vec = np.empty(shape + (M.dim,))
    proj, scal, nrm = np.empty(shape), np.empty(shape), np.empty(shape)
    s, c = math.sin(axis.theta), math.cos(axis.theta)
    for i, j in np.ndindex(shape):
        x = patch.points[i, j]
        R = riemann_raw(M, x)
        g = M.chart.metric(x)
        Xu, Xv, n, V = patch.X_u[i, j], patch.X_v[i, j], patch.normal[i, j], axis.V[i, j]
        w = np.einsum("lkij,i,j,k->l", R, Xu, Xv, V)
        vec[i, j] = w
        proj[i, j] = w @ g @ Xu
        nrm[i, j] = math.sqrt(max(w @ g @ w, 0.0))
        scal[i, j] = s * curvature_form(M, x, Xu, Xv, Xv, Xu, R) - c * curvature_form(M, x, Xu, Xv, n, Xu, R)
    return CurvatureOperatorField(vector=vec, projection=proj, scalar=scal, norm=nrm)

def _frame_e1_e2(M: ManifoldDescriptor, patch: RuledPatch, i: int, j: int):
    x = patch.points[i, j]
    g = M.chart.metric(x)
    Xu, Xv, n = patch.X_u[i, j], patch.X_v[i, j], patch.normal[i, j]
    e1 = Xv / math.sqrt(Xv @ g @ Xv)
    e2 = cross(M, x, n, e1)
    gm = np.array([[patch.g11[i, j], patch.g12[i, j]], [patch.g12[i, j], patch.g22[i, j]]])
    ab = np.linalg.solve(gm, np.array([e2 @ g @ Xu, e2 @ g @ Xv]))
    return x, g, e1, e2, ab

def riccati_residual(
    M: ManifoldDescriptor,
    patch: RuledPatch,
    theta: Optional[float] = None,
    K_M: Optional[Callable] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    λ_{,1} + λ² cot θ + ½ K^M sin 2θ on a product constant-angle patch, and the
    intrinsic-curvature cross-check −(λ_{,1} + λ² cot θ) cot θ − K_int.
    """
    if patch.kind != PatchKind.PRODUCT_ANGLE:
        raise SurfaceError("the Riccati equation holds on product constant-angle patches")
    patch.require_forms()
    theta = patch.theta if theta is None else theta
    if np.any(np.isnan(patch.lam)):
        raise MissingForms("λ is undefined on part of the patch")
    factor = M.factor
    if K_M is None:
        K_M = lambda x: gaussian_curvature(factor, x[:2])
    lam1 = _d(patch.lam, patch.dv, 1) / np.sqrt(patch.g22)
    cot = math.cos(theta) / math.sin(theta)
    KM = np.array([[K_M(patch.points[i, j]) for j in range(patch.nv)] for i in range(patch.nu)])
    riccati = lam1 + patch.lam ** 2 * cot + 0.5 * KM * math.sin(2 * theta)
    cross_check = -(lam1 + patch.lam ** 2 * cot) * cot - intrinsic_curvature(patch)
    return riccati, cross_check

def connection_table(M: ManifoldDescriptor, patch: RuledPatch) -> ConnectionTable:
    """Levi-Civita coefficients of the frame (e₁, e₂) on a product constant-angle patch."""
    patch.require_forms()
    shape = (patch.nu, patch.nv)
    E1 = np.empty(patch.points.shape)
    E2 = np.empty(patch.points.shape)
    AB = np.empty(shape + (2,))
    for i, j in np.ndindex(shape):
        _, _, E1[i, j], E2[i, j], AB[i, j] = _frame_e1_e2(M, patch, i, j)
    dE1_u, dE1_v = _d(E1, patch.du, 0), _d(E1, patch.dv, 1)
    e2e1e2, e1e1e2 = np.empty(shape), np.empty(shape)
    for i, j in np.ndindex(shape):
        x = patch.points[i, j]
        g = M.chart.metric(x)
        gamma = _gamma_raw(M, x)
        Xu, Xv, e1 = patch.X_u[i, j], patch.X_v[i, j], E1[i, j]
        nab_u = dE1_u[i, j] + np.einsum("kij,i,j->k", gamma, Xu, e1)
        nab_v = dE1_v[i, j] + np.einsum("kij,i,j->k", gamma, Xv, e1)
        a, b = AB[i, j]
        e2e1e2[i, j] = (a * nab_u + b * nab_v) @ g @ E2[i, j]
        e1e1e2[i, j] = nab_v @ g @ E2[i, j] / math.sqrt(Xv @ g @ Xv)
    theta = patch.theta if patch.theta is not None else math.pi / 2
    lam_cot = patch.lam * math.cos(theta) / math.sin(theta)
    return ConnectionTable(e2_e1_e2=e2e1e2, lam_cot=lam_cot, e1_e1_e2=e1e1e2)

def principal_direction_residual(M: ManifoldDescriptor, patch: RuledPatch, axis: SurfaceAxisField) -> np.ndarray:
    """|A T_proj| with T_proj = V − ⟨V, ν⟩ν the tangential part of the axis."""
    S = shape_operator(patch)
    out = np.empty((patch.nu, patch.nv))
    for i, j in np.ndindex(out.shape):
        x = patch.points[i, j]
        g = M.chart.metric(x)
        Xu, Xv, V = patch.X_u[i, j], patch.X_v[i, j], axis.V[i, j]
        gm = np.array([[patch.g11[i, j], patch.g12[i, j]], [patch.g12[i, j], patch.g22[i, j]]])
        ab = np.linalg.solve(gm, np.array([V @ g @ Xu, V @ g @ Xv]))
        c = S[i, j] @ ab
        out[i, j] = math.sqrt(max(c @ gm @ c, 0.0))
    return out

def ruledness_criterion(M: ManifoldDescriptor, patch: RuledPatch) -> Tuple[np.ndarray, np.ndarray]:
    """(⟨R(e₂, e₁)e₁, ν⟩, ⟨R(e₁, e₂)e₂, ν⟩) at every node."""
    patch.require_forms()
    comp, swapped = np.empty((patch.nu, patch.nv)), np.empty((patch.nu, patch.nv))
    for i, j in np.ndindex(comp.shape):
        x, _, e1, e2, _ = _frame_e1_e2(M, patch, i, j)
        R = riemann_raw(M, x)
        n = patch.normal[i, j]
        comp[i, j] = curvature_form(M, x, e2, e1, e1, n, R)
        swapped[i, j] = curvature_form(M, x, e1, e2, e2, n, R)
    return comp, swapped

def directrix_geodesic_residual(M: ManifoldDescriptor, patch: RuledPatch) -> np.ndarray:
    """Geodesic curvature in the patch of the directrix u ↦ X(u, 0)."""
    patch.require_forms()
    j0 = patch.v0_index
    if j0 is None:
        raise SurfaceError("the patch grid does not contain the directrix v = 0")
    out = np.empty(patch.nu)
    for i in range(patch.nu):
        x = patch.points[i, j0]
        g = M.chart.metric(x)
        Xu, n = patch.X_u[i, j0], patch.normal[i, j0]
        acc = patch.X_uu[i, j0] + np.einsum("kij,i,j->k", _gamma_raw(M, x), Xu, Xu)
        speed2 = Xu @ g @ Xu
        tangential = acc - (acc @ g @ n) * n - (acc @ g @ Xu) / speed2 * Xu
        out[i] = math.sqrt(max(tangential @ g @ tangential, 0.0)) / speed2
    return out

def ruling_geodesic_residual(M: ManifoldDescriptor, patch: RuledPatch) -> np.ndarray:
    """max(|∇_{X_v} X_v| with X_v differenced in v, ||X_v| − 1|) at every node."""
    dXv = _d(patch.X_v, patch.dv, 1) if patch.nv >= 5 else patch.X_vv
    out = np.empty((patch.nu, patch.nv))
    for i, j in np.ndindex(out.shape):
        x = patch.points[i, j]
        g = M.chart.metric(x)
        Xv = patch.X_v[i, j]
        w = dXv[i, j] + np.einsum("kij,i,j->k", _gamma_raw(M, x), Xv, Xv)
        out[i, j] = max(math.sqrt(max(w @ g @ w, 0.0)), abs(math.sqrt(Xv @ g @ Xv) - 1.0))
    return out

def normal_residual(M: ManifoldDescriptor, patch: RuledPatch) -> np.ndarray:
    """max(|⟨ν, X_u⟩|, |⟨ν, X_v⟩|, ||ν| − 1|) at every node."""
    patch.require_forms()
    out = np.empty((patch.nu, patch.nv))
    for i, j in np.ndindex(out.shape):
        g = M.chart.metric(patch.points[i, j])
        n = patch.normal[i, j]
        out[i, j] = max(abs(n @ g @ patch.X_u[i, j]), abs(n @ g @ patch.X_v[i, j]), abs(math.sqrt(n @ g @ n) - 1.0))
    return out

# --- Geodesics of the patch metric ---

def _spline(patch: RuledPatch, values: np.ndarray) -> RectBivariateSpline:
    return RectBivariateSpline(patch.u, patch.v, values, kx=min(3, patch.nu - 1), ky=min(3, patch.nv - 1))

def _component_splines(patch: RuledPatch, field: np.ndarray):
    return [_spline(patch, field[..., k]) for k in range(field.shape[-1])]

def _eval(splines, u, v) -> np.ndarray:
    return np.array([float(sp.ev(u, v)) for sp in splines])

def surface_geodesic(
    patch: RuledPatch,
    start: Tuple[float, float],
    direction,
    length: float,
    integrator: Optional[IntegratorSettings] = None,
) -> SurfaceCurve:
    """
    Geodesic of the interpolated patch metric from (u0, v0) with initial direction w0
    (components in ∂u, ∂v), lifted to the ambient manifold.
    """
    patch.require_forms()
    if patch.nu < 4 or patch.nv < 4:
        raise DegeneratePatch("patch geodesics need at least 4 x 4 grid nodes")
    integrator = integrator or IntegratorSettings()
    u_lo, u_hi, v_lo, v_hi = patch.u[0], patch.u[-1], patch.v[0], patch.v[-1]
    u0, v0 = map(float, start)
    if not (u_lo < u0 < u_hi and v_lo < v0 < v_hi):
        raise SurfaceError(f"start {start} is not interior to the patch")
    sE, sF, sG = _spline(patch, patch.g11), _spline(patch, patch.g12), _spline(patch, patch.g22)

    def metric_and_derivs(u, v):
        g = np.array([[sE.ev(u, v), sF.ev(u, v)], [sF.ev(u, v), sG.ev(u, v)]], dtype=float)
        dg = np.array([
            [[sE.ev(u, v, dx=1), sF.ev(u, v, dx=1)], [sF.ev(u, v, dx=1), sG.ev(u, v, dx=1)]],
            [[sE.ev(u, v, dy=1), sF.ev(u, v, dy=1)], [sF.ev(u, v, dy=1), sG.ev(u, v, dy=1)]],
        ], dtype=float)
        return g, dg

    def rhs(s, y):
        g, dg = metric_and_derivs(y[0], y[1])
        gamma = christoffel_from_derivatives(g, dg)
        w = y[2:]
        return np.concatenate([w, -np.einsum("kij,i,j->k", gamma, w, w)])

    def leave(s, y):
        return min(y[0] - u_lo, u_hi - y[0], y[1] - v_lo, v_hi - y[1])
    leave.terminal = True
    leave.direction = -1

    g0, _ = metric_and_derivs(u0, v0)
    w0 = np.asarray(direction, dtype=float)
    w0 = w0 / math.sqrt(w0 @ g0 @ w0)
    grid, states, status, _ = integrate_ode(rhs, np.concatenate([[u0, v0], w0]), float(length), integrator, events=[leave])

    pts_sp = _component_splines(patch, patch.points)
    xu_sp = _component_splines(patch, patch.X_u)
    xv_sp = _component_splines(patch, patch.X_v)
    points = np.array([_eval(pts_sp, a, b) for a, b in states[:, :2]])
    tangents = np.array([
        _eval(xu_sp, y[0], y[1]) * y[2] + _eval(xv_sp, y[0], y[1]) * y[3] for y in states
    ])
    path = CurvePath(manifold=patch.manifold, s=grid, points=points, tangents=tangents, left_chart=status == "event")
    curve = SurfaceCurve(s=grid, uv=states[:, :2], duv=states[:, 2:], path=path, left_patch=status == "event")
    if curve.left_patch:
        raise LeftPatch(f"surface geodesic left the patch after arc length {grid[-1]:.6g}", partial=curve)
    return curve

def geodesic_frenet(M: ManifoldDescriptor, patch: RuledPatch, curve: SurfaceCurve) -> FrenetData:
    """
    Frenet data of a surface geodesic from its Darboux frame:
    κ = |h(T, T)|, N = ±ν, τ = h(T, ν × T).
    """
    patch.require_forms()
    h_sp = [_spline(patch, patch.h11), _spline(patch, patch.h12), _spline(patch, patch.h22)]
    n_sp = _component_splines(patch, patch.normal)
    g_sp = [_spline(patch, patch.g11), _spline(patch, patch.g12), _spline(patch, patch.g22)]
    xu_sp, xv_sp = _component_splines(patch, patch.X_u), _component_splines(patch, patch.X_v)
    n = curve.path.n
    T, N, B = (np.empty((n, M.dim)) for _ in range(3))
    kappa, tau = np.empty(n), np.empty(n)
    for a, ((u, v), w, x, t) in enumerate(zip(curve.uv, curve.duv, curve.path.points, curve.path.tangents)):
        g = M.chart.metric(x)
        t = t / math.sqrt(t @ g @ t)
        nu_ = _eval(n_sp, u, v)
        nu_ = nu_ - (nu_ @ g @ t) * t
        nu_ = nu_ / math.sqrt(nu_ @ g @ nu_)
        h11, h12, h22 = (float(sp.ev(u, v)) for sp in h_sp)
        hm = np.array([[h11, h12], [h12, h22]])
        E, F, G = (float(sp.ev(u, v)) for sp in g_sp)
        gm = np.array([[E, F], [F, G]])
        w = w / math.sqrt(w @ gm @ w)
        kn = w @ hm @ w
        # U = ν × T in patch components: the gm-orthogonal rotation of w
        U = cross(M, x, nu_, t)
        Xu, Xv = _eval(xu_sp, u, v), _eval(xv_sp, u, v)
        ab = np.linalg.solve(gm, np.array([U @ g @ Xu, U @ g @ Xv]))
        kappa[a] = abs(kn)
        tau[a] = w @ hm @ ab
        T[a] = t
        N[a] = math.copysign(1.0, kn) * nu_
        B[a] = cross(M, x, T[a], N[a])
    small = kappa <= settings.KAPPA_MIN
    if small.any():
        idx = np.flatnonzero(small)
        raise KappaVanishes("surface geodesic has vanishing normal curvature", (float(curve.s[idx[0]]), float(curve.s[idx[-1]])))
    return _assemble(M, curve.s, curve.path.points, T, N, B, kappa, tau)

# --- Export ---

def patch_fields(M: ManifoldDescriptor, patch: RuledPatch, defect: Optional[np.ndarray] = None) -> Dict[str, Optional[np.ndarray]]:
    patch.require_forms()
    try:
        k_int = intrinsic_curvature(patch)
    except DegeneratePatch:
        k_int = None
    return {
        "g11": patch.g11, "g12": patch.g12, "g22": patch.g22,
        "h11": patch.h11, "h12": patch.h12, "h22": patch.h22,
        "Kext": extrinsic_curvature(patch), "Kint": k_int,
        "lambda": patch.lam, "defect": defect,
    }

def serialize_patch(M: ManifoldDescriptor, patch: RuledPatch, destination, defect: Optional[np.ndarray] = None):
    """CSV `u,v,g11,g12,g22,h11,h12,h22,Kext,Kint,lambda,defect`."""
    return write_patch_csv(destination, patch.u, patch.v, patch_fields(M, patch, defect))

def export_obj(M: ManifoldDescriptor, patch: RuledPatch, destination):
    """Mesh through the chart's visualisation embedding into R³."""
    vertices = np.array([[M.chart.embed(x) for x in row] for row in patch.points])
    return write_obj(destination, vertices, name=f"{patch.kind.value}_{M.name}")
