"""
Curves with prescribed curvature and torsion, parallel generalized and slant
helices with their axes, and curve classification.

The Frenet system is integrated as one ODE in chart coordinates with state
(x, T, N, B, K), where K is the accumulated integral of the curvature profile:

    x′ = T
    T′ = κN − Γ(T, T)
    N′ = −κT + τB − Γ(T, N)
    B′ = −τN − Γ(T, B)
    K′ = κ
"""
import logging
import math
from typing import Callable, Optional, Tuple, Union

import numpy as np

from ..core.config import settings
from ..core.exceptions import DomainExhausted, HelixError, KappaVanishes, LeftChart
from ..schemas.curve_schemas import (
    CurveClassification,
    CurveKind,
    CurvePath,
    FrenetData,
    IntegratorSettings,
)
from ..schemas.helix_schemas import AxisField, HelixKind, HelixSpec, KappaProfile
from ..schemas.manifold_schemas import ManifoldDescriptor
from .frenet_service import _assemble, _covariant_along, fourth_order_derivative, grid_step
from .manifold_service import _gamma_raw, check_point, cross, default_point, orthonormal_frame
from .transport_service import chart_exit_event, integrate_two_sided

logger = logging.getLogger(__name__)

FRAME_TOL = 1e-8

KappaLike = Union[KappaProfile, Callable]

# --- Frames ---

def validate_frame(M: ManifoldDescriptor, p0, frame0) -> np.ndarray:
    """Rows T, N, B must be orthonormal and positively oriented at p0."""
    F = np.asarray(frame0, dtype=float)
    if F.shape != (3, M.dim) or M.dim != 3:
        raise HelixError(f"frame0 must be a 3x3 array on a 3-manifold, got shape {F.shape}")
    g = M.chart.metric(p0)
    drift = float(np.max(np.abs(F @ g @ F.T - np.eye(3))))
    if drift > FRAME_TOL:
        raise HelixError(f"frame0 is not orthonormal (Gram deviation {drift:.3e})")
    if cross(M, p0, F[0], F[1]) @ g @ F[2] < 0:
        raise HelixError("frame0 is negatively oriented")
    return F

def coordinate_frame(M: ManifoldDescriptor, p0) -> np.ndarray:
    """Gram–Schmidt of the coordinate axes; positively oriented."""
    return orthonormal_frame(M, p0, list(np.eye(M.dim)))

def random_orthonormal_frame(M: ManifoldDescriptor, p0, rng: np.random.Generator) -> np.ndarray:
    F = orthonormal_frame(M, p0, list(rng.normal(size=(3, 3))))
    if cross(M, p0, F[0], F[1]) @ M.chart.metric(p0) @ F[2] < 0:
        F[2] = -F[2]
    return F

def _unit_orthogonal(M: ManifoldDescriptor, p0, V) -> np.ndarray:
    g = M.chart.metric(p0)
    e = np.eye(M.dim)
    # coordinate axis least aligned with V
    best = e[int(np.argmin([abs(a @ g @ V) / math.sqrt(a @ g @ a) for a in e]))]
    return orthonormal_frame(M, p0, [V, best])[1]

def frame_for_axis(
    M: ManifoldDescriptor,
    p0,
    axis,
    kind: Union[str, HelixKind],
    theta: float,
    kappa0: float = 1.0,
    tau0: float = 0.0,
) -> np.ndarray:
    """
    An initial Frenet frame whose helix axis at p0 is the given unit vector.

    generalized: V = cos θ T + sin θ B.
    slant:       V = cos θ N + sin θ D, with D fixed by the initial (κ0, τ0).
    """
    kind = HelixKind(kind)
    p0 = check_point(M, p0, strict=True)
    g = M.chart.metric(p0)
    V = np.asarray(axis, dtype=float)
    V = V / math.sqrt(V @ g @ V)
    h1 = _unit_orthogonal(M, p0, V)
    c, s = math.cos(theta), math.sin(theta)
    if kind == HelixKind.GENERALIZED:
        T = c * V + s * h1
        B = s * V - c * h1
        N = cross(M, p0, B, T)
        return np.array([T, N, B])
    N = c * V + s * h1
    D = s * V - c * h1
    E = cross(M, p0, N, D)
    phi = math.atan2(tau0, kappa0)
    T = math.sin(phi) * D + math.cos(phi) * E
    B = math.cos(phi) * D - math.sin(phi) * E
    return np.array([T, N, B])

# --- Synthesis ---

def _as_functions(kappa: KappaLike) -> Tuple[Callable, Optional[Callable]]:
    if isinstance(kappa, KappaProfile):
        return kappa.value, kappa.derivative
    return kappa, None

def frenet_rhs(M: ManifoldDescriptor, kappa_fn: Callable, tau_fn: Callable) -> Callable:
    """Right-hand side of the Frenet system; tau_fn(s, K) may depend on the integrated K."""
    d = M.dim
    def rhs(s, y):
        x, T, N, B, K = y[:d], y[d:2 * d], y[2 * d:3 * d], y[3 * d:4 * d], y[4 * d]
        gamma = _gamma_raw(M, x)
        k = float(kappa_fn(s))
        t = float(tau_fn(s, K))
        GT = lambda W: np.einsum("kij,i,j->k", gamma, T, W)
        return np.concatenate([
            T,
            k * N - GT(T),
            -k * T + t * B - GT(N),
            -t * N - GT(B),
            [k],
        ])
    return rhs

def _synthesize(
    M: ManifoldDescriptor,
    p0: np.ndarray,
    frame0: np.ndarray,
    kappa_fn: Callable,
    tau_fn: Callable,
    s0: float,
    s_range: Tuple[float, float],
    integrator: IntegratorSettings,
    extra_events=(),
):
    d = M.dim
    y0 = np.concatenate([p0, frame0[0], frame0[1], frame0[2], [0.0]])
    rhs = frenet_rhs(M, kappa_fn, tau_fn)
    events = [chart_exit_event(M, d)] + list(extra_events)
    grid, states, statuses, nfev = integrate_two_sided(rhs, y0, s0, s_range[0], s_range[1], integrator, events)
    X, T, N, B, K = states[:, :d], states[:, d:2 * d], states[:, 2 * d:3 * d], states[:, 3 * d:4 * d], states[:, 4 * d]
    kappa = np.asarray(kappa_fn(grid), dtype=float) * np.ones(len(grid))
    tau = np.array([float(tau_fn(s, k)) for s, k in zip(grid, K)])
    acc = np.array([rhs(s, y)[d:2 * d] for s, y in zip(grid, states)])
    path = CurvePath(manifold=M, s=grid, points=X, tangents=T, accelerations=acc, nfev=nfev)

    # a chart exit shows up as an event whose end point sits on the chart boundary
    ends = {"lo": (statuses[0], X[0]), "hi": (statuses[1], X[-1])}
    for side, (status, x) in ends.items():
        if status == "event" and M.chart.margin(x) < 1e-6:
            partial = path.model_copy(update={"left_chart": True})
            raise LeftChart(f"synthesized curve left the chart of {M.name} at s = {path.s[0 if side == 'lo' else -1]:.6g}", partial=partial)

    small = kappa <= settings.KAPPA_MIN
    if small.any():
        idx = np.flatnonzero(small)
        raise KappaVanishes("prescribed curvature is not positive", (float(grid[idx[0]]), float(grid[idx[-1]])))
    return path, X, T, N, B, K, kappa, tau, statuses

def synthesize_curve(
    M: ManifoldDescriptor,
    frame0,
    kappa: KappaLike,
    tau: Callable,
    s_range: Tuple[float, float],
    integrator: Optional[IntegratorSettings] = None,
    p0=None,
    s0: Optional[float] = None,
    kappa_prime: Optional[Callable] = None,
    tau_prime: Optional[Callable] = None,
) -> Tuple[CurvePath, FrenetData]:
    """
    Integrate the Frenet system for prescribed κ(s), τ(s) from the frame at γ(s0).

    The returned FrenetData echoes the integrated frame; σ uses the exact
    derivatives of κ and τ when they are known.
    """
    integrator = integrator or IntegratorSettings()
    p0 = check_point(M, default_point(M) if p0 is None else p0, strict=True)
    frame0 = validate_frame(M, p0, frame0)
    lo, hi = map(float, s_range)
    if not lo < hi:
        raise HelixError(f"empty arc-length range {s_range}")
    s0 = lo if s0 is None else float(s0)
    kappa_fn, profile_prime = _as_functions(kappa)
    kappa_prime = kappa_prime or profile_prime

    path, X, T, N, B, K, k, t, _ = _synthesize(
        M, p0, frame0, kappa_fn, lambda s, K: tau(s), s0, (lo, hi), integrator
    )
    kp = None if kappa_prime is None or tau_prime is None else np.asarray(kappa_prime(path.s), dtype=float) * np.ones(path.n)
    tp = None if kp is None else np.asarray(tau_prime(path.s), dtype=float) * np.ones(path.n)
    logger.info(f"synthesized curve on {M.name}: s in [{path.s[0]:.4g}, {path.s[-1]:.4g}], {path.n} samples, nfev={path.nfev}")
    return path, _assemble(M, path.s, X, T, N, B, k, t, kp, tp)

# --- Axes ---

def axis_field(kind: Union[str, HelixKind], fd: FrenetData, theta: float) -> AxisField:
    """
    The frame-formula axis with its ∇_T V residual, both in closed form and
    by differencing V along the curve.
    """
    kind = HelixKind(kind)
    small = fd.kappa <= settings.KAPPA_MIN
    if small.any():
        idx = np.flatnonzero(small)
        raise KappaVanishes("axis needs a Frenet frame", (float(fd.s[idx[0]]), float(fd.s[idx[-1]])))
    c, s = math.cos(theta), math.sin(theta)
    if kind == HelixKind.GENERALIZED:
        V = c * fd.T + s * fd.B
        residual = np.abs(fd.kappa * c - fd.tau * s)
    else:
        V = c * fd.N + s * fd.D
        residual = np.abs(c - fd.sigma * s) * fd.omega

    M = fd.manifold
    if fd.n >= 5:
        dV = _covariant_along(M, fd.points, fd.T, V, fourth_order_derivative(V, grid_step(fd.s)))
        measured = np.array([math.sqrt(max(w @ M.chart.metric(x) @ w, 0.0)) for w, x in zip(dV, fd.points)])
    else:
        measured = residual.copy()
    return AxisField(kind=kind, theta=float(theta), V=V, residual=residual, transport_residual=measured)

# --- Generalized helices ---

def make_generalized_helix(
    M: ManifoldDescriptor,
    frame0,
    kappa: KappaLike,
    theta: float,
    s_range: Tuple[float, float],
    integrator: Optional[IntegratorSettings] = None,
    p0=None,
    s0: Optional[float] = None,
) -> Tuple[CurvePath, FrenetData, AxisField]:
    """τ = cot θ · κ, axis V = cos θ T + sin θ B."""
    if not 0.0 < theta < math.pi:
        raise HelixError(f"theta must lie in (0, pi), got {theta}")
    cot = math.cos(theta) / math.sin(theta)
    kappa_fn, kappa_prime = _as_functions(kappa)
    tau_prime = None if kappa_prime is None else (lambda s: cot * np.asarray(kappa_prime(s)))
    path, fd = synthesize_curve(
        M, frame0, kappa, lambda s: cot * kappa_fn(s), s_range, integrator, p0, s0,
        kappa_prime=kappa_prime, tau_prime=tau_prime,
    )
    return path, fd, axis_field(HelixKind.GENERALIZED, fd, theta)

# --- Slant helices ---

def slant_torsion(kappa: KappaProfile, theta: float, c0: float, sign: int) -> Tuple[Callable, Callable]:
    """
    τ(u, K) = ±κ̄ x/√(1−x²) with x = σK − c0 and σ = cot θ, and its u-derivative
    along the curve given K(u) and K′ = κ̄.
    """
    sig = math.cos(theta) / math.sin(theta)

    def tau(u, K):
        x = sig * K - c0
        return sign * kappa.value(u) * x / math.sqrt(max(1.0 - x * x, 1e-300))

    def tau_prime(u, K):
        x = sig * K - c0
        q = np.maximum(1.0 - x * x, 1e-300)
        kb = kappa.value(u)
        return sign * (kappa.derivative(u) * x / np.sqrt(q) + sig * kb * kb / q ** 1.5)

    return tau, tau_prime

def slant_stop_event(theta: float, c0: float, margin: float) -> Callable:
    sig = math.cos(theta) / math.sin(theta)
    def event(u, y):
        return (1.0 - margin) - abs(sig * y[-1] - c0)
    event.terminal = True
    event.direction = -1
    return event

def make_slant_helix(
    M: ManifoldDescriptor,
    spec: HelixSpec,
    integrator: Optional[IntegratorSettings] = None,
) -> Tuple[CurvePath, FrenetData, AxisField, Tuple[float, float]]:
    """
    Slant helix with torsion ±κ̄(σK − c0)/√(1 − (σK − c0)²), K(u0) = 0.

    Integration stops where |σK − c0| reaches 1 − SLANT_STOP_MARGIN; the achieved
    domain is returned. On the minus branch the axis makes the angle π − θ with N.
    """
    if spec.kind != HelixKind.SLANT:
        raise HelixError("make_slant_helix needs a slant HelixSpec")
    integrator = integrator or IntegratorSettings()
    margin = settings.SLANT_STOP_MARGIN
    lo, hi = spec.s_range
    if abs(spec.c0) >= 1.0 - margin:
        raise DomainExhausted(f"|c0| = {abs(spec.c0):.6g} leaves no room inside the stop margin", spec.s0, spec.s0)

    p0 = check_point(M, default_point(M) if spec.p0 is None else spec.p0, strict=True)
    tau_fn, tau_prime_fn = slant_torsion(spec.kappa, spec.theta, spec.c0, spec.sign)
    if spec.frame0 is None:
        frame0 = coordinate_frame(M, p0)
    else:
        frame0 = validate_frame(M, p0, spec.frame0)

    path, X, T, N, B, K, k, t, statuses = _synthesize(
        M, p0, frame0, spec.kappa.value, tau_fn, spec.s0, (lo, hi), integrator,
        extra_events=[slant_stop_event(spec.theta, spec.c0, margin)],
    )
    u_m, u_M = float(path.s[0]), float(path.s[-1])
    if path.n < 5 or u_M - u_m < 4 * integrator.sample_spacing:
        raise DomainExhausted("slant helix domain is degenerate", u_m, u_M)
    if "event" in statuses:
        logger.warning(f"slant helix domain truncated to [{u_m:.6g}, {u_M:.6g}] (requested [{lo:.6g}, {hi:.6g}])")

    kp = spec.kappa.derivative(path.s) * np.ones(path.n)
    tp = np.array([tau_prime_fn(u, kk) for u, kk in zip(path.s, K)])
    fd = _assemble(M, path.s, X, T, N, B, k, t, kp, tp)
    axis_theta = spec.theta if spec.sign > 0 else math.pi - spec.theta
    return path, fd, axis_field(HelixKind.SLANT, fd, axis_theta), (u_m, u_M)

def make_helix(
    M: ManifoldDescriptor,
    spec: HelixSpec,
    integrator: Optional[IntegratorSettings] = None,
) -> Tuple[CurvePath, FrenetData, AxisField, Tuple[float, float]]:
    """Dispatch on spec.kind; generalized helices report the requested range as their domain."""
    if spec.kind == HelixKind.SLANT:
        return make_slant_helix(M, spec, integrator)
    p0 = default_point(M) if spec.p0 is None else spec.p0
    frame0 = coordinate_frame(M, p0) if spec.frame0 is None else spec.frame0
    path, fd, axis = make_generalized_helix(M, frame0, spec.kappa, spec.theta, spec.s_range, integrator, p0, spec.s0)
    return path, fd, axis, (float(path.s[0]), float(path.s[-1]))

# --- Classification ---

def classify_curve(fd: FrenetData, tol: Optional[float] = None) -> CurveClassification:
    tol = settings.CLASSIFY_TOL if tol is None else tol
    interval = (float(fd.s[0]), float(fd.s[-1]))
    kappa_sup = float(np.max(np.abs(fd.kappa)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = fd.tau / fd.kappa
    ratio_median = float(np.median(ratio))
    ratio_residual = float(np.max(np.abs(ratio - ratio_median)))
    sigma_median = float(np.median(fd.sigma))
    sigma_residual = float(np.max(np.abs(fd.sigma - sigma_median)))
    record = dict(
        kappa_sup=kappa_sup,
        ratio_median=ratio_median,
        ratio_residual=ratio_residual,
        sigma_median=sigma_median,
        sigma_residual=sigma_residual,
        interval=interval,
    )
    if kappa_sup < tol:
        return CurveClassification(kind=CurveKind.GEODESIC, **record)
    if ratio_residual < tol:
        return CurveClassification(kind=CurveKind.GENERALIZED_HELIX, theta=math.atan2(1.0, ratio_median), **record)
    if sigma_residual < tol:
        return CurveClassification(kind=CurveKind.SLANT_HELIX, theta=math.atan2(1.0, sigma_median), **record)
    return CurveClassification(kind=CurveKind.GENERIC, **record)
