"""
Frenet apparatus, σ, Darboux field and spherical indicatrices.

(T, N, B) is positively oriented with respect to the chart volume form;
the sign of τ depends on it.
"""
import logging
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..core.config import settings
from ..core.exceptions import KappaVanishes, NonUnitSpeed, TauVanishes
from ..schemas.curve_schemas import (
    CurvePath,
    DarbouxField,
    FrenetData,
    IndicatrixCurve,
    IndicatrixKind,
    IntegratorSettings,
)
from ..schemas.manifold_schemas import ManifoldDescriptor
from .export_service import write_csv
from .manifold_service import _gamma_raw, cross
from .transport_service import UNIT_SPEED_PATH_TOL, parallel_transport, path_from_samples, sample_grid

logger = logging.getLogger(__name__)

# --- Finite differences on uniform grids ---

def fourth_order_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """d/ds along axis 0: 5-point central stencil, 5-point one-sided at the two ends."""
    f = np.asarray(values, dtype=float)
    n = f.shape[0]
    if n < 5:
        return np.gradient(f, h, axis=0)
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    return d

def grid_step(s: np.ndarray) -> float:
    """Spacing of a uniform grid; raises if the grid is not uniform."""
    if len(s) < 2:
        return 1.0
    ds = np.diff(s)
    h = float(ds.mean())
    if np.max(np.abs(ds - h)) > 1e-9 * max(h, 1.0):
        raise ValueError("finite differences need a uniform arc-length grid")
    return h

def is_uniform(s: np.ndarray) -> bool:
    try:
        grid_step(s)
        return True
    except ValueError:
        return False

def resample_uniform(path: CurvePath, spacing: Optional[float] = None) -> CurvePath:
    """Resample a path on a uniform grid through its Hermite dense output."""
    spacing = spacing or settings.SAMPLE_SPACING
    s = sample_grid(float(path.s[0]), float(path.s[-1]), spacing)
    acc = path.tangent_spline.derivative()(s) if path.accelerations is not None else None
    return path_from_samples(
        path.manifold, s, path.position(s), path.velocity(s), accelerations=acc, check_unit_speed=False
    )

# --- Frenet apparatus ---

def _vanishing_interval(s: np.ndarray, mask: np.ndarray):
    idx = np.flatnonzero(mask)
    return float(s[idx[0]]), float(s[idx[-1]])

def _covariant_along(M: ManifoldDescriptor, points, T, field, dfield) -> np.ndarray:
    """∇_T W = dW/ds + Γ(T, W) at every sample."""
    out = np.empty_like(field)
    for a, x in enumerate(points):
        out[a] = dfield[a] + np.einsum("kij,i,j->k", _gamma_raw(M, x), T[a], field[a])
    return out

def frenet_apparatus(M: ManifoldDescriptor, path: CurvePath) -> FrenetData:
    if not is_uniform(path.s):
        path = resample_uniform(path)
    h = grid_step(path.s)
    X, T = path.points, path.tangents
    G = [M.chart.metric(x) for x in X]
    drift = max(abs(math.sqrt(t @ g @ t) - 1.0) for t, g in zip(T, G))
    if drift > UNIT_SPEED_PATH_TOL:
        raise NonUnitSpeed(f"path is not unit speed (max deviation {drift:.3e})")

    A = path.accelerations if path.accelerations is not None else fourth_order_derivative(T, h)
    acc = _covariant_along(M, X, T, T, A)
    kappa = np.array([math.sqrt(max(a @ g @ a, 0.0)) for a, g in zip(acc, G)])
    small = kappa <= settings.KAPPA_MIN
    if small.any():
        raise KappaVanishes("curvature vanishes", _vanishing_interval(path.s, small))
    N = acc / kappa[:, None]
    B = np.array([cross(M, x, t, nn) for x, t, nn in zip(X, T, N)])
    dN = _covariant_along(M, X, T, N, fourth_order_derivative(N, h))
    tau = np.array([dn @ g @ b for dn, g, b in zip(dN, G, B)])
    return _assemble(M, path.s, X, T, N, B, kappa, tau)

def _assemble(M, s, X, T, N, B, kappa, tau, kappa_prime=None, tau_prime=None) -> FrenetData:
    omega = np.hypot(kappa, tau)
    D = (tau[:, None] * T + kappa[:, None] * B) / omega[:, None]
    sig = _sigma_values(s, kappa, tau, omega, kappa_prime, tau_prime)
    return FrenetData(
        manifold=M, s=s, points=X, T=T, N=N, B=B,
        kappa=kappa, tau=tau, omega=omega, sigma=sig, D=D,
        kappa_prime=kappa_prime, tau_prime=tau_prime,
    )

def _sigma_values(s, kappa, tau, omega, kappa_prime=None, tau_prime=None) -> np.ndarray:
    if kappa_prime is not None and tau_prime is not None:
        # κ²/ω³ (τ/κ)′ written with the exact derivatives
        return (kappa * tau_prime - tau * kappa_prime) / omega ** 3
    ratio_prime = fourth_order_derivative(tau / kappa, grid_step(s))
    return kappa ** 2 / omega ** 3 * ratio_prime

def _require_kappa(fd: FrenetData) -> None:
    small = fd.kappa <= settings.KAPPA_MIN
    if small.any():
        raise KappaVanishes("curvature vanishes", _vanishing_interval(fd.s, small))

def sigma(fd: FrenetData) -> np.ndarray:
    """σ = κ²/(κ²+τ²)^{3/2} · (τ/κ)′."""
    _require_kappa(fd)
    return _sigma_values(fd.s, fd.kappa, fd.tau, fd.omega, fd.kappa_prime, fd.tau_prime)

def darboux_field(fd: FrenetData) -> DarbouxField:
    _require_kappa(fd)
    h = grid_step(fd.s)
    sig = sigma(fd)
    D = (fd.tau[:, None] * fd.T + fd.kappa[:, None] * fd.B) / fd.omega[:, None]
    return DarbouxField(
        D=D,
        kappa_omega_residual=fourth_order_derivative(fd.kappa / fd.omega, h) + fd.tau * sig,
        tau_omega_residual=fourth_order_derivative(fd.tau / fd.omega, h) - fd.kappa * sig,
    )

def frame_gram_drift(fd: FrenetData) -> float:
    """max |Gram(T, N, B) − I| over samples."""
    M = fd.manifold
    worst = 0.0
    for x, t, n, b in zip(fd.points, fd.T, fd.N, fd.B):
        F = np.array([t, n, b])
        worst = max(worst, float(np.max(np.abs(F @ M.chart.metric(x) @ F.T - np.eye(3)))))
    return worst

# --- Indicatrices ---

def _spherical_geodesic_curvature(c: np.ndarray, h: float) -> np.ndarray:
    """κ_g = c·(c′×c″)/|c′|³ for a unit-speed-agnostic curve on the unit sphere of R³."""
    d1 = fourth_order_derivative(c, h)
    d2 = fourth_order_derivative(d1, h)
    return np.einsum("ai,ai->a", c, np.cross(d1, d2)) / np.linalg.norm(d1, axis=1) ** 3

def indicatrix(
    M: ManifoldDescriptor,
    path: CurvePath,
    fd: FrenetData,
    which: Union[str, IndicatrixKind],
    s0: Optional[float] = None,
    integrator: Optional[IntegratorSettings] = None,
) -> IndicatrixCurve:
    """
    Transport the chosen frame vector back to T_{γ(s0)}M and measure the geodesic
    curvature of the resulting curve on the unit sphere there.
    """
    which = IndicatrixKind(which)
    _require_kappa(fd)
    if which == IndicatrixKind.BINORMAL and np.any(np.abs(fd.tau) < settings.TAU_MIN):
        small = np.abs(fd.tau) < settings.TAU_MIN
        raise TauVanishes(f"torsion vanishes on s in {_vanishing_interval(fd.s, small)}; binormal indicatrix undefined")
    s0 = float(fd.s[0]) if s0 is None else float(s0)
    i0 = int(np.argmin(np.abs(fd.s - s0)))
    if abs(fd.s[i0] - s0) > 1e-9 * max(1.0, abs(s0)):
        raise ValueError(f"s0 = {s0} is not a sample of the curve")

    # transport the initial Frenet frame; components against it are transport-invariant
    E0 = np.array([fd.T[0], fd.N[0], fd.B[0]])
    E = parallel_transport(M, path, E0, integrator, at=fd.s)
    X = {IndicatrixKind.TANGENT: fd.T, IndicatrixKind.NORMAL: fd.N, IndicatrixKind.BINORMAL: fd.B}[which]
    c = np.array([E[a] @ M.chart.metric(x) @ X[a] for a, x in enumerate(fd.points)])
    kg = _spherical_geodesic_curvature(c, grid_step(fd.s))
    return IndicatrixCurve(
        kind=which,
        base_point=fd.points[i0],
        base_frame=E[i0],
        s=fd.s,
        vectors=c,
        geodesic_curvature=kg,
    )

# --- Serialization ---

def serialize_frenet(fd: FrenetData, destination: Union[str, Path]) -> Path:
    """CSV `s,kappa,tau,sigma,T…,N…,B…,D…`."""
    d = fd.manifold.dim
    header = ["s", "kappa", "tau", "sigma"]
    for name in ("T", "N", "B", "D"):
        header += [f"{name}{i + 1}" for i in range(d)]
    rows = np.hstack([fd.s[:, None], fd.kappa[:, None], fd.tau[:, None], fd.sigma[:, None], fd.T, fd.N, fd.B, fd.D])
    return write_csv(destination, header, rows)
