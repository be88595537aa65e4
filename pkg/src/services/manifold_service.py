"""
Ambient Riemannian manifolds given by a single coordinate chart.

Index conventions used throughout the package:

    dg[l, i, j]         ∂_l g_ij
    ddg[m, l, i, j]     ∂_m ∂_l g_ij
    gamma[k, i, j]      Γ^k_ij
    dgamma[m, k, i, j]  ∂_m Γ^k_ij
    R[l, k, i, j]       R(∂_i, ∂_j)∂_k = R[l, k, i, j] ∂_l

The curvature operator follows the sign convention

    R(X, Y)Z = ∇_Y ∇_X Z − ∇_X ∇_Y Z + ∇_[X,Y] Z,

so the operator slots (X, Y, Z) map to the indices (i, j, k). This is the
negative of the textbook operator ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]; with it,
⟨R(X, Y)X, Y⟩ is positive on round spheres.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.config import settings
from ..core.exceptions import (
    BadParams,
    DegeneratePlane,
    OutOfChart,
    SingularMetric,
    ZeroVector,
)
from ..schemas.manifold_schemas import (
    ConnectionCoefficients,
    CurvatureTensor,
    ManifoldDescriptor,
    MetricKind,
    MetricMatrix,
)

logger = logging.getLogger(__name__)

INF = math.inf

# --- Charts ---

class Chart:
    """A coordinate chart carrying a metric and its first two derivatives."""

    name = "chart"
    dim = 3
    periods: Tuple[Optional[float], ...] = (None, None, None)

    def bounds(self) -> List[Tuple[float, float]]:
        return [(-INF, INF)] * self.dim

    def margin(self, p: np.ndarray) -> float:
        """Signed distance-like quantity, positive strictly inside the domain."""
        lo_hi = self.bounds()
        m = INF
        for x, (lo, hi) in zip(p, lo_hi):
            m = min(m, x - lo, hi - x)
        return m

    def metric(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def metric_derivatives(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def metric_second_derivatives(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def embed(self, p: np.ndarray) -> np.ndarray:
        """Visualisation embedding into R³ used by mesh export."""
        return np.asarray(p, dtype=float)[:3]


class CartesianChart(Chart):
    name = "cartesian"

    def __init__(self, dim: int = 3):
        self.dim = dim
        self.periods = (None,) * dim

    def metric(self, p):
        return np.eye(self.dim)

    def metric_derivatives(self, p):
        n = self.dim
        return np.eye(n), np.zeros((n, n, n))

    def metric_second_derivatives(self, p):
        n = self.dim
        return np.eye(n), np.zeros((n, n, n)), np.zeros((n, n, n, n))

    def embed(self, p):
        p = np.asarray(p, dtype=float)
        return p if self.dim == 3 else np.append(p, 0.0)


class ConformalChart(Chart):
    """
    g = ψ(|x|²) δ with ψ(ρ) = 4r⁴ / (r² + ερ)².

    ε = +1 is the stereographic chart of the round sphere of radius r (centred on
    the south pole), ε = −1 the Poincaré ball of radius r. Both give 4·identity
    at the origin.
    """

    def __init__(self, dim: int, radius: float, curvature_sign: int, extent: float):
        self.dim = dim
        self.r = radius
        self.eps = 1.0 if curvature_sign > 0 else -1.0
        self.limit = extent * radius
        self.periods = (None,) * dim
        self.name = "stereographic" if curvature_sign > 0 else "poincare"

    def bounds(self):
        return [(-self.limit, self.limit)] * self.dim

    def margin(self, p):
        return self.limit - float(np.linalg.norm(p))

    def _psi(self, rho: float) -> Tuple[float, float, float, float]:
        q = self.r ** 2 + self.eps * rho
        psi = 4.0 * self.r ** 4 / q ** 2
        d1 = -2.0 * self.eps * psi / q
        d2 = 6.0 * psi / q ** 2
        return q, psi, d1, d2

    def metric(self, p):
        p = np.asarray(p, dtype=float)
        _, psi, _, _ = self._psi(float(p @ p))
        return psi * np.eye(self.dim)

    def metric_derivatives(self, p):
        p = np.asarray(p, dtype=float)
        n = self.dim
        _, psi, d1, _ = self._psi(float(p @ p))
        grad = 2.0 * d1 * p
        return psi * np.eye(n), np.einsum("l,ij->lij", grad, np.eye(n))

    def metric_second_derivatives(self, p):
        p = np.asarray(p, dtype=float)
        n = self.dim
        _, psi, d1, d2 = self._psi(float(p @ p))
        grad = 2.0 * d1 * p
        hess = 4.0 * d2 * np.outer(p, p) + 2.0 * d1 * np.eye(n)
        eye = np.eye(n)
        return psi * eye, np.einsum("l,ij->lij", grad, eye), np.einsum("ml,ij->mlij", hess, eye)

    def embed(self, p):
        p = np.asarray(p, dtype=float)
        return p if self.dim == 3 else np.append(p, 0.0)


class GeographicSphereChart(Chart):
    """(φ, ψ) latitude/longitude on S²(r): g = r² diag(1, cos²φ)."""

    name = "geographic"
    dim = 2

    def __init__(self, radius: float, polar_margin: float):
        self.r = radius
        self.eps = polar_margin
        self.periods = (None, 2.0 * math.pi)

    def bounds(self):
        return [(-math.pi / 2 + self.eps, math.pi / 2 - self.eps), (-INF, INF)]

    def metric(self, p):
        c = math.cos(p[0])
        return self.r ** 2 * np.diag([1.0, c * c])

    def metric_derivatives(self, p):
        g = self.metric(p)
        dg = np.zeros((2, 2, 2))
        dg[0, 1, 1] = -self.r ** 2 * math.sin(2.0 * p[0])
        return g, dg

    def metric_second_derivatives(self, p):
        g, dg = self.metric_derivatives(p)
        ddg = np.zeros((2, 2, 2, 2))
        ddg[0, 0, 1, 1] = -2.0 * self.r ** 2 * math.cos(2.0 * p[0])
        return g, dg, ddg

    def embed(self, p):
        phi, psi = p[0], p[1]
        return self.r * np.array([math.cos(phi) * math.cos(psi), math.cos(phi) * math.sin(psi), math.sin(phi)])


class HypersphericalChart(Chart):
    """(χ, ϑ, φ) on S³(r): g = r² diag(1, sin²χ, sin²χ sin²ϑ)."""

    name = "hyperspherical"
    dim = 3

    def __init__(self, radius: float, polar_margin: float):
        self.r = radius
        self.eps = polar_margin
        self.periods = (None, None, 2.0 * math.pi)

    def bounds(self):
        return [(self.eps, math.pi - self.eps), (self.eps, math.pi - self.eps), (-INF, INF)]

    def metric(self, p):
        sc, st = math.sin(p[0]), math.sin(p[1])
        return self.r ** 2 * np.diag([1.0, sc * sc, sc * sc * st * st])

    def metric_derivatives(self, p):
        chi, th = p[0], p[1]
        r2 = self.r ** 2
        sc2, st2 = math.sin(chi) ** 2, math.sin(th) ** 2
        dg = np.zeros((3, 3, 3))
        dg[0, 1, 1] = r2 * math.sin(2 * chi)
        dg[0, 2, 2] = r2 * math.sin(2 * chi) * st2
        dg[1, 2, 2] = r2 * sc2 * math.sin(2 * th)
        return self.metric(p), dg

    def metric_second_derivatives(self, p):
        chi, th = p[0], p[1]
        r2 = self.r ** 2
        sc2, st2 = math.sin(chi) ** 2, math.sin(th) ** 2
        g, dg = self.metric_derivatives(p)
        ddg = np.zeros((3, 3, 3, 3))
        ddg[0, 0, 1, 1] = 2 * r2 * math.cos(2 * chi)
        ddg[0, 0, 2, 2] = 2 * r2 * math.cos(2 * chi) * st2
        ddg[0, 1, 2, 2] = ddg[1, 0, 2, 2] = r2 * math.sin(2 * chi) * math.sin(2 * th)
        ddg[1, 1, 2, 2] = 2 * r2 * sc2 * math.cos(2 * th)
        return g, dg, ddg

    def to_r4(self, p) -> np.ndarray:
        chi, th, ph = p
        s = math.sin(chi)
        return self.r * np.array([math.cos(chi), s * math.cos(th), s * math.sin(th) * math.cos(ph), s * math.sin(th) * math.sin(ph)])

    def embed(self, p):
        # stereographic projection from (r, 0, 0, 0), matching the stereographic chart
        x = self.to_r4(p)
        return self.r * x[1:] / (self.r - x[0])


class ProductChart(Chart):
    """M² × ℝ with g = g_M + dt²."""

    def __init__(self, factor: Chart):
        self.factor = factor
        self.dim = 3
        self.name = f"{factor.name}×R"
        self.periods = tuple(factor.periods) + (None,)

    def bounds(self):
        return self.factor.bounds() + [(-INF, INF)]

    def margin(self, p):
        return self.factor.margin(p[:2])

    def metric(self, p):
        g = np.eye(3)
        g[:2, :2] = self.factor.metric(p[:2])
        return g

    def metric_derivatives(self, p):
        gm, dgm = self.factor.metric_derivatives(p[:2])
        g = np.eye(3)
        g[:2, :2] = gm
        dg = np.zeros((3, 3, 3))
        dg[:2, :2, :2] = dgm
        return g, dg

    def metric_second_derivatives(self, p):
        gm, dgm, ddgm = self.factor.metric_second_derivatives(p[:2])
        g = np.eye(3)
        g[:2, :2] = gm
        dg = np.zeros((3, 3, 3))
        dg[:2, :2, :2] = dgm
        ddg = np.zeros((3, 3, 3, 3))
        ddg[:2, :2, :2, :2] = ddgm
        return g, dg, ddg

    def embed(self, p):
        if isinstance(self.factor, GeographicSphereChart):
            # radial embedding (q, t) ↦ eᵗ q of S²×ℝ into R³ \ {0}
            return math.exp(p[2]) * self.factor.embed(p[:2]) / self.factor.r
        return np.array([p[0], p[1], p[2]], dtype=float)


def _central_difference(fn: Callable[[np.ndarray], np.ndarray], p: np.ndarray, h: float) -> np.ndarray:
    """4th-order central differences of fn along every coordinate; result[l] = ∂_l fn."""
    out = []
    for l in range(len(p)):
        e = np.zeros(len(p))
        e[l] = h
        out.append((-fn(p + 2 * e) + 8 * fn(p + e) - 8 * fn(p - e) + fn(p - 2 * e)) / (12.0 * h))
    return np.array(out)


class CustomChart(Chart):
    """A black-box metric on a coordinate box; derivatives by finite differences."""

    def __init__(self, name: str, metric_fn: Callable[[np.ndarray], np.ndarray], box: Sequence[Tuple[float, float]]):
        self.name = name
        self.metric_fn = metric_fn
        self.box = list(box)
        self.dim = len(self.box)
        self.periods = (None,) * self.dim

    def bounds(self):
        return self.box

    def _step(self, p) -> float:
        return max(settings.FD_STEP, settings.FD_STEP * float(np.linalg.norm(p)))

    def metric(self, p):
        return np.asarray(self.metric_fn(np.asarray(p, dtype=float)), dtype=float)

    def _dg(self, p):
        return _central_difference(self.metric, np.asarray(p, dtype=float), self._step(p))

    def metric_derivatives(self, p):
        return self.metric(p), self._dg(p)

    def metric_second_derivatives(self, p):
        p = np.asarray(p, dtype=float)
        return self.metric(p), self._dg(p), _central_difference(self._dg, p, self._step(p))


def _half_space_metric(p: np.ndarray) -> np.ndarray:
    return np.eye(3) / p[2] ** 2

def _bumped_metric(p: np.ndarray) -> np.ndarray:
    return (1.0 + 0.2 * math.exp(-float(p @ p))) * np.eye(3)

# Named test metrics; no runtime code loading.
CUSTOM_METRICS: Dict[str, Tuple[Callable[[np.ndarray], np.ndarray], List[Tuple[float, float]]]] = {
    "half_space": (_half_space_metric, [(-50.0, 50.0), (-50.0, 50.0), (0.05, 50.0)]),
    "bumped": (_bumped_metric, [(-10.0, 10.0)] * 3),
}

# --- Construction ---

def _check_radius(radius: float) -> None:
    if not (radius > 0 and math.isfinite(radius)):
        raise BadParams(f"radius must be positive, got {radius}")

def build_manifold(
    kind: str,
    radius: float = 1.0,
    chart: Optional[str] = None,
    factor: Optional[str] = None,
    metric: Optional[str] = None,
) -> ManifoldDescriptor:
    """
    Build one of the supported manifolds. `factor` names M² for kind=product.

    sphere3 defaults to the stereographic chart, |x| ≤ STEREOGRAPHIC_EXTENT·r, which
    has no coordinate singularity inside its domain; chart="hyperspherical" selects
    the polar-angle chart with POLAR_MARGIN kept off its poles.
    """
    try:
        kind = MetricKind(kind)
    except ValueError:
        raise BadParams(f"unknown manifold kind '{kind}'")

    if kind == MetricKind.EUCLIDEAN:
        c = CartesianChart(3)
        return _descriptor("E3", kind, {}, c)
    if kind == MetricKind.EUCLIDEAN2:
        c = CartesianChart(2)
        return _descriptor("E2", kind, {}, c)

    if kind == MetricKind.CUSTOM:
        if metric not in CUSTOM_METRICS:
            raise BadParams(f"unknown custom metric '{metric}'; known: {sorted(CUSTOM_METRICS)}")
        fn, box = CUSTOM_METRICS[metric]
        return _descriptor(f"custom:{metric}", kind, {}, CustomChart(metric, fn, box))

    if kind == MetricKind.PRODUCT:
        fac = build_manifold(factor or "sphere2", radius=radius)
        if fac.dim != 2:
            raise BadParams(f"product factor must be 2-dimensional, got '{factor}'")
        return _descriptor(f"{fac.name}xR", kind, dict(fac.params), ProductChart(fac.chart), factor=fac)

    _check_radius(radius)
    params = {"radius": float(radius)}
    if kind == MetricKind.SPHERE3:
        if chart in (None, "stereographic"):
            c = ConformalChart(3, radius, +1, settings.STEREOGRAPHIC_EXTENT)
        elif chart == "hyperspherical":
            c = HypersphericalChart(radius, settings.POLAR_MARGIN)
        else:
            raise BadParams(f"unknown chart '{chart}' for sphere3")
        return _descriptor(f"S3({radius:g})", kind, params, c)
    if kind == MetricKind.HYPERBOLIC3:
        return _descriptor(f"H3({radius:g})", kind, params, ConformalChart(3, radius, -1, settings.POINCARE_MARGIN))
    if kind == MetricKind.SPHERE2:
        return _descriptor(f"S2({radius:g})", kind, params, GeographicSphereChart(radius, settings.POLAR_MARGIN))
    if kind == MetricKind.HYPERBOLIC2:
        return _descriptor(f"H2({radius:g})", kind, params, ConformalChart(2, radius, -1, settings.POINCARE_MARGIN))
    raise BadParams(f"unsupported manifold kind '{kind.value}'")

def _descriptor(name, kind, params, chart, factor=None) -> ManifoldDescriptor:
    return ManifoldDescriptor(
        name=name,
        dim=chart.dim,
        metric_kind=kind,
        params=params,
        chart_name=chart.name,
        chart_domain=chart.bounds(),
        factor=factor,
        chart=chart,
    )

# --- Pointwise evaluation ---

def _as_point(M: ManifoldDescriptor, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (M.dim,):
        raise OutOfChart(f"point of shape {p.shape} for a {M.dim}-manifold")
    return p

def check_point(M: ManifoldDescriptor, p, strict: bool = False) -> np.ndarray:
    p = _as_point(M, p)
    m = M.chart.margin(p)
    if not np.all(np.isfinite(p)) or m < 0 or (strict and m == 0):
        raise OutOfChart(f"point {p.tolist()} is outside the {M.chart_name} chart of {M.name}")
    return p

def christoffel_from_derivatives(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)."""
    ginv = np.linalg.inv(g)
    lower = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    return np.einsum("kl,lij->kij", ginv, lower)

def _gamma_raw(M: ManifoldDescriptor, p: np.ndarray) -> np.ndarray:
    g, dg = M.chart.metric_derivatives(p)
    return christoffel_from_derivatives(g, dg)

def _connection_and_derivative(g, dg, ddg) -> Tuple[np.ndarray, np.ndarray]:
    ginv = np.linalg.inv(g)
    lower = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    dlower = 0.5 * (np.einsum("mijl->mlij", ddg) + np.einsum("mjil->mlij", ddg) - ddg)
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    gamma = np.einsum("kl,lij->kij", ginv, lower)
    dgamma = np.einsum("mkl,lij->mkij", dginv, lower) + np.einsum("kl,mlij->mkij", ginv, dlower)
    return gamma, dgamma

def _riemann_raw(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    # textbook R^l_kij = ∂_iΓ^l_jk − ∂_jΓ^l_ik + Γ^l_imΓ^m_jk − Γ^l_jmΓ^m_ik, then negated
    a = np.einsum("iljk->lkij", dgamma) + np.einsum("lim,mjk->lkij", gamma, gamma)
    return -(a - a.transpose(0, 1, 3, 2))

def _check_singular(M: ManifoldDescriptor, g: np.ndarray, p: np.ndarray) -> None:
    if np.linalg.det(g) < settings.SINGULAR_METRIC_DET:
        raise SingularMetric(f"det g = {np.linalg.det(g):.3e} at {p.tolist()} on {M.name}")

def metric_at(M: ManifoldDescriptor, p) -> MetricMatrix:
    p = check_point(M, p)
    return MetricMatrix(point=p, g=M.chart.metric(p))

def christoffel_at(M: ManifoldDescriptor, p) -> ConnectionCoefficients:
    p = check_point(M, p, strict=True)
    g, dg = M.chart.metric_derivatives(p)
    _check_singular(M, g, p)
    return ConnectionCoefficients(point=p, gamma=christoffel_from_derivatives(g, dg))

def christoffel_fd_at(M: ManifoldDescriptor, p) -> ConnectionCoefficients:
    """Finite-difference oracle: Γ from a 4th-order differenced metric."""
    p = check_point(M, p, strict=True)
    h = max(settings.FD_STEP, settings.FD_STEP * float(np.linalg.norm(p)))
    dg = _central_difference(M.chart.metric, p, h)
    return ConnectionCoefficients(point=p, gamma=christoffel_from_derivatives(M.chart.metric(p), dg))

def riemann_at(M: ManifoldDescriptor, p) -> CurvatureTensor:
    p = check_point(M, p, strict=True)
    g, dg, ddg = M.chart.metric_second_derivatives(p)
    _check_singular(M, g, p)
    gamma, dgamma = _connection_and_derivative(g, dg, ddg)
    return CurvatureTensor(point=p, R=_riemann_raw(gamma, dgamma))

def riemann_raw(M: ManifoldDescriptor, p: np.ndarray) -> np.ndarray:
    """Unchecked R[l, k, i, j] for inner loops over already validated points."""
    g, dg, ddg = M.chart.metric_second_derivatives(p)
    gamma, dgamma = _connection_and_derivative(g, dg, ddg)
    return _riemann_raw(gamma, dgamma)

def curvature_form(M: ManifoldDescriptor, p, X, Y, Z, W, R: Optional[np.ndarray] = None) -> float:
    """⟨R(X, Y)Z, W⟩."""
    p = _as_point(M, p)
    if R is None:
        R = riemann_at(M, p).R
    g = M.chart.metric(p)
    return float(np.einsum("la,lkij,i,j,k,a->", g, R, X, Y, Z, W))

def inner(M: ManifoldDescriptor, p, X, Y) -> float:
    g = metric_at(M, p).g
    return float(np.asarray(X) @ g @ np.asarray(Y))

def norm(M: ManifoldDescriptor, p, X) -> float:
    return math.sqrt(max(inner(M, p, X, X), 0.0))

def angle(M: ManifoldDescriptor, p, X, Y) -> float:
    nx, ny = norm(M, p, X), norm(M, p, Y)
    if nx == 0.0 or ny == 0.0:
        raise ZeroVector("angle with a zero vector is undefined")
    return math.acos(max(-1.0, min(1.0, inner(M, p, X, Y) / (nx * ny))))

def sectional_curvature(M: ManifoldDescriptor, p, X, Y) -> float:
    p = check_point(M, p, strict=True)
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    g = M.chart.metric(p)
    gram = (X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2
    if gram < settings.DEGENERATE_PLANE_GRAM:
        raise DegeneratePlane(f"Gram determinant {gram:.3e} of the tangent plane is too small")
    return curvature_form(M, p, X, Y, X, Y) / gram

def gaussian_curvature(M: ManifoldDescriptor, p) -> float:
    """Curvature of a 2-manifold (or of the coordinate plane of the first two axes)."""
    e = np.eye(M.dim)
    return sectional_curvature(M, p, e[0], e[1])

def cross(M: ManifoldDescriptor, p, X, Y) -> np.ndarray:
    """Metric cross product: (X × Y)^k = g^{kl} √det g ε_{lij} X^i Y^j."""
    g = M.chart.metric(np.asarray(p, dtype=float))
    c = np.cross(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))
    return math.sqrt(np.linalg.det(g)) * np.linalg.solve(g, c)

def rotate_j(M: ManifoldDescriptor, p, w) -> np.ndarray:
    """π/2-rotation on a 2-manifold: unit Jw ⟂ w with (w, Jw) positively oriented."""
    g = M.chart.metric(np.asarray(p, dtype=float))
    w = np.asarray(w, dtype=float)
    # covector ε_{jl} w^j, raised
    jw = math.sqrt(np.linalg.det(g)) * np.linalg.solve(g, np.array([-w[1], w[0]]))
    n = math.sqrt(jw @ g @ jw)
    if n == 0.0:
        raise ZeroVector("J of a zero vector")
    return jw / n

def orthonormal_frame(M: ManifoldDescriptor, p, vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Gram–Schmidt in the metric at p; rows of the result are orthonormal."""
    g = M.chart.metric(np.asarray(p, dtype=float))
    out: List[np.ndarray] = []
    for v in vectors:
        w = np.asarray(v, dtype=float).copy()
        for e in out:
            w = w - (e @ g @ w) * e
        n = math.sqrt(max(w @ g @ w, 0.0))
        if n < 1e-12:
            raise ZeroVector("vectors are linearly dependent")
        out.append(w / n)
    return np.array(out)

# --- Diagnostics ---

def metric_compatibility_residual(M: ManifoldDescriptor, p) -> float:
    """max |∇_m g_ij| with ∂g differenced independently of the connection."""
    p = check_point(M, p, strict=True)
    gamma = christoffel_at(M, p).gamma
    h = max(settings.FD_STEP, settings.FD_STEP * float(np.linalg.norm(p)))
    dg = _central_difference(M.chart.metric, p, h)
    g = M.chart.metric(p)
    nabla = dg - np.einsum("ami,aj->mij", gamma, g) - np.einsum("amj,ia->mij", gamma, g)
    return float(np.max(np.abs(nabla)))

def bianchi_residual(M: ManifoldDescriptor, p) -> Tuple[float, float]:
    """(first Bianchi residual, antisymmetry residual) of the curvature tensor."""
    R = riemann_at(M, p).R
    bianchi = R + np.einsum("lijk->lkij", R) + np.einsum("ljki->lkij", R)
    antisym = R + R.transpose(0, 1, 3, 2)
    return float(np.max(np.abs(bianchi))), float(np.max(np.abs(antisym)))

def sample_interior_points(M: ManifoldDescriptor, n: int, rng: np.random.Generator, scale: float = 0.8) -> np.ndarray:
    """Random points well inside the chart, for invariant sampling."""
    pts = []
    for lo, hi in M.chart_domain:
        lo = -3.0 if lo == -INF else lo
        hi = 3.0 if hi == INF else hi
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * scale
        pts.append(rng.uniform(mid - half, mid + half, size=n))
    pts = np.array(pts).T
    if isinstance(M.chart, ConformalChart):
        # shrink into the ball
        norms = np.linalg.norm(pts, axis=1, keepdims=True)
        lim = scale * M.chart.limit
        pts = np.where(norms > lim, pts * (lim / np.maximum(norms, 1e-300)) * rng.uniform(0, 1, size=(n, 1)), pts)
    return pts

def default_point(M: ManifoldDescriptor) -> np.ndarray:
    """A well-interior base point: the chart origin, the equator, or the box centre."""
    chart = M.chart
    if isinstance(chart, ProductChart):
        return np.append(default_point(M.factor), 0.0)
    if isinstance(chart, GeographicSphereChart):
        return np.zeros(2)
    if isinstance(chart, HypersphericalChart):
        return np.array([math.pi / 2, math.pi / 2, 0.0])
    if isinstance(chart, CustomChart):
        return np.array([0.5 * (lo + hi) if hi - lo < 10.0 else (1.0 if lo > 0 else 0.0) for lo, hi in chart.box])
    return np.zeros(M.dim)
