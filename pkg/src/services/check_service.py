"""
Registry of named verifications and their execution.

Every check maps a built scenario to an array of nonnegative residuals; the
report compares their sup with the check's tolerance. Lower-bound checks return
the magnitudes that must stay above a threshold instead, and report the
shortfall max(0, threshold − min) against zero.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..core.config import settings
from ..core.exceptions import ConfigError, GeometryLabError, LeftPatch
from ..schemas.curve_schemas import CurveKind
from ..schemas.helix_schemas import HelixKind
from ..schemas.manifold_schemas import ManifoldDescriptor, MetricKind
from ..schemas.scenario_schemas import CheckInfo, ObjectKind, VerificationReport
from ..schemas.surface_schemas import AngleDefect, CurvatureOperatorField
from . import surface_service
from .frenet_service import indicatrix
from .helix_service import classify_curve
from .manifold_service import (
    HypersphericalChart,
    bianchi_residual,
    christoffel_at,
    christoffel_fd_at,
    default_point,
    gaussian_curvature,
    metric_compatibility_residual,
    norm,
    orthonormal_frame,
    sample_interior_points,
    sectional_curvature,
)
from .transport_service import (
    _wrapped_difference,
    chart_circle,
    geodesic_speed_drift,
    integrate_geodesic,
    latitude_circle,
    loop_holonomy,
    parallel_transport,
)

if TYPE_CHECKING:
    from .scenario_service import ScenarioContext

logger = logging.getLogger(__name__)

ALL_OBJECTS = tuple(ObjectKind)
CURVES = (ObjectKind.HELIX, ObjectKind.CURVE)
SURFACES = (ObjectKind.CYLINDER, ObjectKind.RECTIFYING, ObjectKind.PRODUCT)


class NotApplicable(Exception):
    """The check cannot be evaluated on this scenario; reported as a failure."""
    pass


class Check(BaseModel):
    name: str
    anchor: str
    description: str
    objects: Tuple[ObjectKind, ...]
    lower_bound: bool = False
    fn: Callable = Field(exclude=True, repr=False)

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    def info(self) -> CheckInfo:
        return CheckInfo(
            name=self.name,
            anchor=self.anchor,
            tolerance=settings.CHECK_TOLERANCES[self.name],
            description=self.description,
            lower_bound=self.lower_bound,
            objects=[o.value for o in self.objects],
        )


CHECKS: Dict[str, Check] = {}

def register(name: str, anchor: str, objects: Sequence[ObjectKind] = ALL_OBJECTS, lower_bound: bool = False):
    def decorator(fn: Callable) -> Callable:
        if name not in settings.CHECK_TOLERANCES:
            raise KeyError(f"check '{name}' has no default tolerance")
        description = (fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else name
        CHECKS[name] = Check(
            name=name, anchor=anchor, description=description,
            objects=tuple(objects), lower_bound=lower_bound, fn=fn,
        )
        return fn
    return decorator

# --- Helpers ---

def _trim(values: np.ndarray, k: int = 2) -> np.ndarray:
    """Drop k samples at both ends of the first axis (one-sided difference stencils)."""
    values = np.asarray(values)
    return values[k:-k] if values.shape[0] > 2 * k else values

def _core(values: np.ndarray, k: int = 2) -> np.ndarray:
    """Interior of a patch grid: k nodes off every edge."""
    values = _trim(values, k)
    return values[:, k:-k] if values.shape[1] > 2 * k else values

def _metric_norms(M: ManifoldDescriptor, points: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    out = np.empty(points.shape[:-1])
    for idx in np.ndindex(out.shape):
        w = vectors[idx]
        out[idx] = math.sqrt(max(w @ M.chart.metric(points[idx]) @ w, 0.0))
    return out

def _space_form_curvature(M: ManifoldDescriptor) -> Optional[float]:
    r = M.radius
    return {
        MetricKind.EUCLIDEAN: 0.0,
        MetricKind.EUCLIDEAN2: 0.0,
        MetricKind.SPHERE3: 1.0 / r ** 2,
        MetricKind.SPHERE2: 1.0 / r ** 2,
        MetricKind.HYPERBOLIC3: -1.0 / r ** 2,
        MetricKind.HYPERBOLIC2: -1.0 / r ** 2,
    }.get(M.metric_kind)

def _fold_angle(angle: float) -> float:
    a = angle % (2 * math.pi)
    return min(a, 2 * math.pi - a)

def _helix(ctx: "ScenarioContext"):
    return ctx.helix

def _defect(ctx: "ScenarioContext") -> AngleDefect:
    return ctx.cached("defect", lambda: surface_service.parallel_angle_defect(ctx.patch_manifold, ctx.patch, ctx.surface_axis))

def _curvature_operator(ctx: "ScenarioContext") -> CurvatureOperatorField:
    return ctx.cached(
        "curvature-operator",
        lambda: surface_service.curvature_operator_on_axis(ctx.patch_manifold, ctx.patch, ctx.surface_axis),
    )

def _require_product_patch(ctx: "ScenarioContext") -> None:
    if ctx.object_kind != ObjectKind.PRODUCT:
        raise NotApplicable("needs a product constant-angle surface")

# --- Ambient kernel ---

KERNEL_POINTS = 12

@register("kernel-christoffel", "Christoffel symbols agree with a differenced metric")
def kernel_christoffel(ctx: "ScenarioContext") -> np.ndarray:
    """Analytic Γ against Γ from a 4th-order differenced metric at random points."""
    M = ctx.manifold
    points = sample_interior_points(M, KERNEL_POINTS, ctx.rng("kernel-christoffel"))
    return np.array([np.max(np.abs(christoffel_at(M, p).gamma - christoffel_fd_at(M, p).gamma)) for p in points])

@register("kernel-metric-compatibility", "Levi-Civita connection is metric: ∇g = 0")
def kernel_metric_compatibility(ctx: "ScenarioContext") -> np.ndarray:
    """max |∇_m g_ij| at random points."""
    M = ctx.manifold
    points = sample_interior_points(M, KERNEL_POINTS, ctx.rng("kernel-metric-compatibility"))
    return np.array([metric_compatibility_residual(M, p) for p in points])

@register("kernel-bianchi", "First Bianchi identity and antisymmetry of R")
def kernel_bianchi(ctx: "ScenarioContext") -> np.ndarray:
    """Bianchi and antisymmetry residuals of the curvature tensor at random points."""
    M = ctx.manifold
    points = sample_interior_points(M, KERNEL_POINTS, ctx.rng("kernel-bianchi"))
    return np.array([max(bianchi_residual(M, p)) for p in points])

@register("kernel-sectional", "Space forms have constant sectional curvature ±1/r²; vertical planes of M²×ℝ are flat")
def kernel_sectional(ctx: "ScenarioContext") -> np.ndarray:
    """Sectional curvature of random planes against its known value."""
    M = ctx.manifold
    rng = ctx.rng("kernel-sectional")
    points = sample_interior_points(M, KERNEL_POINTS, rng)
    out = []
    if M.metric_kind == MetricKind.PRODUCT:
        K_factor = _space_form_curvature(M.factor)
        if K_factor is None:
            raise NotApplicable(f"no reference curvature for the factor {M.factor.name}")
        for p in points:
            horizontal = np.append(rng.normal(size=2), 0.0)
            out.append(abs(sectional_curvature(M, p, horizontal, [0.0, 0.0, 1.0])))
            out.append(abs(sectional_curvature(M, p, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]) - K_factor))
        return np.array(out)
    expected = _space_form_curvature(M)
    if expected is None:
        raise NotApplicable(f"no reference sectional curvature on {M.name}")
    for p in points:
        X, Y = rng.normal(size=(2, M.dim))
        out.append(abs(sectional_curvature(M, p, X, Y) - expected))
    return np.array(out)

@register("geodesic-speed", "Geodesics keep unit speed and exp satisfies the semigroup property")
def geodesic_speed(ctx: "ScenarioContext") -> np.ndarray:
    """Speed drift of unit geodesics and the gap between exp over t1 + t2 and over t1 then t2."""
    M = ctx.manifold
    rng = ctx.rng("geodesic-speed")
    p = default_point(M)
    scale = min(1.0, M.radius)
    t1, t2 = 0.6 * scale, 0.5 * scale
    out = []
    for _ in range(4):
        w = rng.normal(size=M.dim)
        w = w / norm(M, p, w)
        full = integrate_geodesic(M, p, w, t1 + t2).require_complete()
        first = integrate_geodesic(M, p, w, t1).require_complete()
        q, v = first.points[-1], first.tangents[-1]
        second = integrate_geodesic(M, q, v / norm(M, q, v), t2).require_complete()
        gap = float(np.max(np.abs(_wrapped_difference(M, full.points[-1], second.points[-1]))))
        out += [geodesic_speed_drift(full), gap]
    return np.array(out)

@register("holonomy-cap", "Holonomy of a small circle is the enclosed curvature: K·area")
def holonomy_cap(ctx: "ScenarioContext") -> np.ndarray:
    """Rotation angle of the holonomy around a circle against its closed form."""
    M = ctx.manifold
    base = M.factor if M.metric_kind == MetricKind.PRODUCT else M
    r = base.radius
    if isinstance(M.chart, HypersphericalChart):
        raise NotApplicable("holonomy circles are set up in the stereographic chart")
    if base.metric_kind == MetricKind.SPHERE2:
        colatitude = math.pi / 4
        loop = latitude_circle(M, colatitude)
        expected = 2 * math.pi * (1.0 - math.cos(colatitude))
    elif base.metric_kind in (MetricKind.EUCLIDEAN, MetricKind.EUCLIDEAN2):
        loop = chart_circle(M, 1.0)
        expected = 0.0
    elif base.metric_kind == MetricKind.SPHERE3:
        rho = 0.5 * r
        loop = chart_circle(M, rho)
        expected = 2 * math.pi * (1.0 - math.cos(2.0 * math.atan(rho / r)))
    elif base.metric_kind in (MetricKind.HYPERBOLIC3, MetricKind.HYPERBOLIC2):
        rho = 0.5 * r
        loop = chart_circle(M, rho)
        expected = 2 * math.pi * (math.cosh(2.0 * math.atanh(rho / r)) - 1.0)
    else:
        raise NotApplicable(f"no closed-form holonomy on {M.name}")
    return np.array([abs(loop_holonomy(M, loop) - _fold_angle(expected))])

# --- Helices ---

@register("lancret", "Lancret: constant τ/κ (resp. σ) ⇔ constant angle with a parallel axis", (ObjectKind.HELIX,))
def lancret(ctx: "ScenarioContext") -> np.ndarray:
    """Classification recovers the helix kind and its axis angle."""
    _, fd, axis, _ = _helix(ctx)
    found = classify_curve(fd)
    expected = CurveKind.GENERALIZED_HELIX if axis.kind == HelixKind.GENERALIZED else CurveKind.SLANT_HELIX
    if found.kind != expected:
        logger.info(f"lancret: classified as {found.kind.value}, expected {expected.value}")
        return np.array([math.inf])
    return np.array([abs(found.theta - axis.theta)])

@register("angle-constancy", "The tangent (resp. normal) keeps a constant angle with the transported axis", (ObjectKind.HELIX,))
def angle_constancy(ctx: "ScenarioContext") -> np.ndarray:
    """|⟨T, V⟩ − cos θ| (slant: N) with V the axis at the start transported along the curve."""
    path, fd, axis, _ = _helix(ctx)
    M = path.manifold
    W = parallel_transport(M, path, axis.V[0])
    X = fd.T if axis.kind == HelixKind.GENERALIZED else fd.N
    inner = np.array([x @ M.chart.metric(p) @ w for p, x, w in zip(fd.points, X, W)])
    return np.abs(inner - math.cos(axis.theta))

@register("axis-transport", "The frame-formula axis is parallel along the curve", (ObjectKind.HELIX,))
def axis_transport(ctx: "ScenarioContext") -> np.ndarray:
    """Frame-formula axis against the transported axis, plus its ∇_T residuals."""
    path, fd, axis, _ = _helix(ctx)
    M = path.manifold
    W = parallel_transport(M, path, axis.V[0])
    gap = _metric_norms(M, fd.points, axis.V - W)
    return np.concatenate([gap, axis.residual, _trim(axis.transport_residual, 4)])

@register("slant-sigma", "A slant helix has constant σ = cot θ", (ObjectKind.HELIX,))
def slant_sigma(ctx: "ScenarioContext") -> np.ndarray:
    """|σ − cot θ| along a slant helix."""
    _, fd, axis, _ = _helix(ctx)
    if axis.kind != HelixKind.SLANT:
        raise NotApplicable("needs a slant helix")
    return np.abs(fd.sigma - math.cos(axis.theta) / math.sin(axis.theta))

@register("indicatrix", "Indicatrix geodesic curvatures: tangent τ/κ, normal σ, binormal κ/|τ|", CURVES)
def indicatrix_curvatures(ctx: "ScenarioContext") -> np.ndarray:
    """Signed geodesic curvatures of the transported indicatrices against τ/κ, σ and κ/|τ|."""
    path, fd = ctx.directrix
    M = path.manifold
    tangent = indicatrix(M, path, fd, "tangent")
    normal = indicatrix(M, path, fd, "normal")
    parts = [
        np.abs(tangent.geodesic_curvature - fd.tau / fd.kappa),
        np.abs(normal.geodesic_curvature - fd.sigma),
    ]
    if np.all(np.abs(fd.tau) > 1e-3):
        # c·(c′×c″) = κτ² for c = B
        binormal = indicatrix(M, path, fd, "binormal")
        parts.append(np.abs(binormal.geodesic_curvature - fd.kappa / np.abs(fd.tau)))
    return np.concatenate([_trim(p, 4) for p in parts])

@register("helix-on-cylinder", "A generalized helix is a geodesic of the cylinder over it along its own axis", (ObjectKind.HELIX,))
def helix_on_cylinder(ctx: "ScenarioContext") -> np.ndarray:
    """Geodesic curvature of the helix inside the cylinder ruled by its axis."""
    path, fd, axis, _ = _helix(ctx)
    if axis.kind != HelixKind.GENERALIZED:
        raise NotApplicable("needs a generalized helix")
    M = path.manifold
    nu = min(fd.n, int(path.length / 0.02) + 1)
    patch = surface_service.build_cylinder(M, path, axis.V[0], (-0.05, 0.05), nu=nu, nv=5)
    patch = surface_service.fundamental_forms(M, patch)
    return _trim(surface_service.directrix_geodesic_residual(M, patch))

# --- Cylinders ---

@register("cylinder-flatness", "A cylinder over a parallel field is intrinsically and extrinsically flat", (ObjectKind.CYLINDER,))
def cylinder_flatness(ctx: "ScenarioContext") -> np.ndarray:
    """|K_ext| and |K_int| on the interior of the cylinder."""
    patch = ctx.patch
    K_ext = surface_service.extrinsic_curvature(patch)
    K_int = surface_service.intrinsic_curvature(patch)
    return np.concatenate([np.abs(_trim(K_ext)).ravel(), np.abs(_core(K_int)).ravel()])

@register("cylinder-transport", "The ruling direction is parallel across the rulings", (ObjectKind.CYLINDER,))
def cylinder_transport(ctx: "ScenarioContext") -> np.ndarray:
    """|∇_{∂u} V| for the ruling field extended along the rulings."""
    return _trim(surface_service.axis_transport_residual(ctx.patch_manifold, ctx.patch, ctx.surface_axis)).ravel()

@register("cylinder-geodesics", "Geodesics of a flat cylinder are generalized helices", (ObjectKind.CYLINDER,))
def cylinder_geodesics(ctx: "ScenarioContext") -> np.ndarray:
    """Variation of τ/κ along random geodesics of the cylinder."""
    patch, M = ctx.patch, ctx.patch_manifold
    rng = ctx.rng("cylinder-geodesics")
    u_lo, u_hi = patch.u[2], patch.u[-3]
    v_lo, v_hi = patch.v[1], patch.v[-2]
    out = []
    for _ in range(5):
        u0 = rng.uniform(u_lo + 0.25 * (u_hi - u_lo), u_lo + 0.5 * (u_hi - u_lo))
        v0 = rng.uniform(v_lo + 0.1 * (v_hi - v_lo), v_lo + 0.3 * (v_hi - v_lo))
        phi = rng.uniform(0.35, 0.7)
        i, j = int(np.argmin(np.abs(patch.u - u0))), int(np.argmin(np.abs(patch.v - v0)))
        E, F, G = patch.g11[i, j], patch.g12[i, j], patch.g22[i, j]
        e1 = np.array([1.0 / math.sqrt(E), 0.0])
        e2 = np.array([-F, E]) / math.sqrt(E * (E * G - F * F))
        w = math.cos(phi) * e1 + math.sin(phi) * e2
        length = min(0.8 * (v_hi - v0) / math.sin(phi), 0.8 * (u_hi - u0) * math.sqrt(E) / math.cos(phi))
        try:
            curve = surface_service.surface_geodesic(patch, (u0, v0), w, length)
        except LeftPatch as exc:
            curve = exc.partial
        if curve.path.n < 12:
            raise NotApplicable("patch too small for surface geodesics")
        fd = surface_service.geodesic_frenet(M, patch, curve)
        ratio = _trim(fd.tau / fd.kappa)
        out.append(np.abs(ratio - np.median(ratio)))
    return np.concatenate(out)

# --- Rectifying surfaces and the angle defect ---

@register("rectifying-geodesic", "The directrix is a geodesic of its rectifying surface", (ObjectKind.RECTIFYING,))
def rectifying_geodesic(ctx: "ScenarioContext") -> np.ndarray:
    """Geodesic curvature of the directrix inside the rectifying surface."""
    return _trim(surface_service.directrix_geodesic_residual(ctx.patch_manifold, ctx.patch))

@register("rectifying-flat-directrix", "The rectifying surface is extrinsically flat along its directrix", (ObjectKind.RECTIFYING,))
def rectifying_flat_directrix(ctx: "ScenarioContext") -> np.ndarray:
    """|K_ext| at v = 0."""
    patch = ctx.patch
    return np.abs(_trim(surface_service.extrinsic_curvature(patch)[:, patch.v0_index]))

@register("defect", "Constant-angle defect ⟨∂u, ∇_{∂u} V⟩ of the extended axis vanishes", SURFACES)
def defect(ctx: "ScenarioContext") -> np.ndarray:
    """|δ| on the interior columns."""
    return np.abs(_trim(_defect(ctx).direct)).ravel()

@register("defect-closed-form", "Defect equals ½∂v g11·⟨V, ∂v⟩ − h11·⟨V, ν⟩ where the patch is flat", SURFACES)
def defect_closed_form(ctx: "ScenarioContext") -> np.ndarray:
    """Direct defect against its closed form on extrinsically flat nodes."""
    d = _defect(ctx)
    values = _trim(d.agreement)[_trim(d.flat_mask)]
    if values.size == 0:
        raise NotApplicable("no extrinsically flat nodes")
    return values

@register("defect-oracle", "On S³(r) the defect of a rectifying surface has a closed form in κ, τ, σ and v", (ObjectKind.RECTIFYING,))
def defect_oracle(ctx: "ScenarioContext") -> np.ndarray:
    """Relative error of the defect against the round-sphere closed form for |v| ≤ 0.3 r."""
    M, patch = ctx.patch_manifold, ctx.patch
    if M.metric_kind != MetricKind.SPHERE3:
        raise NotApplicable("the closed form holds on S³(r)")
    _, theta = ctx.directrix_axis
    r = M.radius
    band = np.abs(patch.v) <= 0.3 * r + 1e-12
    fd = patch.directrix
    oracle = surface_service.sphere_defect_oracle(
        fd.kappa[:, None], fd.tau[:, None], fd.sigma[:, None], theta, r, patch.v[None, band]
    )
    delta = _defect(ctx).direct[:, band]
    rel = np.abs(delta - oracle) / np.maximum(np.abs(oracle), 1e-3)
    return _trim(rel).ravel()

@register(
    "defect-nonzero-off-directrix",
    "In non-flat space forms no constant-angle surface exists: the defect vanishes only along the directrix",
    (ObjectKind.RECTIFYING,),
    lower_bound=True,
)
def defect_nonzero_off_directrix(ctx: "ScenarioContext") -> np.ndarray:
    """|δ| for 0.1 r ≤ |v| ≤ 0.3 r."""
    M, patch = ctx.patch_manifold, ctx.patch
    r = M.radius
    band = (np.abs(patch.v) >= 0.1 * r - 1e-12) & (np.abs(patch.v) <= 0.3 * r + 1e-12)
    if not band.any():
        raise NotApplicable("the v-grid has no nodes with 0.1 r ≤ |v| ≤ 0.3 r")
    return np.abs(_trim(_defect(ctx).direct)[:, band]).ravel()

@register("constant-angle", "The extended axis makes the constant angle θ with the surface normal", (ObjectKind.RECTIFYING, ObjectKind.PRODUCT))
def constant_angle(ctx: "ScenarioContext") -> np.ndarray:
    """Product: |⟨ν, ∂t⟩ − cos θ|; rectifying: |V − (sin θ ∂v − cos θ ν)|."""
    M, patch = ctx.patch_manifold, ctx.patch
    if ctx.object_kind == ObjectKind.PRODUCT:
        vertical = np.broadcast_to([0.0, 0.0, 1.0], patch.points.shape)
        return np.abs(surface_service.normal_component(M, patch, vertical) - math.cos(patch.theta)).ravel()
    axis = ctx.surface_axis
    expected = surface_service.surface_axis_from_rectifying(patch, axis.theta)
    return _metric_norms(M, patch.points, axis.V - expected).ravel()

@register("curvature-operator", "A constant-angle surface has R(∂u, ∂v)V = 0", SURFACES)
def curvature_operator(ctx: "ScenarioContext") -> np.ndarray:
    """|R(∂u, ∂v)V| with V the extended axis."""
    return _curvature_operator(ctx).norm.ravel()

@register(
    "curvature-operator-nonzero",
    "In non-flat space forms sin θ R_uvvu − cos θ R_uvnu stays away from zero",
    SURFACES,
    lower_bound=True,
)
def curvature_operator_nonzero(ctx: "ScenarioContext") -> np.ndarray:
    """|sin θ R_uvvu − cos θ R_uvnu| at every node."""
    return np.abs(_curvature_operator(ctx).scalar).ravel()

@register("ruledness", "Ruled constant-angle surfaces have ⟨R(e₂, e₁)e₁, ν⟩ = 0", SURFACES)
def ruledness(ctx: "ScenarioContext") -> np.ndarray:
    """|⟨R(e₂, e₁)e₁, ν⟩| and |⟨R(e₁, e₂)e₂, ν⟩| at every node."""
    comp, swapped = surface_service.ruledness_criterion(ctx.patch_manifold, ctx.patch)
    return np.maximum(np.abs(comp), np.abs(swapped)).ravel()

@register("gauss-equation", "Gauss equation: K_int = K_ext + K_sec(T Σ)", SURFACES)
def gauss_equation(ctx: "ScenarioContext") -> np.ndarray:
    """|K_int − K_ext − K_sec| on the interior of the patch."""
    return np.abs(_core(surface_service.gauss_residual(ctx.patch_manifold, ctx.patch))).ravel()

@register("ruling-geodesic", "Rulings are unit-speed ambient geodesics", SURFACES)
def ruling_geodesic(ctx: "ScenarioContext") -> np.ndarray:
    """|∇_{X_v} X_v| and ||X_v| − 1| off the v-edges."""
    residual = surface_service.ruling_geodesic_residual(ctx.patch_manifold, ctx.patch)
    return np.swapaxes(_trim(np.swapaxes(residual, 0, 1)), 0, 1).ravel()

@register("principal-direction", "The tangential part of the axis is a principal direction with curvature 0", (ObjectKind.RECTIFYING, ObjectKind.PRODUCT))
def principal_direction(ctx: "ScenarioContext") -> np.ndarray:
    """|A T_proj| with T_proj the tangential part of the extended axis."""
    return _trim(surface_service.principal_direction_residual(ctx.patch_manifold, ctx.patch, ctx.surface_axis)).ravel()

# --- Product surfaces ---

@register("product-curvature", "Constant-angle surfaces in M²×ℝ: K_ext = 0 and K_int = K^M cos² θ", (ObjectKind.PRODUCT,))
def product_curvature(ctx: "ScenarioContext") -> np.ndarray:
    """|K_int − K^M cos² θ| and |K_ext| on the interior."""
    _require_product_patch(ctx)
    M, patch = ctx.patch_manifold, ctx.patch
    K_M = np.array([[gaussian_curvature(M.factor, x[:2]) for x in row] for row in patch.points])
    K_int = surface_service.intrinsic_curvature(patch)
    K_ext = surface_service.extrinsic_curvature(patch)
    c2 = math.cos(patch.theta) ** 2
    return np.concatenate([np.abs(_core(K_int - K_M * c2)).ravel(), np.abs(_trim(K_ext)).ravel()])

@register("riccati", "λ solves λ_{,1} + λ² cot θ + ½ K^M sin 2θ = 0 and fixes K_int", (ObjectKind.PRODUCT,))
def riccati(ctx: "ScenarioContext") -> np.ndarray:
    """Riccati residual and the intrinsic-curvature cross-check on the interior."""
    _require_product_patch(ctx)
    res, cross_check = surface_service.riccati_residual(ctx.patch_manifold, ctx.patch)
    return np.concatenate([np.abs(_core(res)).ravel(), np.abs(_core(cross_check)).ravel()])

@register("connection-table", "Frame connection: ⟨∇_{e₂} e₁, e₂⟩ = λ cot θ and ⟨∇_{e₁} e₁, e₂⟩ = 0", (ObjectKind.PRODUCT,))
def connection_table(ctx: "ScenarioContext") -> np.ndarray:
    """Connection coefficients of (e₁, e₂) against λ cot θ and zero."""
    _require_product_patch(ctx)
    table = surface_service.connection_table(ctx.patch_manifold, ctx.patch)
    return np.concatenate([
        np.abs(_core(table.e2_e1_e2 - table.lam_cot)).ravel(),
        np.abs(_core(table.e1_e1_e2)).ravel(),
    ])

# --- Running ---

def list_checks() -> List[CheckInfo]:
    """Registered checks in registration order."""
    return [check.info() for check in CHECKS.values()]

def run_check(ctx: "ScenarioContext", name: str) -> VerificationReport:
    """
    Evaluate one check. Inapplicable checks fail with a message; numerical failures
    fail with `error` set. ConfigError propagates.
    """
    if name not in CHECKS:
        raise ConfigError(f"unknown check '{name}'", key="checks")
    check = CHECKS[name]
    threshold = ctx.config.tolerance(name)
    tolerance = 0.0 if check.lower_bound else threshold
    start = time.perf_counter()
    sup = mean = observed = math.nan
    message: Optional[str] = None
    error: Optional[str] = None
    try:
        if ctx.object_kind not in check.objects:
            raise NotApplicable(f"not applicable to {ctx.object_kind.value} objects")
        values = np.asarray(check.fn(ctx), dtype=float).ravel()
        if values.size == 0:
            raise NotApplicable("no samples to evaluate")
        sup, mean = float(np.max(values)), float(np.mean(values))
        if check.lower_bound:
            low = float(np.min(values))
            observed = max(0.0, threshold - low)
            message = f"lower bound {threshold:g}, min observed {low:.3e}"
        else:
            observed = sup
    except NotApplicable as exc:
        message = f"skipped: {exc}"
        logger.warning(f"check {name}: {message}")
    except ConfigError:
        raise
    except GeometryLabError as exc:
        error = f"{type(exc).__name__}: {exc}"
        logger.error(f"check {name}: {error}")

    passed = error is None and bool(observed <= tolerance)
    report = VerificationReport(
        name=name,
        sup=sup,
        mean=mean,
        observed=observed,
        tolerance=tolerance,
        passed=passed,
        anchor=check.anchor,
        wall_time=time.perf_counter() - start,
        message=message,
        error=error,
    )
    logger.info(f"check {name}: {'pass' if passed else 'FAIL'} (observed {observed:.3e}, tolerance {tolerance:.1e})")
    return report

def run_checks(ctx: "ScenarioContext", names: Sequence[str]) -> List[VerificationReport]:
    """Run checks concurrently on THREADS workers; reports come back in the given order."""
    threads = max(1, int(settings.THREADS))
    if threads == 1 or len(names) < 2:
        return [run_check(ctx, name) for name in names]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda name: run_check(ctx, name), names))
