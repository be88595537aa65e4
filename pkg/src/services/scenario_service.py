"""
Scenario files: parsing, validation and construction of the geometric objects
a scenario's checks run against.

A scenario is a flat `key=value` file with dotted keys, e.g.

    manifold.kind=sphere3
    object.kind=helix
    helix.theta=1.0471975511965976
    checks=lancret,angle-constancy
"""
import functools
import logging
import math
import threading
import time
import zlib
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError

from ..core.config import settings
from ..core.exceptions import BadParams, ConfigError, GeometryLabError
from ..schemas.curve_schemas import CurvePath, FrenetData
from ..schemas.helix_schemas import AxisField, HelixKind, HelixSpec
from ..schemas.manifold_schemas import ManifoldDescriptor, MetricKind
from ..schemas.scenario_schemas import ObjectKind, ScenarioConfig, ScenarioReport, VerificationReport
from ..schemas.surface_schemas import RuledPatch, SurfaceAxisField
from . import helix_service, surface_service
from .check_service import run_checks
from .frenet_service import serialize_frenet
from .manifold_service import build_manifold, default_point, norm, orthonormal_frame
from .transport_service import chart_circle, integrate_geodesic, latitude_circle, serialize_path

logger = logging.getLogger(__name__)

# --- Parsing ---

def nest_keys(flat: Mapping[str, Optional[str]]) -> Dict[str, Any]:
    """Fold dotted keys into nested dictionaries; `tol.<check>` keeps the check name whole."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        if value is None:
            raise ConfigError("missing value", key=key)
        head, _, rest = key.partition(".")
        if head == "tol" and rest:
            parts = [head, rest]
        else:
            parts = key.split(".")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError("key is both a value and a section", key=part)
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigError("key is both a value and a section", key=key)
        node[parts[-1]] = value.strip()
    return nested

def _validation_to_config_error(exc: ValidationError) -> ConfigError:
    err = exc.errors()[0]
    key = ".".join(str(p) for p in err["loc"]) or None
    return ConfigError(err["msg"], key=key)

def load_scenario(path: Union[str, Path], overrides: Optional[Mapping[str, str]] = None) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file {path} not found")
    flat = dict(dotenv_values(path, interpolate=False))
    if not flat:
        raise ConfigError(f"scenario file {path} is empty or malformed")
    flat.update(overrides or {})
    return scenario_from_mapping(flat, default_name=path.stem)

def scenario_from_mapping(flat: Mapping[str, Optional[str]], default_name: str = "scenario") -> ScenarioConfig:
    nested = nest_keys(flat)
    nested.setdefault("name", default_name)
    try:
        return ScenarioConfig.model_validate(nested)
    except ValidationError as exc:
        raise _validation_to_config_error(exc) from exc

# --- Object construction ---

def _built(fn: Callable) -> property:
    """Build an object once per context; concurrent checks wait for the first build."""
    name = fn.__name__

    @functools.wraps(fn)
    def getter(self):
        with self._lock:
            if name not in self._objects:
                self._objects[name] = fn(self)
            return self._objects[name]

    return property(getter)


class ScenarioContext:
    """Lazily built objects of one scenario; every check reads what it needs from here."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self._lock = threading.RLock()
        self._objects: Dict[str, Any] = {}
        try:
            m = config.manifold
            self.manifold = build_manifold(m.kind, radius=m.radius, chart=m.chart, factor=m.factor, metric=m.metric)
        except BadParams as exc:
            raise ConfigError(str(exc), key="manifold") from exc

    @property
    def object_kind(self) -> ObjectKind:
        return self.config.object.kind

    def rng(self, stream: str) -> np.random.Generator:
        """Independent generator per named stream, seeded from the scenario seed."""
        return np.random.default_rng([self.config.seed, zlib.crc32(stream.encode())])

    def cached(self, key: str, factory: Callable[[], Any]) -> Any:
        """Memoise a derived quantity shared by several checks."""
        with self._lock:
            if key not in self._objects:
                self._objects[key] = factory()
            return self._objects[key]

    def build(self) -> None:
        """Construct the scenario's main object up front."""
        if self.object_kind == ObjectKind.HELIX:
            _ = self.helix
        elif self.object_kind == ObjectKind.CURVE:
            _ = self.curve
        else:
            _ = self.patch

    # curves

    @_built
    def helix(self) -> Tuple[CurvePath, FrenetData, AxisField, Tuple[float, float]]:
        M, h = self.manifold, self.config.helix
        if M.dim != 3:
            raise ConfigError("helices live in 3-manifolds", key="manifold.kind")
        p0 = default_point(M)
        s0 = 0.0 if h.s_range[0] <= 0.0 <= h.s_range[1] else h.s_range[0]
        kappa0 = float(h.kappa.value(s0))
        if h.axis == "vertical":
            if M.metric_kind != MetricKind.PRODUCT:
                raise ConfigError("a vertical axis needs a product manifold", key="helix.axis")
            if h.kind == HelixKind.SLANT:
                x0 = -h.c0
                tau0 = h.sign * kappa0 * x0 / math.sqrt(1.0 - x0 * x0)
                axis_theta = h.theta if h.sign > 0 else math.pi - h.theta
            else:
                tau0, axis_theta = 0.0, h.theta
            frame0 = helix_service.frame_for_axis(M, p0, [0.0, 0.0, 1.0], h.kind, axis_theta, kappa0, tau0)
        else:
            frame0 = helix_service.coordinate_frame(M, p0)
        if h.perturb:
            return self._perturbed_helix(frame0, p0, s0)
        try:
            spec = HelixSpec(
                kind=h.kind, theta=h.theta, kappa=h.kappa, c0=h.c0, sign=h.sign,
                s_range=h.s_range, s0=s0, frame0=frame0, p0=p0,
            )
        except ValidationError as exc:
            raise _validation_to_config_error(exc) from exc
        return helix_service.make_helix(M, spec)

    def _perturbed_helix(self, frame0, p0, s0):
        # control curve: τ/κ jumps by `perturb` halfway along
        h = self.config.helix
        if h.kind != HelixKind.GENERALIZED:
            raise ConfigError("torsion perturbation applies to generalized helices", key="helix.perturb")
        lo, hi = h.s_range
        mid = 0.5 * (lo + hi)
        cot = math.cos(h.theta) / math.sin(h.theta)
        kappa = h.kappa.value
        tau = lambda s: (cot + h.perturb * np.heaviside(np.asarray(s, dtype=float) - mid, 0.0)) * kappa(s)
        path, fd = helix_service.synthesize_curve(self.manifold, frame0, kappa, tau, (lo, hi), p0=p0, s0=s0)
        axis = helix_service.axis_field(HelixKind.GENERALIZED, fd, h.theta)
        return path, fd, axis, (float(path.s[0]), float(path.s[-1]))

    @_built
    def curve(self) -> Tuple[CurvePath, FrenetData]:
        c, M = self.config.curve, self.manifold
        if M.dim != 3:
            raise ConfigError("prescribed-curvature curves live in 3-manifolds", key="manifold.kind")
        p0 = default_point(M)
        frame0 = helix_service.coordinate_frame(M, p0)
        return helix_service.synthesize_curve(
            M, frame0, c.kappa, c.tau.value, (0.0, c.length), p0=p0,
            kappa_prime=c.kappa.derivative, tau_prime=c.tau.derivative,
        )

    @property
    def directrix(self) -> Tuple[CurvePath, FrenetData]:
        """The scenario's curve: the prescribed curve or the helix."""
        if self.object_kind == ObjectKind.CURVE or (
            self.object_kind == ObjectKind.RECTIFYING and self.config.rectifying.directrix == "curve"
        ):
            return self.curve
        path, fd, _, _ = self.helix
        return path, fd

    # surfaces

    @_built
    def patch(self) -> RuledPatch:
        kind, grid, M = self.object_kind, self.config.grid, self.manifold
        v_range = (grid.v_min, grid.v_max)
        if kind == ObjectKind.CYLINDER:
            beta, V0 = self.cylinder_directrix
            patch = surface_service.build_cylinder(M, beta, V0, v_range, grid.nu, grid.nv, u_range=grid.u_range)
        elif kind == ObjectKind.RECTIFYING:
            path, fd = self.directrix
            patch = surface_service.build_rectifying_surface(M, path, fd, v_range, grid.nu, grid.nv)
        elif kind == ObjectKind.PRODUCT:
            if M.metric_kind != MetricKind.PRODUCT:
                raise ConfigError("product surfaces need manifold.kind=product", key="manifold.kind")
            patch = surface_service.build_product_constant_angle_surface(
                M.factor, self.product_curve, self.config.product.theta, v_range, grid.u_range, grid.nu, grid.nv,
            )
        else:
            raise ConfigError(f"object kind '{kind.value}' has no surface", key="object.kind")
        return surface_service.fundamental_forms(patch.manifold, patch)

    @property
    def patch_manifold(self) -> ManifoldDescriptor:
        return self.patch.manifold

    @_built
    def cylinder_directrix(self) -> Tuple[CurvePath, np.ndarray]:
        M, c = self.manifold, self.config.cylinder
        if c.directrix == "helix":
            path, _, axis, _ = self.helix
            return path, axis.V[0]
        if M.dim != 3:
            raise ConfigError("cylinders live in 3-manifolds", key="manifold.kind")
        if M.metric_kind == MetricKind.PRODUCT and M.factor.metric_kind == MetricKind.SPHERE2:
            beta = latitude_circle(M, c.radius, n=1441)
        else:
            beta = chart_circle(M, c.radius, n=1441)
        vertical, radial = orthonormal_frame(M, beta.points[0], [np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])])
        return beta, math.cos(c.tilt) * vertical + math.sin(c.tilt) * radial

    @_built
    def product_curve(self) -> CurvePath:
        M2, pc = self.manifold.factor, self.config.product
        if pc.curve == "geodesic":
            if M2.metric_kind == MetricKind.SPHERE2:
                return latitude_circle(M2, math.pi / 2, n=1441)
            p0 = np.zeros(2)
            v0 = np.array([1.0, 0.0]) / norm(M2, p0, [1.0, 0.0])
            length = 3.0 if M2.metric_kind == MetricKind.EUCLIDEAN2 else 1.5 * M2.radius
            return integrate_geodesic(M2, p0, v0, length).require_complete()
        if M2.metric_kind == MetricKind.SPHERE2:
            return latitude_circle(M2, pc.curve_radius, n=1441)
        return chart_circle(M2, pc.curve_radius, n=1441)

    # axes on patches

    @_built
    def directrix_axis(self) -> Tuple[np.ndarray, float]:
        """Axis on the patch columns at v = 0, and its angle with the rulings."""
        patch = self.patch
        if self.object_kind == ObjectKind.CYLINDER:
            return patch.X_v[:, patch.v0_index], math.pi / 2
        if self.object_kind == ObjectKind.RECTIFYING:
            if self.config.rectifying.directrix == "curve":
                raise ConfigError("a prescribed curve has no axis", key="rectifying.directrix")
            _, fd, axis, _ = self.helix
            idx = surface_service.columns_of(patch, fd.s)
            return axis.V[idx], axis.theta
        if self.object_kind == ObjectKind.PRODUCT:
            return np.tile([0.0, 0.0, 1.0], (patch.nu, 1)), patch.theta
        raise ConfigError("this object has no axis", key="object.kind")

    @_built
    def surface_axis(self) -> SurfaceAxisField:
        V0, theta = self.directrix_axis
        return surface_service.extend_axis(self.patch_manifold, self.patch, V0, theta)

# --- Running ---

def scenario_dir(config: ScenarioConfig, out_dir: Optional[Union[str, Path]] = None) -> Path:
    """`--out` if given, else `output.dir`, else OUTPUT_DIR/<scenario name>."""
    if out_dir is not None:
        return Path(out_dir)
    if config.output.dir:
        return Path(config.output.dir)
    return Path(settings.OUTPUT_DIR) / config.name

def _patch_defect(ctx: ScenarioContext) -> Optional[np.ndarray]:
    try:
        axis = ctx.surface_axis
    except ConfigError:
        return None
    defect = ctx.cached("defect", lambda: surface_service.parallel_angle_defect(ctx.patch_manifold, ctx.patch, axis))
    return defect.direct

def write_artifacts(ctx: ScenarioContext, destination: Path) -> List[str]:
    """CSV tables and OBJ meshes requested by `output.formats`."""
    formats = ctx.config.output.formats
    written: List[Path] = []
    curve_object = ctx.object_kind in (ObjectKind.HELIX, ObjectKind.CURVE)
    if "csv" in formats:
        if curve_object:
            path, fd = ctx.directrix
            written.append(serialize_path(path, destination / "path.csv"))
            written.append(serialize_frenet(fd, destination / "frenet.csv"))
        else:
            written.append(surface_service.serialize_patch(ctx.patch_manifold, ctx.patch, destination / "patch.csv", _patch_defect(ctx)))
    if "obj" in formats:
        if curve_object:
            logger.warning(f"scenario {ctx.config.name}: OBJ export needs a surface, skipped")
        else:
            written.append(surface_service.export_obj(ctx.patch_manifold, ctx.patch, destination / "patch.obj"))
    return [str(p) for p in written]

def run_scenario(config: ScenarioConfig, out_dir: Optional[Union[str, Path]] = None) -> ScenarioReport:
    """
    Build the scenario object, run its checks and write the requested outputs.

    Numerical failures end the run with status 'error'; the report written so far
    is still saved. ConfigError propagates.
    """
    start = time.perf_counter()
    destination = scenario_dir(config, out_dir)
    logger.info(f"scenario {config.name}: {config.object.kind.value} on {config.manifold.kind}, checks {config.checks}")
    ctx = ScenarioContext(config)
    checks: List[VerificationReport] = []
    artifacts: List[str] = []
    error: Optional[str] = None
    try:
        ctx.build()
        checks = run_checks(ctx, config.checks)
        artifacts = write_artifacts(ctx, destination)
    except ConfigError:
        raise
    except GeometryLabError as exc:
        logger.error(f"scenario {config.name}: {type(exc).__name__}: {exc}")
        error = f"{type(exc).__name__}: {exc}"

    failed_checks = [c.name for c in checks if c.error]
    if error is None and failed_checks:
        error = f"numerical failure in {failed_checks}"
    if error is not None:
        status = "error"
    elif all(c.passed for c in checks):
        status = "passed"
    else:
        status = "failed"
    report = ScenarioReport(
        name=config.name,
        manifold=ctx.manifold.name,
        object_kind=config.object.kind.value,
        status=status,
        checks=checks,
        artifacts=artifacts,
        error=error,
        wall_time=time.perf_counter() - start,
    )
    if "report" in config.output.formats:
        report_path = destination / "report.json"
        report.artifacts.append(str(report_path))
        save_report(report, report_path)
    logger.info(f"scenario {config.name}: {status} in {report.wall_time:.2f}s")
    return report

def save_report(report: ScenarioReport, destination: Union[str, Path]) -> Path:
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    destination.write_text(report.model_dump_json(indent=2))
    return destination
