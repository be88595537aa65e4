from enum import Enum
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy.interpolate import CubicHermiteSpline

from ..core.config import settings
from ..core.exceptions import LeftChart
from .manifold_schemas import ManifoldDescriptor

# --- Integrator configuration ---

class IntegratorSettings(BaseModel):
    rel_tol: float = Field(default_factory=lambda: settings.RTOL, gt=0, lt=1e-2)
    abs_tol: float = Field(default_factory=lambda: settings.ATOL, gt=0, lt=1e-2)
    max_step: float = Field(default_factory=lambda: settings.MAX_STEP, gt=0)
    sample_spacing: float = Field(default_factory=lambda: settings.SAMPLE_SPACING, gt=0)
    method: str = "RK45" # embedded Dormand–Prince 4(5)

    model_config = {"frozen": True}

    @field_validator("method")
    @classmethod
    def _embedded_pair_only(cls, v: str) -> str:
        if v not in ("RK45", "DOP853"):
            raise ValueError("method must be an embedded Runge-Kutta pair (RK45 or DOP853)")
        return v

# --- Curves ---

class CurvePath(BaseModel):
    """Arc-length parametrised curve sampled in chart coordinates."""
    manifold: ManifoldDescriptor
    s: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    accelerations: Optional[np.ndarray] = None # d/ds of tangent components, when known exactly
    fields: Dict[str, np.ndarray] = Field(default_factory=dict)
    left_chart: bool = False
    nfev: int = 0

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def length(self) -> float:
        return float(self.s[-1] - self.s[0])

    @cached_property
    def position_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.s, self.points, self.tangents, axis=0)

    @cached_property
    def tangent_spline(self):
        if self.accelerations is not None:
            return CubicHermiteSpline(self.s, self.tangents, self.accelerations, axis=0)
        return self.position_spline.derivative()

    def position(self, s) -> np.ndarray:
        return self.position_spline(s)

    def velocity(self, s) -> np.ndarray:
        return self.tangent_spline(s)

    def with_fields(self, **fields: np.ndarray) -> "CurvePath":
        merged = dict(self.fields)
        merged.update(fields)
        return self.model_copy(update={"fields": merged})

    def require_complete(self) -> "CurvePath":
        if self.left_chart:
            raise LeftChart(f"curve left the chart of {self.manifold.name} at s = {self.s[-1]:.6g}", partial=self)
        return self


class FrenetData(BaseModel):
    manifold: ManifoldDescriptor
    s: np.ndarray
    points: np.ndarray
    T: np.ndarray
    N: np.ndarray
    B: np.ndarray
    kappa: np.ndarray
    tau: np.ndarray
    omega: np.ndarray
    sigma: np.ndarray
    D: np.ndarray
    kappa_prime: Optional[np.ndarray] = None # exact d/ds, present when synthesised
    tau_prime: Optional[np.ndarray] = None

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    @property
    def n(self) -> int:
        return len(self.s)


class DarbouxField(BaseModel):
    D: np.ndarray
    kappa_omega_residual: np.ndarray # (κ/ω)′ + τσ
    tau_omega_residual: np.ndarray # (τ/ω)′ − κσ

    model_config = {"frozen": True, "arbitrary_types_allowed": True}


class IndicatrixKind(str, Enum):
    TANGENT = "tangent"
    NORMAL = "normal"
    BINORMAL = "binormal"

class IndicatrixCurve(BaseModel):
    kind: IndicatrixKind
    base_point: np.ndarray
    base_frame: np.ndarray # rows: orthonormal basis of T_{p0}M in chart components
    s: np.ndarray
    vectors: np.ndarray # unit vectors, components in base_frame
    geodesic_curvature: np.ndarray

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    def chart_vectors(self) -> np.ndarray:
        return self.vectors @ self.base_frame


class CurveKind(str, Enum):
    GEODESIC = "geodesic"
    GENERALIZED_HELIX = "generalized_helix"
    SLANT_HELIX = "slant_helix"
    GENERIC = "generic"

class CurveClassification(BaseModel):
    kind: CurveKind
    theta: Optional[float] = None
    kappa_sup: float
    ratio_median: float
    ratio_residual: float # sup |τ/κ − median|
    sigma_median: float
    sigma_residual: float # sup |σ − median σ|
    interval: Tuple[float, float]
