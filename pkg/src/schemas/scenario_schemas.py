import math
from enum import Enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..core.config import settings
from .helix_schemas import HelixKind, KappaProfile

# --- Scenario configuration blocks ---

def _comma_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value

class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ManifoldBlock(_Block):
    kind: str = "euclidean"
    radius: float = Field(default=1.0, gt=0)
    chart: Optional[str] = None # sphere3: stereographic (default) | hyperspherical
    factor: Optional[str] = None
    metric: Optional[str] = None


class ObjectKind(str, Enum):
    HELIX = "helix"
    CURVE = "curve"
    CYLINDER = "cylinder"
    RECTIFYING = "rectifying"
    PRODUCT = "product"

class ObjectBlock(_Block):
    kind: ObjectKind = ObjectKind.HELIX


class HelixBlock(_Block):
    kind: HelixKind = HelixKind.GENERALIZED
    theta: float = Field(default=math.pi / 3, gt=0, lt=math.pi)
    kappa: KappaProfile = Field(default_factory=KappaProfile)
    c0: float = 0.0
    sign: int = 1
    length: Optional[float] = Field(default=None, gt=0)
    u_min: Optional[float] = None
    u_max: Optional[float] = None
    axis: Optional[Literal["vertical"]] = None # prescribe the axis ∂t on M²×ℝ
    perturb: float = 0.0 # extra torsion perturb·κ on the second half (control curves)

    @field_validator("kappa", mode="before")
    @classmethod
    def _parse_profile(cls, v):
        return KappaProfile.parse(v) if isinstance(v, str) else v

    @model_validator(mode="after")
    def _range(self):
        lo, hi = self.s_range
        if not lo < hi:
            raise ValueError("helix range must be nonempty")
        return self

    @property
    def s_range(self):
        if self.u_min is not None or self.u_max is not None:
            return (self.u_min if self.u_min is not None else 0.0, self.u_max if self.u_max is not None else 0.0)
        length = self.length if self.length is not None else 10.0
        if self.kind == HelixKind.SLANT:
            return (-length / 2, length / 2)
        return (0.0, length)


class CurveBlock(_Block):
    kappa: KappaProfile = Field(default_factory=KappaProfile)
    tau: KappaProfile = Field(default_factory=lambda: KappaProfile(name="polynomial", coefficients=[0.0, 1.0]))
    length: float = Field(default=4.0, gt=0)

    @field_validator("kappa", "tau", mode="before")
    @classmethod
    def _parse_profile(cls, v):
        return KappaProfile.parse(v) if isinstance(v, str) else v


class CylinderBlock(_Block):
    radius: float = Field(default=0.5, gt=0) # chart radius, or colatitude on S²
    tilt: float = 0.0 # angle of V0 away from the vertical axis
    directrix: Literal["circle", "helix"] = "circle"


class RectifyingBlock(_Block):
    directrix: Literal["helix", "curve"] = "helix"


class ProductBlock(_Block):
    theta: float = Field(default=math.pi / 3, gt=0)
    curve: Literal["circle", "geodesic"] = "geodesic"
    curve_radius: float = Field(default=0.5, gt=0)


class GridBlock(_Block):
    u_min: Optional[float] = None
    u_max: Optional[float] = None
    nu: int = Field(default_factory=lambda: settings.DEFAULT_NU, ge=8)
    v_min: float = -0.3
    v_max: float = 0.3
    nv: int = Field(default_factory=lambda: settings.DEFAULT_NV, ge=8)

    @model_validator(mode="after")
    def _ranges(self):
        if not self.v_min < self.v_max:
            raise ValueError("v range must be nonempty")
        if self.u_min is not None and self.u_max is not None and not self.u_min < self.u_max:
            raise ValueError("u range must be nonempty")
        return self

    @property
    def u_range(self):
        if self.u_min is None and self.u_max is None:
            return None
        return (-math.inf if self.u_min is None else self.u_min, math.inf if self.u_max is None else self.u_max)


class OutputBlock(_Block):
    dir: Optional[str] = None
    formats: List[Literal["report", "csv", "obj"]] = Field(default_factory=lambda: ["report"])

    @field_validator("formats", mode="before")
    @classmethod
    def _split(cls, v):
        return _comma_list(v)


class ScenarioConfig(BaseModel):
    name: str = "scenario"
    seed: int = 0
    manifold: ManifoldBlock = Field(default_factory=ManifoldBlock)
    object: ObjectBlock = Field(default_factory=ObjectBlock)
    helix: HelixBlock = Field(default_factory=HelixBlock)
    curve: CurveBlock = Field(default_factory=CurveBlock)
    cylinder: CylinderBlock = Field(default_factory=CylinderBlock)
    rectifying: RectifyingBlock = Field(default_factory=RectifyingBlock)
    product: ProductBlock = Field(default_factory=ProductBlock)
    grid: GridBlock = Field(default_factory=GridBlock)
    checks: List[str] = Field(default_factory=list)
    tol: Dict[str, float] = Field(default_factory=dict)
    output: OutputBlock = Field(default_factory=OutputBlock)

    model_config = ConfigDict(extra="forbid")

    @field_validator("checks", mode="before")
    @classmethod
    def _split(cls, v):
        return _comma_list(v)

    @field_validator("checks")
    @classmethod
    def _known_checks(cls, v: List[str]) -> List[str]:
        unknown = [name for name in v if name not in settings.CHECK_TOLERANCES]
        if unknown:
            raise ValueError(f"unknown checks {unknown}")
        return v

    @field_validator("tol")
    @classmethod
    def _known_tolerances(cls, v: Dict[str, float]) -> Dict[str, float]:
        unknown = [name for name in v if name not in settings.CHECK_TOLERANCES]
        if unknown:
            raise ValueError(f"tolerances for unknown checks {unknown}")
        return v

    def tolerance(self, check: str) -> float:
        return self.tol.get(check, settings.CHECK_TOLERANCES[check])

# --- Reports ---

class CheckInfo(BaseModel):
    name: str
    anchor: str
    tolerance: float
    description: str
    lower_bound: bool = False
    objects: List[str]


class VerificationReport(BaseModel):
    name: str
    sup: float
    mean: float
    observed: float # the compared quantity: sup, or the shortfall of a lower-bound check
    tolerance: float
    passed: bool
    anchor: str
    wall_time: float
    message: Optional[str] = None
    error: Optional[str] = None # numerical failure while evaluating the check


class ScenarioReport(BaseModel):
    name: str
    manifold: Optional[str] = None
    object_kind: str
    status: Literal["passed", "failed", "error"]
    checks: List[VerificationReport] = Field(default_factory=list)
    artifacts: List[str] = Field(default_factory=list)
    error: Optional[str] = None
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "passed"
