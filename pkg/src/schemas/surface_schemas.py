from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel

from ..core.exceptions import MissingForms
from .curve_schemas import CurvePath, FrenetData
from .manifold_schemas import ManifoldDescriptor

# --- Ruled patches and fields on them ---

class PatchKind(str, Enum):
    CYLINDER = "cylinder"
    RECTIFYING = "rectifying"
    PRODUCT_ANGLE = "product_angle"
    CUSTOM = "custom"


class RuledPatch(BaseModel):
    """
    Surface X(u, v) sampled on a rectangular grid; arrays are indexed [i_u, j_v, ...].

    For ruled kinds the v-lines are unit-speed ambient geodesics and X_v is the
    integrator tangent. Fundamental-form fields are None until computed.
    """
    manifold: ManifoldDescriptor
    kind: PatchKind
    u: np.ndarray
    v: np.ndarray
    points: np.ndarray
    X_u: np.ndarray
    X_v: np.ndarray
    X_uu: np.ndarray
    X_uv: np.ndarray
    X_vv: np.ndarray
    theta: Optional[float] = None # constant angle of product patches
    directrix: Optional[FrenetData] = None # Frenet data at the u-columns (rectifying kind)

    normal: Optional[np.ndarray] = None
    g11: Optional[np.ndarray] = None
    g12: Optional[np.ndarray] = None
    g22: Optional[np.ndarray] = None
    h11: Optional[np.ndarray] = None
    h12: Optional[np.ndarray] = None
    h22: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None # principal curvature along e₂; NaN where undefined

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    @property
    def nu(self) -> int:
        return len(self.u)

    @property
    def nv(self) -> int:
        return len(self.v)

    @property
    def du(self) -> float:
        return float(self.u[1] - self.u[0]) if self.nu > 1 else 1.0

    @property
    def dv(self) -> float:
        return float(self.v[1] - self.v[0]) if self.nv > 1 else 1.0

    @property
    def v0_index(self) -> Optional[int]:
        """Column of the directrix (v = 0), if the grid has one."""
        hits = np.flatnonzero(np.abs(self.v) < 1e-12)
        return int(hits[0]) if len(hits) else None

    @property
    def is_ruled(self) -> bool:
        return self.kind != PatchKind.CUSTOM

    @property
    def has_forms(self) -> bool:
        return self.h11 is not None

    def require_forms(self) -> "RuledPatch":
        if not self.has_forms:
            raise MissingForms("fundamental forms have not been computed for this patch")
        return self

    def metric_det(self) -> np.ndarray:
        self.require_forms()
        return self.g11 * self.g22 - self.g12 ** 2


class SurfaceAxisField(BaseModel):
    V: np.ndarray # (nu, nv, d)
    theta: float
    construction: str = "transported along rulings"
    ruling_residual: np.ndarray # |∇_{∂v} V| by differencing in v

    model_config = {"frozen": True, "arbitrary_types_allowed": True}


class SurfaceCurve(BaseModel):
    """A geodesic of the patch metric, in patch parameters and lifted to the ambient manifold."""
    s: np.ndarray
    uv: np.ndarray
    duv: np.ndarray
    path: CurvePath
    left_patch: bool = False

    model_config = {"frozen": True, "arbitrary_types_allowed": True}


class AngleDefect(BaseModel):
    direct: np.ndarray # ⟨∂u, ∇_{∂u} V⟩ from the transported axis
    closed_form: np.ndarray # (∂v g11 / 2)·a − h11·b with V = a ∂v + b ν on the directrix
    flat_mask: np.ndarray # nodes where |K_ext| is below the flatness threshold

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    @property
    def agreement(self) -> np.ndarray:
        return np.abs(self.direct - self.closed_form)


class CurvatureOperatorField(BaseModel):
    vector: np.ndarray # R(∂u, ∂v)V, chart components
    projection: np.ndarray # ⟨R(∂u, ∂v)V, ∂u⟩
    scalar: np.ndarray # sin θ R_uvvu − cos θ R_uvnu, equal to projection when V = sin θ ∂v − cos θ ν
    norm: np.ndarray

    model_config = {"frozen": True, "arbitrary_types_allowed": True}


class ConnectionTable(BaseModel):
    e2_e1_e2: np.ndarray # ⟨∇_{e₂} e₁, e₂⟩
    lam_cot: np.ndarray # λ cot θ
    e1_e1_e2: np.ndarray # ⟨∇_{e₁} e₁, e₂⟩, zero along geodesic rulings

    model_config = {"frozen": True, "arbitrary_types_allowed": True}
