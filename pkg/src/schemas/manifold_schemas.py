from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

# --- Ambient manifolds and pointwise geometric data ---

class MetricKind(str, Enum):
    EUCLIDEAN = "euclidean"
    SPHERE3 = "sphere3"
    HYPERBOLIC3 = "hyperbolic3"
    PRODUCT = "product"
    SPHERE2 = "sphere2"
    HYPERBOLIC2 = "hyperbolic2"
    EUCLIDEAN2 = "euclidean2"
    CUSTOM = "custom"

class ManifoldDescriptor(BaseModel):
    name: str
    dim: int = Field(ge=2, le=3)
    metric_kind: MetricKind
    params: Dict[str, float] = Field(default_factory=dict)
    chart_name: str
    chart_domain: List[Tuple[float, float]]
    factor: Optional["ManifoldDescriptor"] = None # M² of a product M²×ℝ
    chart: Any = Field(default=None, exclude=True, repr=False)

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    @property
    def radius(self) -> float:
        return self.params.get("radius", 1.0)

class MetricMatrix(BaseModel):
    point: np.ndarray
    g: np.ndarray

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.g))

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.g)

class ConnectionCoefficients(BaseModel):
    point: np.ndarray
    gamma: np.ndarray # gamma[k, i, j] = Γ^k_ij

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

class CurvatureTensor(BaseModel):
    point: np.ndarray
    R: np.ndarray # R[l, k, i, j]: R(∂_i, ∂_j)∂_k = R[l, k, i, j] ∂_l

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

ManifoldDescriptor.model_rebuild()
