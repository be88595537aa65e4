import math
from enum import Enum
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

# --- Helix specifications and axes ---

class KappaProfile(BaseModel):
    """
    Named curvature profile κ̄(s).

    constant:    [a]                 → a
    sinusoidal:  [a, b, w(, phase)]  → a + b sin(w s + phase)
    polynomial:  [c0, c1, ...]       → Σ c_i sⁱ
    """
    name: Literal["constant", "sinusoidal", "polynomial"] = "constant"
    coefficients: List[float] = Field(default_factory=lambda: [1.0])

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _arity(self):
        n = len(self.coefficients)
        if self.name == "constant" and n != 1:
            raise ValueError("constant profile takes exactly one coefficient")
        if self.name == "sinusoidal" and n not in (3, 4):
            raise ValueError("sinusoidal profile takes a, b, w and an optional phase")
        if self.name == "polynomial" and n < 1:
            raise ValueError("polynomial profile needs at least one coefficient")
        return self

    @classmethod
    def parse(cls, text: str) -> "KappaProfile":
        """'sinusoidal:1.0,0.3,1.0' → KappaProfile."""
        name, _, rest = text.partition(":")
        coeffs = [float(c) for c in rest.split(",") if c.strip()] if rest else [1.0]
        return cls(name=name.strip(), coefficients=coeffs)

    def value(self, s):
        c = self.coefficients
        if self.name == "constant":
            return c[0] + 0.0 * np.asarray(s, dtype=float)
        if self.name == "sinusoidal":
            phase = c[3] if len(c) == 4 else 0.0
            return c[0] + c[1] * np.sin(c[2] * np.asarray(s, dtype=float) + phase)
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), c)

    def derivative(self, s):
        c = self.coefficients
        if self.name == "constant":
            return 0.0 * np.asarray(s, dtype=float)
        if self.name == "sinusoidal":
            phase = c[3] if len(c) == 4 else 0.0
            return c[1] * c[2] * np.cos(c[2] * np.asarray(s, dtype=float) + phase)
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), np.polynomial.polynomial.polyder(c))


class HelixKind(str, Enum):
    GENERALIZED = "generalized"
    SLANT = "slant"

class HelixSpec(BaseModel):
    kind: HelixKind = HelixKind.GENERALIZED
    theta: float = Field(gt=0.0, lt=math.pi)
    kappa: KappaProfile = Field(default_factory=KappaProfile)
    c0: float = 0.0
    sign: int = 1
    s_range: Tuple[float, float] = (0.0, 10.0)
    s0: float = 0.0 # where frame0 is prescribed (u₀ for slant helices)
    frame0: Optional[np.ndarray] = None # rows T, N, B in chart components
    p0: Optional[np.ndarray] = None

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    @field_validator("c0")
    @classmethod
    def _c0_open_interval(cls, v: float) -> float:
        if not abs(v) < 1.0:
            raise ValueError("|c0| must be < 1")
        return v

    @field_validator("sign")
    @classmethod
    def _sign(cls, v: int) -> int:
        if v not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return v

    @model_validator(mode="after")
    def _ranges(self):
        lo, hi = self.s_range
        if not lo < hi:
            raise ValueError("s_range must be nonempty")
        if not lo <= self.s0 <= hi:
            raise ValueError("s0 must lie inside s_range")
        if self.kind == HelixKind.SLANT and not self.theta < math.pi / 2:
            raise ValueError("slant helices need theta in (0, pi/2)")
        return self


class AxisField(BaseModel):
    kind: HelixKind
    theta: float
    V: np.ndarray
    residual: np.ndarray # closed-form |∇_T V|
    transport_residual: np.ndarray # |∇_T V| measured by differencing V

    model_config = {"frozen": True, "arbitrary_types_allowed": True}
