import os
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv
from typing import Dict

load_dotenv() # Load .env file variables

class Settings(BaseSettings):
    # Application settings
    APP_NAME: str = "Parallel Angle Lab"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Integrator settings (embedded Runge-Kutta 4(5))
    RTOL: float = 1e-9
    ATOL: float = 1e-11
    MAX_STEP: float = 0.1
    SAMPLE_SPACING: float = 0.01 # Arc-length spacing of stored curve samples

    # Numerical thresholds
    KAPPA_MIN: float = 1e-6
    TAU_MIN: float = 1e-6
    SINGULAR_METRIC_DET: float = 1e-12
    DEGENERATE_PLANE_GRAM: float = 1e-12
    DEGENERATE_RULING_GRAM: float = 1e-8
    DEGENERATE_PATCH_DET: float = 1e-10
    CLASSIFY_TOL: float = 1e-3
    SLANT_STOP_MARGIN: float = 1e-3
    FD_STEP: float = 1e-4

    # Chart domains
    POINCARE_MARGIN: float = 0.95 # |x| <= margin * r
    STEREOGRAPHIC_EXTENT: float = 10.0 # |x| <= extent * r
    POLAR_MARGIN: float = 1e-3 # hyperspherical / geographic polar margins

    # Patch defaults
    DEFAULT_NU: int = 41
    DEFAULT_NV: int = 21
    THREADS: int = int(os.getenv("THREADS", "1"))

    # Default tolerance per registered check. Lower-bound checks store their threshold.
    CHECK_TOLERANCES: Dict[str, float] = {
        "kernel-christoffel": 1e-6,
        "kernel-metric-compatibility": 1e-8,
        "kernel-sectional": 1e-5,
        "kernel-bianchi": 1e-8,
        "geodesic-speed": 1e-6,
        "holonomy-cap": 1e-4,
        "lancret": 1e-4,
        "angle-constancy": 1e-5,
        "axis-transport": 1e-5,
        "slant-sigma": 1e-4,
        "indicatrix": 1e-4,
        "helix-on-cylinder": 1e-5,
        "cylinder-flatness": 1e-3,
        "cylinder-transport": 1e-4,
        "rectifying-geodesic": 1e-5,
        "rectifying-flat-directrix": 1e-5,
        "defect": 1e-4,
        "defect-closed-form": 1e-4,
        "defect-oracle": 1e-3,
        "defect-nonzero-off-directrix": 1e-2,
        "constant-angle": 1e-5,
        "product-curvature": 1e-3,
        "riccati": 1e-3,
        "gauss-equation": 1e-3,
        "curvature-operator": 1e-6,
        "curvature-operator-nonzero": 1e-2,
        "ruledness": 1e-5,
        "cylinder-geodesics": 1e-3,
        "principal-direction": 1e-4,
        "connection-table": 1e-3,
        "ruling-geodesic": 1e-6,
    }

    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "out")

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

settings = Settings()
