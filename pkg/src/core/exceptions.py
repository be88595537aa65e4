from typing import Any, Optional, Tuple


class GeometryLabError(Exception):
    """Base exception for numerical failures. The CLI maps it to exit code 3."""
    exit_code = 3


class ConfigError(GeometryLabError):
    """Malformed or inconsistent scenario configuration."""
    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


# --- manifold ---

class ManifoldError(GeometryLabError):
    pass

class OutOfChart(ManifoldError):
    """Point outside the chart domain."""
    pass

class BadParams(ManifoldError):
    pass

class SingularMetric(ManifoldError):
    pass

class DegeneratePlane(ManifoldError):
    pass

class ZeroVector(ManifoldError):
    pass


# --- transport ---

class IntegrationError(GeometryLabError):
    pass

class LeftChart(IntegrationError):
    """Trajectory left the chart domain. `partial` holds the path integrated so far."""

    def __init__(self, message: str, partial: Any = None):
        self.partial = partial
        super().__init__(message)

class StepFailure(IntegrationError):
    pass

class NotClosed(IntegrationError):
    pass

class NonUnitSpeed(IntegrationError):
    pass


# --- frenet ---

class FrenetError(GeometryLabError):
    pass

class KappaVanishes(FrenetError):
    def __init__(self, message: str, interval: Optional[Tuple[float, float]] = None):
        self.interval = interval
        super().__init__(message if interval is None else f"{message} on s in [{interval[0]:.6g}, {interval[1]:.6g}]")

class TauVanishes(FrenetError):
    pass


# --- helix ---

class HelixError(GeometryLabError):
    pass

class DomainExhausted(HelixError):
    def __init__(self, message: str, u_m: float, u_M: float):
        self.u_m = u_m
        self.u_M = u_M
        super().__init__(f"{message} (achieved domain [{u_m:.6g}, {u_M:.6g}])")


# --- surface ---

class SurfaceError(GeometryLabError):
    pass

class DegenerateRuling(SurfaceError):
    pass

class DegeneratePatch(SurfaceError):
    pass

class MissingForms(SurfaceError):
    pass

class LeftPatch(SurfaceError):
    def __init__(self, message: str, partial: Any = None):
        self.partial = partial
        super().__init__(message)
