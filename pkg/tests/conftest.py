import math

import numpy as np
import pytest

from src.schemas.helix_schemas import HelixKind, HelixSpec, KappaProfile
from src.services import helix_service, surface_service
from src.services.manifold_service import build_manifold
from src.services.scenario_service import scenario_from_mapping


@pytest.fixture(scope="session")
def e3():
    return build_manifold("euclidean")

@pytest.fixture(scope="session")
def s3():
    return build_manifold("sphere3", radius=1.0)

@pytest.fixture(scope="session")
def h3():
    return build_manifold("hyperbolic3", radius=1.0)

@pytest.fixture(scope="session")
def s2():
    return build_manifold("sphere2", radius=1.0)

@pytest.fixture(scope="session")
def h2():
    return build_manifold("hyperbolic2", radius=1.0)

@pytest.fixture(scope="session")
def s2xr():
    return build_manifold("product", factor="sphere2")

@pytest.fixture(scope="session")
def h2xr():
    return build_manifold("product", factor="hyperbolic2")

@pytest.fixture(scope="session", params=["euclidean", "sphere3", "hyperbolic3", "product"])
def space(request):
    """The four ambient 3-manifolds shared contracts are checked on."""
    return build_manifold(request.param)

@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

# --- Standard curves and patches ---

def generalized_helix(M, theta=math.pi / 4, kappa="sinusoidal:1.5,0.3,1.0", length=2.0):
    spec = HelixSpec(kind=HelixKind.GENERALIZED, theta=theta, kappa=KappaProfile.parse(kappa), s_range=(0.0, length))
    return helix_service.make_helix(M, spec)

def slant_helix(M, theta=math.pi / 4, c0=0.2, length=1.2, sign=1):
    spec = HelixSpec(
        kind=HelixKind.SLANT, theta=theta, kappa=KappaProfile.parse("constant:1.0"),
        c0=c0, sign=sign, s_range=(-length / 2, length / 2), s0=0.0,
    )
    return helix_service.make_helix(M, spec)

@pytest.fixture(scope="session")
def s3_slant(s3):
    return slant_helix(s3)

@pytest.fixture(scope="session")
def s3_rectifying(s3, s3_slant):
    path, fd, _, _ = s3_slant
    patch = surface_service.build_rectifying_surface(s3, path, fd, (-0.3, 0.3), nu=121, nv=31)
    return surface_service.fundamental_forms(s3, patch)

@pytest.fixture(scope="session")
def e3_slant(e3):
    return slant_helix(e3, theta=math.pi / 3, c0=0.1, length=2.0)

@pytest.fixture(scope="session")
def e3_rectifying(e3, e3_slant):
    path, fd, _, _ = e3_slant
    patch = surface_service.build_rectifying_surface(e3, path, fd, (-0.3, 0.3), nu=81, nv=21)
    return surface_service.fundamental_forms(e3, patch)

@pytest.fixture
def scenario():
    """Build a ScenarioConfig from keyword pairs written as dotted keys."""
    def make(**pairs):
        flat = {key.replace("__", "."): str(value) for key, value in pairs.items()}
        return scenario_from_mapping(flat, default_name="test")
    return make
