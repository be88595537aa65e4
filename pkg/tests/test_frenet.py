import math

import numpy as np
import pytest

from src.core.exceptions import KappaVanishes, NonUnitSpeed, TauVanishes
from src.schemas.helix_schemas import KappaProfile
from src.services.frenet_service import (
    darboux_field,
    fourth_order_derivative,
    frame_gram_drift,
    frenet_apparatus,
    indicatrix,
    resample_uniform,
    serialize_frenet,
    sigma,
)
from src.services.helix_service import coordinate_frame, synthesize_curve
from src.services.manifold_service import default_point
from src.services.transport_service import chart_circle, integrate_geodesic, path_from_samples

from .conftest import generalized_helix

LINEAR = KappaProfile(name="polynomial", coefficients=[0.0, 1.0])


def curve_with_linear_torsion(M, length=2.0):
    """κ = 1, τ = s."""
    frame0 = coordinate_frame(M, default_point(M))
    return synthesize_curve(
        M, frame0, KappaProfile(), LINEAR.value, (0.0, length), tau_prime=LINEAR.derivative,
    )


def test_fourth_order_derivative_is_exact_on_quartics():
    s = np.linspace(0.0, 1.0, 21)
    d = fourth_order_derivative(s ** 4 - 2 * s ** 3, s[1] - s[0])
    assert np.allclose(d, 4 * s ** 3 - 6 * s ** 2, atol=1e-10)

def test_euclidean_circle(e3):
    fd = frenet_apparatus(e3, chart_circle(e3, 2.0))
    assert np.allclose(fd.kappa, 0.5, atol=1e-10)
    assert np.max(np.abs(fd.tau[4:-4])) < 1e-8

def test_frenet_recovers_synthesized_curvatures(h3):
    path, synthesized = curve_with_linear_torsion(h3)
    fd = frenet_apparatus(h3, path)
    assert np.max(np.abs(fd.kappa - 1.0)) < 1e-6
    assert np.max(np.abs(fd.tau - synthesized.tau)[4:-4]) < 1e-5

def test_resampling_keeps_the_curve(s3):
    path, _ = curve_with_linear_torsion(s3)
    coarse = resample_uniform(path, spacing=0.02)
    assert coarse.s[-1] == pytest.approx(path.s[-1])
    assert np.allclose(coarse.points[-1], path.points[-1], atol=1e-10)

def test_non_unit_speed_path_is_rejected(e3):
    s = np.linspace(0.0, 1.0, 51)
    pts = np.column_stack([2 * s, s ** 2, 0 * s])
    tng = np.column_stack([2 + 0 * s, 2 * s, 0 * s])
    path = path_from_samples(e3, s, pts, tng, check_unit_speed=False)
    with pytest.raises(NonUnitSpeed):
        frenet_apparatus(e3, path)

def test_frame_stays_orthonormal(s3):
    _, fd = curve_with_linear_torsion(s3)
    assert frame_gram_drift(fd) < 1e-7

def test_sigma_closed_form(e3):
    _, fd = curve_with_linear_torsion(e3)
    expected = 1.0 / (1.0 + fd.s ** 2) ** 1.5
    assert np.allclose(sigma(fd), expected, atol=1e-10)
    # differencing τ/κ gives the same values
    differenced = fd.model_copy(update={"kappa_prime": None, "tau_prime": None})
    assert np.max(np.abs(sigma(differenced) - expected)) < 1e-6

def test_darboux_identities(s3):
    _, fd = curve_with_linear_torsion(s3)
    field = darboux_field(fd)
    assert np.max(np.abs(field.kappa_omega_residual[4:-4])) < 1e-6
    assert np.max(np.abs(field.tau_omega_residual[4:-4])) < 1e-6

@pytest.mark.parametrize("space_name", ["e3", "s3"])
@pytest.mark.parametrize("which", ["tangent", "normal"])
def test_indicatrix_geodesic_curvature(space_name, which, request):
    M = request.getfixturevalue(space_name)
    path, fd = curve_with_linear_torsion(M)
    curve = indicatrix(M, path, fd, which)
    expected = fd.tau / fd.kappa if which == "tangent" else fd.sigma
    inner = slice(4, -4)
    # signed values: a flipped orientation misses by 2|expected|
    assert np.max(np.abs(curve.geodesic_curvature - expected)[inner]) < 1e-4
    assert np.allclose(np.linalg.norm(curve.vectors, axis=1), 1.0, atol=1e-8)

def test_binormal_indicatrix_turns_left(s3):
    path, fd, _, _ = generalized_helix(s3, theta=math.pi / 3)
    tangent = indicatrix(s3, path, fd, "tangent").geodesic_curvature[4:-4]
    binormal = indicatrix(s3, path, fd, "binormal").geodesic_curvature[4:-4]
    assert np.allclose(tangent, 1.0 / math.tan(math.pi / 3), atol=1e-4)
    assert np.allclose(binormal, math.tan(math.pi / 3), atol=1e-4)
    # negative torsion: the tangent indicatrix flips, the binormal one does not
    frame = coordinate_frame(s3, default_point(s3))
    path, fd = synthesize_curve(s3, frame, KappaProfile(), lambda s: -0.5 + 0.0 * s, (0.0, 2.0))
    tangent = indicatrix(s3, path, fd, "tangent").geodesic_curvature[4:-4]
    binormal = indicatrix(s3, path, fd, "binormal").geodesic_curvature[4:-4]
    assert np.allclose(tangent, -0.5, atol=1e-4)
    assert np.allclose(binormal, 2.0, atol=1e-4)

def test_binormal_indicatrix_needs_torsion(s3):
    path, fd = curve_with_linear_torsion(s3)
    # τ = s vanishes at the start
    with pytest.raises(TauVanishes):
        indicatrix(s3, path, fd, "binormal")

def test_geodesic_has_no_frenet_frame(s3):
    path = integrate_geodesic(s3, [0.0, 0.0, 0.0], [0.5, 0.0, 0.0], 1.0)
    with pytest.raises(KappaVanishes) as exc:
        frenet_apparatus(s3, path)
    assert exc.value.interval[0] == pytest.approx(0.0)

def test_serialized_frenet_columns(e3, tmp_path):
    _, fd = curve_with_linear_torsion(e3, length=0.5)
    lines = serialize_frenet(fd, tmp_path / "frenet.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:4] == ["s", "kappa", "tau", "sigma"]
    assert header[4:7] == ["T1", "T2", "T3"]
    assert len(header) == 16
    assert len(lines) == fd.n + 1
