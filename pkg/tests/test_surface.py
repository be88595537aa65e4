import math
from pathlib import Path

import numpy as np
import pytest

from src.core.exceptions import DegeneratePatch, DegenerateRuling, LeftPatch, MissingForms, SurfaceError
from src.schemas.surface_schemas import SurfaceAxisField
from src.services import surface_service
from src.services.export_service import PATCH_HEADER
from src.services.scenario_service import ScenarioContext, load_scenario
from src.services.transport_service import chart_circle, latitude_circle

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def interior(values, k=2):
    return values[k:-k]

def context(name):
    return ScenarioContext(load_scenario(SCENARIO_DIR / f"{name}.cfg"))

def axis_on(M, patch, helix):
    _, fd, axis, _ = helix
    idx = surface_service.columns_of(patch, fd.s)
    return surface_service.extend_axis(M, patch, axis.V[idx], axis.theta)


def test_ruling_grid_contains_the_directrix():
    v = surface_service.ruling_grid(-0.3, 0.4, 8)
    assert np.any(v == 0.0)
    assert np.allclose(np.diff(v), 0.1)
    assert np.allclose(surface_service.ruling_grid(0.1, 0.5, 5), [0.1, 0.2, 0.3, 0.4, 0.5])
    with pytest.raises(SurfaceError):
        surface_service.ruling_grid(0.5, 0.1, 5)

def test_column_indices_use_a_uniform_stride():
    s = np.linspace(0.0, 2.0, 201)
    idx = surface_service.column_indices(s, nu=41)
    assert np.all(np.diff(idx) == 5)
    assert len(surface_service.column_indices(s, nu=41, u_range=(0.5, 1.0))) == 11

def test_forms_are_required(e3):
    patch = surface_service.build_custom_patch(e3, "plane", (0.0, 1.0), (0.0, 1.0), nu=11, nv=11)
    with pytest.raises(MissingForms):
        surface_service.extrinsic_curvature(patch)
    with pytest.raises(SurfaceError):
        surface_service.build_custom_patch(e3, "torus", (0.0, 1.0), (0.0, 1.0))

def test_custom_patch_curvatures(e3):
    plane = surface_service.fundamental_forms(
        e3, surface_service.build_custom_patch(e3, "plane", (0.0, 1.0), (0.0, 1.0), nu=11, nv=11)
    )
    assert np.allclose(surface_service.extrinsic_curvature(plane), 0.0, atol=1e-12)
    sphere = surface_service.fundamental_forms(
        e3, surface_service.build_custom_patch(e3, "sphere", (0.2, 1.0), (-0.5, 0.5), nu=41, nv=41)
    )
    assert np.max(np.abs(surface_service.extrinsic_curvature(sphere)[4:-4, 4:-4] - 1.0)) < 1e-5
    assert np.max(np.abs(surface_service.intrinsic_curvature(sphere)[4:-4, 4:-4] - 1.0)) < 1e-4
    saddle = surface_service.fundamental_forms(
        e3, surface_service.build_custom_patch(e3, "saddle", (-0.2, 0.2), (-0.2, 0.2), nu=41, nv=41)
    )
    assert surface_service.extrinsic_curvature(saddle)[20, saddle.v0_index] == pytest.approx(-1.0, abs=1e-6)

def test_euclidean_cylinder(e3):
    circle = chart_circle(e3, 1.0)
    patch = surface_service.build_cylinder(e3, circle, [0.0, 0.0, 1.0], (-0.5, 0.5), nu=121, nv=11)
    patch = surface_service.fundamental_forms(e3, patch)
    assert np.max(np.abs(interior(surface_service.extrinsic_curvature(patch)))) < 1e-8
    kappas = interior(surface_service.principal_curvatures(patch), 4)
    assert np.allclose(np.abs(kappas).min(axis=-1), 0.0, atol=1e-8)
    assert np.allclose(np.abs(kappas).max(axis=-1), 1.0, atol=1e-5)
    assert np.max(surface_service.normal_residual(e3, patch)) < 1e-10
    assert np.max(surface_service.ruling_geodesic_residual(e3, patch)) < 1e-8

def test_tangent_axis_gives_no_cylinder(e3):
    circle = chart_circle(e3, 1.0)
    with pytest.raises(DegenerateRuling):
        surface_service.build_cylinder(e3, circle, circle.tangents[0], (-0.5, 0.5), nu=41, nv=5)

@pytest.fixture(scope="module")
def vertical_cylinder(s2xr):
    beta = latitude_circle(s2xr, 1.0, n=1441)
    patch = surface_service.build_cylinder(s2xr, beta, [0.0, 0.0, 1.0], (-0.5, 0.5), nu=161, nv=21)
    return surface_service.fundamental_forms(s2xr, patch)

@pytest.mark.slow
def test_vertical_cylinder_in_the_product_is_flat(s2xr, vertical_cylinder):
    patch = vertical_cylinder
    assert np.max(np.abs(interior(surface_service.extrinsic_curvature(patch)))) < 1e-3
    assert np.max(np.abs(surface_service.intrinsic_curvature(patch)[4:-4, 4:-4])) < 1e-3
    axis = surface_service.constant_axis(s2xr, patch, [0.0, 0.0, 1.0], math.pi / 2)
    assert np.max(interior(surface_service.axis_transport_residual(s2xr, patch, axis))) < 1e-8

@pytest.mark.slow
def test_cylinder_geodesics_are_helices(s2xr, vertical_cylinder):
    patch, phi = vertical_cylinder, 0.5
    start = (patch.u[patch.nu // 2], -0.3)
    curve = surface_service.surface_geodesic(patch, start, [math.cos(phi), math.sin(phi)], 1.0)
    fd = surface_service.geodesic_frenet(s2xr, patch, curve)
    ratio = (fd.tau / fd.kappa)[2:-2]
    assert np.max(np.abs(ratio - np.median(ratio))) < 1e-3
    # the latitude circle has geodesic curvature cot 1 in S²
    assert np.allclose(fd.kappa[2:-2], math.cos(phi) ** 2 / math.tan(1.0), atol=5e-3)
    assert np.allclose(np.abs(ratio), math.tan(phi), atol=5e-3)

# --- Rectifying surfaces ---

def test_euclidean_rectifying_surface_is_developable(e3, e3_rectifying):
    patch = e3_rectifying
    assert np.max(interior(surface_service.directrix_geodesic_residual(e3, patch))) < 1e-5
    assert np.max(np.abs(interior(surface_service.extrinsic_curvature(patch)))) < 1e-4
    assert np.max(surface_service.ruling_geodesic_residual(e3, patch)) < 1e-8

def test_euclidean_rectifying_surface_has_constant_angle(e3, e3_slant, e3_rectifying):
    patch = e3_rectifying
    axis = axis_on(e3, patch, e3_slant)
    defect = surface_service.parallel_angle_defect(e3, patch, axis)
    assert np.max(np.abs(interior(defect.direct))) < 1e-6
    expected = surface_service.surface_axis_from_rectifying(patch, axis.theta)
    assert np.max(np.abs(interior(axis.V - expected))) < 1e-5

@pytest.mark.slow
def test_sphere_rectifying_surface_along_the_directrix(s3, s3_rectifying):
    patch = s3_rectifying
    j0 = patch.v0_index
    assert np.max(interior(surface_service.directrix_geodesic_residual(s3, patch))) < 1e-5
    assert np.max(np.abs(interior(surface_service.extrinsic_curvature(patch)[:, j0]))) < 1e-5
    assert np.max(np.abs(surface_service.gauss_residual(s3, patch)[4:-4, 4:-4])) < 1e-3

@pytest.mark.slow
def test_sphere_defect_matches_closed_form(s3, s3_slant, s3_rectifying):
    patch = s3_rectifying
    axis = axis_on(s3, patch, s3_slant)
    delta = surface_service.parallel_angle_defect(s3, patch, axis).direct
    fd = patch.directrix
    oracle = surface_service.sphere_defect_oracle(
        fd.kappa[:, None], fd.tau[:, None], fd.sigma[:, None], axis.theta, 1.0, patch.v[None, :]
    )
    rel = np.abs(delta - oracle) / np.maximum(np.abs(oracle), 1e-3)
    assert np.max(interior(rel)) < 1e-3
    # zero on the directrix, bounded away from zero off it
    assert np.max(np.abs(interior(delta[:, patch.v0_index]))) < 1e-4
    band = np.abs(patch.v) >= 0.1 - 1e-12
    assert np.min(np.abs(interior(delta[:, band]))) > 1e-2

@pytest.mark.slow
def test_curvature_operator_does_not_vanish_on_the_sphere(s3, s3_slant, s3_rectifying):
    patch = s3_rectifying
    field = surface_service.curvature_operator_on_axis(s3, patch, axis_on(s3, patch, s3_slant))
    band = np.abs(patch.v) >= 0.1 - 1e-12
    assert np.min(np.abs(field.scalar[:, band])) > 1e-2

@pytest.mark.slow
def test_curvature_scalar_is_the_projection_of_the_rectifying_axis(s3, s3_rectifying):
    patch, theta = s3_rectifying, math.pi / 4
    V = surface_service.surface_axis_from_rectifying(patch, theta)
    axis = SurfaceAxisField(V=V, theta=theta, construction="rectifying frame", ruling_residual=np.zeros(V.shape[:2]))
    field = surface_service.curvature_operator_on_axis(s3, patch, axis)
    assert np.allclose(field.scalar, field.projection, atol=1e-10)
    # unit sphere: ⟨R(∂u, ∂v)∂v, ∂u⟩ = −(g11 g22 − g12²) and ⟨R(∂u, ∂v)ν, ∂u⟩ = 0
    gram = patch.g11 * patch.g22 - patch.g12 ** 2
    assert np.allclose(field.scalar, -math.sin(theta) * gram, atol=1e-8)

@pytest.mark.slow
def test_space_forms_pass_the_ruledness_criterion(s3, s3_rectifying):
    comp, swapped = surface_service.ruledness_criterion(s3, s3_rectifying)
    assert np.max(np.abs(comp)) < 1e-8
    assert np.max(np.abs(swapped)) < 1e-8

def test_rectifying_axis_is_a_flat_principal_direction(e3, e3_slant, e3_rectifying):
    patch = e3_rectifying
    axis = axis_on(e3, patch, e3_slant)
    assert np.max(interior(surface_service.principal_direction_residual(e3, patch, axis))) < 1e-4
    field = surface_service.curvature_operator_on_axis(e3, patch, axis)
    assert np.max(field.norm) < 1e-12

@pytest.mark.slow
def test_vertical_axis_kills_the_curvature_operator():
    ctx = context("rectifying_vertical_s2xr")
    field = surface_service.curvature_operator_on_axis(ctx.patch_manifold, ctx.patch, ctx.surface_axis)
    assert np.max(field.norm) < 1e-6

@pytest.mark.slow
def test_hyperbolic_defect_is_nonzero_off_the_directrix():
    ctx = context("no_go_h3")
    patch = ctx.patch
    delta = surface_service.parallel_angle_defect(ctx.patch_manifold, patch, ctx.surface_axis).direct
    assert np.max(np.abs(interior(delta[:, patch.v0_index]))) < 1e-4
    band = np.abs(patch.v) >= 0.1 - 1e-12
    assert np.min(np.abs(interior(delta[:, band], 4))) > 1e-3

def test_sphere_oracle_domain():
    assert surface_service.sphere_defect_oracle(1.0, 0.5, 0.2, 0.7, 1.0, 0.0) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        surface_service.sphere_defect_oracle(1.0, 0.5, 0.2, 0.7, 1.0, 1.6)
    with pytest.raises(ValueError):
        surface_service.sphere_defect_oracle(1.0, 0.5, 0.2, 0.7, -1.0, 0.1)

# --- Constant-angle surfaces in M²×ℝ ---

@pytest.fixture(scope="module")
def product_patch(s2):
    equator = latitude_circle(s2, math.pi / 2, n=1441)
    patch = surface_service.build_product_constant_angle_surface(s2, equator, math.pi / 3, (-0.5, 0.5), nu=129, nv=21)
    return surface_service.fundamental_forms(patch.manifold, patch)

@pytest.mark.slow
def test_product_surface_makes_a_constant_angle(product_patch):
    patch, M = product_patch, product_patch.manifold
    vertical = np.broadcast_to([0.0, 0.0, 1.0], patch.points.shape)
    assert np.allclose(surface_service.normal_component(M, patch, vertical), math.cos(math.pi / 3), atol=1e-5)

@pytest.mark.slow
def test_product_surface_curvatures(product_patch):
    patch = product_patch
    core = (slice(4, -4), slice(4, -4))
    assert np.max(np.abs(interior(surface_service.extrinsic_curvature(patch)))) < 1e-3
    K_int = surface_service.intrinsic_curvature(patch)[core]
    assert np.max(np.abs(K_int - math.cos(math.pi / 3) ** 2)) < 1e-3

@pytest.mark.slow
def test_product_surface_riccati(product_patch):
    riccati, cross_check = surface_service.riccati_residual(product_patch.manifold, product_patch)
    core = (slice(4, -4), slice(4, -4))
    assert np.max(np.abs(riccati[core])) < 1e-3
    assert np.max(np.abs(cross_check[core])) < 1e-3

@pytest.mark.slow
def test_product_surface_frame_connection():
    ctx = context("product_s2")
    table = surface_service.connection_table(ctx.patch_manifold, ctx.patch)
    core = (slice(2, -2), slice(2, -2))
    assert np.max(np.abs(table.e2_e1_e2 - table.lam_cot)[core]) < 1e-3
    assert np.max(np.abs(table.e1_e1_e2)[core]) < 1e-3

@pytest.mark.slow
def test_product_surface_over_the_hyperbolic_plane():
    ctx = context("product_h2")
    patch, M = ctx.patch, ctx.patch_manifold
    theta = math.pi / 4
    vertical = np.broadcast_to([0.0, 0.0, 1.0], patch.points.shape)
    assert np.allclose(surface_service.normal_component(M, patch, vertical), math.cos(theta), atol=1e-5)
    K_int = surface_service.intrinsic_curvature(patch)[2:-2, 2:-2]
    assert np.max(np.abs(K_int + math.cos(theta) ** 2)) < 1e-3

def test_product_surface_needs_an_acute_angle(s2):
    equator = latitude_circle(s2, math.pi / 2, n=181)
    with pytest.raises(DegeneratePatch):
        surface_service.build_product_constant_angle_surface(s2, equator, math.pi / 2, (-0.1, 0.1))

def test_riccati_needs_a_product_patch(e3, e3_rectifying):
    with pytest.raises(SurfaceError):
        surface_service.riccati_residual(e3, e3_rectifying)

# --- Patch geodesics and export ---

@pytest.fixture(scope="module")
def plane(e3):
    patch = surface_service.build_custom_patch(e3, "plane", (0.0, 1.0), (-0.5, 0.5), nu=21, nv=21)
    return surface_service.fundamental_forms(e3, patch)

def test_plane_geodesics_are_straight(plane):
    curve = surface_service.surface_geodesic(plane, (0.2, 0.0), [1.0, 1.0], 0.5)
    assert np.allclose(curve.uv[-1], np.array([0.2, 0.0]) + 0.5 * np.array([1.0, 1.0]) / math.sqrt(2), atol=1e-6)

def test_geodesic_leaving_the_patch(plane):
    with pytest.raises(LeftPatch) as exc:
        surface_service.surface_geodesic(plane, (0.5, 0.0), [1.0, 0.0], 5.0)
    assert exc.value.partial.left_patch
    assert exc.value.partial.uv[-1][0] == pytest.approx(1.0, abs=1e-6)

def test_obj_export(e3, plane, tmp_path):
    lines = surface_service.export_obj(e3, plane, tmp_path / "plane.obj").read_text().splitlines()
    assert {line.split()[0] for line in lines} == {"v", "f"}
    assert sum(line.startswith("v ") for line in lines) == 21 * 21
    assert sum(line.startswith("f ") for line in lines) == 2 * 20 * 20

def test_patch_csv(e3, plane, tmp_path):
    lines = surface_service.serialize_patch(e3, plane, tmp_path / "plane.csv").read_text().splitlines()
    assert lines[0].split(",") == PATCH_HEADER
    assert len(lines) == 21 * 21 + 1
    assert lines[1].split(",")[-1] == "nan"
