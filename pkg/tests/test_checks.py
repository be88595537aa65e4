import math

import numpy as np
import pytest

from src.core.config import settings
from src.core.exceptions import ConfigError, KappaVanishes
from src.services import check_service
from src.services.check_service import CHECKS, Check, list_checks, register, run_check, run_checks
from src.services.scenario_service import ScenarioContext, scenario_from_mapping

QUARTER = str(math.pi / 4)


@pytest.fixture
def kernel_h3(scenario):
    return ScenarioContext(scenario(manifold__kind="hyperbolic3"))

@pytest.fixture
def slant_s3(scenario):
    return ScenarioContext(scenario(
        manifold__kind="sphere3", object__kind="helix", helix__kind="slant",
        helix__theta=QUARTER, helix__c0=0.2, helix__length=1.2,
    ))


def test_registry_covers_the_constant_angle_results():
    for name in ("lancret", "slant-sigma", "cylinder-flatness", "rectifying-geodesic", "defect", "riccati", "gauss-equation"):
        assert name in CHECKS

def test_every_check_has_a_default_tolerance():
    assert set(CHECKS) <= set(settings.CHECK_TOLERANCES)
    infos = list_checks()
    assert [c.name for c in infos] == list(CHECKS)
    assert all(c.tolerance == settings.CHECK_TOLERANCES[c.name] for c in infos)
    assert {c.name for c in infos if c.lower_bound} == {"defect-nonzero-off-directrix", "curvature-operator-nonzero"}

def test_checks_need_a_default_tolerance():
    with pytest.raises(KeyError):
        register("no-such-check", "nothing")(lambda ctx: np.zeros(1))
    assert "no-such-check" not in CHECKS

def test_unknown_check_is_a_config_error(kernel_h3):
    with pytest.raises(ConfigError):
        run_check(kernel_h3, "no-such-check")

@pytest.mark.parametrize("name", ["kernel-christoffel", "kernel-metric-compatibility", "kernel-sectional", "kernel-bianchi"])
def test_kernel_checks_pass_on_hyperbolic_space(kernel_h3, name):
    report = run_check(kernel_h3, name)
    assert report.passed, report
    assert report.error is None
    assert report.observed == report.sup

def test_holonomy_and_geodesic_checks(kernel_h3):
    for report in run_checks(kernel_h3, ["geodesic-speed", "holonomy-cap"]):
        assert report.passed, report

def test_wrong_object_kind_fails_with_a_message(kernel_h3):
    report = run_check(kernel_h3, "cylinder-flatness")
    assert not report.passed
    assert report.message.startswith("skipped")
    assert math.isnan(report.sup)

def test_helix_checks_pass_on_a_slant_helix(slant_s3):
    for report in run_checks(slant_s3, ["lancret", "slant-sigma", "angle-constancy", "axis-transport"]):
        assert report.passed, report

def test_generalized_only_check_is_skipped_on_a_slant_helix(slant_s3):
    report = run_check(slant_s3, "helix-on-cylinder")
    assert not report.passed
    assert "generalized" in report.message

@pytest.mark.parametrize("tau", ["constant:0.5", "constant:-0.5"])
def test_indicatrix_check_compares_signed_curvatures(scenario, tau):
    ctx = ScenarioContext(scenario(
        manifold__kind="sphere3", object__kind="curve", curve__kappa="constant:1.0", curve__tau=tau, curve__length=2,
    ))
    report = run_check(ctx, "indicatrix")
    assert report.passed, report

def test_perturbed_control_curve_fails(scenario):
    ctx = ScenarioContext(scenario(
        manifold__kind="sphere3", helix__theta=QUARTER, helix__kappa="constant:1.5",
        helix__length=3, helix__perturb=0.3,
    ))
    assert not run_check(ctx, "angle-constancy").passed

def test_tolerance_override_is_reported():
    config = scenario_from_mapping({"manifold.kind": "sphere3", "tol.kernel-sectional": "1e-30"})
    report = run_check(ScenarioContext(config), "kernel-sectional")
    assert report.tolerance == 1e-30

def _replace(monkeypatch, name, fn, lower_bound=False):
    original = CHECKS[name]
    monkeypatch.setitem(CHECKS, name, Check(
        name=name, anchor=original.anchor, description=original.description,
        objects=check_service.ALL_OBJECTS, lower_bound=lower_bound, fn=fn,
    ))

def test_lower_bound_reports_the_shortfall(monkeypatch, kernel_h3):
    name = "curvature-operator-nonzero"
    threshold = settings.CHECK_TOLERANCES[name]
    _replace(monkeypatch, name, lambda ctx: np.array([0.5, 2 * threshold]), lower_bound=True)
    report = run_check(kernel_h3, name)
    assert report.passed
    assert report.tolerance == 0.0
    assert report.observed == 0.0
    assert report.message.startswith("lower bound")

    _replace(monkeypatch, name, lambda ctx: np.array([0.5, 0.25 * threshold]), lower_bound=True)
    report = run_check(kernel_h3, name)
    assert not report.passed
    assert report.observed == pytest.approx(0.75 * threshold)

def test_numerical_failure_is_recorded(monkeypatch, kernel_h3):
    def vanishing(ctx):
        raise KappaVanishes("curvature vanishes", (0.0, 1.0))
    _replace(monkeypatch, "lancret", vanishing)
    report = run_check(kernel_h3, "lancret")
    assert not report.passed
    assert report.error.startswith("KappaVanishes")

def test_concurrent_checks_keep_their_order(monkeypatch, kernel_h3):
    monkeypatch.setattr(settings, "THREADS", 3)
    names = ["kernel-bianchi", "kernel-christoffel", "kernel-metric-compatibility", "kernel-sectional"]
    assert [r.name for r in run_checks(kernel_h3, names)] == names
