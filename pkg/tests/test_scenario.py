import json
import math
from pathlib import Path

import pytest

from src.core.config import settings
from src.core.exceptions import ConfigError
from src.schemas.helix_schemas import HelixKind
from src.schemas.scenario_schemas import ObjectKind
from src.services.scenario_service import (
    ScenarioContext,
    load_scenario,
    nest_keys,
    run_scenario,
    scenario_dir,
    scenario_from_mapping,
)

SCENARIOS = sorted((Path(__file__).resolve().parent.parent / "scenarios").glob("*.cfg"))


def test_dotted_keys_are_nested():
    nested = nest_keys({"manifold.kind": "sphere3", "tol.kernel-sectional": "1e-3", "checks": " lancret "})
    assert nested == {"manifold": {"kind": "sphere3"}, "tol": {"kernel-sectional": "1e-3"}, "checks": "lancret"}

def test_key_without_value_is_rejected():
    with pytest.raises(ConfigError) as exc:
        nest_keys({"manifold.kind": None})
    assert exc.value.key == "manifold.kind"
    assert exc.value.exit_code == 2

def test_key_cannot_be_value_and_section():
    with pytest.raises(ConfigError):
        nest_keys({"grid": "1", "grid.nu": "41"})

@pytest.mark.parametrize("pairs,key", [
    ({"manifold.colour": "blue"}, "manifold.colour"),
    ({"checks": "lancret,no-such-check"}, "checks"),
    ({"tol.no-such-check": "1e-3"}, "tol"),
    ({"grid.nu": "3"}, "grid.nu"),
    ({"helix.theta": "4.0"}, "helix.theta"),
])
def test_invalid_scenarios_name_the_key(pairs, key):
    with pytest.raises(ConfigError) as exc:
        scenario_from_mapping(pairs)
    assert exc.value.key == key

def test_defaults_and_ranges(scenario):
    config = scenario(helix__kind="slant", helix__length=2)
    assert config.name == "test"
    assert config.object.kind == ObjectKind.HELIX
    assert config.helix.kind == HelixKind.SLANT
    assert config.helix.s_range == (-1.0, 1.0)
    assert config.tolerance("lancret") == settings.CHECK_TOLERANCES["lancret"]
    assert config.output.formats == ["report"]

def test_load_scenario_with_overrides(tmp_path):
    path = tmp_path / "curve_e3.cfg"
    path.write_text("# comment\nmanifold.kind=euclidean\nobject.kind=curve\ncurve.kappa=sinusoidal:1,0.2,1\nchecks=indicatrix\n")
    config = load_scenario(path, {"curve.length": "2.5", "tol.indicatrix": "1e-3"})
    assert config.name == "curve_e3"
    assert config.curve.length == 2.5
    assert config.curve.kappa.coefficients == [1.0, 0.2, 1.0]
    assert config.tolerance("indicatrix") == 1e-3

def test_missing_and_empty_files(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "absent.cfg")
    empty = tmp_path / "empty.cfg"
    empty.write_text("# nothing here\n")
    with pytest.raises(ConfigError):
        load_scenario(empty)

@pytest.mark.parametrize("path", SCENARIOS, ids=[p.stem for p in SCENARIOS])
def test_shipped_scenarios_parse(path):
    config = load_scenario(path)
    assert config.name == path.stem
    assert config.checks

def test_bad_manifold_is_a_config_error(scenario):
    with pytest.raises(ConfigError) as exc:
        ScenarioContext(scenario(manifold__kind="torus"))
    assert exc.value.key == "manifold"

def test_helix_needs_a_three_manifold(scenario):
    ctx = ScenarioContext(scenario(manifold__kind="sphere2"))
    with pytest.raises(ConfigError):
        ctx.build()

def test_rng_streams_are_reproducible(scenario):
    ctx = ScenarioContext(scenario(seed=7))
    assert ctx.rng("a").normal() == ctx.rng("a").normal()
    assert ctx.rng("a").normal() != ctx.rng("b").normal()

def test_output_directory_precedence(scenario, tmp_path):
    assert scenario_dir(scenario(), tmp_path) == tmp_path
    assert scenario_dir(scenario(output__dir=str(tmp_path / "x"))) == tmp_path / "x"
    assert scenario_dir(scenario()) == Path(settings.OUTPUT_DIR) / "test"

def test_passing_scenario_writes_its_report(scenario, tmp_path):
    config = scenario(manifold__kind="sphere3", helix__length=1, checks="kernel-christoffel,kernel-bianchi")
    report = run_scenario(config, tmp_path)
    assert report.status == "passed"
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["status"] == "passed"
    assert [c["name"] for c in saved["checks"]] == ["kernel-christoffel", "kernel-bianchi"]

def test_inapplicable_check_fails_the_scenario(scenario, tmp_path):
    config = scenario(helix__length=1, checks="lancret,slant-sigma")
    report = run_scenario(config, tmp_path)
    assert report.status == "failed"
    assert [c.passed for c in report.checks] == [True, False]

def test_numerical_failure_is_an_error_with_a_report(scenario, tmp_path):
    config = scenario(
        manifold__kind="hyperbolic3", helix__theta=str(math.pi / 4), helix__length=40, checks="lancret",
    )
    report = run_scenario(config, tmp_path)
    assert report.status == "error"
    assert report.error.startswith("LeftChart")
    assert (tmp_path / "report.json").exists()

def test_curve_tables_are_written(scenario, tmp_path):
    config = scenario(helix__length=1, checks="lancret", output__formats="report,csv,obj")
    report = run_scenario(config, tmp_path)
    assert report.status == "passed"
    for name in ("path.csv", "frenet.csv", "report.json"):
        assert (tmp_path / name).exists()
    assert not (tmp_path / "patch.obj").exists()

# --- Shipped scenarios, run end to end ---

EXPECTED_STATUS = {p.stem: "passed" for p in SCENARIOS}
EXPECTED_STATUS.update(control_perturbed_s3="failed", cylinder_tilted_s3="failed")

def test_every_shipped_scenario_has_an_expected_status():
    assert {"control_perturbed_s3", "cylinder_tilted_s3", "no_go_h3"} <= set(EXPECTED_STATUS)
    assert len(EXPECTED_STATUS) == len(SCENARIOS)

@pytest.mark.slow
@pytest.mark.parametrize("path", SCENARIOS, ids=[p.stem for p in SCENARIOS])
def test_shipped_scenario_runs(path, tmp_path):
    report = run_scenario(load_scenario(path), tmp_path)
    failing = [(c.name, c.observed, c.tolerance, c.error) for c in report.checks if not c.passed]
    assert report.status == EXPECTED_STATUS[path.stem], failing
    assert report.error is None

@pytest.mark.slow
def test_tilted_cylinder_axis_is_not_parallel(tmp_path):
    path = SCENARIOS[[p.stem for p in SCENARIOS].index("cylinder_tilted_s3")]
    report = run_scenario(load_scenario(path), tmp_path)
    (check,) = report.checks
    assert check.name == "cylinder-transport"
    assert not check.passed
    assert check.sup > 1e-2

@pytest.mark.slow
def test_defect_vanishes_in_the_flat_limit(tmp_path):
    path = SCENARIOS[[p.stem for p in SCENARIOS].index("limit_radius")]
    sups = []
    for radius in ("1", "10", "100"):
        report = run_scenario(load_scenario(path, {"manifold.radius": radius}), tmp_path / radius)
        (check,) = report.checks
        assert check.error is None
        sups.append(check.sup)
    # the defect scales like 1/r² at fixed helix data
    assert sups[0] > 8 * sups[1] > 64 * sups[2]
    assert sups[2] > 0.0
