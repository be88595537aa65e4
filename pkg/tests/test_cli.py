import csv

import pytest

from src.cli.commands import parse_tolerances, parse_values
from src.core.config import settings
from src.core.exceptions import ConfigError
from src.main import main

KERNEL = "manifold.kind=hyperbolic3\nhelix.length=1\nchecks=kernel-christoffel,kernel-bianchi\n"


@pytest.fixture(autouse=True)
def keep_threads(monkeypatch):
    monkeypatch.setattr(settings, "THREADS", settings.THREADS)

@pytest.fixture
def kernel_cfg(tmp_path):
    path = tmp_path / "kernel.cfg"
    path.write_text(KERNEL)
    return path


def test_tolerance_flags():
    assert parse_tolerances(["lancret=1e-3", " defect = 2e-4 "]) == {"tol.lancret": "1e-3", "tol.defect": "2e-4"}
    with pytest.raises(ConfigError):
        parse_tolerances(["lancret"])
    with pytest.raises(ConfigError):
        parse_tolerances(["=1e-3"])

def test_sweep_values():
    assert parse_values("1, 2.5,10") == [1.0, 2.5, 10.0]
    for raw in ("", " , ", "1,abc"):
        with pytest.raises(ConfigError):
            parse_values(raw)

def test_list_checks(capsys):
    assert main(["list-checks"]) == 0
    out = capsys.readouterr().out
    assert "lancret" in out
    assert "defect-nonzero-off-directrix" in out

def test_run_writes_a_report(kernel_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(kernel_cfg), "--out", str(out), "--threads", "2"]) == 0
    assert (out / "report.json").exists()
    assert "PASS kernel-christoffel" in capsys.readouterr().out

def test_failed_check_exits_with_one(kernel_cfg, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(kernel_cfg), "--out", str(out), "--tol", "kernel-bianchi=-1"]) == 1

@pytest.mark.parametrize("argv", [
    ["run"],
    ["run", "--config", "does/not/exist.cfg"],
    ["sweep", "--config", "{cfg}", "--values", "1,2"],
    ["sweep", "--config", "{cfg}", "--param", "manifold.radius", "--values", ""],
    ["sweep", "--config", "{cfg}", "--param", "manifold.radius", "--values", "1,x"],
    ["run", "--config", "{cfg}", "--tol", "kernel-bianchi"],
    ["run", "--config", "{cfg}", "--tol", "no-such-check=1e-3"],
    ["run", "--config", "{cfg}", "--threads", "0"],
])
def test_configuration_errors_exit_with_two(argv, kernel_cfg, capsys):
    argv = [a.replace("{cfg}", str(kernel_cfg)) for a in argv]
    assert main(argv) == 2
    assert "[CONFIG]" in capsys.readouterr().err

def test_malformed_scenario_exits_with_two(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("manifold.kind=sphere3\ngrid.nu=three\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == 2

def test_sweep_writes_one_row_per_value(kernel_cfg, tmp_path):
    out = tmp_path / "sweep"
    argv = ["sweep", "--config", str(kernel_cfg), "--out", str(out), "--param", "manifold.radius", "--values", "1,2.5"]
    assert main(argv) == 0
    with (out / "sweep.csv").open() as f:
        rows = list(csv.reader(f))
    assert rows[0][:4] == ["manifold.radius", "status", "kernel-christoffel.sup", "kernel-christoffel.mean"]
    assert [row[1] for row in rows[1:]] == ["passed", "passed"]
    assert (out / "manifold.radius=2.5" / "report.json").exists()

def test_export_writes_curve_tables(tmp_path, capsys):
    path = tmp_path / "helix.cfg"
    path.write_text("manifold.kind=sphere3\nhelix.length=1\nchecks=lancret\n")
    out = tmp_path / "export"
    assert main(["export", "--config", str(path), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "frenet.csv" in printed
    assert (out / "path.csv").exists()
