"""
Sub-command handlers: run, sweep, list-checks and export.

Each handler takes the parsed arguments and returns a process exit code;
ConfigError is left to the entry point.
"""
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO

from ..core.config import settings
from ..core.exceptions import ConfigError
from ..schemas.scenario_schemas import ScenarioConfig, ScenarioReport
from ..services import scenario_service
from ..services.check_service import list_checks
from ..services.export_service import write_table

logger = logging.getLogger(__name__)

EXIT_CODES = {"passed": 0, "failed": 1, "error": 3}

# --- Helpers ---

def parse_tolerances(items: Optional[Sequence[str]]) -> Dict[str, str]:
    """`--tol name=value` flags as `tol.<name>` scenario overrides."""
    overrides: Dict[str, str] = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or not name.strip() or not value.strip():
            raise ConfigError(f"expected name=value, got '{item}'", key="--tol")
        overrides[f"tol.{name.strip()}"] = value.strip()
    return overrides

def parse_values(raw: Optional[str]) -> List[float]:
    """Comma-separated numeric sweep values."""
    items = [item.strip() for item in (raw or "").split(",") if item.strip()]
    if not items:
        raise ConfigError("sweep needs at least one value", key="--values")
    values = []
    for item in items:
        try:
            values.append(float(item))
        except ValueError:
            raise ConfigError(f"'{item}' is not a number", key="--values") from None
    return values

def load(args, extra: Optional[Dict[str, str]] = None) -> ScenarioConfig:
    if not args.config:
        raise ConfigError("a scenario file is required", key="--config")
    overrides = parse_tolerances(getattr(args, "tol", None))
    overrides.update(extra or {})
    return scenario_service.load_scenario(args.config, overrides)

def print_report(report: ScenarioReport, stream: TextIO = sys.stdout) -> None:
    print(f"{report.name}: {report.status} ({report.wall_time:.2f}s)", file=stream)
    for check in report.checks:
        flag = "PASS" if check.passed else "FAIL"
        line = f"  {flag} {check.name:<30} observed {check.observed:.3e}  tol {check.tolerance:.1e}"
        if check.message:
            line += f"  [{check.message}]"
        if check.error:
            line += f"  error: {check.error}"
        print(line, file=stream)
    if report.error:
        print(f"  error: {report.error}", file=stream)

# --- Commands ---

def run_command(args) -> int:
    config = load(args)
    report = scenario_service.run_scenario(config, args.out)
    print_report(report)
    return EXIT_CODES[report.status]

def sweep_command(args) -> int:
    """Run the scenario once per value of a numeric key; one summary row per value."""
    if not args.param:
        raise ConfigError("sweep needs the key to vary", key="--param")
    values = parse_values(args.values)
    base = load(args)
    root = scenario_service.scenario_dir(base, args.out)
    rows = []
    worst = 0
    for value in values:
        text = str(int(value)) if value.is_integer() else repr(value)
        config = load(args, {args.param: text, "name": f"{base.name}_{args.param}={value:g}"})
        report = scenario_service.run_scenario(config, root / f"{args.param}={value:g}")
        print_report(report)
        worst = max(worst, EXIT_CODES[report.status])
        by_name = {c.name: c for c in report.checks}
        row = [value, report.status]
        for name in base.checks:
            check = by_name.get(name)
            row += [check.sup, check.mean] if check else [math.nan, math.nan]
        rows.append(row)
    header = [args.param, "status"]
    for name in base.checks:
        header += [f"{name}.sup", f"{name}.mean"]
    path = write_table(Path(root) / "sweep.csv", header, rows)
    logger.info(f"sweep over {args.param}: {len(values)} runs, table {path}")
    return worst

def list_checks_command(args) -> int:
    checks = list_checks()
    width = max(len(c.name) for c in checks)
    for c in checks:
        kind = "min" if c.lower_bound else "max"
        print(f"{c.name:<{width}}  {kind} {c.tolerance:.0e}  {', '.join(c.objects)}")
        print(f"{'':<{width}}  {c.anchor}")
    return 0

def export_command(args) -> int:
    """Build the scenario object and write its CSV tables and OBJ mesh without running checks."""
    config = load(args)
    formats = sorted(set(config.output.formats) | {"csv", "obj"})
    config = config.model_copy(update={
        "checks": [],
        "output": config.output.model_copy(update={"formats": formats}),
    })
    report = scenario_service.run_scenario(config, args.out)
    for artifact in report.artifacts:
        print(artifact)
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    return EXIT_CODES[report.status]

COMMANDS = {
    "run": run_command,
    "sweep": sweep_command,
    "list-checks": list_checks_command,
    "export": export_command,
}

def set_threads(threads: Optional[int]) -> None:
    if threads is None:
        return
    if threads < 1:
        raise ConfigError("thread count must be at least 1", key="--threads")
    settings.THREADS = threads
