"""
Parallel Angle Lab command line.

    python -m src.main run --config scenarios/lancret_s3.cfg
    python -m src.main sweep --config scenarios/limit_radius.cfg --param manifold.radius --values 1,10,100
    python -m src.main list-checks
    python -m src.main export --config scenarios/product_s2.cfg --out out/mesh

Exit codes: 0 all checks passed, 1 some check failed, 2 configuration error,
3 numerical failure (the partial report is still written).
"""
import argparse
import logging
import sys
from typing import List, Optional

from .cli.commands import COMMANDS, set_threads
from .core.config import settings
from .core.exceptions import ConfigError, GeometryLabError
from .core.log_config import configure_logging

logger = logging.getLogger(__name__)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="parallel-angle-lab", description=settings.APP_NAME)
    parser.add_argument("command", choices=list(COMMANDS), help="Sub-command to run")
    parser.add_argument("--config", default=None, help="Scenario file (flat dotted key=value)")
    parser.add_argument("--out", default=None, help="Output directory (default: output.dir or OUTPUT_DIR/<name>)")
    parser.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="Override a check tolerance; repeatable",
    )
    parser.add_argument("--threads", type=int, default=None, help="Concurrent checks per scenario")
    parser.add_argument("--log-level", default=None, help="Logging level (default: LOG_LEVEL)")
    parser.add_argument("--param", default=None, help="sweep: dotted scenario key to vary")
    parser.add_argument("--values", default=None, help="sweep: comma-separated numeric values")
    return parser.parse_args(argv)


def run(args: argparse.Namespace) -> int:
    set_threads(args.threads)
    return COMMANDS[args.command](args)


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    configure_logging(args.log_level)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"[CONFIG] {exc}", file=sys.stderr)
        return exc.exit_code
    except GeometryLabError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        print(f"[ERROR] {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
