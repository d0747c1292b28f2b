"""
Command-line front end.

    python -m stmeta <subcommand> --config run.yaml [--set run.tol=1e-9]...
                     [--out DIR] [--format csv|json|svg]... [--log-level LEVEL]

Exit codes: 0 success, 1 configuration error, 2 infeasible scenario,
3 numeric failure. Failures print a JSON error object on stderr.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional, Sequence

from stmeta import __version__
from stmeta.core.config import get_settings, setup_logging
from stmeta.core.errors import ConfigError, StMetaError
from stmeta.core.run_config import load_run_config
from stmeta.services.export import write_effective_config, write_result
from stmeta.services.scenarios import SUBCOMMANDS, ScenarioService

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's exit 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="stmeta",
        description="Schmitt-Trigger metastability simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="YAML or JSON run configuration")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Dotted-key override, e.g. run.tol=1e-9 (repeatable)",
    )
    parser.add_argument("--out", help="Output directory (overrides output.dir)")
    parser.add_argument(
        "--format",
        dest="formats",
        action="append",
        choices=["csv", "json", "svg"],
        help="Artifact format (repeatable; overrides output.formats)",
    )
    parser.add_argument("--log-level", help="Logging level (overrides LOG_LEVEL)")
    return parser


def _report(error: StMetaError) -> int:
    print(json.dumps(error.to_dict(), sort_keys=True, default=str), file=sys.stderr)
    return error.exit_code


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Execute one CLI invocation.

    Returns:
        Process exit code
    """
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.log_level or get_settings().log_level)

        config = load_run_config(args.config, args.overrides)
        if args.out:
            config.output.dir = args.out
        if args.formats:
            config.output.formats = list(dict.fromkeys(args.formats))

        write_effective_config(config.output.dir, config.effective())
        result = ScenarioService().run(args.subcommand, config)
        paths: List[str] = [
            str(p) for p in write_result(result, config.output.dir, config.output.formats)
        ]
    except StMetaError as e:
        logger.debug(f"Run failed: {e.message}")
        return _report(e)
    except OSError as e:
        return _report(ConfigError(f"I/O failure: {e}"))
    except Exception as e:
        logger.error(f"Unexpected failure: {str(e)}", exc_info=True)
        return _report(StMetaError(f"Unexpected failure: {e}"))

    print(json.dumps({"summary": result.summary, "artifacts": paths}, sort_keys=True, default=str))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
