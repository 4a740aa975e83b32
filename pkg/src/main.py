"""Command line entry point for the Chern marker laboratory"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .core import ExperimentManager, load_config
from .utils import handle_errors


COMMANDS = {
    "spectrum": "cmd_spectrum",
    "marker-sweep": "cmd_marker_sweep",
    "dichotomy": "cmd_dichotomy_report",
    "estimates": "cmd_estimates_suite",
}


def setup_logging(level: int = logging.INFO) -> logging.Logger:
    """Configure logging for the laboratory"""
    log_dir = Path(__file__).parent.parent / "logs"
    log_dir.mkdir(exist_ok=True)

    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_dir / 'lab.log', encoding='utf-8'),
            logging.StreamHandler()
        ]
    )
    return logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lab",
        description="Chern markers, Wannier localization and truncation estimates on finite lattices",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS), help="experiment to run")
    parser.add_argument("--config", required=True, help="path to the JSON experiment config")
    parser.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for independent units")
    parser.add_argument("--verbose", action="store_true", help="log numerical health metrics")
    return parser


@handle_errors()
def run_command(command: str, config_path: str, out_dir: Optional[str], threads: int) -> int:
    """Load the config and run one command; errors become exit codes."""
    config = load_config(config_path)
    manager = ExperimentManager(config, out_dir=out_dir, threads=threads)
    return getattr(manager, COMMANDS[command])()


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    logger = setup_logging(logging.DEBUG if args.verbose else logging.INFO)
    logger.info("Starting lab %s (%s)", args.command, args.config)

    code = run_command(args.command, args.config, args.out, args.threads)

    logger.info("lab %s exited with code %d", args.command, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
