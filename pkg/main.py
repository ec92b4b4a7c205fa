"""
Main Launcher for sparse wideband array design
Commands: design, reweighted, ga, evaluate, compare
"""
import argparse
import logging
import sys
from typing import List, Optional

from config import RUN_MODES, apply_overrides, load_config
from executor import EXIT_CONFIG, ExperimentExecutor
from utils import ConfigError, configure_logging


logger = logging.getLogger(__name__)

COMMANDS = RUN_MODES + ("evaluate", "compare")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the config-error code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"❌ {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(description="Sparse wideband TDL array design")
    parser.add_argument("command", nargs="?", choices=COMMANDS,
                        help="Command to run (default: [run] mode of the config)")
    parser.add_argument("summaries", nargs="*", help="Two summary.json files (compare)")
    parser.add_argument("--config", default="config.ini", help="INI configuration file")
    parser.add_argument("--out", help="Output directory (overrides [run] out)")
    parser.add_argument("--seed", type=int, help="GA seed (overrides [ga] seed)")
    parser.add_argument("--dense-eval", action="store_true", help="Evaluate patterns on the dense grid")
    parser.add_argument("--locations", help="locations.csv to evaluate")
    parser.add_argument("--weights", help="weights.csv to evaluate (fitted when omitted)")
    parser.add_argument("--log-level", help="Logging level (overrides [logging] level)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)

    if args.command == "compare":
        configure_logging(args.log_level or "INFO")
        result = ExperimentExecutor().execute("compare", {"summaries": args.summaries, "out": args.out})
    else:
        if args.summaries:
            print(f"❌ unexpected arguments: {' '.join(args.summaries)}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            config = apply_overrides(load_config(args.config), out=args.out, seed=args.seed,
                                     dense=args.dense_eval, log_level=args.log_level)
        except ConfigError as e:
            print(f"❌ Invalid configuration: {e}", file=sys.stderr)
            return EXIT_CONFIG
        configure_logging(config.log_level, config.log_file)
        command = args.command or config.mode
        logger.info("running %s with %s", command, args.config)
        result = ExperimentExecutor(config).execute(
            command, {"locations": args.locations, "weights": args.weights})

    if result.success:
        print(result.message if args.command == "compare" else f"✓ {result.message}")
        for path in result.files_created:
            print(f"  wrote {path}")
    elif result.files_created:
        print(f"⚠ {result.message}", file=sys.stderr)
    else:
        print(f"❌ {result.message}", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
