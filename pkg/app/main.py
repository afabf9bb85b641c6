import argparse
import logging
import sys
from typing import List, Optional

from app.cli.commands import run
from app.cli.run_config import config_keys, parse_config, parse_value
from app.core.config import settings
from app.core.exceptions import EXIT_OK, EXIT_VALIDATION, exit_code_for
from app.core.logging import logger, setup_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.main",
        description=f"{settings.PROJECT_NAME} {settings.PROJECT_VERSION}",
    )
    parser.add_argument("--config", help="run configuration file (key = value lines)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    verbosity.add_argument("--quiet", action="store_true", help="log warnings and errors only")
    for key in config_keys():
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="VALUE", default=None,
                            help=f"override '{key}' from the configuration file")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on bad flags; those are validation errors here
        return EXIT_OK if e.code == 0 else EXIT_VALIDATION
    if args.verbose:
        setup_logging(logging.DEBUG)
    elif args.quiet:
        setup_logging(logging.WARNING)
    else:
        setup_logging()

    try:
        text = ""
        if args.config:
            with open(args.config, "r", encoding="utf-8") as f:
                text = f.read()
        overrides = {
            key: parse_value(getattr(args, key))
            for key in config_keys()
            if getattr(args, key) is not None and key != "output_dir"
        }
        config = parse_config(text, overrides)
        outcome = run(config, output_dir=args.output_dir)
    except Exception as e:
        code = exit_code_for(e)
        logger.error(f"{type(e).__name__}: {e}")
        return code

    print(outcome.summary)
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
