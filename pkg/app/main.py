"""
Identity Cleanup - Main Entry Point

Command-line entry point for running Cleanup experiments with hidden
identities and dynamic teams:

    python -m app.main run --config configs/baseline.toml --out results/baseline
"""

import sys
from typing import List, Optional

from app.core.config import configure_logging
from app.routers.cli_router import build_parser, dispatch


def main(argv: Optional[List[str]] = None) -> int:
    """Configure logging and run one subcommand."""
    args, _ = build_parser().parse_known_args(argv)
    configure_logging(args.log_level)
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
