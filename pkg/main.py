"""
NC Linearization Toolkit - Entry Point
Loads the environment, configures logging and dispatches to the CLI.
"""

import logging
import sys

from dotenv import load_dotenv

from lib.cli import run

load_dotenv()

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    stream=sys.stderr,
)


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
