"""Run every acceptance experiment through the CLI and write results under $NONLOCAL_LOGISTIC_OUT."""

from __future__ import annotations

import sys
from pathlib import Path

from nonlocal_logistic.cli import main

if __name__ == "__main__":
    config = Path(__file__).parents[1] / "configs" / "acceptance.ini"
    sys.exit(main(["all", "-c", str(config), *sys.argv[1:]]))
