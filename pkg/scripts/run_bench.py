"""Run the full benchmark suite and write the report.

Usage:
  python scripts/run_bench.py --output report.csv
  python scripts/run_bench.py --format json -n 8
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from gridloom.cli import main as cli_main


def main() -> int:
    return cli_main(["bench", *sys.argv[1:]])


if __name__ == "__main__":
    raise SystemExit(main())
