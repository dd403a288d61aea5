#!/usr/bin/env python3

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from dotenv import load_dotenv

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from lib.errors import ToolkitError
from lib.linearize import dimension_table

load_dotenv()

# Average standard dimensions for generic two-variable polynomials (compact block).
PUBLISHED_STANDARD_DIMS = {1: 1, 2: 9, 3: 41, 4: 137}


def main() -> int:
    parser = argparse.ArgumentParser(description="Standard vs minimal linearization dimensions by degree")
    parser.add_argument("--max-degree", type=int, default=3)
    parser.add_argument("--samples", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--block", choices=["padded", "compact"], default="compact")
    args = parser.parse_args()

    try:
        rows = dimension_table(args.max_degree, samples=args.samples, seed=args.seed, block=args.block)
    except ToolkitError as exc:
        print(f"FAILURE: {exc}")
        return exc.exit_code

    print(f"{'degree':>6}  {'standard':>9}  {'minimal':>8}  {'published':>9}")
    mismatches = 0
    for row in rows:
        published = PUBLISHED_STANDARD_DIMS.get(row.degree)
        print(f"{row.degree:>6}  {row.standard_dim:>9.1f}  {row.minimal_dim:>8.1f}  {published if published is not None else '-':>9}")
        if args.block == "compact" and published is not None and row.standard_dim != published:
            mismatches += 1

    if mismatches:
        print(f"FAILURE: {mismatches} standard dimension(s) differ from the published table.")
        return 1
    print("SUCCESS: standard dimensions match the published table.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
