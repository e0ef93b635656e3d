#!/usr/bin/env python3
"""Regenerate the frozen Mittag-Leffler reference table.

Writes src/fracks/data/ml_oracle.tsv with 50-digit values from the
extended-precision spectral-integral route, cross-checked against the
adaptive-precision series wherever the latter is affordable.  Slow by
design; run only when the table layout changes.
"""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from fracks import oracle  # noqa: E402


def main():
    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "fracks" / "data" / "ml_oracle.tsv"
    points = oracle.default_table_points()
    t0 = time.time()

    def log(msg):
        print(f"  {msg} ({time.time() - t0:.0f}s)", flush=True)

    n = oracle.write_oracle_table(out, points=points, log=log)
    print(f"wrote {n} rows to {out} in {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
