#!/usr/bin/env python3
"""Regenerate the bundled synthetic dataset.

The DGP is documented in lpdecomp.synthetic.demo_frame: an AR(1) target hit
by an observed standardized shock plus one autocorrelated control, so the
true IRF is 0.9 * 0.6**h and every pipeline number can be sanity-checked by
eye.  Rewriting with the default seed reproduces the shipped file exactly.
"""
import argparse
import csv
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from lpdecomp.synthetic import demo_frame
from lpdecomp.util import fmt_float


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/synthetic.csv")
    ap.add_argument("--rows", type=int, default=360)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    frame = demo_frame(args.rows, seed=args.seed)
    path = pathlib.Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(frame.columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["date"] + names)
        for i, date in enumerate(frame.dates):
            w.writerow([date] + [fmt_float(float(frame.columns[n][i])) for n in names])
    print(f"wrote {path} ({frame.n_obs} rows, columns: date, {', '.join(names)})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
