#!/usr/bin/env python3
"""Sweep all four DoS scenarios over the UE/malicious-ratio grid and write
one CSV per scenario (plots read these directly)."""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from slapx.simnet import (DEFAULT_CALIBRATION, Calibration, SimMetrics,
                          dos_grid)


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--calibration", help="JSON file from `slapx bench --calibrate`")
    args = ap.parse_args()

    cal = (Calibration.from_file(args.calibration) if args.calibration
           else DEFAULT_CALIBRATION)
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for scenario in ("baseline", "full_protocol", "bypass", "precompute"):
        rows = dos_grid(scenario, seed=args.seed, calibration=cal)
        path = out / f"dos_{scenario}.csv"
        with open(path, "w") as f:
            f.write(SimMetrics.CSV_HEADER + "\n")
            for m in rows:
                f.write(m.csv_row() + "\n")
        print(f"wrote {path} ({len(rows)} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
