#!/usr/bin/env python3
"""Distance-fraud and distance-hijacking sweeps (the 3D scatter inputs)."""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from slapx.simnet import run_fraud_grid, run_hijack


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--fraud-trials", type=int, default=100_000)
    ap.add_argument("--hijack-trials", type=int, default=100)
    args = ap.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    path = out / "fraud_grid.csv"
    with open(path, "w") as f:
        f.write("rounds,tolerance,guess,trials,success_rate\n")
        for r in run_fraud_grid(trials=args.fraud_trials, seed=args.seed):
            f.write(f"{r['rounds']},{r['tolerance']:.2f},{r['guess']:.2f},"
                    f"{r['trials']},{r['success_rate']:.6f}\n")
    print(f"wrote {path}")

    path = out / "hijack_grid.csv"
    with open(path, "w") as f:
        f.write("honest_d,mal_d,weight,trials,success_rate\n")
        for r in run_hijack(trials=args.hijack_trials, seed=args.seed):
            f.write(f"{r['honest_d']},{r['mal_d']},{r['weight']:.1f},"
                    f"{r['trials']},{r['success_rate']:.6f}\n")
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
