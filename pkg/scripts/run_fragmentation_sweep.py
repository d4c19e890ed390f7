#!/usr/bin/env python3
"""Packet-count and header-overhead sweep for all protocol messages."""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from slapx.wire import fragmentation_sweep


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/fragmentation.csv")
    ap.add_argument("--mtu-min", type=int, default=576)
    ap.add_argument("--mtu-max", type=int, default=9000)
    ap.add_argument("--step", type=int, default=8)
    ap.add_argument("--header-bytes", type=int, default=40)
    args = ap.parse_args()

    path = pathlib.Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write("mtu,message,payload_bytes,header_bytes,packets,overhead_ratio\n")
        sweep = fragmentation_sweep(args.mtu_min, args.mtu_max,
                                    args.header_bytes, step=args.step)
        for mtu in sorted(sweep):
            for e in sweep[mtu]:
                f.write(f"{mtu},{e.message},{e.payload_bytes},{e.header_bytes},"
                        f"{e.packets},{e.overhead_ratio:.6f}\n")
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
