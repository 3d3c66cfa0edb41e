#!/usr/bin/env python3
"""Write a synthetic two-class dataset pair in archive TSV format, so the
CLI can be exercised end to end without any external data."""

import argparse
from pathlib import Path

from vgnet.synthetic import write_synthetic_ucr


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("demo_data"))
    ap.add_argument("--name", default="Demo")
    ap.add_argument("--train-size", type=int, default=40)
    ap.add_argument("--test-size", type=int, default=40)
    ap.add_argument("--length", type=int, default=96)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    tr, te = write_synthetic_ucr(args.out, args.name, args.train_size,
                                 args.test_size, args.length, args.seed)
    print(f"wrote {tr}\nwrote {te}")


if __name__ == "__main__":
    main()
