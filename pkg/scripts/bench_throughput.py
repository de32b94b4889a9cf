"""Replay + feature extraction throughput on a random stream.

    python scripts/bench_throughput.py [-n 10000000] [--repeat 3]
"""

import argparse
import time

from lobspoof.features import replay
from lobspoof.synthgen import random_stream


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-n", type=int, default=10_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    s = random_stream(args.n, seed=args.seed)
    replay(s[:10_000])  # compile / load the cached kernel
    best = float("inf")
    for _ in range(args.repeat):
        t = time.perf_counter()
        replay(s)
        best = min(best, time.perf_counter() - t)
    print(f"{args.n} updates in {best:.2f}s: {args.n / best:,.0f} updates/s")


if __name__ == "__main__":
    main()
