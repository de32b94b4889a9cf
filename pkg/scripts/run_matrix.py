"""Generate the benchmark (if missing) and run the cross-sample matrix.

    python scripts/run_matrix.py --out runs/matrix [--smoke] [--seed 0]
"""

import argparse
import sys
from pathlib import Path

from lobspoof import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/matrix")
    ap.add_argument("--bench", help="benchmark dir (default: <out>/bench)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--config")
    ap.add_argument("--smoke", action="store_true")
    args = ap.parse_args()

    bench = Path(args.bench or Path(args.out) / "bench")
    common = ["--seed", str(args.seed), "-v"] + (["--config", args.config] if args.config else []) + (["--smoke"] if args.smoke else [])
    if not (bench / "manifest.json").exists():
        rc = cli.main(["generate", "--out", str(bench), *common])
        if rc:
            return rc
    return cli.main(["matrix", str(bench), "--design", "cross", "--out", args.out, *common])


if __name__ == "__main__":
    sys.exit(main())
