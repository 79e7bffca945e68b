#!/usr/bin/env python3
"""Exploration trade-off experiment: sweep the initial exploration
probability p0 and the step size alpha against one seeded bug, and
report distinct findings per grid point.

    python3 scripts/run_relaxation_sweep.py --bug vm-neg --iterations 800
"""

import argparse
import sys
import tempfile

from glofuzz.campaign import CampaignConfig
from glofuzz.sweep import sweep


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bug", default="vm-neg")
    ap.add_argument("--iterations", type=int, default=800)
    ap.add_argument("--master-seed", type=int, default=19)
    ap.add_argument("--p0", type=float, nargs="+", default=[0.0, 0.3, 0.6, 1.0])
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.005, 0.01, 0.05])
    ap.add_argument("--out-json")
    ap.add_argument("--out-csv")
    args = ap.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        base = CampaignConfig(
            iterations=args.iterations,
            master_seed=args.master_seed,
            bug=args.bug,
            corpus_dir=f"{tmp}/corpus",
            bug_log_path=f"{tmp}/bugs.jsonl",
        )
        rows = sweep(base, args.p0, args.alpha, args.out_json, args.out_csv)

    print(f"{'p0':>5} {'alpha':>7} {'new_bugs':>9} {'final_p':>8}  outcomes")
    for r in rows:
        counts = ", ".join(f"{k}={v}" for k, v in sorted(r["outcomes"].items()))
        print(f"{r['p0']:>5} {r['alpha']:>7} {r['new_bugs']:>9} {r['final_p']:>8.3f}  {counts}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
