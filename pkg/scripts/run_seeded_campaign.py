#!/usr/bin/env python3
"""Detection experiment: run one campaign per seeded toolchain bug and
tabulate how quickly each is found and by which detector.

    python3 scripts/run_seeded_campaign.py --iterations 2000 --out found.json
"""

import argparse
import json
import sys
import tempfile

from glofuzz.campaign import CampaignConfig, campaign
from glofuzz.mini_ir import BUG_NAMES


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--master-seed", type=int, default=7)
    ap.add_argument("--p0", type=float, default=0.6)
    ap.add_argument("--out", help="write the table as JSON here")
    args = ap.parse_args(argv)

    rows = []
    for bug in sorted(BUG_NAMES):
        with tempfile.TemporaryDirectory() as tmp:
            cfg = CampaignConfig(
                iterations=args.iterations,
                master_seed=args.master_seed,
                p0=args.p0,
                bug=bug,
                corpus_dir=f"{tmp}/corpus",
                report_path=f"{tmp}/report.json",
                bug_log_path=f"{tmp}/bugs.jsonl",
            )
            rep = campaign(cfg)
        first = rep.findings[0] if rep.findings else None
        rows.append(
            {
                "bug": bug,
                "found": first is not None,
                "first_iteration": first["iteration"] if first else None,
                "oracle": first["oracle"] if first else None,
                "outcome": first["outcome"] if first else None,
                "distinct_findings": rep.new_bugs,
                "final_p": rep.final_p,
            }
        )
        print(
            f"{bug:<14} found={str(rows[-1]['found']):<5} "
            f"first_iter={str(rows[-1]['first_iteration']):<6} "
            f"oracle={str(rows[-1]['oracle']):<4} distinct={rep.new_bugs}"
        )

    missed = [r["bug"] for r in rows if not r["found"]]
    print(f"\n{len(rows) - len(missed)}/{len(rows)} seeded bugs detected", end="")
    print(f" (missed: {', '.join(missed)})" if missed else "")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(rows, f, indent=2, sort_keys=True)
            f.write("\n")
    return 1 if missed else 0


if __name__ == "__main__":
    sys.exit(main())
