"""Hyper-parameter sweeps over the level-selection knobs (p0, alpha).

Each grid point runs an independent sub-campaign with a seed derived
from the master seed and the point, its own corpus subdirectory, and
its own report. The sweep emits a JSON summary plus a CSV with one row
per point for plotting find counts against p0.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import replace
from typing import List, Optional, Sequence

from .campaign import campaign
from .config import CampaignConfig, ConfigError


def _point_tag(p0: float, alpha: float) -> str:
    return f"p{p0:g}_a{alpha:g}"


def _point_seed(master_seed: int, tag: str) -> int:
    h = hashlib.sha256(f"{master_seed}:{tag}".encode("utf-8")).hexdigest()
    return int(h[:12], 16)


def sweep(
    base: CampaignConfig,
    p0_values: Sequence[float],
    alpha_values: Sequence[float],
    out_json: Optional[str] = None,
    out_csv: Optional[str] = None,
) -> List[dict]:
    points = [(p0, a) for p0 in p0_values for a in alpha_values]
    if not points:
        raise ConfigError("sweep grid is empty")
    rows: List[dict] = []
    for p0, alpha in points:
        tag = _point_tag(p0, alpha)
        subdir = os.path.join(base.corpus_dir, tag)
        sub = replace(
            base,
            p0=p0,
            alpha=alpha,
            master_seed=_point_seed(base.master_seed, tag),
            corpus_dir=subdir,
            report_path=os.path.join(subdir, "report.json"),
            bug_log_path=os.path.join(subdir, "bugs.jsonl"),
        )
        os.makedirs(subdir, exist_ok=True)
        rep = campaign(sub)
        rows.append(
            {
                "p0": p0,
                "alpha": alpha,
                "new_bugs": rep.new_bugs,
                "final_p": rep.final_p,
                "p_trajectory": rep.p_trajectory,
                "outcomes": rep.outcomes,
                "report_path": sub.report_path,
            }
        )
    if out_json:
        with open(out_json, "w") as f:
            json.dump(rows, f, sort_keys=True, indent=2)
            f.write("\n")
    if out_csv:
        with open(out_csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(
                ["p0", "alpha", "new_bugs", "final_p", "pass", "crash",
                 "inconsistency", "expected_rejection"]
            )
            for r in rows:
                o = r["outcomes"]
                w.writerow(
                    [
                        r["p0"],
                        r["alpha"],
                        r["new_bugs"],
                        r["final_p"],
                        o.get("Pass", 0),
                        o.get("Crash", 0),
                        o.get("Inconsistency", 0),
                        o.get("ExpectedRejection", 0),
                    ]
                )
    return rows
