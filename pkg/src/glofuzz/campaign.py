"""The fuzzing loop: generate, classify, deduplicate, persist, adapt.

Every iteration draws a constraint level from the campaign state,
builds a graph from seeds derived off (master_seed, iteration), runs
the oracle battery, and feeds failures through dedup. New bugs are
persisted to the corpus (canonical graph text plus a JSON sidecar that
replays the verdict) and shift the level-selection probability.

Seeds are pre-assigned per iteration index, so parallel workers change
only the order in which verdicts arrive, never which graphs exist. At
parallelism 1 the whole campaign, including report and corpus bytes,
is a pure function of the config. Reports carry no timestamps for
exactly that reason.
"""

from __future__ import annotations

import json
import os
import random
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .adapter_client import AdapterClient, AdapterError
from .config import CampaignConfig
from .generator import GenConfig, generate
from .graph import Graph, graph_digest, graph_text
from .mini_ir import Toolchain, default_toolchain, inject_bug
from .oracles import FuzzVerdict, run_case
from .relaxation import (
    CampaignState,
    DedupConfig,
    is_new_bug,
    normalize_trace,
    record_untraced,
    select_level,
    untraced_key,
    update_on_new_bug,
)


@dataclass
class CampaignReport:
    iterations: int
    new_bugs: int
    outcomes: Dict[str, int]
    oracles: Dict[str, int]
    levels: Dict[str, int]
    final_p: float
    p_trajectory: List[float]
    findings: List[Dict[str, Any]]
    adapter_errors: List[str]
    config: Dict[str, Any]

    def to_json(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "new_bugs": self.new_bugs,
            "outcomes": self.outcomes,
            "oracles": self.oracles,
            "levels": self.levels,
            "final_p": self.final_p,
            "p_trajectory": self.p_trajectory,
            "findings": self.findings,
            "adapter_errors": self.adapter_errors,
            "config": self.config,
        }


def case_seed(master_seed: int, iteration: int) -> str:
    return f"{master_seed}:{iteration}"


def build_case(cfg: CampaignConfig, iteration: int, level: int) -> Graph:
    """The graph for one iteration; a pure function of (config, index,
    level) so replay never depends on loop state."""
    it = random.Random(f"{cfg.master_seed}:{iteration}:gen")
    gcfg = GenConfig(
        node_num=it.randint(cfg.node_num_min, cfg.node_num_max),
        c_level=level,
        rng_seed=it.getrandbits(32),
        max_rank=cfg.max_rank,
        max_extent=cfg.max_extent,
        max_body=cfg.max_body,
    )
    return generate(gcfg)


def toolchain_for(cfg: CampaignConfig) -> Toolchain:
    tc = default_toolchain()
    if cfg.bug is not None:
        tc = inject_bug(tc, cfg.bug)
    return tc


def _case_sidecar(cfg: CampaignConfig, iteration: int, level: int, v: FuzzVerdict):
    return {
        "iteration": iteration,
        "level": level,
        "seed": case_seed(cfg.master_seed, iteration),
        "gen": {
            "master_seed": cfg.master_seed,
            "node_num_min": cfg.node_num_min,
            "node_num_max": cfg.node_num_max,
            "max_rank": cfg.max_rank,
            "max_extent": cfg.max_extent,
            "max_body": cfg.max_body,
        },
        "oracle_knobs": {
            "inputs_per_case": cfg.inputs_per_case,
            "extra_pipelines": cfg.extra_pipelines,
            "mutants_per_case": cfg.mutants_per_case,
            "float_rtol": cfg.float_rtol,
        },
        "bug": cfg.bug,
        "verdict": v.to_json(),
    }


class _Recorder:
    """Single-owner sink for verdicts: dedup, state update, persistence."""

    def __init__(self, cfg: CampaignConfig, state: CampaignState, dedup: DedupConfig):
        self.cfg = cfg
        self.state = state
        self.dedup = dedup
        self.outcomes: Dict[str, int] = {}
        self.oracles: Dict[str, int] = {}
        self.levels: Dict[str, int] = {}
        self.p_trajectory: List[float] = []
        self.findings: List[Dict[str, Any]] = []
        os.makedirs(cfg.corpus_dir, exist_ok=True)
        self._bug_log = open(cfg.bug_log_path, "w")

    def close(self) -> None:
        self._bug_log.close()

    def record(self, iteration: int, level: int, g: Graph, v: FuzzVerdict) -> None:
        self.outcomes[v.outcome] = self.outcomes.get(v.outcome, 0) + 1
        self.oracles[v.oracle] = self.oracles.get(v.oracle, 0) + 1
        self.levels[str(level)] = self.levels.get(str(level), 0) + 1
        if not v.is_failure:
            return
        digest = graph_digest(g)
        if v.trace is not None:
            new = is_new_bug(v.trace, self.state, self.dedup)
        else:
            new = record_untraced(untraced_key(v.oracle, digest), self.state)
        if not new:
            return
        name = f"case_{iteration:06d}_{digest[:16]}"
        graph_file = os.path.join(self.cfg.corpus_dir, name + ".graph")
        with open(graph_file, "w") as f:
            f.write(graph_text(g))
        v.graph_ref = graph_file
        with open(os.path.join(self.cfg.corpus_dir, name + ".json"), "w") as f:
            json.dump(_case_sidecar(self.cfg, iteration, level, v), f, sort_keys=True, indent=2)
            f.write("\n")
        bug_id = self.state.new_bug_count - 1
        self._bug_log.write(
            json.dumps(
                {
                    "id": bug_id,
                    "level": level,
                    "oracle": v.oracle,
                    "normalized_trace": None if v.trace is None else normalize_trace(v.trace),
                    "graph_file": name + ".graph",
                    "seed": case_seed(self.cfg.master_seed, iteration),
                },
                sort_keys=True,
            )
            + "\n"
        )
        self._bug_log.flush()
        update_on_new_bug(self.state, level)
        self.p_trajectory.append(self.state.p)
        self.findings.append(
            {
                "iteration": iteration,
                "level": level,
                "outcome": v.outcome,
                "oracle": v.oracle,
                "graph_file": name + ".graph",
            }
        )


def _launch_adapters(cfg: CampaignConfig) -> Tuple[List[AdapterClient], List[str]]:
    clients: List[AdapterClient] = []
    errors: List[str] = []
    for argv in cfg.adapters:
        try:
            clients.append(AdapterClient(list(argv)))
        except AdapterError as e:
            errors.append(str(e))
    return clients, errors


def campaign(cfg: CampaignConfig) -> CampaignReport:
    tc = toolchain_for(cfg)
    state = CampaignState(
        p0=cfg.p0,
        alpha=cfg.alpha,
        rng=random.Random(f"{cfg.master_seed}:levels"),
    )
    dedup = DedupConfig(cfg.similarity_threshold, cfg.shingle_size)
    clients, adapter_errors = _launch_adapters(cfg)
    rec = _Recorder(cfg, state, dedup)

    def one_case(i: int, level: int):
        g = build_case(cfg, i, level)
        v = run_case(
            g,
            tc,
            level,
            case_seed(cfg.master_seed, i),
            inputs_per_case=cfg.inputs_per_case,
            extra_pipelines=cfg.extra_pipelines,
            mutants_per_case=cfg.mutants_per_case,
            float_rtol=cfg.float_rtol,
            adapters=clients,
        )
        return g, v

    try:
        if cfg.parallelism == 1:
            for i in range(cfg.iterations):
                level = select_level(state)
                g, v = one_case(i, level)
                rec.record(i, level, g, v)
        else:
            # Level draws stay in submission order; verdicts land in
            # completion order, so p feedback is arrival-dependent here.
            with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
                pending: Dict[Any, Tuple[int, int]] = {}
                nxt = 0
                while nxt < cfg.iterations or pending:
                    while nxt < cfg.iterations and len(pending) < cfg.parallelism:
                        level = select_level(state)
                        pending[pool.submit(one_case, nxt, level)] = (nxt, level)
                        nxt += 1
                    done, _ = wait(pending, return_when=FIRST_COMPLETED)
                    for fut in done:
                        i, level = pending.pop(fut)
                        g, v = fut.result()
                        rec.record(i, level, g, v)
    finally:
        rec.close()
        for c in clients:
            c.close()

    report = CampaignReport(
        iterations=cfg.iterations,
        new_bugs=state.new_bug_count,
        outcomes=dict(sorted(rec.outcomes.items())),
        oracles=dict(sorted(rec.oracles.items())),
        levels=dict(sorted(rec.levels.items())),
        final_p=state.p,
        p_trajectory=rec.p_trajectory,
        findings=sorted(rec.findings, key=lambda f: f["iteration"]),
        adapter_errors=adapter_errors,
        config=cfg.to_json(),
    )
    with open(cfg.report_path, "w") as f:
        json.dump(report.to_json(), f, sort_keys=True, indent=2)
        f.write("\n")
    return report
