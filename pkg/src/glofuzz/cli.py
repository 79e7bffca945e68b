"""Command-line driver.

  glofuzz fuzz           run a campaign
  glofuzz replay         re-run one persisted case and print its verdict
  glofuzz shrink         reduce a persisted failing case to 1-minimal
  glofuzz sweep          grid-sweep p0/alpha over sub-campaigns
  glofuzz active-nodes   largest cleanly-compiling prefix of a graph
  glofuzz adapter-check  handshake and smoke-run an external adapter

Exit codes: 0 clean, 1 bugs found (fuzz/replay), 2 config or usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from typing import List, Optional

from .adapter_client import AdapterClient, AdapterError
from .campaign import campaign, case_seed, toolchain_for
from .config import CampaignConfig, ConfigError
from .dtypes import TensorValue, DType
from .graph import graph_text, parse_graph
from .mini_ir import default_toolchain
from .oracles import run_case
from .reduce import NotReproducible, count_active_nodes, shrink
from .relaxation import DedupConfig
from .sweep import sweep


def _add_campaign_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--p0", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--bug", help="seeded toolchain defect to inject")
    p.add_argument("--corpus", dest="corpus_dir")
    p.add_argument("--report", dest="report_path")
    p.add_argument("--bug-log", dest="bug_log_path")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--node-min", type=int, dest="node_num_min")
    p.add_argument("--node-max", type=int, dest="node_num_max")
    p.add_argument(
        "--adapter",
        action="append",
        default=None,
        help="adapter launch command (repeatable, shell-quoted)",
    )


_CAMPAIGN_KEYS = (
    "iterations",
    "master_seed",
    "p0",
    "alpha",
    "bug",
    "corpus_dir",
    "report_path",
    "bug_log_path",
    "parallelism",
    "node_num_min",
    "node_num_max",
)


def _build_config(args) -> CampaignConfig:
    base = CampaignConfig.load(args.config) if args.config else CampaignConfig()
    overrides = {}
    for key in _CAMPAIGN_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "adapter", None):
        overrides["adapters"] = tuple(tuple(shlex.split(a)) for a in args.adapter)
    if not overrides:
        return base
    d = base.to_json()
    d.update(overrides)
    return CampaignConfig.from_dict(d)


def _load_sidecar(path: str):
    with open(path) as f:
        side = json.load(f)
    # The graph always sits next to its sidecar under the same stem;
    # fall back to the recorded path for hand-built sidecars.
    graph_file = path[: -len(".json")] + ".graph"
    if not os.path.exists(graph_file):
        graph_file = side["verdict"]["graph_ref"]
    with open(graph_file) as f:
        g = parse_graph(f.read())
    return g, side


def _case_kwargs(side: dict) -> dict:
    knobs = side.get("oracle_knobs", {})
    return {
        "inputs_per_case": knobs.get("inputs_per_case", 3),
        "extra_pipelines": knobs.get("extra_pipelines", 2),
        "mutants_per_case": knobs.get("mutants_per_case", 3),
        "float_rtol": knobs.get("float_rtol", 1e-6),
    }


def _toolchain_from_side(side: dict):
    from .mini_ir import inject_bug

    tc = default_toolchain()
    if side.get("bug"):
        tc = inject_bug(tc, side["bug"])
    return tc


def _cmd_fuzz(args) -> int:
    cfg = _build_config(args)
    rep = campaign(cfg)
    print(json.dumps(rep.to_json(), sort_keys=True, indent=2))
    return 1 if rep.new_bugs else 0


def _load_case(args):
    """(graph, toolchain, level, seed, oracle kwargs) from a sidecar
    .json or a raw .graph plus the --level/--seed/--bug flags."""
    if args.case.endswith(".json"):
        g, side = _load_sidecar(args.case)
        return g, _toolchain_from_side(side), side["level"], side["seed"], _case_kwargs(side)
    with open(args.case) as f:
        g = parse_graph(f.read())
    tc = default_toolchain()
    if args.bug:
        from .mini_ir import inject_bug

        tc = inject_bug(tc, args.bug)
    return g, tc, args.level, args.seed, {}


def _cmd_replay(args) -> int:
    g, tc, level, seed, kwargs = _load_case(args)
    v = run_case(g, tc, level, seed, **kwargs)
    print(json.dumps(v.to_json(), sort_keys=True, indent=2))
    return 1 if v.is_failure else 0


def _cmd_shrink(args) -> int:
    g, tc, level, seed, kwargs = _load_case(args)
    try:
        small = shrink(g, tc, level, seed, **kwargs)
    except NotReproducible as e:
        print(f"not reproducible: {e}", file=sys.stderr)
        return 2
    if args.out:
        out = args.out
    elif args.case.endswith(".json"):
        out = args.case[: -len(".json")] + ".min.graph"
    else:
        out = args.case + ".min"
    with open(out, "w") as f:
        f.write(graph_text(small))
    print(f"{len(g)} -> {len(small)} nodes, wrote {out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _build_config(args)
    p0s = [float(x) for x in args.p0_grid.split(",") if x]
    alphas = [float(x) for x in args.alpha_grid.split(",") if x]
    rows = sweep(cfg, p0s, alphas, out_json=args.out_json, out_csv=args.out_csv)
    for r in rows:
        print(
            f"p0={r['p0']:<5g} alpha={r['alpha']:<6g} "
            f"new_bugs={r['new_bugs']:<4d} final_p={r['final_p']:.4f}"
        )
    return 0


def _cmd_active_nodes(args) -> int:
    with open(args.graph) as f:
        g = parse_graph(f.read())
    n = count_active_nodes(g, default_toolchain(), seed=args.seed)
    print(f"{n} / {len(g)} active")
    return 0


def _cmd_adapter_check(args) -> int:
    # accept both bare argv words and a single shell-quoted command
    argv = [w for part in args.cmd for w in shlex.split(part)]
    if not argv:
        print("adapter-check needs a launch command", file=sys.stderr)
        return 2
    try:
        client = AdapterClient(argv)
    except AdapterError as e:
        print(f"handshake failed: {e}", file=sys.stderr)
        return 2
    try:
        print(f"name: {client.name}")
        print(f"ops: {len(client.ops)}  dtypes: {sorted(client.dtypes)}")
        print(f"pipelines: {list(client.pipelines)}  float_rtol: {client.float_rtol}")
        smoke = (
            "(fn main ()\n"
            "  (prim add (const int32[] 2) (const int32[] 3)))\n"
        )
        if "add" in client.ops and "int32" in client.dtypes:
            status, payload = client.run(smoke, [], [])
            print(f"smoke add(2,3): {status} {payload}")
            if status != "ok" or payload != TensorValue.scalar(DType.INT32, 5):
                print("smoke run did not return 5", file=sys.stderr)
                return 2
        else:
            print("smoke skipped: add/int32 not declared")
    except AdapterError as e:
        print(f"adapter failed: {e}", file=sys.stderr)
        return 2
    finally:
        client.close()
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="glofuzz",
        description="fuzz graph-level optimizations of the bundled tensor IR",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuzz", help="run a fuzzing campaign")
    _add_campaign_flags(p)
    p.set_defaults(fn=_cmd_fuzz)

    p = sub.add_parser("replay", help="re-run a persisted case")
    p.add_argument("case", help="sidecar .json or raw .graph file")
    p.add_argument("--level", type=int, default=1, help="for raw graphs")
    p.add_argument("--seed", default="replay", help="for raw graphs")
    p.add_argument("--bug", help="seeded defect, for raw graphs")
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("shrink", help="reduce a failing case")
    p.add_argument("case", help="sidecar .json or raw .graph file")
    p.add_argument("--level", type=int, default=1, help="for raw graphs")
    p.add_argument("--seed", default="replay", help="for raw graphs")
    p.add_argument("--bug", help="seeded defect, for raw graphs")
    p.add_argument("--out", help="output graph path")
    p.set_defaults(fn=_cmd_shrink)

    p = sub.add_parser("sweep", help="p0/alpha grid sweep")
    _add_campaign_flags(p)
    p.add_argument("--p0-grid", default="0.0,0.2,0.4,0.6,0.8,1.0")
    p.add_argument("--alpha-grid", default="0.01")
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("active-nodes", help="active-node count of a graph")
    p.add_argument("graph", help=".graph file")
    p.add_argument("--seed", default="active")
    p.set_defaults(fn=_cmd_active_nodes)

    p = sub.add_parser("adapter-check", help="handshake an adapter command")
    p.add_argument("cmd", nargs=argparse.REMAINDER, help="adapter argv")
    p.set_defaults(fn=_cmd_adapter_check)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
