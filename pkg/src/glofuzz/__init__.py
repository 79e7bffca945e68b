"""glofuzz: generation-based fuzzing for graph-level tensor-IR optimizations.

The package generates computational graphs under tunable integrity
constraints, lowers them to a bundled mini tensor IR, runs optimization
passes and several execution backends over them, and flags crashes and
result inconsistencies as bugs, with trace-similarity deduplication and
a greedy shrinker for the cases it keeps.
"""

from .adapter_client import AdapterClient, AdapterError
from .campaign import CampaignReport, build_case, campaign, case_seed, toolchain_for
from .config import CampaignConfig, ConfigError
from .generator import GenConfig, generate, random_value
from .graph import Graph, graph_digest, graph_text, parse_graph, validate_graph
from .oracles import FuzzVerdict, oracle1_crash, oracle2_opt_mutation, oracle3_cross_backend, run_case
from .reduce import NotReproducible, count_active_nodes, shrink
from .relaxation import (
    CampaignState,
    DedupConfig,
    closed_form_p,
    is_new_bug,
    normalize_trace,
    record_untraced,
    select_level,
    trace_similarity,
    untraced_key,
    update_on_new_bug,
)
from .sweep import sweep

__version__ = "0.1.0"

__all__ = [
    "AdapterClient",
    "AdapterError",
    "CampaignConfig",
    "CampaignReport",
    "CampaignState",
    "ConfigError",
    "DedupConfig",
    "FuzzVerdict",
    "GenConfig",
    "Graph",
    "NotReproducible",
    "build_case",
    "campaign",
    "case_seed",
    "closed_form_p",
    "count_active_nodes",
    "generate",
    "graph_digest",
    "graph_text",
    "is_new_bug",
    "normalize_trace",
    "oracle1_crash",
    "oracle2_opt_mutation",
    "oracle3_cross_backend",
    "parse_graph",
    "random_value",
    "record_untraced",
    "run_case",
    "select_level",
    "shrink",
    "sweep",
    "toolchain_for",
    "trace_similarity",
    "untraced_key",
    "update_on_new_bug",
    "validate_graph",
]
