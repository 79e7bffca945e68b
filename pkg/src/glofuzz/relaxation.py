"""Constraint-level feedback and bug-trace deduplication.

The campaign keeps a probability p of generating the next graph with
integrity constraints off (level 0). Every time a new bug is recorded
the probability shifts by a step alpha: level-0 finds push p up, level-1
finds push it down. The state tracks the two event counts and derives p
from them in closed form, clamped to [0,1], so the value is exactly
p0 + alpha*(n0 - n1) at every point in the stream with no float drift
from repeated accumulation.

Whether a failing case counts as "new" is decided by trace similarity:
traces are normalized (case, addresses, paths, and numbers dropped),
cut into 3-token shingles, and compared by multiset cosine against
every recorded bug. Only a best score strictly below the threshold
(default 0.90) admits a new bug. Verdicts with no trace at all (pure
value divergences) cannot be compared, so they are admitted directly
but keyed by oracle and graph digest to stop one graph from being
recorded twice.
"""

from __future__ import annotations

import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple


@dataclass
class DedupConfig:
    similarity_threshold: float = 0.90
    shingle_size: int = 3

    def __post_init__(self) -> None:
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be in (0, 1]")
        if self.shingle_size < 1:
            raise ValueError("shingle_size must be positive")


@dataclass
class CampaignState:
    p0: float = 0.6
    alpha: float = 0.01
    n_level0: int = 0
    n_level1: int = 0
    bug_history: List[str] = field(default_factory=list)
    untraced_keys: Set[str] = field(default_factory=set)
    rng: random.Random = field(default_factory=lambda: random.Random(0))

    @property
    def p(self) -> float:
        return min(1.0, max(0.0, self.p0 + self.alpha * (self.n_level0 - self.n_level1)))

    @property
    def new_bug_count(self) -> int:
        return len(self.bug_history) + len(self.untraced_keys)


def select_level(s: CampaignState) -> int:
    return 0 if s.rng.random() < s.p else 1


def update_on_new_bug(s: CampaignState, level: int) -> CampaignState:
    """A fresh bug at `level` shifts p one alpha step: up for level 0,
    down for level 1. Clamping happens in the p property."""
    if level == 0:
        s.n_level0 += 1
    elif level == 1:
        s.n_level1 += 1
    else:
        raise ValueError(f"unknown constraint level {level}")
    return s


# -- trace normalization and similarity ----------------------------------------------

_HEX = re.compile(r"0x[0-9a-f]+")
_PATH = re.compile(r"(?:/[\w.\-]+){2,}/?")
_NUM = re.compile(r"\d+(?:\.\d+)?")
_TOKEN = re.compile(r"[a-z_<>][a-z_<>0-9]*")


def normalize_trace(trace: str) -> str:
    """Case, memory addresses, file paths, and numbers do not identify a
    bug; strip them so reruns of the same defect compare equal."""
    t = trace.lower()
    t = _HEX.sub("<addr>", t)
    t = _PATH.sub("<path>", t)
    t = _NUM.sub("<num>", t)
    return " ".join(_TOKEN.findall(t))


def _shingles(normalized: str, size: int) -> Counter:
    tokens = normalized.split()
    if not tokens:
        return Counter()
    if len(tokens) < size:
        return Counter([tuple(tokens)])
    return Counter(
        tuple(tokens[i : i + size]) for i in range(len(tokens) - size + 1)
    )


def _cosine(a: Counter, b: Counter) -> float:
    if a == b:
        return 1.0
    if not a or not b:
        return 0.0
    dot = sum(count * b[sh] for sh, count in a.items())
    norm = math.sqrt(sum(c * c for c in a.values())) * math.sqrt(
        sum(c * c for c in b.values())
    )
    # sqrt rounding can push a self-comparison a hair past 1; equal
    # multisets already returned exactly 1.0 above.
    return min(1.0, dot / norm)


def trace_similarity(a: str, b: str, shingle_size: int = 3) -> float:
    return _cosine(
        _shingles(normalize_trace(a), shingle_size),
        _shingles(normalize_trace(b), shingle_size),
    )


def _similarity_normalized(na: str, nb: str, shingle_size: int) -> float:
    return _cosine(_shingles(na, shingle_size), _shingles(nb, shingle_size))


def is_new_bug(trace: str, s: CampaignState, d: Optional[DedupConfig] = None) -> bool:
    """True iff the trace clears every recorded bug by the similarity
    threshold; recording happens on admission."""
    d = d or DedupConfig()
    norm = normalize_trace(trace)
    for seen in s.bug_history:
        if _similarity_normalized(norm, seen, d.shingle_size) >= d.similarity_threshold:
            return False
    s.bug_history.append(norm)
    return True


def untraced_key(oracle: str, graph_digest: str) -> str:
    return f"{oracle}:{graph_digest}"


def record_untraced(key: str, s: CampaignState) -> bool:
    """Traceless verdicts skip similarity analysis entirely; only an
    exact repeat of the same graph and oracle is folded away."""
    if key in s.untraced_keys:
        return False
    s.untraced_keys.add(key)
    return True


def closed_form_p(p0: float, alpha: float, n_level0: int, n_level1: int) -> float:
    return min(1.0, max(0.0, p0 + alpha * (n_level0 - n_level1)))
