"""Campaign configuration: one flat record, loadable from a JSON file.

A config plus its master seed determines an entire campaign byte for
byte at parallelism 1, so every knob that influences generation or
classification lives here and is echoed into the report.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Optional, Tuple

from .mini_ir.toolchain import BUG_NAMES


class ConfigError(ValueError):
    pass


@dataclass
class CampaignConfig:
    iterations: int = 1000
    master_seed: int = 0
    p0: float = 0.6
    alpha: float = 0.01
    node_num_min: int = 8
    node_num_max: int = 24
    max_rank: int = 3
    max_extent: int = 4
    max_body: int = 6
    inputs_per_case: int = 3
    extra_pipelines: int = 2
    mutants_per_case: int = 3
    similarity_threshold: float = 0.90
    shingle_size: int = 3
    float_rtol: float = 1e-6
    parallelism: int = 1
    corpus_dir: str = "corpus"
    report_path: str = "report.json"
    bug_log_path: str = "bugs.jsonl"
    adapters: Tuple[Tuple[str, ...], ...] = ()
    bug: Optional[str] = None

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not 0.0 <= self.p0 <= 1.0:
            raise ConfigError("p0 must be in [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)")
        if not 1 <= self.node_num_min <= self.node_num_max:
            raise ConfigError("need 1 <= node_num_min <= node_num_max")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.inputs_per_case < 1:
            raise ConfigError("inputs_per_case must be >= 1")
        if self.extra_pipelines < 0 or self.mutants_per_case < 0:
            raise ConfigError("pipeline and mutant counts must be >= 0")
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise ConfigError("similarity_threshold must be in (0, 1]")
        if self.bug is not None and self.bug not in BUG_NAMES:
            raise ConfigError(
                f"unknown seeded bug {self.bug!r}; known: {', '.join(BUG_NAMES)}"
            )
        self.adapters = tuple(tuple(str(a) for a in argv) for argv in self.adapters)

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e))

    @classmethod
    def load(cls, path: str) -> "CampaignConfig":
        try:
            with open(path) as f:
                raw = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        except ValueError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(raw)

    def to_json(self) -> dict:
        d = asdict(self)
        d["adapters"] = [list(a) for a in self.adapters]
        return d
