"""Experiment configuration and the hyperparameter grid.

Configuration files are YAML mappings whose keys mirror
:class:`ExperimentConfig`; every key is optional. Example::

    datasets: [FD001, FD003]
    data_dir: data/CMAPSSData
    profile: desk
    seed: 7
    grid:
      ntree: [100, 300]
      mtry: [1, 3]
    epsilon_grid: [0.01, 0.05, 0.10]
    delta_grid: [0.01, 0.05, 0.10]
"""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .cmapss import SUBSETS
from .exceptions import DomainError
from .forest import SPLIT_RULES, HyperParams
from .metrics import METRIC_ORIENTATION

logger = logging.getLogger(__name__)

GRID_FIELDS = ("ntree", "mtry", "nodesize", "nodedepth", "splitrule", "nsplit")

# Full-scale grid without the bs.gradient split rule:
# 10 * 5 * 5 * 5 * 2 * 6 = 15,000 configurations.
PAPER_GRID = {
    "ntree": list(range(100, 2000, 200)),
    "mtry": [1, 3, 5, 7, 9],
    "nodesize": [5, 25, 45, 65, 85],
    "nodedepth": [5, 25, 45, 65, 85],
    "splitrule": list(SPLIT_RULES),
    "nsplit": [5, 7, 9, 11, 13, 15],
}

DESK_GRID = {
    "ntree": [100, 300],
    "mtry": [1, 3],
    "nodesize": [5],
    "nodedepth": [5],
    "splitrule": ["logrank"],
    "nsplit": [5],
}

PROFILES = {"paper": PAPER_GRID, "desk": DESK_GRID}

# fields that change how fast results appear, not what they are
_NON_RESULT_FIELDS = ("n_jobs", "out")


@dataclass
class ExperimentConfig:
    datasets: list = field(default_factory=lambda: ["FD001"])
    data_dir: str = "data/CMAPSSData"
    synthetic: bool = False
    censor_time: float = 250.0
    feature_window: int = 30
    constant_tolerance: float = 1e-12
    split_ratio: float = 0.8
    seed: int = 0
    profile: str = "desk"
    grid: dict = field(default_factory=dict)
    metric: str = "brier_at_t"
    horizon: Optional[float] = None
    cube_horizon: Optional[float] = None
    epsilon_grid: list = field(default_factory=lambda: [0.01, 0.05, 0.10])
    delta_grid: list = field(default_factory=lambda: [0.01, 0.05, 0.10])
    n_jobs: int = 1
    out: str = "results"

    def __post_init__(self):
        if isinstance(self.datasets, str):
            self.datasets = [self.datasets]
        self.datasets = [str(s).upper() for s in self.datasets]
        bad = [s for s in self.datasets if s not in SUBSETS]
        if bad or not self.datasets:
            raise DomainError(f"datasets must be a non-empty subset of {SUBSETS}, got {bad}")
        if self.profile not in PROFILES:
            raise DomainError(f"profile must be one of {sorted(PROFILES)}")
        unknown = set(self.grid) - set(GRID_FIELDS)
        if unknown:
            raise DomainError(f"unknown grid fields {sorted(unknown)}")
        merged = {k: list(v) for k, v in PROFILES[self.profile].items()}
        for k, v in self.grid.items():
            merged[k] = list(v) if isinstance(v, (list, tuple)) else [v]
        for k, v in merged.items():
            if not v:
                raise DomainError(f"grid list {k!r} is empty")
        self.grid = merged
        if self.metric not in METRIC_ORIENTATION:
            raise DomainError(f"metric must be one of {sorted(METRIC_ORIENTATION)}")
        if not self.censor_time > 0:
            raise DomainError("censor_time must be positive")
        if self.horizon is None:
            self.horizon = float(self.censor_time)
        if not 0 < self.split_ratio < 1:
            raise DomainError("split_ratio must lie in (0, 1)")
        self.epsilon_grid = sorted(float(e) for e in self.epsilon_grid)
        self.delta_grid = sorted(float(d) for d in self.delta_grid)
        for name, values in (("epsilon_grid", self.epsilon_grid), ("delta_grid", self.delta_grid)):
            if not values or any(not 0 < v <= 1 for v in values):
                raise DomainError(f"{name} values must lie in (0, 1] and be non-empty")
        if self.n_jobs == 0:
            raise DomainError("n_jobs must be non-zero")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """SHA-256 over every result-determining field, hex, first 16 chars."""
        doc = {k: v for k, v in self.to_dict().items() if k not in _NON_RESULT_FIELDS}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def dump(self, path) -> None:
        text = yaml.safe_dump(self.to_dict(), sort_keys=True)
        Path(path).write_text(f"# config_hash={self.config_hash()}\n{text}")


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read a YAML config (if given) and apply non-``None`` overrides on top."""
    doc = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise DomainError(f"{path}: config must be a mapping")
        doc.update(loaded)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise DomainError(f"unknown config keys {sorted(unknown)}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**doc)


def build_model_grid(config: ExperimentConfig, n_features: Optional[int] = None) -> list:
    """Cartesian product of the grid lists, lexicographic in field order.

    Combinations with ``mtry > n_features`` are dropped with a warning.
    """
    lists = [sorted(config.grid[name]) for name in GRID_FIELDS]
    grid = [HyperParams(*combo) for combo in itertools.product(*lists)]
    if n_features is not None:
        too_wide = [hp for hp in grid if hp.mtry > n_features]
        if too_wide:
            logger.warning(
                "dropping %d configurations with mtry > %d features", len(too_wide), n_features
            )
            grid = [hp for hp in grid if hp.mtry <= n_features]
    return grid
