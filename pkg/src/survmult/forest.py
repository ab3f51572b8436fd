"""Random survival forests grown with log-rank family splitting.

Trees are grown on bootstrap resamples. At each node ``mtry`` features are
drawn without replacement, ``nsplit`` cut points are drawn uniformly over
each feature's node-local range, and the cut with the largest split
statistic wins. Leaves hold Nelson-Aalen cumulative hazards; the forest
prediction is the pointwise mean of the leaf hazards reached by ``x``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .exceptions import DomainError, FormatError
from .survival_core import StepFunction, SurvivalDataset, na_cumhaz, risk_from_chf

__all__ = [
    "SPLIT_RULES",
    "HyperParams",
    "SurvivalTree",
    "SurvivalForest",
    "logrank_stat",
    "logrank_score_stat",
    "fit_tree",
    "fit_forest",
    "predict_chf",
    "predict_risk",
    "save_forest",
    "load_forest",
]

SPLIT_RULES = ("logrank", "logrankscore")
FOREST_FORMAT_VERSION = 1


@dataclass(frozen=True, order=True)
class HyperParams:
    ntree: int = 100
    mtry: int = 1
    nodesize: int = 5
    nodedepth: int = 5
    splitrule: str = "logrank"
    nsplit: int = 5

    def __post_init__(self):
        for name in ("ntree", "mtry", "nodesize", "nodedepth", "nsplit"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.splitrule not in SPLIT_RULES:
            raise DomainError(
                f"unknown splitrule {self.splitrule!r}; expected one of {SPLIT_RULES}"
            )

    def check_dimension(self, d: int) -> None:
        if self.mtry > d:
            raise DomainError(f"mtry={self.mtry} exceeds the number of features d={d}")

    @property
    def label(self) -> str:
        return (
            f"ntree={self.ntree}/mtry={self.mtry}/nodesize={self.nodesize}/"
            f"nodedepth={self.nodedepth}/splitrule={self.splitrule}/nsplit={self.nsplit}"
        )


# --------------------------------------------------------------------------
# split statistics
# --------------------------------------------------------------------------

def _logrank_batch(times, events, left_masks):
    """Absolute standardized log-rank statistic for each row of ``left_masks``."""
    left_masks = np.atleast_2d(left_masks).astype(np.float64)
    ev_times = np.unique(times[events == 1])
    if ev_times.size == 0:
        return np.zeros(left_masks.shape[0])
    at_risk = (times[:, None] >= ev_times[None, :]).astype(np.float64)
    died = ((times[:, None] == ev_times[None, :]) & (events[:, None] == 1)).astype(np.float64)
    Y = at_risk.sum(axis=0)
    d = died.sum(axis=0)
    Y_left = left_masks @ at_risk
    d_left = left_masks @ died
    frac = Y_left / Y
    numer = (d_left - frac * d).sum(axis=1)
    usable = Y > 1
    var = np.zeros_like(Y_left)
    var[:, usable] = (
        frac[:, usable] * (1.0 - frac[:, usable])
        * ((Y[usable] - d[usable]) / (Y[usable] - 1.0)) * d[usable]
    )
    var = var.sum(axis=1)
    out = np.zeros(left_masks.shape[0])
    ok = var > 0
    out[ok] = np.abs(numer[ok]) / np.sqrt(var[ok])
    return out


def _logrank_scores(times, events):
    """Log-rank scores ``a_l = delta_l - sum_{k: T_k <= T_l} delta_k / (n - G_k + 1)``,
    with ``G_k`` the number of observations whose time is ``<= T_k``."""
    n = times.size
    t_sorted = np.sort(times)
    gamma = np.searchsorted(t_sorted, times, side="right")
    term = events / (n - gamma + 1.0)
    order = np.argsort(times, kind="stable")
    csum = np.cumsum(term[order])
    # all observations tied at T_l share the same cumulative sum
    cum_at = csum[gamma - 1]
    return events - cum_at


def _logrank_score_batch(times, events, left_masks):
    left_masks = np.atleast_2d(left_masks).astype(np.float64)
    n = times.size
    a = _logrank_scores(times, events.astype(np.float64))
    a_bar = a.mean()
    s2 = a.var(ddof=1) if n > 1 else 0.0
    n_left = left_masks.sum(axis=1)
    numer = left_masks @ a - n_left * a_bar
    denom = n_left * (1.0 - n_left / n) * s2
    out = np.zeros(left_masks.shape[0])
    ok = denom > 0
    out[ok] = np.abs(numer[ok]) / np.sqrt(denom[ok])
    return out


_BATCH_STATS = {"logrank": _logrank_batch, "logrankscore": _logrank_score_batch}


def _two_groups(group_left, group_right):
    tl, el = (np.asarray(v, dtype=np.float64).reshape(-1) for v in group_left)
    tr, er = (np.asarray(v, dtype=np.float64).reshape(-1) for v in group_right)
    if tl.size == 0 or tr.size == 0:
        raise DomainError("both groups must be non-empty")
    times = np.concatenate([tl, tr])
    events = np.concatenate([el, er])
    mask = np.zeros(times.size)
    mask[: tl.size] = 1.0
    return times, events, mask


def logrank_stat(group_left, group_right) -> float:
    """Two-sample log-rank statistic ``|O - E| / sqrt(V)`` for ``(times, events)`` groups.

    Returns 0 when the variance vanishes (no events, or degenerate risk sets).
    """
    times, events, mask = _two_groups(group_left, group_right)
    return float(_logrank_batch(times, events, mask)[0])


def logrank_score_stat(group_left, group_right) -> float:
    """Standardized sum of log-rank scores over the left group, in absolute value."""
    times, events, mask = _two_groups(group_left, group_right)
    return float(_logrank_score_batch(times, events, mask)[0])


# --------------------------------------------------------------------------
# trees
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SurvivalTree:
    """Binary survival tree stored as flat node arrays.

    Node ``k`` is internal when ``left[k] >= 0``; samples with
    ``x[feature[k]] <= threshold[k]`` go left. Leaves carry a Nelson-Aalen
    hazard in ``leaf_chf[k]`` and the number of (bootstrap) training rows
    that reached them in ``n_node[k]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_node: np.ndarray
    node_depth: np.ndarray
    leaf_chf: dict

    @property
    def depth(self) -> int:
        return int(self.node_depth.max())

    @property
    def is_leaf(self) -> np.ndarray:
        return self.left < 0

    @property
    def leaves(self) -> list:
        return [int(k) for k in np.flatnonzero(self.is_leaf)]

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = ~self.is_leaf[node]
        while np.any(active):
            k = node[active]
            go_left = X[active, self.feature[k]] <= self.threshold[k]
            node[active] = np.where(go_left, self.left[k], self.right[k])
            active = ~self.is_leaf[node]
        return node


def fit_tree(data: SurvivalDataset, hp: HyperParams, rng) -> SurvivalTree:
    """Grow one survival tree on ``data`` (no resampling happens here).

    ``rng`` is a :class:`numpy.random.Generator` (or a seed for one) that
    drives feature subsampling and cut-point draws.
    """
    rng = np.random.default_rng(rng)
    hp.check_dimension(data.d)
    X, times, events = data.features, data.times, data.events.astype(np.float64)
    batch_stat = _BATCH_STATS[hp.splitrule]

    feature, threshold, left, right, n_node, depth = [], [], [], [], [], []
    leaf_chf = {}

    def new_node(size, level):
        for lst, v in ((feature, -1), (threshold, np.nan), (left, -1), (right, -1),
                       (n_node, size), (depth, level)):
            lst.append(v)
        return len(feature) - 1

    stack = [(np.arange(data.n), 0, new_node(data.n, 0))]
    while stack:
        rows, level, node = stack.pop()
        split = None
        if level < hp.nodedepth and rows.size >= 2 * hp.nodesize:
            split = _best_split(X[rows], times[rows], events[rows], hp, rng, batch_stat)
        if split is None:
            leaf_chf[node] = na_cumhaz(times[rows], events[rows])
            continue
        j, cut = split
        go_left = X[rows, j] <= cut
        rows_l, rows_r = rows[go_left], rows[~go_left]
        node_l = new_node(rows_l.size, level + 1)
        node_r = new_node(rows_r.size, level + 1)
        feature[node], threshold[node] = j, cut
        left[node], right[node] = node_l, node_r
        # right pushed first so the left subtree is numbered depth-first
        stack.append((rows_r, level + 1, node_r))
        stack.append((rows_l, level + 1, node_l))

    return SurvivalTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        n_node=np.asarray(n_node, dtype=np.int64),
        node_depth=np.asarray(depth, dtype=np.int64),
        leaf_chf=leaf_chf,
    )


def _best_split(X, times, events, hp, rng, batch_stat):
    if not np.any(events == 1):
        return None
    n, d = X.shape
    candidates = []
    for j in rng.choice(d, size=hp.mtry, replace=False):
        col = X[:, j]
        lo, hi = col.min(), col.max()
        if lo == hi:
            continue
        cuts = np.unique(rng.uniform(lo, hi, size=hp.nsplit))
        candidates.extend((int(j), float(c)) for c in cuts)
    if not candidates:
        return None
    masks = np.array([X[:, j] <= c for j, c in candidates])
    n_left = masks.sum(axis=1)
    ok = (n_left >= hp.nodesize) & (n - n_left >= hp.nodesize)
    if not np.any(ok):
        return None
    stats = np.full(len(candidates), -np.inf)
    stats[ok] = batch_stat(times, events, masks[ok])
    best = int(np.argmax(stats))
    if not stats[best] > 0:
        return None
    return candidates[best]


# --------------------------------------------------------------------------
# forests
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SurvivalForest:
    trees: tuple
    hyperparams: HyperParams
    rng_seed: int
    event_time_grid: np.ndarray
    n_features: int

    def __post_init__(self):
        grid = np.asarray(self.event_time_grid, dtype=np.float64)
        if grid.size and np.any(np.diff(grid) <= 0):
            raise DomainError("event_time_grid must be strictly increasing")
        grid.setflags(write=False)
        object.__setattr__(self, "event_time_grid", grid)
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "_leaf_tables", [_leaf_table(t, grid) for t in self.trees])

    def chf_matrix(self, X) -> np.ndarray:
        """Ensemble cumulative hazard of each row of ``X`` on ``event_time_grid``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DomainError(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        total = np.zeros((X.shape[0], self.event_time_grid.size))
        for tree, table in zip(self.trees, self._leaf_tables):
            total += table[tree.apply(X)]
        return total / len(self.trees)

    def mortality(self, X) -> np.ndarray:
        """Ensemble hazard summed over ``event_time_grid``; a ranking score."""
        return self.chf_matrix(X).sum(axis=1)

    def risk(self, X, t) -> np.ndarray:
        """Risk ``1 - exp(-H(t_i | x_i))`` for each row, at per-row times ``t``."""
        H = self.chf_matrix(X)
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (H.shape[0],))
        if np.any(t < 0):
            raise DomainError("prediction times must be non-negative")
        idx = np.searchsorted(self.event_time_grid, t, side="right")
        padded = np.concatenate([np.zeros((H.shape[0], 1)), H], axis=1)
        return -np.expm1(-padded[np.arange(H.shape[0]), idx])


def _leaf_table(tree: SurvivalTree, grid: np.ndarray) -> np.ndarray:
    table = np.zeros((tree.n_nodes, grid.size))
    for k, chf in tree.leaf_chf.items():
        table[k] = chf(grid)
    return table


def _grow_one(data, hp, seed_seq, bootstrap):
    rng = np.random.default_rng(seed_seq)
    if bootstrap:
        rows = rng.integers(0, data.n, size=data.n)
        sample = data.subset(rows)
    else:
        sample = data
    return fit_tree(sample, hp, rng)


def fit_forest(
    data: SurvivalDataset,
    hp: HyperParams,
    seed: int,
    *,
    bootstrap: bool = True,
    n_jobs: Optional[int] = None,
) -> SurvivalForest:
    """Fit ``hp.ntree`` trees, each on its own bootstrap resample.

    Tree ``k`` draws from the ``k``-th child of ``SeedSequence(seed)``, so the
    result does not depend on ``n_jobs``. ``bootstrap=False`` grows every tree
    on the data itself (used by tests).
    """
    hp.check_dimension(data.d)
    children = np.random.SeedSequence(seed).spawn(hp.ntree)
    if n_jobs is None or n_jobs == 1:
        trees = [_grow_one(data, hp, s, bootstrap) for s in children]
    else:
        trees = Parallel(n_jobs=n_jobs)(
            delayed(_grow_one)(data, hp, s, bootstrap) for s in children
        )
    grid = np.unique(data.times[data.events == 1])
    return SurvivalForest(tuple(trees), hp, int(seed), grid, data.d)


def predict_chf(forest: SurvivalForest, x) -> StepFunction:
    """Ensemble cumulative hazard for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError("predict_chf takes one feature vector")
    values = forest.chf_matrix(x[None, :])[0]
    return StepFunction(forest.event_time_grid, values, 0.0)


def predict_risk(forest: SurvivalForest, x, t) -> float:
    """Risk of failure by time ``t`` for feature vector ``x``."""
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t!r}")
    return float(risk_from_chf(predict_chf(forest, x), t))


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def _tree_to_dict(tree: SurvivalTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": [None if np.isnan(v) else float(v) for v in tree.threshold],
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "n_node": tree.n_node.tolist(),
        "node_depth": tree.node_depth.tolist(),
        "leaves": {
            str(k): {"times": chf.jump_times.tolist(), "values": chf.values.tolist()}
            for k, chf in sorted(tree.leaf_chf.items())
        },
    }


def _tree_from_dict(d: dict) -> SurvivalTree:
    return SurvivalTree(
        feature=np.asarray(d["feature"], dtype=np.int64),
        threshold=np.asarray(
            [np.nan if v is None else v for v in d["threshold"]], dtype=np.float64
        ),
        left=np.asarray(d["left"], dtype=np.int64),
        right=np.asarray(d["right"], dtype=np.int64),
        n_node=np.asarray(d["n_node"], dtype=np.int64),
        node_depth=np.asarray(d["node_depth"], dtype=np.int64),
        leaf_chf={
            int(k): StepFunction(v["times"], v["values"], 0.0)
            for k, v in d["leaves"].items()
        },
    )


def save_forest(forest: SurvivalForest, path) -> None:
    """Write ``forest`` as versioned JSON. Floats use shortest round-trip repr."""
    doc = {
        "format": "survmult-forest",
        "version": FOREST_FORMAT_VERSION,
        "hyperparams": asdict(forest.hyperparams),
        "rng_seed": forest.rng_seed,
        "n_features": forest.n_features,
        "event_time_grid": forest.event_time_grid.tolist(),
        "trees": [_tree_to_dict(t) for t in forest.trees],
    }
    Path(path).write_text(json.dumps(doc))


def load_forest(path) -> SurvivalForest:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "survmult-forest":
        raise FormatError(f"{path} is not a forest file")
    if doc.get("version") != FOREST_FORMAT_VERSION:
        raise FormatError(f"unsupported forest format version {doc.get('version')!r}")
    return SurvivalForest(
        trees=tuple(_tree_from_dict(t) for t in doc["trees"]),
        hyperparams=HyperParams(**doc["hyperparams"]),
        rng_seed=doc["rng_seed"],
        event_time_grid=np.asarray(doc["event_time_grid"], dtype=np.float64),
        n_features=doc["n_features"],
    )
