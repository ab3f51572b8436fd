"""End-to-end experiment: ingest, split, train the grid, score, sweep, report.

Every stage writes plain files into the output directory so stages can be
rerun separately from the command line:

    train_<subset>.csv, test_<subset>.csv   survival data after the split
    cube_<subset>.txt                        prediction cube (membership scores)
    scores_<subset>.csv                      per-model Brier score and c-index
    rashomon_<subset>.csv                    Rashomon set size / performance per epsilon
    report_<subset>.csv                      metrics per (epsilon, delta)
    heatmap_<subset>_<metric>.svg            one heatmap per metric
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import cmapss
from .config import ExperimentConfig, build_model_grid
from .exceptions import FormatError
from .forest import HyperParams, fit_forest
from .metrics import IBS_GRID_POINTS, PerformanceScore, brier_score, c_index, integrated_brier
from .plotting import plot_heatmap
from .rashomon import (
    MultiplicityReport,
    PredictionCube,
    ReportRow,
    load_cube,
    rashomon_set,
    save_cube,
    sweep,
)
from .simulate import simulate_cmapss
from .survival_core import StepFunction, SurvivalDataset, reverse_km_censoring

logger = logging.getLogger(__name__)

METRICS = ("ambiguity", "discrepancy", "obscurity")
REPORT_FIELDS = ("dataset", "epsilon", "delta", *METRICS, "rashomon_size", "config_hash")
RASHOMON_FIELDS = (
    "dataset", "epsilon", "rashomon_size", "metric", "performance_min",
    "performance_max", "c_index_min", "c_index_max", "config_hash",
)
SCORE_FIELDS = ("model_index", "model_id", "seed", "brier", "c_index", "config_hash")
INCOMPLETE_MARKER = "INCOMPLETE"


def fmt(x) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# stage 1: data
# --------------------------------------------------------------------------

def load_raw(config: ExperimentConfig, subset: str) -> cmapss.RawTelemetry:
    if config.synthetic:
        return simulate_cmapss(subset, seed=config.seed)
    return cmapss.parse_cmapss(cmapss.raw_path(config.data_dir, subset), subset)


def prepare_subset(config: ExperimentConfig, subset: str):
    """Survival reformulation, engine-level split, constant-column removal.

    Columns are judged constant on the training part only; the test part
    keeps the same columns. Returns ``(train, test, removed_names)``.
    """
    raw = load_raw(config, subset)
    data = cmapss.to_survival(raw, cmapss.CensoringPolicy(config.censor_time),
                              config.feature_window)
    train, test = cmapss.split_train_test(data, config.split_ratio, config.seed)
    train, removed = cmapss.drop_constant_features(train, config.constant_tolerance)
    return train, test.select_features(train.feature_names), removed


# --------------------------------------------------------------------------
# stage 2: the model grid
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelResult:
    index: int
    hyperparams: HyperParams
    seed: int
    cube_row: np.ndarray
    performance: PerformanceScore
    brier: float
    c_index: float


def model_seed(master_seed: int, index: int) -> int:
    """Seed of grid member ``index``; independent of worker count."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def _risk_curve(forest, x) -> StepFunction:
    H = forest.chf_matrix(x[None, :])[0]
    return StepFunction(forest.event_time_grid, -np.expm1(-H), 0.0)


def evaluate_model(index, hp, train, test, censor_curve, config) -> ModelResult:
    seed = model_seed(config.seed, index)
    forest = fit_forest(train, hp, seed)
    horizon = float(config.horizon)
    at_horizon = forest.risk(test.features, horizon)
    brier = brier_score(at_horizon, test, horizon, censor_curve)
    # c-index ranks by ensemble mortality: risks at a late horizon saturate near 1
    cidx = c_index(forest.mortality(test.features), test)
    if config.metric == "brier_at_t":
        perf = PerformanceScore(brier, "brier_at_t", horizon=horizon)
    elif config.metric == "integrated_brier":
        curves = [_risk_curve(forest, x) for x in test.features]
        ibs = integrated_brier(curves, test, censor_curve, horizon, IBS_GRID_POINTS)
        perf = PerformanceScore(ibs, "integrated_brier", horizon=horizon)
    else:
        perf = PerformanceScore(cidx, "c_index", horizon=horizon)
    cube_times = test.times if config.cube_horizon is None else config.cube_horizon
    row = forest.risk(test.features, cube_times)
    return ModelResult(index, hp, seed, row, perf, brier, cidx)


def train_grid(train: SurvivalDataset, test: SurvivalDataset, config: ExperimentConfig):
    """Fit and score every grid configuration; results in grid order."""
    grid = build_model_grid(config, train.d)
    if not grid:
        raise FormatError("the hyperparameter grid is empty after filtering")
    censor_curve = reverse_km_censoring(train.times, train.events)
    if config.n_jobs == 1:
        results = [evaluate_model(k, hp, train, test, censor_curve, config)
                   for k, hp in enumerate(grid)]
    else:
        results = Parallel(n_jobs=config.n_jobs)(
            delayed(evaluate_model)(k, hp, train, test, censor_curve, config)
            for k, hp in enumerate(grid)
        )
    results.sort(key=lambda r: r.index)
    cube = PredictionCube.from_risks(
        np.vstack([r.cube_row for r in results]),
        [r.performance for r in results],
        [r.hyperparams.label for r in results],
    )
    return cube, results


# --------------------------------------------------------------------------
# stage 3: Rashomon characteristics and sweep
# --------------------------------------------------------------------------

def rashomon_characteristics(cube: PredictionCube, c_indices, eps_grid):
    """Per epsilon: set size, membership-score range and c-index range."""
    c_indices = np.asarray(c_indices, dtype=np.float64)
    values = cube.performance_values
    out = []
    for eps in eps_grid:
        sel = rashomon_set(cube.performances, cube.reference_index, eps)
        idx = list(sel.member_indices)
        out.append({
            "epsilon": float(eps),
            "rashomon_size": sel.size,
            "metric": cube.performances[0].metric_kind,
            "performance_min": float(values[idx].min()),
            "performance_max": float(values[idx].max()),
            "c_index_min": float(c_indices[idx].min()),
            "c_index_max": float(c_indices[idx].max()),
        })
    return out


# --------------------------------------------------------------------------
# file formats
# --------------------------------------------------------------------------

def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_scores(results, path, config_hash: str) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(SCORE_FIELDS)
        for r in results:
            w.writerow([r.index, r.hyperparams.label, r.seed, fmt(r.brier), fmt(r.c_index),
                        config_hash])


def read_scores(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0]) != SCORE_FIELDS:
        raise FormatError(f"{path} is not a scores file")
    return {
        "model_id": [r["model_id"] for r in rows],
        "brier": np.array([float(r["brier"]) for r in rows]),
        "c_index": np.array([float(r["c_index"]) for r in rows]),
    }


def write_report_csv(report: MultiplicityReport, path, config_hash: str) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(REPORT_FIELDS)
        for r in report.rows:
            w.writerow([report.dataset_id, fmt(r.epsilon), fmt(r.delta), fmt(r.ambiguity),
                        fmt(r.discrepancy), fmt(r.obscurity), r.rashomon_size, config_hash])


def read_report_csv(path) -> MultiplicityReport:
    """Read ``report_<subset>.csv`` back into a :class:`MultiplicityReport`."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        raise
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise FormatError(f"cannot read report {path}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path} holds no report rows")
    if set(REPORT_FIELDS) - set(rows[0]):
        raise FormatError(f"{path} is missing report columns")
    datasets = {r["dataset"] for r in rows}
    if len(datasets) != 1:
        raise FormatError(f"{path} mixes datasets {sorted(datasets)}")
    try:
        parsed = [
            ReportRow(float(r["epsilon"]), float(r["delta"]), float(r["ambiguity"]),
                      float(r["discrepancy"]), float(r["obscurity"]), int(r["rashomon_size"]))
            for r in rows
        ]
    except (TypeError, ValueError) as exc:
        raise FormatError(f"corrupt value in {path}: {exc}") from exc
    return MultiplicityReport(tuple(parsed), datasets.pop())


def write_rashomon_csv(subset, chars, path, config_hash) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(RASHOMON_FIELDS)
        for c in chars:
            w.writerow([subset, fmt(c["epsilon"]), c["rashomon_size"], c["metric"],
                        fmt(c["performance_min"]), fmt(c["performance_max"]),
                        fmt(c["c_index_min"]), fmt(c["c_index_max"]), config_hash])


def write_heatmaps(report: MultiplicityReport, out: Path, subset: str, config_hash: str):
    paths = []
    for metric in METRICS:
        path = out / f"heatmap_{subset}_{metric}.svg"
        plot_heatmap(report, metric, path, provenance=f"config_hash={config_hash}")
        paths.append(path)
    return paths


# --------------------------------------------------------------------------
# stage drivers
# --------------------------------------------------------------------------

class Experiment:
    """Runs the stages for one configuration, reading and writing ``config.out``."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out = Path(config.out)
        self.hash = config.config_hash()

    def path(self, kind, subset, suffix="csv") -> Path:
        return self.out / f"{kind}_{subset}.{suffix}"

    def _start(self):
        self.out.mkdir(parents=True, exist_ok=True)
        self.config.dump(self.out / "config_resolved.yaml")

    def ingest(self, subset):
        self._start()
        train, test, removed = prepare_subset(self.config, subset)
        cmapss.write_survival_csv(train, self.path("train", subset), provenance=self.hash)
        cmapss.write_survival_csv(test, self.path("test", subset), provenance=self.hash)
        if removed:
            logger.info("%s: removed constant features %s", subset, ", ".join(removed))
        return train, test, removed

    def _split(self, subset):
        tr, te = self.path("train", subset), self.path("test", subset)
        if tr.exists() and te.exists():
            return cmapss.read_survival_csv(tr), cmapss.read_survival_csv(te)
        train, test, _ = self.ingest(subset)
        return train, test

    def train(self, subset):
        self._start()
        train, test = self._split(subset)
        cube, results = train_grid(train, test, self.config)
        save_cube(cube, self.path("cube", subset, "txt"), provenance=self.hash)
        write_scores(results, self.path("scores", subset), self.hash)
        return cube, results

    def _cube(self, subset):
        path = self.path("cube", subset, "txt")
        if path.exists():
            return load_cube(path)
        cube, _ = self.train(subset)
        return cube

    def analyze(self, subset):
        self._start()
        cube = self._cube(subset)
        scores = read_scores(self.path("scores", subset))
        chars = rashomon_characteristics(cube, scores["c_index"], self.config.epsilon_grid)
        write_rashomon_csv(subset, chars, self.path("rashomon", subset), self.hash)
        return chars

    def sweep(self, subset) -> MultiplicityReport:
        self._start()
        cube = self._cube(subset)
        report = sweep(cube, self.config.epsilon_grid, self.config.delta_grid, subset)
        write_report_csv(report, self.path("report", subset), self.hash)
        write_heatmaps(report, self.out, subset, self.hash)
        return report

    def run(self) -> dict:
        """All stages for every configured subset.

        An ``INCOMPLETE`` marker sits in the output directory until every
        subset has finished; on failure it records the error.
        """
        self._start()
        marker = self.out / INCOMPLETE_MARKER
        marker.write_text("run in progress\n")
        reports = {}
        try:
            for subset in self.config.datasets:
                logger.info("%s: ingest", subset)
                self.ingest(subset)
                logger.info("%s: train grid", subset)
                self.train(subset)
                self.analyze(subset)
                reports[subset] = self.sweep(subset)
        except Exception as exc:
            marker.write_text(f"run failed: {type(exc).__name__}: {exc}\n")
            raise
        marker.unlink()
        return reports


def run_experiment(config: ExperimentConfig) -> dict:
    """Full pipeline; returns ``{subset: MultiplicityReport}``."""
    return Experiment(config).run()
