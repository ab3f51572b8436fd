"""Rashomon sets and predictive multiplicity of survival risk estimates.

A :class:`PredictionCube` holds the risk every candidate model assigns to
every test observation at that observation's own recorded time, together
with each model's performance score. The Rashomon set of tolerance
``epsilon`` collects all models scoring within ``epsilon`` of the best one,
the reference model included. A prediction *conflicts* when it differs from
the reference model's prediction for the same observation by at least
``delta``.

- ambiguity: share of observations with a conflict under at least one member
- discrepancy: largest share of conflicting observations for a single member
- obscurity: mean over observations of the share of members that conflict
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import DomainError, FormatError
from .metrics import PerformanceScore

__all__ = [
    "PredictionCube",
    "RashomonSelection",
    "MultiplicityReport",
    "ReportRow",
    "select_reference",
    "rashomon_set",
    "build_prediction_cube",
    "conflict_matrix",
    "ambiguity",
    "discrepancy",
    "obscurity",
    "sweep",
    "save_cube",
    "load_cube",
]

CUBE_FORMAT_VERSION = 1


def _orientation(performances: Sequence[PerformanceScore]) -> str:
    kinds = {p.orientation for p in performances}
    if len(kinds) != 1:
        raise DomainError(f"performances mix orientations: {sorted(kinds)}")
    return kinds.pop()


def select_reference(performances: Sequence[PerformanceScore]) -> int:
    """Index of the best-scoring model; the lowest index wins ties."""
    if len(performances) == 0:
        raise DomainError("no performances to choose a reference from")
    orientation = _orientation(performances)
    values = np.array([p.value for p in performances])
    if orientation == "lower_is_better":
        return int(np.argmin(values))
    return int(np.argmax(values))


@dataclass(frozen=True, eq=False)
class PredictionCube:
    risks: np.ndarray
    performances: tuple
    model_ids: tuple
    reference_index: int

    def __post_init__(self):
        risks = np.array(self.risks, dtype=np.float64)
        if risks.ndim != 2 or risks.shape[0] < 1 or risks.shape[1] < 1:
            raise DomainError(f"risks must be a non-empty m x n matrix, got {risks.shape}")
        if not np.all((risks >= 0) & (risks <= 1)):
            raise DomainError("risk entries must lie in [0, 1]")
        m = risks.shape[0]
        perfs = tuple(self.performances)
        ids = tuple(str(i) for i in self.model_ids)
        if len(perfs) != m or len(ids) != m:
            raise DomainError(
                f"{m} model rows but {len(perfs)} performances and {len(ids)} ids"
            )
        if int(self.reference_index) != select_reference(perfs):
            raise DomainError("reference_index is not the best-performing model")
        risks.setflags(write=False)
        object.__setattr__(self, "risks", risks)
        object.__setattr__(self, "performances", perfs)
        object.__setattr__(self, "model_ids", ids)
        object.__setattr__(self, "reference_index", int(self.reference_index))

    @classmethod
    def from_risks(cls, risks, performances, model_ids=None) -> "PredictionCube":
        """Build a cube, choosing the reference from ``performances``."""
        performances = tuple(performances)
        if model_ids is None:
            model_ids = [str(k) for k in range(len(performances))]
        return cls(risks, performances, model_ids, select_reference(performances))

    @property
    def m(self) -> int:
        return self.risks.shape[0]

    @property
    def n(self) -> int:
        return self.risks.shape[1]

    @property
    def performance_values(self) -> np.ndarray:
        return np.array([p.value for p in self.performances])

    @property
    def orientation(self) -> str:
        return self.performances[0].orientation


@dataclass(frozen=True)
class RashomonSelection:
    epsilon: float
    member_indices: tuple
    performance_bound: float
    reference_index: int

    @property
    def size(self) -> int:
        return len(self.member_indices)


def rashomon_set(performances: Sequence[PerformanceScore], reference: int,
                 epsilon: float) -> RashomonSelection:
    """Models within ``epsilon`` (absolute) of the reference model's score.

    For lower-is-better scores the bound is ``perf[reference] + epsilon``;
    for higher-is-better scores it is ``perf[reference] - epsilon``.
    """
    if not epsilon >= 0:
        raise DomainError(f"epsilon must be non-negative, got {epsilon}")
    orientation = _orientation(performances)
    values = np.array([p.value for p in performances])
    if orientation == "lower_is_better":
        bound = values[reference] + epsilon
        members = values <= bound
    else:
        bound = values[reference] - epsilon
        members = values >= bound
    members[reference] = True
    return RashomonSelection(
        float(epsilon), tuple(int(k) for k in np.flatnonzero(members)),
        float(bound), int(reference),
    )


def build_prediction_cube(models, test, performances, times=None) -> PredictionCube:
    """Risk of every model for every test row, evaluated at the row's own time.

    ``times`` overrides the evaluation times (a common horizon, for
    sensitivity analysis); by default each row uses ``test.times[i]``.
    """
    performances = tuple(performances)
    if len(models) != len(performances):
        raise DomainError(f"{len(models)} models but {len(performances)} performances")
    at = test.times if times is None else np.broadcast_to(
        np.asarray(times, dtype=np.float64), (test.n,)
    )
    rows = []
    for k, model in enumerate(models):
        try:
            rows.append(model.risk(test.features, at))
        except Exception as exc:
            raise type(exc)(f"model {k}: {exc}") from exc
    ids = [getattr(m, "hyperparams", None) for m in models]
    ids = [hp.label if hp is not None else str(k) for k, hp in enumerate(ids)]
    return PredictionCube.from_risks(np.vstack(rows), performances, ids)


def _check(cube: PredictionCube, members: RashomonSelection, delta: float):
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if members.reference_index != cube.reference_index:
        raise DomainError("selection was built for a different reference model")
    idx = np.asarray(members.member_indices, dtype=np.int64)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= cube.m:
        raise DomainError("member indices do not fit the cube")
    return idx


def conflict_matrix(cube: PredictionCube, members: RashomonSelection,
                    delta: float) -> np.ndarray:
    """Boolean ``|members| x n`` matrix: member ``k`` conflicts on observation ``i``."""
    idx = _check(cube, members, delta)
    reference = cube.risks[cube.reference_index]
    return np.abs(cube.risks[idx] - reference) >= delta


# Each metric is a ratio of integer conflict counts divided once, so the
# result is the correctly rounded value regardless of summation order.

def ambiguity(cube, members, delta) -> float:
    C = conflict_matrix(cube, members, delta)
    return int(np.count_nonzero(C.any(axis=0))) / C.shape[1]


def discrepancy(cube, members, delta) -> float:
    C = conflict_matrix(cube, members, delta)
    return int(np.count_nonzero(C, axis=1).max()) / C.shape[1]


def obscurity(cube, members, delta) -> float:
    C = conflict_matrix(cube, members, delta)
    return int(np.count_nonzero(C)) / (C.shape[0] * C.shape[1])


@dataclass(frozen=True)
class ReportRow:
    epsilon: float
    delta: float
    ambiguity: float
    discrepancy: float
    obscurity: float
    rashomon_size: int


@dataclass(frozen=True)
class MultiplicityReport:
    rows: tuple
    dataset_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        for r in self.rows:
            if not all(0.0 <= v <= 1.0 for v in (r.ambiguity, r.discrepancy, r.obscurity)):
                raise DomainError(f"metric out of [0, 1] in row {r}")
            if r.rashomon_size < 1:
                raise DomainError(f"empty Rashomon set in row {r}")

    def cell(self, epsilon, delta) -> ReportRow:
        for r in self.rows:
            if r.epsilon == epsilon and r.delta == delta:
                return r
        raise KeyError((epsilon, delta))


def sweep(cube: PredictionCube, eps_grid, delta_grid, dataset_id: str = "",
          n_jobs: Optional[int] = None) -> MultiplicityReport:
    """All three metrics for every ``(epsilon, delta)`` pair, eps-major order."""
    eps_grid = [float(e) for e in eps_grid]
    delta_grid = [float(d) for d in delta_grid]
    if not eps_grid or not delta_grid:
        raise DomainError("epsilon and delta grids must be non-empty")
    for name, grid in (("epsilon", eps_grid), ("delta", delta_grid)):
        if any(not 0.0 < v <= 1.0 for v in grid):
            raise DomainError(f"{name} grid values must lie in (0, 1]")
        if grid != sorted(grid):
            raise DomainError(f"{name} grid must be sorted")

    def one_eps(eps):
        members = rashomon_set(cube.performances, cube.reference_index, eps)
        return [
            ReportRow(eps, delta, ambiguity(cube, members, delta),
                      discrepancy(cube, members, delta),
                      obscurity(cube, members, delta), members.size)
            for delta in delta_grid
        ]

    if n_jobs is None or n_jobs == 1:
        blocks = [one_eps(e) for e in eps_grid]
    else:
        from joblib import Parallel, delayed
        blocks = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(one_eps)(e) for e in eps_grid
        )
    return MultiplicityReport(tuple(r for b in blocks for r in b), dataset_id)


# --------------------------------------------------------------------------
# cube file format
# --------------------------------------------------------------------------
#
#   survmult-cube 1
#   # free-text comment lines (provenance) may follow anywhere before 'risks'
#   m <m> n <n>
#   reference <index>
#   metric <kind> <orientation> <horizon|none>
#   model <id> <performance>          (m lines, tab separated)
#   risks
#   <n values per line>               (m lines, row-major)

def save_cube(cube: PredictionCube, path, provenance=None) -> None:
    first = cube.performances[0]
    horizon = "none" if first.horizon is None else repr(float(first.horizon))
    lines = [f"survmult-cube {CUBE_FORMAT_VERSION}"]
    if provenance:
        lines.append(f"# config_hash={provenance}")
    lines += [
        f"m {cube.m} n {cube.n}",
        f"reference {cube.reference_index}",
        f"metric {first.metric_kind} {first.orientation} {horizon}",
    ]
    for mid, perf in zip(cube.model_ids, cube.performances):
        lines.append(f"model\t{mid}\t{perf.value!r}")
    lines.append("risks")
    for row in cube.risks:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_cube(path) -> PredictionCube:
    lines = [line for line in Path(path).read_text().splitlines()
             if not line.startswith("#")]
    try:
        magic, version = lines[0].split()
        if magic != "survmult-cube":
            raise FormatError(f"{path} is not a prediction cube file")
        if int(version) != CUBE_FORMAT_VERSION:
            raise FormatError(f"unsupported cube format version {version}")
        _, m, _, n = lines[1].split()
        m, n = int(m), int(n)
        reference = int(lines[2].split()[1])
        _, kind, _orient, horizon = lines[3].split()
        horizon = None if horizon == "none" else float(horizon)
        ids, perfs = [], []
        for line in lines[4:4 + m]:
            tag, mid, value = line.split("\t")
            if tag != "model":
                raise FormatError(f"expected a model line, got {line!r}")
            ids.append(mid)
            perfs.append(PerformanceScore(float(value), kind, horizon=horizon))
        if lines[4 + m] != "risks":
            raise FormatError("missing 'risks' section")
        risks = np.array([[float(v) for v in line.split()]
                          for line in lines[5 + m:5 + 2 * m]])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"corrupt cube file {path}: {exc}") from exc
    if risks.shape != (m, n):
        raise FormatError(f"cube body has shape {risks.shape}, header says {(m, n)}")
    return PredictionCube(risks, tuple(perfs), tuple(ids), reference)
