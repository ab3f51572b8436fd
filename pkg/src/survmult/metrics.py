"""Performance scores for survival predictions.

Brier scores use inverse probability of censoring weights (IPCW) from a
reverse Kaplan-Meier curve fitted on the training data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import DomainError, ScoringError, UndefinedResultError
from .survival_core import StepFunction, SurvivalDataset

__all__ = [
    "METRIC_ORIENTATION",
    "IBS_GRID_POINTS",
    "PerformanceScore",
    "brier_score",
    "integrated_brier",
    "c_index",
]

METRIC_ORIENTATION = {
    "brier_at_t": "lower_is_better",
    "integrated_brier": "lower_is_better",
    "c_index": "higher_is_better",
}

IBS_GRID_POINTS = 100


@dataclass(frozen=True)
class PerformanceScore:
    value: float
    metric_kind: str
    orientation: Optional[str] = None
    horizon: Optional[float] = None

    def __post_init__(self):
        if self.metric_kind not in METRIC_ORIENTATION:
            raise DomainError(f"unknown metric kind {self.metric_kind!r}")
        expected = METRIC_ORIENTATION[self.metric_kind]
        if self.orientation is None:
            object.__setattr__(self, "orientation", expected)
        elif self.orientation != expected:
            raise DomainError(
                f"{self.metric_kind} is {expected}, not {self.orientation}"
            )
        if not 0.0 <= self.value <= 1.0:
            raise DomainError(f"{self.metric_kind} value {self.value} is outside [0, 1]")
        object.__setattr__(self, "value", float(self.value))

    @property
    def lower_is_better(self) -> bool:
        return self.orientation == "lower_is_better"


def _ipcw_weights(times, events, t, censor_curve: StepFunction):
    """Per-observation IPCW weights and 0/1 status at horizon ``t``.

    - failure at ``t_i <= t``: weight ``1/G(t_i-)``, status 1
    - still under observation after ``t``: weight ``1/G(t)``, status 0
    - censored exactly at ``t``: known failure-free through ``t`` (events
      precede censorings at a tied time), weight ``1/G(t-)``, status 0
    - censored before ``t``: weight 0
    """
    n = times.size
    weights = np.zeros(n)
    status = np.zeros(n)

    failed = (times <= t) & (events == 1)
    survived = times > t
    censored_at_t = (times == t) & (events == 0)

    if np.any(failed):
        g = censor_curve.left_limit(times[failed])
        bad = g <= 0
        if np.any(bad):
            when = float(times[failed][bad][0])
            raise ScoringError(f"censoring survival G({when}-) is zero", time=when)
        weights[failed] = 1.0 / g
        status[failed] = 1.0
    if np.any(survived):
        g = censor_curve(t)
        if g <= 0:
            raise ScoringError(f"censoring survival G({t}) is zero", time=float(t))
        weights[survived] = 1.0 / g
    if np.any(censored_at_t):
        g = censor_curve.left_limit(t)
        if g <= 0:
            raise ScoringError(f"censoring survival G({t}-) is zero", time=float(t))
        weights[censored_at_t] = 1.0 / g
    return weights, status


def brier_score(risks, test: SurvivalDataset, t: float, censor_curve: StepFunction) -> float:
    """IPCW Brier score at horizon ``t``.

    ``risks[i]`` is the predicted probability that observation ``i`` fails by
    ``t``. The weighted squared errors are averaged over all ``n`` test rows;
    rows censored before ``t`` add zero.
    """
    if t < 0:
        raise DomainError(f"horizon must be non-negative, got {t}")
    risks = np.asarray(risks, dtype=np.float64).reshape(-1)
    if risks.size != test.n:
        raise DomainError(f"{risks.size} risks for {test.n} test observations")
    weights, status = _ipcw_weights(test.times, test.events, t, censor_curve)
    return float(np.mean(weights * (status - risks) ** 2))


def _horizon_grid(t_max, points):
    return t_max * np.arange(1, points + 1) / points


def integrated_brier(
    risk_curves: Sequence[StepFunction],
    test: SurvivalDataset,
    censor_curve: StepFunction,
    t_max: float,
    points: int = IBS_GRID_POINTS,
) -> float:
    """Time-averaged Brier score on ``points`` equally spaced horizons in ``(0, t_max]``.

    Trapezoidal rule, normalized by the span of the horizon grid so that a
    constant Brier curve integrates to that constant.
    """
    if not t_max > 0:
        raise DomainError(f"t_max must be positive, got {t_max}")
    if len(risk_curves) != test.n:
        raise DomainError(f"{len(risk_curves)} risk curves for {test.n} test observations")
    if points < 2:
        raise DomainError("integration needs at least two horizons")
    grid = _horizon_grid(float(t_max), points)
    risk_matrix = np.array([curve(grid) for curve in risk_curves])
    scores = np.array([
        brier_score(risk_matrix[:, k], test, grid[k], censor_curve)
        for k in range(grid.size)
    ])
    area = np.sum((scores[1:] + scores[:-1]) * np.diff(grid)) / 2.0
    return float(area / (grid[-1] - grid[0]))


def c_index(risks, test: SurvivalDataset) -> float:
    """Harrell's concordance index.

    A pair is comparable when the earlier time is an observed failure, or
    when both times tie and exactly one of them is a failure (that one counts
    as earlier). It is concordant when the earlier failure has the strictly
    higher risk; tied risks count one half.
    """
    risks = np.asarray(risks, dtype=np.float64).reshape(-1)
    if risks.size != test.n:
        raise DomainError(f"{risks.size} risks for {test.n} test observations")
    t = test.times
    e = test.events.astype(bool)
    # earlier[i, j]: i fails first and the pair is comparable
    earlier = e[:, None] & (
        (t[:, None] < t[None, :]) | ((t[:, None] == t[None, :]) & ~e[None, :])
    )
    n_pairs = earlier.sum()
    if n_pairs == 0:
        raise UndefinedResultError("no comparable pairs; the c-index is undefined")
    higher = risks[:, None] > risks[None, :]
    tied = risks[:, None] == risks[None, :]
    score = np.sum(earlier & higher) + 0.5 * np.sum(earlier & tied)
    return float(score / n_pairs)
