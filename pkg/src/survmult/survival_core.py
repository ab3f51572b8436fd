"""Survival data containers and the nonparametric estimators built on them.

Everything here is immutable and pure: a :class:`StepFunction` carries a
Kaplan-Meier survival curve, a Nelson-Aalen cumulative hazard, or a risk
curve; the estimators return new step functions and never modify inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DomainError

__all__ = [
    "SurvivalDataset",
    "StepFunction",
    "eval_step",
    "km_estimate",
    "reverse_km_censoring",
    "na_cumhaz",
    "risk_from_chf",
    "survival_from_risk",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Covariates plus right-censored outcomes, one row per observation.

    Parameters
    ----------
    features : array_like, shape (n, d)
    times : array_like, shape (n,)
        Event or censoring times (cycles), all non-negative.
    events : array_like, shape (n,)
        1 if the failure was observed at ``times[i]``, 0 if right-censored.
    feature_names : sequence of str, length d
    ids : array_like, shape (n,), optional
        Observation identifiers (engine unit numbers for CMAPSS). Defaults
        to ``0..n-1``.
    """

    features: np.ndarray
    times: np.ndarray
    events: np.ndarray
    feature_names: tuple = ()
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        t = np.array(self.times, dtype=np.float64).reshape(-1)
        e = np.asarray(self.events)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DomainError(f"features must be 2-D, got shape {X.shape}")
        n = t.shape[0]
        if n < 1:
            raise DomainError("a survival dataset needs at least one observation")
        if X.shape[0] != n or e.shape[0] != n:
            raise DomainError(
                f"length mismatch: features {X.shape[0]}, times {n}, events {e.shape[0]}"
            )
        if not np.all(np.isfinite(X)):
            raise DomainError("features contain missing or non-finite values")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise DomainError("times must be finite and non-negative")
        if not np.all((e == 0) | (e == 1)):
            raise DomainError("events must be 0 or 1")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DomainError(
                f"{len(names)} feature names for {X.shape[1]} feature columns"
            )
        ids = np.arange(n) if self.ids is None else np.array(self.ids).reshape(-1)
        if ids.shape[0] != n:
            raise DomainError("ids must have one entry per observation")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "events", _frozen(e.astype(np.int8)))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "ids", _frozen(ids))

    @property
    def n(self) -> int:
        return self.times.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "SurvivalDataset":
        """Rows selected by an index array or boolean mask."""
        rows = np.asarray(rows)
        return SurvivalDataset(
            self.features[rows], self.times[rows], self.events[rows],
            self.feature_names, self.ids[rows],
        )

    def select_features(self, names: Sequence[str]) -> "SurvivalDataset":
        """Keep only the named feature columns, in the given order."""
        index = {name: j for j, name in enumerate(self.feature_names)}
        missing = [name for name in names if name not in index]
        if missing:
            raise DomainError(f"unknown feature names: {missing}")
        cols = [index[name] for name in names]
        return SurvivalDataset(
            self.features[:, cols], self.times, self.events, tuple(names), self.ids
        )


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous piecewise-constant function of time.

    The value on ``[0, jump_times[0])`` is ``initial_value``; from
    ``jump_times[k]`` on it is ``values[k]`` until the next jump.
    """

    jump_times: np.ndarray
    values: np.ndarray
    initial_value: float = 0.0

    def __post_init__(self):
        x = np.array(self.jump_times, dtype=np.float64).reshape(-1)
        y = np.array(self.values, dtype=np.float64).reshape(-1)
        if x.shape != y.shape:
            raise DomainError("jump_times and values must have the same length")
        if np.any(x < 0) or np.any(np.diff(x) <= 0):
            raise DomainError("jump_times must be non-negative and strictly increasing")
        object.__setattr__(self, "jump_times", _frozen(x))
        object.__setattr__(self, "values", _frozen(y))
        object.__setattr__(self, "initial_value", float(self.initial_value))

    def __call__(self, t):
        """Evaluate at scalar or array ``t`` (all ``t >= 0``)."""
        t_arr = np.asarray(t, dtype=np.float64)
        if np.any(t_arr < 0) or np.any(np.isnan(t_arr)):
            raise DomainError(f"step functions are defined for t >= 0, got {t!r}")
        idx = np.searchsorted(self.jump_times, t_arr, side="right")
        padded = np.concatenate(([self.initial_value], self.values))
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def left_limit(self, t):
        """Value just before ``t``, i.e. ``lim_{s -> t-} f(s)``."""
        t_arr = np.asarray(t, dtype=np.float64)
        if np.any(t_arr < 0):
            raise DomainError(f"step functions are defined for t >= 0, got {t!r}")
        idx = np.searchsorted(self.jump_times, t_arr, side="left")
        padded = np.concatenate(([self.initial_value], self.values))
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def map(self, func) -> "StepFunction":
        """Apply an elementwise transform to every level of the function."""
        return StepFunction(
            self.jump_times, func(self.values), float(func(np.float64(self.initial_value)))
        )


def eval_step(fn: StepFunction, t: float) -> float:
    """Right-continuous evaluation of ``fn`` at ``t``."""
    return fn(t)


def _validate_outcomes(times, events):
    t = np.asarray(times, dtype=np.float64).reshape(-1)
    e = np.asarray(events).reshape(-1)
    if t.size == 0:
        raise DomainError("estimators need at least one observation")
    if t.shape != e.shape:
        raise DomainError(f"times ({t.size}) and events ({e.size}) differ in length")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("times must be finite and non-negative")
    if not np.all((e == 0) | (e == 1)):
        raise DomainError("events must be 0 or 1")
    return t, e.astype(np.int64)


def _risk_table(times, events):
    """Distinct event times with their event counts and at-risk counts.

    Subjects censored at an event time are still counted at risk there, which
    is the usual "events before censorings" convention.
    """
    t, e = _validate_outcomes(times, events)
    event_times, d = np.unique(t[e == 1], return_counts=True)
    t_sorted = np.sort(t)
    at_risk = t.size - np.searchsorted(t_sorted, event_times, side="left")
    return event_times, d.astype(np.float64), at_risk.astype(np.float64)


def km_estimate(times, events) -> StepFunction:
    """Kaplan-Meier product-limit estimate of the survival function."""
    u, d, r = _risk_table(times, events)
    return StepFunction(u, np.cumprod(1.0 - d / r), initial_value=1.0)


def reverse_km_censoring(times, events) -> StepFunction:
    """Kaplan-Meier estimate of the censoring survival curve ``G(t)``.

    Censorings play the role of events; used for inverse-probability-of-
    censoring weights.
    """
    t, e = _validate_outcomes(times, events)
    return km_estimate(t, 1 - e)


def na_cumhaz(times, events) -> StepFunction:
    """Nelson-Aalen cumulative hazard: running sum of ``d_j / r_j``."""
    u, d, r = _risk_table(times, events)
    return StepFunction(u, np.cumsum(d / r), initial_value=0.0)


def risk_from_chf(H: StepFunction, t):
    """Failure risk by time ``t`` from a cumulative hazard, ``1 - exp(-H(t))``."""
    return -np.expm1(-H(t))


def survival_from_risk(risk):
    """Survival probability ``1 - risk``."""
    r = np.asarray(risk, dtype=np.float64)
    if np.any(r < 0) or np.any(r > 1) or np.any(np.isnan(r)):
        raise DomainError(f"risk must lie in [0, 1], got {risk!r}")
    out = 1.0 - r
    return float(out) if out.ndim == 0 else out
