"""CMAPSS turbofan run-to-failure files as survival data.

Each raw training file is whitespace separated with 26 columns: unit number,
cycle, three operational settings and 21 sensors. Every engine becomes one
survival observation: its time is the last recorded cycle, administratively
censored at ``censor_time``, and its features summarize only the first
``feature_window`` cycles (per-channel mean and least-squares slope), so the
features never see the outcome.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DomainError, FormatError, ParseError
from .survival_core import SurvivalDataset

logger = logging.getLogger(__name__)

__all__ = [
    "SUBSETS",
    "CHANNELS",
    "COLUMNS",
    "CANONICAL_UNIT_COUNTS",
    "RawTelemetry",
    "CensoringPolicy",
    "parse_cmapss",
    "write_cmapss",
    "raw_path",
    "to_survival",
    "drop_constant_features",
    "split_train_test",
    "write_survival_csv",
    "read_survival_csv",
]

SUBSETS = ("FD001", "FD002", "FD003", "FD004")
CHANNELS = tuple([f"op_set_{k}" for k in range(1, 4)] + [f"sensor_{k}" for k in range(1, 22)])
COLUMNS = ("unit_number", "time_in_cycles") + CHANNELS
CANONICAL_UNIT_COUNTS = {"FD001": 100, "FD002": 260, "FD003": 100, "FD004": 260}


@dataclass(frozen=True, eq=False)
class RawTelemetry:
    """Parsed telemetry of one CMAPSS subset, rows in file order."""

    unit_number: np.ndarray
    time_in_cycles: np.ndarray
    channels: np.ndarray
    subset_id: str

    @property
    def units(self) -> np.ndarray:
        return np.unique(self.unit_number)

    def __len__(self):
        return self.unit_number.size

    def unit_rows(self, unit) -> np.ndarray:
        rows = np.flatnonzero(self.unit_number == unit)
        return rows[np.argsort(self.time_in_cycles[rows], kind="stable")]


@dataclass(frozen=True)
class CensoringPolicy:
    censor_time: float = 250.0

    def __post_init__(self):
        if not self.censor_time > 0:
            raise DomainError(f"censor_time must be positive, got {self.censor_time}")


def raw_path(data_dir, subset_id) -> Path:
    """Location of the training file for ``subset_id`` inside ``data_dir``."""
    return Path(data_dir) / f"train_{subset_id}.txt"


def parse_cmapss(path, subset_id: str) -> RawTelemetry:
    """Read a CMAPSS training file.

    Raises
    ------
    FormatError
        Empty file, a row without 26 columns, or cycle numbering that does not
        run 1, 2, 3, ... within a unit.
    ParseError
        A field that is not a number (``line`` holds the 1-based line number).
    """
    if subset_id not in SUBSETS:
        raise DomainError(f"unknown subset {subset_id!r}; expected one of {SUBSETS}")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != len(COLUMNS):
                raise FormatError(
                    f"{path}:{lineno}: expected {len(COLUMNS)} columns, got {len(fields)}"
                )
            try:
                rows.append([float(v) for v in fields])
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
    if not rows:
        raise FormatError(f"{path} contains no records")
    table = np.array(rows)
    unit = table[:, 0]
    cycle = table[:, 1]
    if np.any(unit != np.round(unit)) or np.any(cycle != np.round(cycle)):
        raise FormatError(f"{path}: unit numbers and cycles must be integers")
    raw = RawTelemetry(unit.astype(np.int64), cycle.astype(np.int64), table[:, 2:], subset_id)
    for u in raw.units:
        cycles = raw.time_in_cycles[raw.unit_rows(u)]
        if not np.array_equal(cycles, np.arange(1, cycles.size + 1)):
            raise FormatError(f"{path}: unit {u} cycles do not run 1..{cycles.size} without gaps")
    return raw


def write_cmapss(raw: RawTelemetry, path) -> None:
    """Write telemetry in the raw CMAPSS layout (space separated, no header)."""
    with open(path, "w") as fh:
        for u, c, ch in zip(raw.unit_number, raw.time_in_cycles, raw.channels):
            fh.write(f"{u} {c} " + " ".join(repr(float(v)) for v in ch) + "\n")


def _window_summary(values: np.ndarray):
    """Column means and least-squares slopes against cycle index 1..w."""
    w = values.shape[0]
    x = np.arange(1, w + 1, dtype=np.float64)
    xc = x - x.mean()
    mean = values.mean(axis=0)
    slope = (xc @ (values - mean)) / (xc @ xc) if w > 1 else np.zeros(values.shape[1])
    return mean, slope


def to_survival(raw: RawTelemetry, policy: CensoringPolicy = CensoringPolicy(),
                feature_window: int = 30, on_short: str = "skip") -> SurvivalDataset:
    """One survival observation per engine.

    ``on_short`` controls engines with fewer than ``feature_window`` cycles:
    ``"skip"`` drops them with a warning, ``"error"`` raises.
    """
    if feature_window < 1:
        raise DomainError("feature_window must be a positive integer")
    if on_short not in ("skip", "error"):
        raise DomainError(f"on_short must be 'skip' or 'error', got {on_short!r}")
    names = [f"{ch}_mean" for ch in CHANNELS] + [f"{ch}_slope" for ch in CHANNELS]
    feats, times, events, ids = [], [], [], []
    for u in raw.units:
        rows = raw.unit_rows(u)
        if rows.size < feature_window:
            msg = f"unit {u} has {rows.size} cycles, fewer than feature_window={feature_window}"
            if on_short == "error":
                raise DomainError(msg)
            logger.warning("skipping %s", msg)
            continue
        mean, slope = _window_summary(raw.channels[rows[:feature_window]])
        last = float(raw.time_in_cycles[rows].max())
        if last > policy.censor_time:
            times.append(float(policy.censor_time))
            events.append(0)
        else:
            times.append(last)
            events.append(1)
        feats.append(np.concatenate([mean, slope]))
        ids.append(int(u))
    if not ids:
        raise DomainError("no unit is long enough to build features")
    return SurvivalDataset(np.array(feats), times, events, tuple(names), np.array(ids))


def drop_constant_features(data: SurvivalDataset, tolerance: float = 1e-12):
    """Remove feature columns whose sample variance is ``<= tolerance``.

    Returns the reduced dataset and the tuple of removed feature names.
    """
    if tolerance < 0:
        raise DomainError("tolerance must be non-negative")
    var = data.features.var(axis=0, ddof=1) if data.n > 1 else np.zeros(data.d)
    keep = var > tolerance
    if not np.any(keep):
        raise DomainError("every feature column is constant")
    removed = tuple(name for name, k in zip(data.feature_names, keep) if not k)
    kept = [name for name, k in zip(data.feature_names, keep) if k]
    return data.select_features(kept), removed


def split_train_test(data: SurvivalDataset, ratio: float = 0.8, seed: int = 0):
    """Seeded shuffle of observations; the first ``ceil(ratio * n)`` train."""
    if not 0.0 < ratio < 1.0:
        raise DomainError(f"ratio must lie in (0, 1), got {ratio}")
    n_train = math.ceil(ratio * data.n)
    if n_train == 0 or n_train == data.n:
        raise DomainError(
            f"ratio {ratio} on {data.n} observations leaves one side of the split empty"
        )
    perm = np.random.default_rng(seed).permutation(data.n)
    return data.subset(perm[:n_train]), data.subset(perm[n_train:])


def write_survival_csv(data: SurvivalDataset, path, provenance=None) -> None:
    """Delimited text with header ``unit, <features...>, time, event``.

    ``provenance`` is written as a leading ``# config_hash=...`` comment line.
    """
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# config_hash={provenance}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["unit", *data.feature_names, "time", "event"])
        for i in range(data.n):
            writer.writerow(
                [str(data.ids[i]), *(repr(float(v)) for v in data.features[i]),
                 repr(float(data.times[i])), str(int(data.events[i]))]
            )


def read_survival_csv(path) -> SurvivalDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path} is empty") from None
        if len(header) < 4 or header[0] != "unit" or header[-2:] != ["time", "event"]:
            raise FormatError(f"{path}: header must be unit, <features>, time, event")
        ids, feats, times, events = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                ids.append(int(row[0]))
                feats.append([float(v) for v in row[1:-2]])
                times.append(float(row[-2]))
                events.append(int(row[-1]))
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
    if not ids:
        raise FormatError(f"{path} has a header but no rows")
    return SurvivalDataset(np.array(feats), times, events, tuple(header[1:-2]), np.array(ids))
