"""Synthetic run-to-failure telemetry in the raw CMAPSS layout.

Useful when the NASA files are not at hand: the generator reproduces the
file structure (26 columns, cycles 1..T per unit), the unit counts of the
four subsets, the channels that are constant in the single-operating-
condition subsets FD001/FD003, and the six operating regimes of FD002/FD004.
Degradation follows a quadratic wear curve ``h(c) = w0 + r c^2``; a unit
fails when ``h`` reaches 1. Lifetimes are not calibrated to the real data.
"""

import numpy as np

from .cmapss import CANONICAL_UNIT_COUNTS, CHANNELS, SUBSETS, RawTelemetry
from .exceptions import DomainError

__all__ = ["simulate_cmapss", "CONSTANT_CHANNELS_SINGLE_CONDITION"]

# channel -> level, constant in FD001/FD003
CONSTANT_CHANNELS_SINGLE_CONDITION = {
    "op_set_3": 100.0,
    "sensor_1": 518.67,
    "sensor_5": 14.62,
    "sensor_10": 1.3,
    "sensor_16": 0.03,
    "sensor_18": 2388.0,
    "sensor_19": 100.0,
}

# (baseline, gain per unit of wear, noise sd) for the degrading sensors
_SENSOR_MODEL = {
    "sensor_2": (642.0, 3.0, 0.35),
    "sensor_3": (1585.0, 30.0, 4.5),
    "sensor_4": (1400.0, 45.0, 6.0),
    "sensor_6": (21.61, 0.0, 0.001),
    "sensor_7": (554.0, -4.5, 0.6),
    "sensor_8": (2388.05, 0.25, 0.05),
    "sensor_9": (9050.0, 60.0, 15.0),
    "sensor_11": (47.4, 1.8, 0.18),
    "sensor_12": (521.7, -4.0, 0.5),
    "sensor_13": (2388.05, 0.25, 0.05),
    "sensor_14": (8140.0, 40.0, 12.0),
    "sensor_15": (8.42, 0.12, 0.02),
    "sensor_17": (392.0, 5.0, 1.0),
    "sensor_20": (38.9, -0.7, 0.12),
    "sensor_21": (23.33, -0.45, 0.07),
}

# six flight regimes: (altitude-like, mach-like, throttle) settings and a
# multiplicative shift applied to every sensor baseline
_REGIMES = np.array([
    [0.0, 0.0, 100.0, 1.00],
    [10.0, 0.25, 100.0, 0.93],
    [20.0, 0.70, 100.0, 0.86],
    [25.0, 0.62, 60.0, 0.80],
    [35.0, 0.84, 100.0, 0.74],
    [42.0, 0.84, 100.0, 0.68],
])


def simulate_cmapss(subset_id: str, seed: int = 0, n_units=None) -> RawTelemetry:
    """Draw a synthetic training file for ``subset_id``."""
    if subset_id not in SUBSETS:
        raise DomainError(f"unknown subset {subset_id!r}")
    rng = np.random.default_rng([seed, SUBSETS.index(subset_id)])
    n_units = CANONICAL_UNIT_COUNTS[subset_id] if n_units is None else int(n_units)
    multi_condition = subset_id in ("FD002", "FD004")
    col = {name: j for j, name in enumerate(CHANNELS)}

    units, cycles, blocks = [], [], []
    for u in range(1, n_units + 1):
        w0 = rng.uniform(0.0, 0.6)
        rate = np.exp(rng.normal(np.log(1.55e-5), 0.15))
        life = int(np.floor(np.sqrt((1.0 - w0) / rate)))
        life = max(life, 31)
        c = np.arange(1, life + 1, dtype=np.float64)
        wear = w0 + rate * c ** 2
        block = np.zeros((life, len(CHANNELS)))
        if multi_condition:
            regime = _REGIMES[rng.integers(0, len(_REGIMES), size=life)]
            block[:, 0] = regime[:, 0] + rng.normal(0, 0.002, life)
            block[:, 1] = regime[:, 1] + rng.normal(0, 0.0002, life)
            block[:, 2] = regime[:, 2]
            shift = regime[:, 3]
        else:
            block[:, 0] = rng.normal(0, 0.0022, life)
            block[:, 1] = rng.normal(0, 0.0003, life)
            shift = np.ones(life)
        for name, level in CONSTANT_CHANNELS_SINGLE_CONDITION.items():
            if name == "op_set_3":
                if not multi_condition:
                    block[:, col[name]] = level
                continue
            block[:, col[name]] = level * shift
        for name, (base, gain, sd) in _SENSOR_MODEL.items():
            block[:, col[name]] = base * shift + gain * wear + rng.normal(0, sd, life)
        units.append(np.full(life, u))
        cycles.append(c.astype(np.int64))
        blocks.append(np.round(block, 4))

    return RawTelemetry(
        np.concatenate(units).astype(np.int64),
        np.concatenate(cycles),
        np.vstack(blocks),
        subset_id,
    )
