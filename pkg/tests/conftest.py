import os
from pathlib import Path

import numpy as np
import pytest

from survmult.survival_core import SurvivalDataset

REPO = Path(__file__).resolve().parents[1]


def canonical_data_dir():
    """Directory expected to hold the NASA train_FD00x.txt files."""
    return Path(os.environ.get("CMAPSS_DATA_DIR", REPO / "data" / "CMAPSSData"))


def random_dataset(rng, n, d, censor_frac=0.3, tie_grid=None):
    """Small random survival dataset; ``tie_grid`` rounds times to force ties."""
    X = rng.normal(size=(n, d))
    t = rng.exponential(10.0, size=n) + 0.1
    if tie_grid:
        t = np.round(t / tie_grid) * tie_grid + tie_grid
    e = (rng.random(n) > censor_frac).astype(int)
    return SurvivalDataset(X, t, e)


def random_cube(rng, max_m=10, max_n=20, kind="brier_at_t"):
    """Random prediction cube; risks on a 0.01 grid so conflicts hit the delta boundary."""
    from survmult.metrics import PerformanceScore
    from survmult.rashomon import PredictionCube

    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    if rng.random() < 0.5:
        risks = np.round(rng.random((m, n)), 2)
    else:
        risks = rng.random((m, n))
    perfs = [PerformanceScore(float(v), kind) for v in np.round(rng.random(m) * 0.3, 3)]
    return PredictionCube.from_risks(risks, perfs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# ---------------------------------------------------------------- acceptance

_criteria = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _criteria[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        outcome = _criteria[name]
        verdict = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{verdict:<7} {name}")
