import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from survmult.cmapss import (
    CANONICAL_UNIT_COUNTS,
    CHANNELS,
    CensoringPolicy,
    RawTelemetry,
    drop_constant_features,
    parse_cmapss,
    read_survival_csv,
    split_train_test,
    to_survival,
    write_cmapss,
    write_survival_csv,
)
from survmult.exceptions import DomainError, FormatError, ParseError
from survmult.simulate import CONSTANT_CHANNELS_SINGLE_CONDITION, simulate_cmapss
from survmult.survival_core import SurvivalDataset


def make_raw(lengths, fill=None):
    """Telemetry for units 1..k with the given cycle counts."""
    units, cycles, blocks = [], [], []
    for u, life in enumerate(lengths, start=1):
        c = np.arange(1, life + 1)
        block = np.tile(c[:, None].astype(float), (1, len(CHANNELS))) if fill is None \
            else np.full((life, len(CHANNELS)), fill)
        units.append(np.full(life, u))
        cycles.append(c)
        blocks.append(block)
    return RawTelemetry(np.concatenate(units), np.concatenate(cycles), np.vstack(blocks), "FD001")


class TestParse:
    def test_round_trip(self, tmp_path):
        raw = simulate_cmapss("FD003", seed=1, n_units=5)
        write_cmapss(raw, tmp_path / "train_FD003.txt")
        back = parse_cmapss(tmp_path / "train_FD003.txt", "FD003")
        assert_array_equal(back.unit_number, raw.unit_number)
        assert_array_equal(back.time_in_cycles, raw.time_in_cycles)
        assert back.channels.tobytes() == raw.channels.tobytes()

    def test_empty_file(self, tmp_path):
        (tmp_path / "e.txt").write_text("")
        with pytest.raises(FormatError):
            parse_cmapss(tmp_path / "e.txt", "FD001")

    def test_column_count(self, tmp_path):
        (tmp_path / "bad.txt").write_text("1 1 " + "0 " * 10 + "\n")
        with pytest.raises(FormatError):
            parse_cmapss(tmp_path / "bad.txt", "FD001")

    def test_bad_number_has_line(self, tmp_path):
        good = "1 1 " + " ".join(["0.5"] * 24)
        bad = "1 2 " + " ".join(["0.5"] * 23 + ["x"])
        (tmp_path / "bad.txt").write_text(good + "\n" + bad + "\n")
        with pytest.raises(ParseError) as info:
            parse_cmapss(tmp_path / "bad.txt", "FD001")
        assert info.value.line == 2

    def test_cycle_gap(self, tmp_path):
        rows = ["1 1 " + " ".join(["0"] * 24), "1 3 " + " ".join(["0"] * 24)]
        (tmp_path / "gap.txt").write_text("\n".join(rows) + "\n")
        with pytest.raises(FormatError):
            parse_cmapss(tmp_path / "gap.txt", "FD001")

    def test_unknown_subset(self, tmp_path):
        with pytest.raises(DomainError):
            parse_cmapss(tmp_path / "x.txt", "FD009")


class TestToSurvival:
    def test_censoring_examples(self):
        ds = to_survival(make_raw([300, 192, 250]), CensoringPolicy(250))
        assert_array_equal(ds.times, [250, 192, 250])
        assert_array_equal(ds.events, [0, 1, 1])
        assert list(ds.ids) == [1, 2, 3]

    def test_arithmetic_window(self):
        ds = to_survival(make_raw([40]), feature_window=30)
        means = ds.features[0, :len(CHANNELS)]
        slopes = ds.features[0, len(CHANNELS):]
        assert_allclose(means, 15.5, atol=1e-12)
        assert_allclose(slopes, 1.0, atol=1e-12)
        assert ds.feature_names[0] == "op_set_1_mean"
        assert ds.feature_names[len(CHANNELS)] == "op_set_1_slope"

    def test_no_leakage(self, rng):
        raw = simulate_cmapss("FD001", seed=2, n_units=6)
        base = to_survival(raw)
        late = raw.time_in_cycles > 30
        noisy = raw.channels.copy()
        noisy[late] += rng.normal(0, 100, size=noisy[late].shape)
        perturbed = RawTelemetry(raw.unit_number, raw.time_in_cycles, noisy, "FD001")
        assert to_survival(perturbed).features.tobytes() == base.features.tobytes()

    def test_short_unit(self):
        raw = make_raw([40, 10])
        assert to_survival(raw).n == 1
        with pytest.raises(DomainError):
            to_survival(raw, on_short="error")

    def test_policy_validation(self):
        with pytest.raises(DomainError):
            CensoringPolicy(0)

    def test_event_iff_not_censored(self):
        raw = simulate_cmapss("FD001", seed=0, n_units=40)
        ds = to_survival(raw)
        final = np.array([raw.time_in_cycles[raw.unit_rows(u)].max() for u in ds.ids])
        assert_array_equal(ds.events == 0, final > 250)
        assert np.all(ds.times[ds.events == 0] == 250)


class TestDropConstant:
    def test_constant_column_removed(self):
        X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        ds = SurvivalDataset(X, [1, 2, 3], [1, 1, 1], ("a", "b"))
        out, removed = drop_constant_features(ds)
        assert removed == ("b",) and out.feature_names == ("a",)

    def test_zero_tolerance_keeps_two_values(self):
        X = np.array([[1.0], [1.0], [1.0 + 1e-9]])
        out, removed = drop_constant_features(SurvivalDataset(X, [1, 2, 3], [1, 1, 1]), 0.0)
        assert removed == () and out.d == 1

    def test_all_constant(self):
        with pytest.raises(DomainError):
            drop_constant_features(SurvivalDataset(np.ones((3, 2)), [1, 2, 3], [1, 1, 1]))

    def test_simulated_single_condition_flags(self):
        ds = to_survival(simulate_cmapss("FD001", seed=0))
        _, removed = drop_constant_features(ds)
        expected = {f"{ch}_{kind}" for ch in CONSTANT_CHANNELS_SINGLE_CONDITION
                    for kind in ("mean", "slope")}
        assert set(removed) == expected
        assert {"op_set_3_mean", "sensor_1_mean"} <= set(removed)


class TestSplit:
    def dataset(self, n):
        return SurvivalDataset(np.arange(n, dtype=float)[:, None], np.arange(1, n + 1.0),
                               np.ones(n, dtype=int))

    def test_eighty_twenty(self):
        train, test = split_train_test(self.dataset(100), 0.8, seed=0)
        assert (train.n, test.n) == (80, 20)
        assert set(train.ids).isdisjoint(test.ids)
        assert set(train.ids) | set(test.ids) == set(range(100))

    def test_deterministic(self):
        a, _ = split_train_test(self.dataset(50), 0.8, seed=3)
        b, _ = split_train_test(self.dataset(50), 0.8, seed=3)
        c, _ = split_train_test(self.dataset(50), 0.8, seed=4)
        assert_array_equal(a.ids, b.ids)
        assert not np.array_equal(a.ids, c.ids)

    def test_empty_side(self):
        with pytest.raises(DomainError):
            split_train_test(self.dataset(2), 0.999)
        with pytest.raises(DomainError):
            split_train_test(self.dataset(10), 1.0)


class TestSurvivalCsv:
    def test_round_trip(self, tmp_path):
        ds = to_survival(simulate_cmapss("FD002", seed=0, n_units=8))
        write_survival_csv(ds, tmp_path / "s.csv", provenance="deadbeef")
        assert (tmp_path / "s.csv").read_text().startswith("# config_hash=deadbeef\n")
        back = read_survival_csv(tmp_path / "s.csv")
        assert back.features.tobytes() == ds.features.tobytes()
        assert_array_equal(back.times, ds.times)
        assert_array_equal(back.events, ds.events)
        assert back.feature_names == ds.feature_names
        assert_array_equal(back.ids, ds.ids)

    def test_bad_header(self, tmp_path):
        (tmp_path / "s.csv").write_text("a,b\n1,2\n")
        with pytest.raises(FormatError):
            read_survival_csv(tmp_path / "s.csv")


class TestSimulator:
    @pytest.mark.parametrize("subset", sorted(CANONICAL_UNIT_COUNTS))
    def test_layout(self, subset):
        raw = simulate_cmapss(subset, seed=0)
        assert raw.units.size == CANONICAL_UNIT_COUNTS[subset]
        assert raw.channels.shape[1] == 24
        ds = to_survival(raw)
        assert ds.n == raw.units.size
        assert 0 < np.mean(ds.events == 0) < 0.5

    def test_deterministic(self):
        a = simulate_cmapss("FD001", seed=5, n_units=3)
        b = simulate_cmapss("FD001", seed=5, n_units=3)
        assert a.channels.tobytes() == b.channels.tobytes()
