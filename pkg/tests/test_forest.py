import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from survmult.exceptions import DomainError
from survmult.forest import (
    HyperParams,
    fit_forest,
    fit_tree,
    load_forest,
    logrank_score_stat,
    logrank_stat,
    predict_chf,
    predict_risk,
    save_forest,
)
from survmult.survival_core import SurvivalDataset, na_cumhaz

from conftest import random_dataset
from oracles import logrank_brute, logrank_score_brute


def hp(**kw):
    base = dict(ntree=5, mtry=1, nodesize=3, nodedepth=3, splitrule="logrank", nsplit=5)
    base.update(kw)
    return HyperParams(**base)


def separated_dataset():
    X = np.array([[0.0]] * 6 + [[1.0]] * 6)
    t = np.array([1, 2, 2, 3, 4, 5, 20, 22, 25, 25, 30, 31], dtype=float)
    e = np.array([1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 0, 1])
    return SurvivalDataset(X, t, e)


class TestHyperParams:
    @pytest.mark.parametrize("field", ["ntree", "mtry", "nodesize", "nodedepth", "nsplit"])
    def test_positive(self, field):
        with pytest.raises(DomainError):
            hp(**{field: 0})

    def test_splitrule(self):
        with pytest.raises(DomainError):
            hp(splitrule="bs.gradient")

    def test_mtry_bound(self):
        with pytest.raises(DomainError):
            hp(mtry=3).check_dimension(2)

    def test_label(self):
        assert hp().label == "ntree=5/mtry=1/nodesize=3/nodedepth=3/splitrule=logrank/nsplit=5"


class TestSplitStatistics:
    same = ([1, 2, 3], [1, 1, 1])

    @pytest.mark.parametrize("stat", [logrank_stat, logrank_score_stat])
    def test_identical_groups_zero(self, stat):
        assert stat(self.same, self.same) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("stat", [logrank_stat, logrank_score_stat])
    def test_separated_positive(self, stat):
        assert stat(([1, 2], [1, 1]), ([10, 11], [1, 1])) > 0

    def test_logrank_interleaved_value(self):
        # O - E = 2/3 over the four event times, variance 13/18
        left, right = ([1, 3], [1, 1]), ([2, 4], [1, 1])
        expected = (2 / 3) / math.sqrt(13 / 18)
        assert logrank_stat(left, right) == pytest.approx(expected, abs=1e-12)
        assert logrank_brute(left, right) == pytest.approx(expected, abs=1e-12)

    def test_logrank_score_four_observations(self):
        left, right = ([1, 3], [1, 0]), ([2, 4], [1, 1])
        assert logrank_score_stat(left, right) == pytest.approx(
            logrank_score_brute(left, right), abs=1e-12)

    def test_no_events_zero(self):
        assert logrank_stat(([1, 2], [0, 0]), ([3], [0])) == 0.0
        assert logrank_score_stat(([1, 2], [0, 0]), ([3], [0])) == 0.0

    def test_matches_oracles_and_symmetry(self, rng):
        for _ in range(300):
            n1, n2 = rng.integers(1, 12, size=2)
            left = (rng.integers(1, 10, n1).astype(float), rng.integers(0, 2, n1))
            right = (rng.integers(1, 10, n2).astype(float), rng.integers(0, 2, n2))
            for stat, oracle in ((logrank_stat, logrank_brute),
                                 (logrank_score_stat, logrank_score_brute)):
                v = stat(left, right)
                assert v == pytest.approx(oracle(left, right), abs=1e-9)
                assert v == pytest.approx(stat(right, left), abs=1e-9)

    def test_empty_group_rejected(self):
        with pytest.raises(DomainError):
            logrank_stat(([], []), ([1], [1]))


class TestTree:
    def test_identical_features_single_leaf(self):
        ds = SurvivalDataset(np.ones((8, 2)), np.arange(1, 9.0), [1, 0] * 4)
        tree = fit_tree(ds, hp(mtry=2), 0)
        assert tree.n_nodes == 1 and tree.depth == 0
        H = na_cumhaz(ds.times, ds.events)
        assert_allclose(tree.leaf_chf[0](ds.times), H(ds.times), atol=0)

    def test_separating_feature(self):
        ds = separated_dataset()
        tree = fit_tree(ds, hp(nodedepth=1, nodesize=1), 0)
        assert tree.depth == 1 and len(tree.leaves) == 2
        grid = np.linspace(0, 40, 81)
        for group in (0.0, 1.0):
            sel = ds.features[:, 0] == group
            leaf = int(tree.apply([[group]])[0])
            H = na_cumhaz(ds.times[sel], ds.events[sel])
            assert_allclose(tree.leaf_chf[leaf](grid), H(grid), atol=1e-12, rtol=0)

    @pytest.mark.parametrize("splitrule", ["logrank", "logrankscore"])
    def test_structural_invariants(self, rng, splitrule):
        for _ in range(30):
            ds = random_dataset(rng, int(rng.integers(5, 60)), 3, tie_grid=1.0)
            h = hp(mtry=int(rng.integers(1, 4)), nodesize=int(rng.integers(1, 6)),
                   nodedepth=int(rng.integers(1, 5)), splitrule=splitrule)
            tree = fit_tree(ds, h, rng)
            assert tree.depth <= h.nodedepth
            for leaf in tree.leaves:
                assert tree.n_node[leaf] >= h.nodesize or tree.n_nodes == 1
                H = tree.leaf_chf[leaf]
                assert H.initial_value == 0.0
                assert np.all(np.diff(H.values) >= 0)
            # apply() routes every training row to a leaf whose count adds up
            counts = np.bincount(tree.apply(ds.features), minlength=tree.n_nodes)
            assert_array_equal(counts[tree.leaves], tree.n_node[tree.leaves])

    def test_nodedepth_one_binds(self, rng):
        ds = random_dataset(rng, 200, 4)
        assert fit_tree(ds, hp(nodedepth=1, nodesize=1, mtry=4), 0).depth <= 1


class TestForest:
    def test_single_tree_without_bootstrap_equals_fit_tree(self, rng):
        ds = random_dataset(rng, 40, 3)
        h = hp(ntree=1)
        forest = fit_forest(ds, h, 7, bootstrap=False)
        child = np.random.SeedSequence(7).spawn(1)[0]
        tree = fit_tree(ds, h, np.random.default_rng(child))
        assert_array_equal(forest.trees[0].threshold, tree.threshold)
        assert_array_equal(forest.trees[0].feature, tree.feature)

    def test_ntree_and_grid(self, rng):
        ds = random_dataset(rng, 40, 3)
        forest = fit_forest(ds, hp(ntree=4), 1)
        assert len(forest.trees) == 4
        assert np.all(np.diff(forest.event_time_grid) > 0)
        assert_array_equal(forest.event_time_grid, np.unique(ds.times[ds.events == 1]))

    def test_same_seed_bit_identical(self, rng):
        ds = random_dataset(rng, 50, 3)
        a = fit_forest(ds, hp(), 3).risk(ds.features, ds.times)
        b = fit_forest(ds, hp(), 3).risk(ds.features, ds.times)
        assert a.tobytes() == b.tobytes()

    def test_parallel_matches_serial(self, rng):
        ds = random_dataset(rng, 50, 3)
        a = fit_forest(ds, hp(), 3).chf_matrix(ds.features)
        b = fit_forest(ds, hp(), 3, n_jobs=2).chf_matrix(ds.features)
        assert a.tobytes() == b.tobytes()

    def test_different_seeds_differ(self, rng):
        ds = random_dataset(rng, 80, 3)
        a = fit_forest(ds, hp(), 1).chf_matrix(ds.features)
        b = fit_forest(ds, hp(), 2).chf_matrix(ds.features)
        assert not np.array_equal(a, b)

    def test_predict_chf_is_mean_of_trees(self, rng):
        ds = random_dataset(rng, 60, 3)
        forest = fit_forest(ds, hp(ntree=2), 5)
        x = ds.features[0]
        grid = forest.event_time_grid
        per_tree = [t.leaf_chf[int(t.apply(x)[0])](grid) for t in forest.trees]
        assert_allclose(predict_chf(forest, x)(grid), (per_tree[0] + per_tree[1]) / 2,
                        atol=1e-15)

    def test_identical_single_leaf_trees(self):
        ds = SurvivalDataset(np.zeros((6, 1)), [1, 2, 3, 4, 5, 6.0], [1, 1, 0, 1, 0, 1])
        forest = fit_forest(ds, hp(ntree=3), 0, bootstrap=False)
        H = na_cumhaz(ds.times, ds.events)
        assert_allclose(predict_chf(forest, [0.0])(ds.times), H(ds.times), atol=1e-15)

    def test_single_leaf_ln2(self):
        ds = SurvivalDataset(np.zeros((2, 1)), [1.0, 5.0], [1, 0])
        forest = fit_forest(ds, hp(ntree=1), 0, bootstrap=False)
        # H(1) = 1/2 under Nelson-Aalen, so risk(1) = 1 - exp(-1/2)
        assert predict_risk(forest, [0.0], 1.0) == pytest.approx(-math.expm1(-0.5), abs=1e-15)
        assert predict_risk(forest, [0.0], 0.0) == 0.0

    def test_risk_monotone_in_t(self, rng):
        for _ in range(100):
            ds = random_dataset(rng, int(rng.integers(10, 40)), 2, tie_grid=0.5)
            forest = fit_forest(ds, hp(ntree=3, mtry=2, nodesize=2), int(rng.integers(1e6)))
            H = forest.chf_matrix(ds.features[:3])
            assert np.all(np.diff(H, axis=1) >= 0)
            grid = np.linspace(0, ds.times.max() + 1, 30)
            r = np.array([forest.risk(ds.features[:3], t) for t in grid])
            assert np.all(np.diff(r, axis=0) >= 0)
            assert np.all((r >= 0) & (r < 1))

    def test_dimension_mismatch(self, rng):
        forest = fit_forest(random_dataset(rng, 20, 3), hp(), 0)
        with pytest.raises(DomainError):
            predict_chf(forest, [0.0, 1.0])
        with pytest.raises(DomainError):
            predict_risk(forest, [0.0, 1.0, 2.0], -1.0)

    def test_persistence_round_trip(self, rng, tmp_path):
        ds = random_dataset(rng, 50, 3)
        forest = fit_forest(ds, hp(splitrule="logrankscore"), 11)
        save_forest(forest, tmp_path / "f.json")
        back = load_forest(tmp_path / "f.json")
        assert back.hyperparams == forest.hyperparams and back.rng_seed == 11
        a = forest.risk(ds.features, ds.times)
        b = back.risk(ds.features, ds.times)
        assert a.tobytes() == b.tobytes()
