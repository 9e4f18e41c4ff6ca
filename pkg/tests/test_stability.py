import logging
from fractions import Fraction

import numpy as np
import pytest

from netsig.core import GroupStructure, LambdaGrid, SelectionPath, ValidationError
from netsig.graph_lasso import lambda_max as group_lambda_max
from netsig.lasso import lambda_max
from netsig.stability import (
    GraphLassoSelector,
    LassoSelector,
    StabilityProfile,
    half_subsample,
    max_prob_scores,
    run_stability_selection,
    sg_scores,
    signature_from_scores,
)


class ScriptedSelector:
    """Returns pre-scripted active sets, one script entry per call."""

    name = "scripted"

    def __init__(self, script, n_groups):
        self.script = list(script)
        self._n = n_groups

    def n_groups(self, X):
        return self._n

    def __call__(self, X, y, grid):
        active = self.script.pop(0)
        norms = [{g: 1.0 for g in a} for a in active]
        return SelectionPath.from_fits(grid, active, norms)


def _xy(seed=0, n=40, p=8):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = np.where(X[:, 0] + X[:, 1] + 0.5 * rng.standard_normal(n) > 0, 1.0, -1.0)
    return X, y


def _profile(pi_rows, ndraw=1):
    pi = np.asarray(pi_rows, dtype=float)
    grid = LambdaGrid(np.geomspace(1.0, 0.1, pi.shape[1]))
    return StabilityProfile(grid, np.rint(pi * ndraw).astype(int), ndraw)


def test_half_subsample_contract():
    rng = np.random.default_rng(0)
    idx = half_subsample(10, rng)
    assert idx.size == 5 and np.unique(idx).size == 5
    assert idx.min() >= 0 and idx.max() < 10
    assert half_subsample(7, np.random.default_rng(1)).size == 3
    a = half_subsample(50, np.random.default_rng(3))
    b = half_subsample(50, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValidationError):
        half_subsample(3, rng)


def test_stratified_half_keeps_label_ratio():
    labels = np.array([1] * 30 + [-1] * 10)
    idx = half_subsample(40, np.random.default_rng(4), labels, stratified=True)
    assert idx.size == 20
    assert (labels[idx] == 1).sum() == 15


def test_counting_three_of_four_draws():
    X, y = _xy()
    grid = LambdaGrid([1.0, 0.5])
    script = [[[0], [0, 1]], [[0], [0]], [[0], []], [[], [1]]]
    prof = run_stability_selection(X, y, ScriptedSelector(script, 3), grid, ndraw=4, n_jobs=1)
    assert prof.pi[0, 0] == 0.75
    assert prof.pi[1].tolist() == [0.0, 0.5]
    assert prof.pi[2].tolist() == [0.0, 0.0]


def test_grid_above_every_lambda_max_gives_zero_matrix():
    X, y = _xy(1)
    grid = LambdaGrid([10 * lambda_max(X, y), 5 * lambda_max(X, y)])
    prof = run_stability_selection(X, y, LassoSelector(), grid, ndraw=5)
    assert not prof.pi.any()


def test_profile_granularity_and_determinism():
    X, y = _xy(2, n=50, p=10)
    groups = GroupStructure([(j, j + 1) for j in range(9)], 10)
    grid = LambdaGrid.geometric(group_lambda_max(X, y, groups), 10, 0.05)
    sel = GraphLassoSelector(groups)
    a = run_stability_selection(X, y, sel, grid, ndraw=7, seed=42)
    b = run_stability_selection(X, y, sel, grid, ndraw=7, seed=42, n_jobs=3)
    np.testing.assert_array_equal(a.pi, b.pi)
    for v in a.pi.ravel():
        assert (Fraction(v).limit_denominator(1000) * 7).denominator == 1
    assert a.pi.min() >= 0 and a.pi.max() <= 1
    c = run_stability_selection(X, y, sel, grid, ndraw=7, seed=43)
    assert not np.array_equal(a.counts, c.counts)


def test_ndraw_must_be_at_least_two():
    X, y = _xy()
    with pytest.raises(ValidationError):
        run_stability_selection(X, y, LassoSelector(), LambdaGrid([1.0]), ndraw=1)


def test_sg_worked_example():
    s = sg_scores(_profile([[1, 1], [0, 1]]))
    assert s.sg.tolist() == [1.0, 0.5]
    assert s.ranking.tolist() == [0, 1]


def test_sg_single_group_and_zero_profile():
    assert sg_scores(_profile([[0, 0.3], [0, 0]], 10)).sg.tolist() == [1.0, 0.0]
    zero = sg_scores(_profile([[0, 0], [0, 0]]))
    assert zero.sg.tolist() == [0.0, 0.0]
    assert zero.ranking.size == 0


def test_max_prob_examples():
    s = max_prob_scores(_profile([[0.2, 0.8, 0.5], [0, 0, 0], [0.3, 0.3, 0.3]], 10))
    assert s.score.tolist() == [0.8, 0.0, 0.3]
    assert s.ranking.tolist() == [0, 2]


def test_sg_bounds_and_equality_condition():
    rng = np.random.default_rng(5)
    for _ in range(20):
        counts = rng.integers(0, 11, size=(6, 5)) * (rng.random((6, 5)) < 0.5)
        prof = StabilityProfile(LambdaGrid(np.geomspace(1, 0.01, 5)), counts, 10)
        sg = sg_scores(prof).sg
        assert np.all((sg >= 0) & (sg <= 1))
        pi = prof.pi
        total = pi.sum(axis=0)
        alone = np.array([np.any((pi[g] == total) & (total > 0)) for g in range(6)])
        np.testing.assert_array_equal(sg == 1.0, alone)


def test_permutation_equivariance():
    rng = np.random.default_rng(6)
    counts = rng.integers(0, 21, size=(5, 4))
    prof = StabilityProfile(LambdaGrid([4.0, 3.0, 2.0, 1.0]), counts, 20)
    perm = rng.permutation(5)
    permuted = StabilityProfile(prof.grid, counts[perm], 20)
    np.testing.assert_array_equal(sg_scores(permuted).sg, sg_scores(prof).sg[perm])
    np.testing.assert_array_equal(max_prob_scores(permuted).score, max_prob_scores(prof).score[perm])


def test_signature_from_scores_examples(caplog):
    groups = GroupStructure([(0, 1), (1, 2)], 3)
    genes = ["A", "B", "C"]
    sig = signature_from_scores([0.9, 0.8], groups, genes, 3)
    assert set(sig.genes) == {"A", "B", "C"}
    assert [u for u, _ in sig.ranked_units] == [("A", "B"), ("B", "C")]
    sig2 = signature_from_scores([0.9, 0.8], groups, genes, 2)
    assert sig2.genes == ("A", "B") and len(sig2.ranked_units) == 1
    with caplog.at_level(logging.WARNING):
        empty = signature_from_scores([0.0, 0.0], groups, genes, 1)
    assert empty.genes == () and not empty.complete
    assert "exhausted" in caplog.text


def test_signature_score_ties_follow_group_index():
    groups = GroupStructure([(0, 1), (2, 3)], 4)
    sig = signature_from_scores([0.5, 0.5], groups, list("ABCD"), 2)
    assert sig.genes == ("A", "B")


def test_profile_roundtrip():
    prof = _profile([[0.2, 0.4], [0.0, 1.0]], 5)
    again = StabilityProfile.from_dict(prof.to_dict())
    np.testing.assert_array_equal(again.counts, prof.counts)
    assert again.ndraw == 5
