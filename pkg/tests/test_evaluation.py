import numpy as np
import pytest

from netsig import synthetic
from netsig.core import GeneNetwork, ValidationError, validate_dataset
from netsig.evaluation import (
    EvaluationReport,
    ExperimentConfig,
    balanced_accuracy,
    connectivity_score,
    cross_dataset_overlap,
    fold_overlap_histogram,
    refit_logistic,
    run_experiment,
    stratified_kfold,
)

SMALL = ExperimentConfig(ndraw=5, grid_count=10, grid_min_ratio=0.05, seed=3)


def _small_instance(seed=0):
    spec = synthetic.SyntheticSpec(p=40, n=40, n_components=2, component_size=4, effect=1.5, seed=seed)
    return synthetic.generate(spec)


def test_stratified_kfold_exact_case():
    labels = [1] * 5 + [-1] * 5
    plan = stratified_kfold(labels, 5, seed=0)
    for f in range(5):
        assert sorted(np.asarray(labels)[plan.test(f)].tolist()) == [-1, 1]
    assert stratified_kfold(labels, 5, seed=0) == plan


def test_stratified_kfold_partitions_and_balances():
    rng = np.random.default_rng(1)
    labels = np.where(rng.random(53) < 0.3, 1, -1)
    plan = stratified_kfold(labels, 5, seed=9)
    allidx = sorted(i for f in plan.folds for i in f)
    assert allidx == list(range(53))
    ratio = labels.mean()
    for f in range(5):
        t = plan.test(f)
        assert abs((labels[t] == 1).sum() - len(t) * (labels == 1).mean()) <= 1
        assert np.intersect1d(plan.train(f), t).size == 0
    assert -1 < ratio < 1


def test_stratified_kfold_small_class_rejected():
    with pytest.raises(ValidationError):
        stratified_kfold([1, 1, 1] + [-1] * 10, 5)


def test_refit_separable_flag():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([-1.0, -1.0, 1.0, 1.0])
    model = refit_logistic(X, y)
    assert model.separable
    assert np.all(model.predict(X) == y)


def test_refit_reaches_stationarity():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((100, 3))
    y = np.where(X[:, 0] + rng.standard_normal(100) > 0, 1.0, -1.0)
    model = refit_logistic(X, y)
    assert model.converged and not model.separable
    eta = X @ model.weights + model.intercept
    w = -y / (1 + np.exp(y * eta)) / len(y)
    grad = np.append(X.T @ w, w.sum())
    assert np.linalg.norm(grad) <= 1e-6


def test_refit_on_permuted_labels_is_chance_level():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((60, 2))
    base = np.array([1.0] * 30 + [-1.0] * 30)
    scores = []
    for _ in range(50):
        y = rng.permutation(base)
        scores.append(balanced_accuracy(refit_logistic(X, y).predict(X), y))
    assert abs(np.mean(scores) - 0.5) <= 0.1


def test_refit_rejects_empty_signature():
    with pytest.raises(ValidationError, match="empty signature"):
        refit_logistic(np.zeros((4, 0)), [1, -1, 1, -1])


def test_balanced_accuracy_examples():
    y = np.array([1, 1, -1, -1])
    assert balanced_accuracy(y, y) == 1.0
    assert balanced_accuracy(np.ones(4), y) == 0.5
    assert balanced_accuracy(np.array([1, -1, -1, -1]), y) == 0.75
    with pytest.raises(ValidationError):
        balanced_accuracy(np.ones(3), np.ones(3))


def test_balanced_accuracy_class_swap_invariance():
    rng = np.random.default_rng(4)
    y = rng.choice([-1, 1], 30)
    p = rng.choice([-1, 1], 30)
    assert balanced_accuracy(p, y) == balanced_accuracy(-p, -y)


def test_connectivity_examples():
    path = GeneNetwork([("A", "B"), ("B", "C"), ("C", "D")])
    assert connectivity_score(["A", "B", "C", "D"], path) == 1.0
    two = GeneNetwork([("A", "B"), ("C", "D")])
    assert connectivity_score(["A", "B", "C", "D"], two) == 0.5
    assert connectivity_score(["X", "Y", "Z"], path) == pytest.approx(1 / 3)
    with pytest.raises(ValidationError):
        connectivity_score([], path)


def test_connectivity_relabel_invariance():
    net = GeneNetwork([("A", "B"), ("B", "C"), ("D", "E")])
    rename = {"A": "q", "B": "r", "C": "s", "D": "t", "E": "u"}
    renamed = GeneNetwork((rename[a], rename[b]) for a, b in net.edges)
    genes = ["A", "B", "C", "D", "E"]
    assert connectivity_score(genes, net) == connectivity_score([rename[g] for g in genes], renamed) == 0.6


def test_fold_overlap_examples():
    same = [[f"g{i}" for i in range(60)]] * 5
    assert fold_overlap_histogram(same) == {1: 0, 2: 0, 3: 0, 4: 0, 5: 60}
    disjoint = [[f"g{f}_{i}" for i in range(60)] for f in range(5)]
    assert fold_overlap_histogram(disjoint)[1] == 300
    assert fold_overlap_histogram([["A", "B"], ["B", "C"]]) == {1: 2, 2: 1}


def test_fold_overlap_mass_conservation():
    rng = np.random.default_rng(5)
    sigs = [rng.choice(50, 12, replace=False).tolist() for _ in range(5)]
    h = fold_overlap_histogram(sigs)
    assert sum(h.values()) == len(set().union(*map(set, sigs)))


def test_cross_dataset_overlap_examples():
    r = list("ABCDE")
    assert cross_dataset_overlap(r, r, [1, 3, 5]) == [1, 3, 5]
    assert cross_dataset_overlap(r, list("VWXYZ"), [1, 5]) == [0, 0]
    assert cross_dataset_overlap(list("AQRS"), list("AXYZ"), [1]) == [1]
    with pytest.warns(UserWarning, match="truncated"):
        assert cross_dataset_overlap(r, r, [8]) == [5]


def test_sizes_must_be_positive():
    ds, net, _ = _small_instance()
    with pytest.raises(ValidationError, match="empty signature"):
        run_experiment(ds, net, "lasso", [0], SMALL)


def test_graph_method_needs_network():
    ds, _, _ = _small_instance()
    with pytest.raises(ValidationError, match="network required"):
        run_experiment(ds, None, "glasso", [5], SMALL)


@pytest.mark.parametrize("method", ["lasso", "glasso+ss"])
def test_run_experiment_is_deterministic_and_well_formed(method):
    ds, net, _ = _small_instance(1)
    a = run_experiment(ds, net, method, [4, 8], SMALL)
    b = run_experiment(ds, net, method, [4, 8], SMALL)
    assert a.to_dict() == b.to_dict()
    acc = np.array(a.accuracy)
    assert acc.shape == (5, 2) and np.all((acc >= 0) & (acc <= 1))
    for row in a.connectivity:
        assert all(c is None or 0 < c <= 1 for c in row)
    for j, m in enumerate(a.sizes):
        union = set().union(*(set(a.signatures[f][j]) for f in range(5)))
        assert sum(a.fold_overlap[m].values()) == len(union)
    assert EvaluationReport.from_dict(a.to_dict()).to_dict() == a.to_dict()


def test_fold_selection_ignores_test_rows():
    ds, net, _ = _small_instance(2)
    plan = stratified_kfold(ds.labels, 5, seed=0)
    base = run_experiment(ds, net, "glasso", [6], SMALL, plan=plan)
    values = ds.values.copy()
    test0 = plan.test(0)
    values[test0] = np.random.default_rng(0).normal(size=(len(test0), ds.n_genes)) * 50
    mutated = validate_dataset(values, ds.labels, gene_ids=ds.gene_ids, sample_ids=ds.sample_ids)
    again = run_experiment(mutated, net, "glasso", [6], SMALL, plan=plan)
    assert again.signatures[0] == base.signatures[0]
    assert again.rankings[0] == base.rankings[0]
