import networkx as nx
import numpy as np
import pytest

from netsig.core import ValidationError
from netsig.evaluation import balanced_accuracy, refit_logistic
from netsig.synthetic import GroundTruth, RecoveryMetrics, SyntheticSpec, generate, recovery_metrics


def _graph(network):
    g = nx.Graph()
    g.add_edges_from(network.edges)
    return g


def test_support_is_planted_connected_components():
    ds, net, truth = generate(SyntheticSpec(p=100, n_components=2, component_size=5, seed=0))
    assert len(truth.support) == len(set(truth.support)) == 10
    assert len(truth.components) == 2
    assert not set(truth.components[0]) & set(truth.components[1])
    g = _graph(net)
    for comp in truth.components:
        assert nx.is_connected(g.subgraph(comp))
    nonzero = {ds.gene_ids[j] for j in np.flatnonzero(truth.coefficients)}
    assert nonzero == set(truth.support)


@pytest.mark.parametrize("model", ["regular", "pa"])
def test_network_models(model):
    ds, net, truth = generate(SyntheticSpec(p=120, network=model, degree=4, seed=3))
    g = _graph(net)
    assert g.number_of_nodes() == 120
    degrees = [d for _, d in g.degree()]
    if model == "regular":
        assert set(degrees) == {4}
    else:
        assert max(degrees) > 2 * min(degrees)
    assert all(nx.is_connected(g.subgraph(c)) for c in truth.components)


def test_noiseless_strong_signal_is_learnable_on_the_true_support():
    for seed in range(10):
        spec = SyntheticSpec(p=100, n=150, effect=3.0, label_noise=0.0, within_corr=0.0, noise_sd=0.1, seed=seed)
        ds, _, truth = generate(spec)
        sub = ds.take_genes(list(truth.support))
        model = refit_logistic(sub.values, sub.labels)
        assert balanced_accuracy(model.predict(sub.values), sub.labels) > 0.95


def test_labels_follow_the_linear_score_without_label_noise():
    spec = SyntheticSpec(p=60, n=200, label_noise=0.0, noise_sd=0.0, seed=5)
    ds, _, truth = generate(spec)
    score = ds.values @ truth.coefficients
    np.testing.assert_array_equal(ds.labels, np.where(score >= 0, 1.0, -1.0))


def test_label_noise_flips_the_requested_fraction():
    clean = generate(SyntheticSpec(p=60, n=200, label_noise=0.0, seed=6))[0]
    noisy = generate(SyntheticSpec(p=60, n=200, label_noise=0.1, seed=6))[0]
    np.testing.assert_array_equal(clean.values, noisy.values)
    assert int(np.sum(clean.labels != noisy.labels)) == 20


def test_within_component_correlation():
    ds, _, truth = generate(SyntheticSpec(p=50, n=4000, n_components=1, component_size=5, within_corr=0.4, seed=7))
    cols = [ds.gene_ids.index(g) for g in truth.components[0]]
    c = np.corrcoef(ds.values[:, cols], rowvar=False)
    off = c[~np.eye(5, dtype=bool)]
    assert abs(off.mean() - 0.4) < 0.05


def test_generation_is_deterministic():
    a = generate(SyntheticSpec(p=80, seed=11))
    b = generate(SyntheticSpec(p=80, seed=11))
    assert a[0] == b[0] and a[1] == b[1]
    assert a[2].to_dict() == b[2].to_dict()
    c = generate(SyntheticSpec(p=80, seed=12))
    assert not c[0] == a[0]


def test_invalid_specs():
    with pytest.raises(ValidationError):
        SyntheticSpec(p=10, n_components=3, component_size=5)
    with pytest.raises(ValidationError):
        SyntheticSpec(label_noise=0.5)
    with pytest.raises(ValidationError):
        SyntheticSpec(effect=0.0)
    with pytest.raises(ValidationError):
        SyntheticSpec(degree=0)


def test_too_sparse_network_reports_diagnostics():
    with pytest.raises(ValidationError, match="cannot grow component"):
        generate(SyntheticSpec(p=30, degree=1, n_components=2, component_size=5, seed=0))


def test_recovery_metrics_examples():
    truth = GroundTruth(("A", "B", "C", "D"), np.ones(4))
    assert recovery_metrics(["A", "B", "C", "D"], truth) == RecoveryMetrics(1.0, 1.0)
    assert recovery_metrics(["X", "Y"], truth) == RecoveryMetrics(0.0, 0.0)
    assert recovery_metrics(["A", "B"], truth) == RecoveryMetrics(1.0, 0.5)
    empty = recovery_metrics([], truth)
    assert empty.precision == 0.0 and empty.empty_signature
