"""Cross-validated evaluation of signature selectors.

Each fold preprocesses its own training rows, ranks selection units with the
chosen method, truncates the ranking to each requested signature size, refits
an unpenalized logistic model on the training rows and scores the held-out
rows. Reports also carry the connectivity of every signature on the gene
network and how often each gene recurs across folds.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from . import preprocess
from .core import (
    ExpressionDataset,
    GeneNetwork,
    GroupStructure,
    LambdaGrid,
    LogisticModel,
    Signature,
    ValidationError,
    edges_to_groups,
    gene_ranking,
)
from .graph_lasso import lambda_max as group_lambda_max
from .lasso import lambda_max as l1_lambda_max
from .stability import (
    GraphLassoSelector,
    group_units,
    LassoSelector,
    run_stability_selection,
    score_profile,
    signature_from_ranking,
)

log = logging.getLogger(__name__)

METHODS = ("lasso", "lasso+ss", "glasso", "glasso+ss")
DEFAULT_SIZES = tuple(range(10, 101, 10))

# sub-seed streams derived from the run seed: SeedSequence([seed, stream, index])
FOLD_STREAM = 1
SUBSAMPLE_STREAM = 2


def derive_seed(seed: int, stream: int, index: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), stream, index])


@dataclass(frozen=True)
class ExperimentConfig:
    n_genes: int = preprocess.DEFAULT_N_GENES
    outlier_threshold: float = preprocess.DEFAULT_OUTLIER_THRESHOLD
    folds: int = 5
    seed: int = 0
    ndraw: int = 100
    grid_count: int = 50
    grid_min_ratio: float = 1e-3
    score_rule: str = "sg"
    stratified: bool = True

    def __post_init__(self):
        if self.folds < 2:
            raise ValidationError("folds must be >= 2")
        if self.ndraw < 2:
            raise ValidationError("ndraw must be >= 2")
        if self.grid_count < 1 or not 0 < self.grid_min_ratio <= 1:
            raise ValidationError("grid needs count >= 1 and min ratio in (0, 1]")
        if self.score_rule not in ("sg", "max_prob"):
            raise ValidationError(f"unknown score rule {self.score_rule!r}")
        if self.n_genes < 1 or not self.outlier_threshold > 0:
            raise ValidationError("n_genes must be >= 1 and outlier_threshold > 0")


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[int, ...], ...]
    n_samples: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def test(self, f: int) -> np.ndarray:
        return np.array(self.folds[f], dtype=int)

    def train(self, f: int) -> np.ndarray:
        mask = np.ones(self.n_samples, dtype=bool)
        mask[list(self.folds[f])] = False
        return np.flatnonzero(mask)


def stratified_kfold(labels: Sequence[float], k: int, seed: int | np.random.SeedSequence = 0) -> FoldPlan:
    """Shuffle each class and deal its samples round-robin across ``k`` folds.

    The dealing position carries over from one class to the next, so fold
    sizes differ by at most one and per-class counts by at most one.
    """
    labels = np.asarray(labels)
    classes, sizes = np.unique(labels, return_counts=True)
    if k < 2:
        raise ValidationError("k must be >= 2")
    if sizes.min() < k:
        raise ValidationError(f"class of size {sizes.min()} is smaller than k={k}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for c in classes:
        for i in rng.permutation(np.flatnonzero(labels == c)):
            folds[pos % k].append(int(i))
            pos += 1
    return FoldPlan(tuple(tuple(sorted(f)) for f in folds), labels.size)


def _gradient_hessian(A, y, theta):
    eta = A @ theta
    p = 1.0 / (1.0 + np.exp(np.clip(y * eta, -700, 700)))
    grad = A.T @ (-y * p) / y.size
    H = (A * (p * (1 - p))[:, None]).T @ A / y.size
    return grad, H


def _nll(A, y, theta):
    return float(np.mean(np.logaddexp(0.0, -y * (A @ theta))))


def refit_logistic(X, y, gene_ids: Sequence[str] | None = None, max_iter: int = 100, tol: float = 1e-8) -> LogisticModel:
    """Unpenalized maximum-likelihood logistic regression by damped Newton.

    On separable data the likelihood has no maximizer; the fit then stops at
    ``max_iter`` (or once the gradient underflows) with ``separable=True``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValidationError("empty signature: nothing to refit")
    if np.unique(y).size < 2:
        raise ValidationError("refit needs both classes")
    if gene_ids is None:
        gene_ids = [f"x{j}" for j in range(X.shape[1])]
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    theta = np.zeros(A.shape[1])
    pos = np.mean(y > 0)
    theta[-1] = np.log(pos / (1 - pos))
    f = _nll(A, y, theta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad, H = _gradient_hessian(A, y, theta)
        if np.linalg.norm(grad) <= tol:
            converged = True
            it -= 1
            break
        H[np.diag_indices_from(H)] += 1e-12
        step = np.linalg.lstsq(H, -grad, rcond=None)[0]
        t = 1.0
        slope = grad @ step
        while t > 1e-10:
            cand = theta + t * step
            fc = _nll(A, y, cand)
            if fc <= f + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        theta, f = cand, fc
    margins = y * (A @ theta)
    separable = bool(np.all(margins > 0))
    return LogisticModel(tuple(gene_ids), theta[:-1], float(theta[-1]), converged, separable, it)


def balanced_accuracy(predictions, labels) -> float:
    """Mean of sensitivity (on +1) and specificity (on -1)."""
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    pos = lab > 0
    neg = ~pos
    if not pos.any() or not neg.any():
        raise ValidationError("balanced accuracy needs both classes in the labels")
    sens = np.mean(pred[pos] > 0)
    spec = np.mean(pred[neg] <= 0)
    return float((sens + spec) / 2)


def connectivity_score(genes: Iterable[str], network: GeneNetwork) -> float:
    """Largest connected component of the induced subgraph over the signature size."""
    genes = set(genes)
    if not genes:
        raise ValidationError("empty signature")
    g = nx.Graph()
    g.add_nodes_from(genes)
    g.add_edges_from((a, b) for a, b in network.edges if a in genes and b in genes)
    return max(len(c) for c in nx.connected_components(g)) / len(genes)


def fold_overlap_histogram(signatures: Sequence[Iterable[str]]) -> dict[int, int]:
    """Number of genes appearing in exactly c of the signatures, for c = 1..k."""
    k = len(signatures)
    if k < 2:
        raise ValidationError("need at least two signatures")
    mult: dict[str, int] = {}
    for sig in signatures:
        for g in set(sig):
            mult[g] = mult.get(g, 0) + 1
    hist = {c: 0 for c in range(1, k + 1)}
    for c in mult.values():
        hist[c] += 1
    return hist


def cross_dataset_overlap(ranking1: Sequence[str], ranking2: Sequence[str], sizes: Iterable[int]) -> list[int]:
    """``|top-m(ranking1) & top-m(ranking2)|`` for each requested m."""
    out = []
    longest = min(len(ranking1), len(ranking2))
    for m in sizes:
        if m > longest:
            warnings.warn(f"size {m} exceeds ranking length {longest}; truncated", stacklevel=2)
        out.append(len(set(ranking1[:m]) & set(ranking2[:m])))
    return out


def _needs_network(method: str) -> bool:
    return method.startswith("glasso")


def prepare_selector(dataset: ExpressionDataset, network: GeneNetwork | None, method: str, config: ExperimentConfig):
    """Groups, base path selector and lambda grid for ``method`` on a preprocessed dataset.

    Returns ``(X, y, selector, groups, gene_ids, grid)``; for graph methods genes
    that no edge covers are dropped from ``X`` and ``gene_ids``.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
    genes = list(dataset.gene_ids)
    X = dataset.values
    y = dataset.labels
    if _needs_network(method):
        if network is None:
            raise ValidationError("network required for graph methods")
        groups, removed = edges_to_groups(network, genes)
        if removed:
            drop = set(removed)
            genes = [g for g in genes if g not in drop]
            X = dataset.take_genes(genes).values
        selector = GraphLassoSelector(groups)
        lam_max = group_lambda_max(X, y, groups)
    else:
        groups = GroupStructure.singletons(len(genes))
        selector = LassoSelector()
        lam_max = l1_lambda_max(X, y)
    grid = LambdaGrid.geometric(lam_max, config.grid_count, config.grid_min_ratio)
    return X, y, selector, groups, genes, grid


def rank_units(
    dataset: ExpressionDataset,
    network: GeneNetwork | None,
    method: str,
    config: ExperimentConfig,
    seed_seq: np.random.SeedSequence | None = None,
):
    """Rank selection units on an already preprocessed dataset.

    Returns ``(order, scores, groups, gene_ids)`` suitable for
    :func:`signature_from_ranking` via :func:`make_signature`.
    """
    X, y, selector, groups, genes, grid = prepare_selector(dataset, network, method, config)
    if method.endswith("+ss"):
        profile = run_stability_selection(
            X, y, selector, grid, config.ndraw,
            seed_seq if seed_seq is not None else derive_seed(config.seed, SUBSAMPLE_STREAM),
            config.stratified,
        )
        scores = score_profile(profile, config.score_rule)
        s = scores.score
        order = scores.ranking.tolist()
    else:
        path = selector(X, y, grid)
        order = list(path.entry_order)
        s = np.zeros(groups.group_count)
        s[order] = path.entry_lambda
    return order, s, groups, genes


def make_signature(ranked, size: int) -> Signature:
    order, scores, groups, genes = ranked
    return signature_from_ranking(order, scores, group_units(groups, genes), size)


def full_gene_ranking(ranked) -> list[str]:
    """Every ranked gene, deduplicated, in ranking order."""
    order, scores, groups, genes = ranked
    units = group_units(groups, genes)
    return gene_ranking((units[g], scores[g]) for g in order)


def select_signature(
    dataset: ExpressionDataset, network: GeneNetwork | None, method: str, size: int, config: ExperimentConfig
) -> Signature:
    """Preprocess the whole dataset, then build one signature of ``size`` genes."""
    model = preprocess.fit(dataset, network, config.n_genes, config.outlier_threshold)
    data = preprocess.apply(model, dataset)
    ranked = rank_units(data, network, method, config)
    return make_signature(ranked, size)


@dataclass
class EvaluationReport:
    method: str
    sizes: list[int]
    accuracy: list[list[float]]
    connectivity: list[list[float | None]]
    signatures: list[list[list[str]]]
    complete: list[list[bool]]
    separable: list[list[bool]]
    fold_overlap: dict[int, dict[int, int]]
    rankings: list[list[str]]
    metadata: dict = field(default_factory=dict)

    def mean_accuracy(self) -> list[float]:
        return np.mean(np.array(self.accuracy), axis=0).tolist()

    def mean_connectivity(self) -> list[float | None]:
        out = []
        for j in range(len(self.sizes)):
            vals = [row[j] for row in self.connectivity if row[j] is not None]
            out.append(float(np.mean(vals)) if vals else None)
        return out

    def in_all_folds(self) -> list[int]:
        k = len(self.accuracy)
        return [self.fold_overlap[m][k] for m in self.sizes]

    def curves(self) -> dict[str, list[tuple[int, float | None]]]:
        """Size-indexed curves for flat export."""
        k = len(self.accuracy)
        curves = {
            "balanced_accuracy": list(zip(self.sizes, self.mean_accuracy())),
            "connectivity": list(zip(self.sizes, self.mean_connectivity())),
        }
        for c in range(1, k + 1):
            curves[f"genes_in_{c}_folds"] = [(m, self.fold_overlap[m][c]) for m in self.sizes]
        return curves

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fold_overlap"] = {str(m): {str(c): v for c, v in h.items()} for m, h in self.fold_overlap.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> EvaluationReport:
        d = dict(d)
        d["fold_overlap"] = {int(m): {int(c): v for c, v in h.items()} for m, h in d["fold_overlap"].items()}
        return cls(**d)


def run_experiment(
    dataset: ExpressionDataset,
    network: GeneNetwork | None,
    method: str,
    sizes: Sequence[int] = DEFAULT_SIZES,
    config: ExperimentConfig = ExperimentConfig(),
    plan: FoldPlan | None = None,
) -> EvaluationReport:
    """Cross-validate one selection method over the requested signature sizes."""
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
    sizes = [int(m) for m in sizes]
    if not sizes or min(sizes) < 1:
        raise ValidationError("signature sizes must be >= 1 (empty signature)")
    if _needs_network(method) and network is None:
        raise ValidationError("network required for graph methods")
    if plan is None:
        plan = stratified_kfold(dataset.labels, config.folds, derive_seed(config.seed, FOLD_STREAM))

    acc, conn, sigs, complete, separable, rankings, kept = [], [], [], [], [], [], []
    for f in range(plan.k):
        try:
            train = dataset.take_rows(plan.train(f))
            test = dataset.take_rows(plan.test(f))
            model = preprocess.fit(train, network, config.n_genes, config.outlier_threshold)
            tr = preprocess.apply(model, train)
            te = preprocess.apply(model, test)
            ranked = rank_units(tr, network, method, config, derive_seed(config.seed, SUBSAMPLE_STREAM, f))
        except Exception as exc:
            raise RuntimeError(f"fold {f} of {method} failed: {exc}") from exc
        kept.append(len(model.kept_gene_ids))
        row_acc, row_conn, row_sig, row_ok, row_sep = [], [], [], [], []
        for m in sizes:
            sig = make_signature(ranked, m)
            genes = list(sig.genes)
            row_sig.append(genes)
            row_ok.append(sig.complete)
            if not genes:
                row_acc.append(0.5)
                row_conn.append(None)
                row_sep.append(False)
                continue
            fit = refit_logistic(tr.take_genes(genes).values, tr.labels, genes)
            pred = fit.predict(te.take_genes(genes).values)
            row_acc.append(balanced_accuracy(pred, te.labels))
            row_sep.append(fit.separable)
            row_conn.append(connectivity_score(genes, network) if network is not None else None)
        acc.append(row_acc)
        conn.append(row_conn)
        sigs.append(row_sig)
        complete.append(row_ok)
        separable.append(row_sep)
        rankings.append(full_gene_ranking(ranked))
        log.info("%s fold %d/%d done", method, f + 1, plan.k)

    overlap = {m: fold_overlap_histogram([sigs[f][j] for f in range(plan.k)]) for j, m in enumerate(sizes)}
    meta = {
        "config": asdict(config),
        "folds": [list(fl) for fl in plan.folds],
        "kept_genes_per_fold": kept,
        "n_samples": dataset.n_samples,
        "n_genes": dataset.n_genes,
    }
    return EvaluationReport(method, sizes, acc, conn, sigs, complete, separable, overlap, rankings, meta)


def transfer_accuracy(
    genes: Sequence[str], dataset: ExpressionDataset, config: ExperimentConfig = ExperimentConfig()
) -> list[float]:
    """Cross-validated balanced accuracy on ``dataset`` restricted to ``genes``
    (a signature selected elsewhere). Each fold rescales with its own training
    statistics."""
    if not genes:
        raise ValidationError("empty signature")
    sub = dataset.take_genes(list(genes))
    plan = stratified_kfold(sub.labels, config.folds, derive_seed(config.seed, FOLD_STREAM))
    out = []
    for f in range(plan.k):
        train, test = sub.take_rows(plan.train(f)), sub.take_rows(plan.test(f))
        mu = train.values.mean(axis=0)
        sd = train.values.std(axis=0)
        sd[sd == 0] = 1.0
        fit = refit_logistic((train.values - mu) / sd, train.labels, sub.gene_ids)
        out.append(balanced_accuracy(fit.predict((test.values - mu) / sd), test.labels))
    return out
