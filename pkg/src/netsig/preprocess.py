"""Training-set gene filtering: scaling, outlier-robust correlation ranking and
removal of genes without a network neighbour.

Everything is estimated on training rows only; :func:`apply` reuses the stored
statistics on held-out rows.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ExpressionDataset, GeneNetwork, ValidationError

log = logging.getLogger(__name__)

DEFAULT_N_GENES = 1500
DEFAULT_OUTLIER_THRESHOLD = 1.96


@dataclass(frozen=True)
class OutlierRule:
    threshold: float = DEFAULT_OUTLIER_THRESHOLD

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValidationError("outlier threshold must be positive")


@dataclass(frozen=True, eq=False)
class PreprocessModel:
    """Kept genes (in rank order) with the training mean and std of each."""

    kept_gene_ids: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    n_genes: int = DEFAULT_N_GENES
    outlier_threshold: float = DEFAULT_OUTLIER_THRESHOLD

    def __post_init__(self):
        if len(self.means) != len(self.kept_gene_ids) or len(self.stds) != len(self.kept_gene_ids):
            raise ValidationError("statistics must align with kept genes")
        if np.any(np.asarray(self.stds) <= 0):
            raise ValidationError("stored standard deviations must be positive")

    def to_dict(self) -> dict:
        return {
            "kept_gene_ids": list(self.kept_gene_ids),
            "means": np.asarray(self.means).tolist(),
            "stds": np.asarray(self.stds).tolist(),
            "n_genes": self.n_genes,
            "outlier_threshold": self.outlier_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PreprocessModel:
        return cls(
            tuple(d["kept_gene_ids"]), np.array(d["means"]), np.array(d["stds"]),
            int(d["n_genes"]), float(d["outlier_threshold"]),
        )


def scale_genes(dataset: ExpressionDataset) -> tuple[ExpressionDataset, np.ndarray, np.ndarray]:
    """Standardize each column to mean 0, population variance 1.

    Constant columns are dropped with a warning. Returns the scaled dataset and
    the means and standard deviations of the surviving columns.
    """
    X = dataset.values
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # relative test so that float noise on a constant column counts as constant
    keep = std > 1e-12 * np.maximum(1.0, np.abs(mean))
    if not np.all(keep):
        dropped = [g for g, k in zip(dataset.gene_ids, keep) if not k]
        warnings.warn(f"dropping {len(dropped)} constant gene(s): {dropped[:5]}", stacklevel=2)
    genes = [g for g, k in zip(dataset.gene_ids, keep) if k]
    if not genes:
        raise ValidationError("every gene is constant on the training set")
    scaled = (X[:, keep] - mean[keep]) / std[keep]
    out = ExpressionDataset(dataset.sample_ids, genes, scaled, dataset.labels)
    return out, mean[keep], std[keep]


def robust_correlation(x: np.ndarray, y: np.ndarray, rule: OutlierRule = OutlierRule()) -> float:
    """Pearson correlation of a scaled gene with the labels, ignoring samples
    whose absolute value exceeds ``rule.threshold``.

    Returns 0 when fewer than 3 samples survive or either side is constant.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.abs(x) <= rule.threshold
    if keep.sum() < 3:
        return 0.0
    xs, ys = x[keep], y[keep]
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    denom = np.sqrt((xc @ xc) * (yc @ yc))
    if denom <= 0:
        return 0.0
    return float(np.clip((xc @ yc) / denom, -1.0, 1.0))


def correlations(X: np.ndarray, y: np.ndarray, rule: OutlierRule = OutlierRule()) -> np.ndarray:
    return np.array([robust_correlation(X[:, j], y, rule) for j in range(X.shape[1])])


def select_top_correlated(corrs: Sequence[float], n_genes: int) -> list[int]:
    """Column indices by decreasing |correlation| (ties: lower index), truncated to ``n_genes``."""
    if n_genes < 1:
        raise ValidationError("n_genes must be >= 1")
    a = np.abs(np.asarray(corrs, dtype=float))
    order = np.lexsort((np.arange(a.size), -a))
    return order[:n_genes].tolist()


def drop_isolated(genes: Sequence[str], network: GeneNetwork) -> list[str]:
    """Keep the genes with at least one network neighbour inside ``genes``."""
    present = set(genes)
    adj = network.neighbors()
    kept = [g for g in genes if adj.get(g, set()) & present]
    if not kept:
        raise ValidationError("empty after connectivity filter")
    return kept


def fit(
    dataset: ExpressionDataset,
    network: GeneNetwork | None,
    n_genes: int = DEFAULT_N_GENES,
    outlier_threshold: float = DEFAULT_OUTLIER_THRESHOLD,
) -> PreprocessModel:
    """Run the full filter on a training set.

    Pass ``network=None`` to skip the connectivity filter.
    """
    scaled, mean, std = scale_genes(dataset)
    corrs = correlations(scaled.values, scaled.labels, OutlierRule(outlier_threshold))
    top = select_top_correlated(corrs, n_genes)
    genes = [scaled.gene_ids[j] for j in top]
    if network is not None:
        genes = drop_isolated(genes, network)
    pos = {g: j for j, g in enumerate(scaled.gene_ids)}
    cols = [pos[g] for g in genes]
    log.debug("preprocess kept %d of %d genes", len(genes), dataset.n_genes)
    return PreprocessModel(tuple(genes), mean[cols], std[cols], n_genes, outlier_threshold)


def apply(model: PreprocessModel, dataset: ExpressionDataset) -> ExpressionDataset:
    """Restrict to the kept genes and scale with the stored training statistics."""
    sub = dataset.take_genes(model.kept_gene_ids)
    scaled = (sub.values - model.means) / model.stds
    return ExpressionDataset(sub.sample_ids, sub.gene_ids, scaled, sub.labels)


def fit_apply(dataset, network, n_genes=DEFAULT_N_GENES, outlier_threshold=DEFAULT_OUTLIER_THRESHOLD):
    model = fit(dataset, network, n_genes, outlier_threshold)
    return model, apply(model, dataset)
