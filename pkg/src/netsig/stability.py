"""Stability selection over half-subsamples and the scores used to rank groups.

Selection probabilities are estimated by rerunning a path selector on many
random halves of the samples. Two ranking scores are derived from them: the
maximum probability over the grid, and a normalized score that favours groups
selected early, when few other groups are selected yet.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .core import GroupStructure, LambdaGrid, SelectionPath, Signature, Unit, ValidationError, unit_genes
from .graph_lasso import graph_lasso_path
from .lasso import lasso_path

log = logging.getLogger(__name__)

DEFAULT_NDRAW = 100
MAX_REDRAWS = 100


class Selector(Protocol):
    name: str

    def n_groups(self, X: np.ndarray) -> int: ...

    def __call__(self, X: np.ndarray, y: np.ndarray, grid: LambdaGrid) -> SelectionPath: ...


@dataclass(frozen=True)
class LassoSelector:
    name: str = "lasso"

    def n_groups(self, X):
        return X.shape[1]

    def __call__(self, X, y, grid):
        return lasso_path(X, y, grid)


@dataclass(frozen=True)
class GraphLassoSelector:
    groups: GroupStructure
    name: str = "glasso"

    def n_groups(self, X):
        return self.groups.group_count

    def __call__(self, X, y, grid):
        return graph_lasso_path(X, y, self.groups, grid)


@dataclass(frozen=True, eq=False)
class StabilityProfile:
    """Selection counts per group (rows) and grid value (columns)."""

    grid: LambdaGrid
    counts: np.ndarray
    ndraw: int
    selector_id: str = ""

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[1] != len(self.grid):
            raise ValidationError("counts must be groups x grid")
        if self.ndraw < 1 or counts.min(initial=0) < 0 or counts.max(initial=0) > self.ndraw:
            raise ValidationError("counts must lie in [0, ndraw]")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def pi(self) -> np.ndarray:
        return self.counts / self.ndraw

    @property
    def n_groups(self) -> int:
        return self.counts.shape[0]

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "counts": self.counts.tolist(),
            "ndraw": self.ndraw,
            "selector_id": self.selector_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> StabilityProfile:
        return cls(LambdaGrid.from_dict(d["grid"]), np.array(d["counts"]), int(d["ndraw"]), d["selector_id"])


@dataclass(frozen=True, eq=False)
class StabilityScores:
    sg: np.ndarray
    max_prob: np.ndarray
    rule: str = "sg"

    @property
    def score(self) -> np.ndarray:
        return self.sg if self.rule == "sg" else self.max_prob

    @property
    def ranking(self) -> np.ndarray:
        """Group indices by decreasing score (ties: lower index), zero scores excluded."""
        s = self.score
        order = np.lexsort((np.arange(s.size), -s))
        return order[s[order] > 0]


def half_subsample(
    n: int, rng: np.random.Generator, labels: Sequence[float] | None = None, stratified: bool = False
) -> np.ndarray:
    """Draw ``n // 2`` distinct indices without replacement.

    With ``stratified=True`` each class contributes in proportion to its size
    (largest-remainder rounding), so the subsample keeps the label ratio.
    """
    if n < 4:
        raise ValidationError("need at least 4 samples to subsample")
    m = n // 2
    if not stratified:
        return np.sort(rng.choice(n, size=m, replace=False))
    labels = np.asarray(labels)
    classes = np.unique(labels)
    members = [np.flatnonzero(labels == c) for c in classes]
    quota = np.array([len(ix) * m / n for ix in members])
    take = np.floor(quota).astype(int)
    short = m - take.sum()
    for c in np.lexsort((np.arange(quota.size), -(quota - take)))[:short]:
        take[c] += 1
    parts = [rng.choice(ix, size=k, replace=False) for ix, k in zip(members, take)]
    return np.sort(np.concatenate(parts))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("NETSIG_THREADS", "1")))
    except ValueError:
        return 1


def _one_draw(X, y, selector, grid, seed_seq, stratified, n_groups):
    rng = np.random.default_rng(seed_seq)
    for _ in range(MAX_REDRAWS):
        idx = half_subsample(len(y), rng, y, stratified)
        if np.unique(y[idx]).size == 2:
            break
    else:
        raise ValidationError(f"no two-class subsample after {MAX_REDRAWS} draws")
    path = selector(X[idx], y[idx], grid)
    hits = np.zeros((n_groups, len(grid)), dtype=np.int64)
    for k, act in enumerate(path.active_sets):
        if act:
            hits[list(act), k] = 1
    return hits


def run_stability_selection(
    X,
    y,
    selector: Selector,
    grid: LambdaGrid,
    ndraw: int = DEFAULT_NDRAW,
    seed: int | np.random.SeedSequence = 0,
    stratified: bool = True,
    n_jobs: int | None = None,
) -> StabilityProfile:
    """Count how often each group is active at each grid value across
    ``ndraw`` random half-subsamples.

    Draw ``i`` uses the ``i``-th child of ``SeedSequence(seed)``, so the result
    does not depend on ``n_jobs`` (default: ``NETSIG_THREADS``).
    """
    if ndraw < 2:
        raise ValidationError("ndraw must be >= 2")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n_groups = selector.n_groups(X)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(ndraw)
    jobs = n_jobs or _threads()
    args = [(X, y, selector, grid, c, stratified, n_groups) for c in children]
    if jobs == 1:
        results = [_one_draw(*a) for a in args]
    else:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda a: _one_draw(*a), args))
    counts = np.sum(results, axis=0) if results else np.zeros((n_groups, len(grid)), dtype=np.int64)
    return StabilityProfile(grid, counts, ndraw, selector.name)


def sg_scores(profile: StabilityProfile) -> StabilityScores:
    """Per group, the maximum over the grid of its probability divided by the
    total probability of all groups at that grid value.

    Grid values where no group was ever selected are skipped.
    """
    # ndraw cancels in the ratio; integer sums keep the score order-independent
    counts = profile.counts
    total = counts.sum(axis=0)
    ok = total > 0
    if ok.any():
        sg = (counts[:, ok] / total[ok]).max(axis=1)
    else:
        sg = np.zeros(profile.n_groups)
    return StabilityScores(sg, profile.pi.max(axis=1, initial=0.0), "sg")


def max_prob_scores(profile: StabilityProfile) -> StabilityScores:
    s = sg_scores(profile)
    return StabilityScores(s.sg, s.max_prob, "max_prob")


def score_profile(profile: StabilityProfile, rule: str = "sg") -> StabilityScores:
    if rule == "sg":
        return sg_scores(profile)
    if rule == "max_prob":
        return max_prob_scores(profile)
    raise ValidationError(f"unknown score rule {rule!r}")


def group_units(groups: GroupStructure, gene_ids: Sequence[str]) -> list[Unit]:
    """Display unit of each group: the gene id for singletons, a gene tuple otherwise."""
    units: list[Unit] = []
    for g in groups.groups:
        if len(g) == 1:
            units.append(gene_ids[g[0]])
        else:
            units.append(tuple(gene_ids[j] for j in g))
    return units


def signature_from_ranking(order: Sequence[int], scores: Sequence[float], units: Sequence[Unit], size: int) -> Signature:
    """Take units in ``order`` until their genes first number at least ``size``."""
    if size < 1:
        raise ValidationError("signature size must be >= 1")
    genes: dict[str, None] = {}
    taken = []
    for g in order:
        if len(genes) >= size:
            break
        taken.append((units[g], float(scores[g])))
        for gene in unit_genes(units[g]):
            genes.setdefault(gene, None)
    complete = len(genes) >= size
    if not complete:
        log.warning("ranking exhausted at %d of %d requested genes", len(genes), size)
    return Signature(tuple(taken), tuple(genes), size, complete)


def signature_from_scores(scores, groups: GroupStructure, gene_ids: Sequence[str], size: int) -> Signature:
    """Signature from the groups with positive score, best first (ties: lower index)."""
    if isinstance(scores, StabilityScores):
        s = scores.score
    else:
        s = np.asarray(scores, dtype=float)
    order = np.lexsort((np.arange(s.size), -s))
    order = order[s[order] > 0]
    return signature_from_ranking(order.tolist(), s, group_units(groups, gene_ids), size)


def signature_from_path(path: SelectionPath, groups: GroupStructure, gene_ids: Sequence[str], size: int) -> Signature:
    """Signature from the order in which groups entered the path; the score is
    the grid value at entry."""
    scores = np.zeros(groups.group_count)
    scores[list(path.entry_order)] = path.entry_lambda
    return signature_from_ranking(list(path.entry_order), scores, group_units(groups, gene_ids), size)
