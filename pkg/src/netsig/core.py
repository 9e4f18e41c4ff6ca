"""Shared data types: datasets, gene networks, group structures, paths and signatures.

All types are frozen dataclasses holding read-only numpy arrays, so they can be
shared between concurrent solver runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

Edge = tuple[str, str]


class ValidationError(ValueError):
    """Raised when input data violates a type invariant."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


def canonical_labels(raw: Sequence[Any]) -> np.ndarray:
    """Map a two-valued label vector onto {-1, +1}.

    The smaller raw value maps to -1. Values that all parse as numbers are
    ordered numerically, anything else lexicographically as strings.
    """
    values = list(raw)
    distinct = sorted(set(values), key=_label_key(values))
    if len(distinct) == 1:
        raise ValidationError("single class: labels must contain two classes")
    if len(distinct) != 2:
        raise ValidationError(f"labels must be two-valued, got {len(distinct)} distinct values")
    low = distinct[0]
    return np.array([-1.0 if v == low else 1.0 for v in values])


def _label_key(values):
    try:
        [float(v) for v in values]
    except (TypeError, ValueError):
        return str
    return float


@dataclass(frozen=True, eq=False)
class ExpressionDataset:
    """Samples x genes value matrix with binary labels in {-1, +1}."""

    sample_ids: tuple[str, ...]
    gene_ids: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "gene_ids", tuple(str(g) for g in self.gene_ids))
        if values.ndim != 2:
            raise ValidationError("values must be a 2-D matrix")
        n, p = values.shape
        if len(self.gene_ids) != p:
            raise ValidationError(f"{len(self.gene_ids)} gene ids for {p} columns")
        if len(self.sample_ids) != n:
            raise ValidationError(f"{len(self.sample_ids)} sample ids for {n} rows")
        if labels.shape != (n,):
            raise ValidationError(f"labels length {labels.shape[0]} != row count {n}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("non-finite value in expression matrix")
        if len(set(self.gene_ids)) != p:
            raise ValidationError("duplicate gene id")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValidationError("labels must be in {-1, +1}")
        if np.unique(labels).size < 2:
            raise ValidationError("single class: both labels must be present")
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "labels", _readonly(labels))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_genes(self) -> int:
        return self.values.shape[1]

    def gene_index(self) -> dict[str, int]:
        return {g: j for j, g in enumerate(self.gene_ids)}

    def take_rows(self, rows) -> ExpressionDataset:
        rows = np.asarray(rows, dtype=int)
        return ExpressionDataset(
            [self.sample_ids[i] for i in rows], self.gene_ids, self.values[rows], self.labels[rows]
        )

    def take_genes(self, genes: Sequence[str]) -> ExpressionDataset:
        index = self.gene_index()
        missing = [g for g in genes if g not in index]
        if missing:
            raise ValidationError(f"missing gene id(s): {missing[:5]}")
        cols = [index[g] for g in genes]
        return ExpressionDataset(self.sample_ids, genes, self.values[:, cols], self.labels)

    def to_dict(self) -> dict:
        return {
            "sample_ids": list(self.sample_ids),
            "gene_ids": list(self.gene_ids),
            "values": self.values.tolist(),
            "labels": self.labels.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExpressionDataset:
        return cls(d["sample_ids"], d["gene_ids"], np.array(d["values"], dtype=float), d["labels"])

    def __eq__(self, other):
        if not isinstance(other, ExpressionDataset):
            return NotImplemented
        return (
            self.sample_ids == other.sample_ids
            and self.gene_ids == other.gene_ids
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )


def validate_dataset(
    rows: Sequence[Sequence[float]],
    labels: Sequence[Any],
    gene_ids: Sequence[str] | None = None,
    sample_ids: Sequence[str] | None = None,
) -> ExpressionDataset:
    """Build an :class:`ExpressionDataset` from raw rows and labels.

    Labels may use any two-valued encoding; see :func:`canonical_labels`.
    """
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise ValidationError("rows are not rectangular")
    values = np.array(rows, dtype=float)
    if values.ndim == 1:
        values = values.reshape(len(rows), 0)
    n, p = values.shape
    if gene_ids is None:
        gene_ids = [f"g{j}" for j in range(p)]
    if sample_ids is None:
        sample_ids = [f"s{i}" for i in range(n)]
    if len(labels) != n:
        raise ValidationError(f"labels length {len(labels)} != row count {n}")
    if not np.all(np.isfinite(values)):
        raise ValidationError("non-finite value in expression matrix")
    return ExpressionDataset(sample_ids, gene_ids, values, canonical_labels(labels))


def _edge(a: str, b: str) -> Edge:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class GeneNetwork:
    """Undirected simple graph over gene identifiers."""

    nodes: frozenset[str]
    edges: frozenset[Edge]

    def __init__(self, edges: Iterable[tuple[str, str]] = (), nodes: Iterable[str] = ()):
        canon = set()
        node_set = {str(v) for v in nodes}
        for a, b in edges:
            a, b = str(a), str(b)
            if a == b:
                raise ValidationError(f"self-loop on {a!r}")
            canon.add(_edge(a, b))
            node_set.update((a, b))
        object.__setattr__(self, "nodes", frozenset(node_set))
        object.__setattr__(self, "edges", frozenset(canon))

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def neighbors(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def to_dict(self) -> dict:
        return {"nodes": sorted(self.nodes), "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_dict(cls, d: dict) -> GeneNetwork:
        return cls([tuple(e) for e in d["edges"]], nodes=d["nodes"])


@dataclass(frozen=True)
class GroupStructure:
    """Ordered list of column-index groups over a dataset's columns.

    Every column in ``range(n_columns)`` must belong to at least one group.
    """

    groups: tuple[tuple[int, ...], ...]
    n_columns: int

    def __init__(self, groups: Iterable[Iterable[int]], n_columns: int | None = None):
        gs = tuple(tuple(int(i) for i in g) for g in groups)
        if n_columns is None:
            n_columns = 1 + max((max(g) for g in gs if g), default=-1)
        for k, g in enumerate(gs):
            if not g:
                raise ValidationError(f"group {k} is empty")
            if len(set(g)) != len(g):
                raise ValidationError(f"group {k} repeats a column")
            if min(g) < 0 or max(g) >= n_columns:
                raise ValidationError(f"group {k} has an index out of range")
        covered = set().union(*map(set, gs)) if gs else set()
        if len(covered) != n_columns:
            raise ValidationError(
                f"{n_columns - len(covered)} column(s) belong to no group; drop them upstream"
            )
        object.__setattr__(self, "groups", gs)
        object.__setattr__(self, "n_columns", int(n_columns))

    @property
    def group_count(self) -> int:
        return len(self.groups)

    @classmethod
    def singletons(cls, p: int) -> GroupStructure:
        return cls([(j,) for j in range(p)], p)

    def to_dict(self) -> dict:
        return {"groups": [list(g) for g in self.groups], "n_columns": self.n_columns}

    @classmethod
    def from_dict(cls, d: dict) -> GroupStructure:
        return cls(d["groups"], d["n_columns"])


def edges_to_groups(network: GeneNetwork, gene_ids: Sequence[str]) -> tuple[GroupStructure, list[str]]:
    """One size-2 group per network edge with both endpoints in ``gene_ids``.

    Returns the group structure over the *retained* genes and the list of genes
    that no surviving edge covers. The group indices refer to the column order
    of ``[g for g in gene_ids if g not in removed]``.
    """
    index = {g: j for j, g in enumerate(gene_ids)}
    kept_edges = [(a, b) for a, b in network.sorted_edges() if a in index and b in index]
    if not kept_edges:
        raise ValidationError("no covered genes: no network edge has both endpoints in the gene list")
    covered = {g for e in kept_edges for g in e}
    removed = [g for g in gene_ids if g not in covered]
    kept = [g for g in gene_ids if g in covered]
    new_index = {g: j for j, g in enumerate(kept)}
    groups = [tuple(sorted((new_index[a], new_index[b]))) for a, b in kept_edges]
    # order groups by their column pairs so group order follows the column order
    groups.sort()
    return GroupStructure(groups, len(kept)), removed


@dataclass(frozen=True, eq=False)
class LambdaGrid:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValidationError("lambda grid is empty")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValidationError("lambda grid values must be positive and finite")
        if np.any(np.diff(v) >= 0):
            raise ValidationError("lambda grid must be strictly decreasing")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def geometric(cls, lambda_max: float, count: int = 50, min_ratio: float = 1e-3) -> LambdaGrid:
        if count == 1:
            return cls([lambda_max])
        return cls(np.geomspace(lambda_max, lambda_max * min_ratio, count))

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values.tolist())

    def __eq__(self, other):
        if not isinstance(other, LambdaGrid):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def to_dict(self) -> dict:
        return {"values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> LambdaGrid:
        return cls(d["values"])


@dataclass(frozen=True)
class SelectionPath:
    """Active sets along a lambda grid and the order in which groups entered."""

    grid: LambdaGrid
    active_sets: tuple[frozenset[int], ...]
    entry_order: tuple[int, ...]
    entry_lambda: tuple[float, ...]
    converged: tuple[bool, ...] = ()

    def __post_init__(self):
        if len(self.active_sets) != len(self.grid):
            raise ValidationError("one active set per grid value is required")
        if len(set(self.entry_order)) != len(self.entry_order):
            raise ValidationError("entry_order repeats a group")
        if len(self.entry_lambda) != len(self.entry_order):
            raise ValidationError("entry_lambda must align with entry_order")

    @classmethod
    def from_fits(cls, grid: LambdaGrid, active_sets, entry_norms, converged=()) -> SelectionPath:
        """Build a path; ``entry_norms[k]`` maps each group active at grid[k] to its norm."""
        first_seen: dict[int, tuple[int, float]] = {}
        for k, act in enumerate(active_sets):
            for g in act:
                if g not in first_seen:
                    first_seen[g] = (k, float(entry_norms[k][g]))
        # same entry lambda: larger norm first, then lower group index
        order = sorted(first_seen, key=lambda g: (first_seen[g][0], -first_seen[g][1], g))
        lam = [float(grid.values[first_seen[g][0]]) for g in order]
        return cls(grid, tuple(frozenset(a) for a in active_sets), tuple(order), tuple(lam), tuple(converged))

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "active_sets": [sorted(a) for a in self.active_sets],
            "entry_order": list(self.entry_order),
            "entry_lambda": list(self.entry_lambda),
            "converged": list(self.converged),
        }

    @classmethod
    def from_dict(cls, d: dict) -> SelectionPath:
        return cls(
            LambdaGrid.from_dict(d["grid"]),
            tuple(frozenset(a) for a in d["active_sets"]),
            tuple(d["entry_order"]),
            tuple(d["entry_lambda"]),
            tuple(d.get("converged", ())),
        )


Unit = Hashable


@dataclass(frozen=True)
class Signature:
    """Ranked selection units (genes or edges) and the gene set of the requested size.

    ``complete`` is False when the ranking ran out before reaching ``size`` genes.
    """

    ranked_units: tuple[tuple[Unit, float], ...]
    genes: tuple[str, ...]
    size: int
    complete: bool = True

    def __post_init__(self):
        scores = [s for _, s in self.ranked_units]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise ValidationError("signature scores must be non-increasing")
        if len(set(self.genes)) != len(self.genes):
            raise ValidationError("signature genes must be distinct")

    def to_dict(self) -> dict:
        return {
            "ranked_units": [[_unit_to_json(u), s] for u, s in self.ranked_units],
            "genes": list(self.genes),
            "size": self.size,
            "complete": self.complete,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Signature:
        units = tuple((_unit_from_json(u), float(s)) for u, s in d["ranked_units"])
        return cls(units, tuple(d["genes"]), int(d["size"]), bool(d["complete"]))


def _unit_to_json(u):
    return list(u) if isinstance(u, tuple) else u


def _unit_from_json(u):
    return tuple(u) if isinstance(u, list) else u


def unit_genes(unit: Unit) -> tuple[str, ...]:
    return unit if isinstance(unit, tuple) else (unit,)


def gene_ranking(ranked_units: Iterable[tuple[Unit, float]]) -> list[str]:
    """Deduplicated genes in the order their units appear."""
    seen: dict[str, None] = {}
    for unit, _ in ranked_units:
        for g in unit_genes(unit):
            seen.setdefault(g, None)
    return list(seen)


@dataclass(frozen=True, eq=False)
class LogisticModel:
    """Logistic model over a named gene subset.

    ``separable`` flags fits whose likelihood kept increasing up to the
    iteration cap (perfectly separated training data).
    """

    gene_ids: tuple[str, ...]
    weights: np.ndarray
    intercept: float
    converged: bool = True
    separable: bool = False
    iterations: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.shape != (len(self.gene_ids),):
            raise ValidationError("weights must align with gene_ids")
        if not np.all(np.isfinite(w)) or not math.isfinite(self.intercept):
            raise ValidationError("non-finite logistic weights")
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "weights", _readonly(w))

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.intercept

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1.0, -1.0)

    def __eq__(self, other):
        if not isinstance(other, LogisticModel):
            return NotImplemented
        return (
            self.gene_ids == other.gene_ids
            and np.array_equal(self.weights, other.weights)
            and self.intercept == other.intercept
            and (self.converged, self.separable, self.iterations)
            == (other.converged, other.separable, other.iterations)
        )

    def to_dict(self) -> dict:
        return {
            "gene_ids": list(self.gene_ids),
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "converged": self.converged,
            "separable": self.separable,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> LogisticModel:
        return cls(
            tuple(d["gene_ids"]), np.array(d["weights"], dtype=float), float(d["intercept"]),
            d["converged"], d["separable"], d["iterations"],
        )
