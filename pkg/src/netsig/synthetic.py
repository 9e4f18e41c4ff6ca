"""Synthetic expression data with a planted, network-connected signature."""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Iterable

import networkx as nx
import numpy as np

from .core import ExpressionDataset, GeneNetwork, ValidationError


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings.

    ``network`` is ``"regular"`` (random d-regular) or ``"pa"`` (preferential
    attachment with about d/2 edges per new node). The ``n_components``
    planted components of ``component_size`` genes each carry coefficients of
    magnitude ``effect``; within a component features share correlation
    ``within_corr``. A fraction ``label_noise`` of labels is flipped.
    """

    p: int = 300
    n: int = 150
    network: str = "regular"
    degree: int = 4
    n_components: int = 3
    component_size: int = 6
    effect: float = 1.0
    label_noise: float = 0.1
    within_corr: float = 0.4
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_components * self.component_size > self.p:
            raise ValidationError("planted genes exceed p")
        if self.degree < 1:
            raise ValidationError("degree must be >= 1")
        if not 0 <= self.label_noise < 0.5:
            raise ValidationError("label_noise must be in [0, 0.5)")
        if not self.effect > 0:
            raise ValidationError("effect must be positive")
        if not 0 <= self.within_corr < 1:
            raise ValidationError("within_corr must be in [0, 1)")
        if self.network not in ("regular", "pa"):
            raise ValidationError(f"unknown network model {self.network!r}")
        if self.n < 4:
            raise ValidationError("n must be >= 4")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    support: tuple[str, ...]
    coefficients: np.ndarray
    components: tuple[tuple[str, ...], ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "support": list(self.support),
            "coefficients": self.coefficients.tolist(),
            "components": [list(c) for c in self.components],
        }

    @classmethod
    def from_dict(cls, d: dict) -> GroundTruth:
        return cls(tuple(d["support"]), np.array(d["coefficients"]), tuple(tuple(c) for c in d["components"]))


def gene_names(p: int) -> list[str]:
    width = len(str(p - 1))
    return [f"G{j:0{width}d}" for j in range(p)]


def _network(spec: SyntheticSpec, rng: np.random.Generator) -> nx.Graph:
    nx_seed = int(rng.integers(2**31 - 1))
    if spec.network == "regular":
        if spec.degree >= spec.p or (spec.p * spec.degree) % 2:
            raise ValidationError("random regular graph needs degree < p and p * degree even")
        return nx.random_regular_graph(spec.degree, spec.p, seed=nx_seed)
    m = max(1, spec.degree // 2)
    if m >= spec.p:
        raise ValidationError("degree too large for preferential attachment")
    return nx.barabasi_albert_graph(spec.p, m, seed=nx_seed)


def _grow(graph: nx.Graph, root: int, size: int, used: set[int], rng) -> list[int] | None:
    comp = [root]
    seen = {root}
    queue = deque([root])
    while queue and len(comp) < size:
        u = queue.popleft()
        nbrs = [v for v in graph.neighbors(u) if v not in seen and v not in used]
        rng.shuffle(nbrs)
        for v in nbrs:
            if len(comp) == size:
                break
            seen.add(v)
            comp.append(v)
            queue.append(v)
    return comp if len(comp) == size else None


def plant_components(graph: nx.Graph, count: int, size: int, rng: np.random.Generator) -> list[list[int]]:
    """Grow ``count`` disjoint connected node sets of ``size`` by breadth-first search."""
    used: set[int] = set()
    comps = []
    for c in range(count):
        roots = [v for v in rng.permutation(graph.number_of_nodes()).tolist() if v not in used]
        for root in roots:
            comp = _grow(graph, root, size, used, rng)
            if comp is not None:
                break
        else:
            raise ValidationError(
                f"cannot grow component {c + 1} of size {size}: network too sparse "
                f"({graph.number_of_edges()} edges, {len(used)} genes already planted)"
            )
        comps.append(comp)
        used.update(comp)
    return comps


def generate(spec: SyntheticSpec) -> tuple[ExpressionDataset, GeneNetwork, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    graph = _network(spec, rng)
    comps = plant_components(graph, spec.n_components, spec.component_size, rng)
    names = gene_names(spec.p)

    X = rng.standard_normal((spec.n, spec.p))
    beta = np.zeros(spec.p)
    a = np.sqrt(spec.within_corr)
    b = np.sqrt(1.0 - spec.within_corr)
    for comp in comps:
        shared = rng.standard_normal(spec.n)
        X[:, comp] = a * shared[:, None] + b * X[:, comp]
        beta[comp] = spec.effect * rng.choice((-1.0, 1.0))
    score = X @ beta + spec.noise_sd * rng.standard_normal(spec.n)
    y = np.where(score >= 0, 1.0, -1.0)
    flips = int(round(spec.label_noise * spec.n))
    if flips:
        idx = rng.choice(spec.n, size=flips, replace=False)
        y[idx] = -y[idx]
    if np.unique(y).size < 2:
        raise ValidationError("generated labels contain a single class; change seed or noise")

    dataset = ExpressionDataset([f"S{i:04d}" for i in range(spec.n)], names, X, y)
    network = GeneNetwork(((names[u], names[v]) for u, v in graph.edges()), nodes=names)
    support = tuple(names[j] for comp in comps for j in sorted(comp))
    truth = GroundTruth(support, beta, tuple(tuple(names[j] for j in sorted(c)) for c in comps))
    return dataset, network, truth


@dataclass(frozen=True)
class RecoveryMetrics:
    precision: float
    recall: float
    empty_signature: bool = False


def recovery_metrics(signature: Iterable[str], truth: GroundTruth) -> RecoveryMetrics:
    sig = set(signature)
    support = set(truth.support)
    hit = len(sig & support)
    recall = hit / len(support) if support else 0.0
    if not sig:
        return RecoveryMetrics(0.0, recall, True)
    return RecoveryMetrics(hit / len(sig), recall)
