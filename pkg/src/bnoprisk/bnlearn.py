"""Discrete Bayesian networks over process-loss nodes.

States are 1-based integers in the public API (state 1 is the lowest loss
bin). Structures are scored with BIC and searched either greedily or, for up
to four nodes, exhaustively.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Literal, Sequence

import numpy as np

from bnoprisk.aggregate import ExtractedDatabase
from bnoprisk.varengine import BinnedPdf

MAX_JOINT_SIZE = 10**6
MAX_EXHAUSTIVE_NODES = 4


class CycleError(ValueError):
    pass


@dataclass
class Discretization:
    n_states: int
    maxima: np.ndarray

    @property
    def bin_widths(self) -> np.ndarray:
        return self.maxima / self.n_states

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Map an R x N array of losses to states ``ceil(v / width)`` in 1..n."""
        v = np.asarray(values, dtype=np.float64)
        s = np.ceil(v * self.n_states / self.maxima[None, :])
        return np.clip(s, 1, self.n_states).astype(np.int64)


def discretize(db: ExtractedDatabase, n_states: int = 5) -> tuple[np.ndarray, Discretization]:
    """Equal-width bins on ``[0, max_i]`` for each process."""
    if db.n_records < 1:
        raise ValueError("empty extracted database")
    maxima = db.records.max(axis=0)
    for i, m in enumerate(maxima):
        if not m > 0:
            raise ValueError(f"degenerate process {db.process_labels[i]!r}: all losses are zero")
    disc = Discretization(n_states, maxima.astype(np.float64))
    return disc.apply(db.records), disc


@dataclass(frozen=True)
class DagStructure:
    n_nodes: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        edges = frozenset((int(a), int(b)) for a, b in self.edges)
        for a, b in edges:
            if a == b or not (0 <= a < self.n_nodes and 0 <= b < self.n_nodes):
                raise ValueError(f"invalid edge {(a, b)} for {self.n_nodes} nodes")
        object.__setattr__(self, "edges", edges)
        if self.topological_order() is None:
            raise CycleError(f"edge set {sorted(edges)} contains a cycle")

    def parents(self, node: int) -> tuple[int, ...]:
        return tuple(sorted(a for a, b in self.edges if b == node))

    def topological_order(self) -> list[int] | None:
        indeg = [0] * self.n_nodes
        children: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for a, b in self.edges:
            indeg[b] += 1
            children[a].append(b)
        ready = sorted(i for i in range(self.n_nodes) if indeg[i] == 0)
        order = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            for c in sorted(children[node]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort()
        return order if len(order) == self.n_nodes else None

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def __len__(self) -> int:
        return len(self.edges)


def _check_states(states: np.ndarray, n_states: int) -> np.ndarray:
    s = np.asarray(states)
    if s.ndim != 2 or s.shape[0] == 0:
        raise ValueError("states must be a non-empty R x N matrix")
    if s.min() < 1 or s.max() > n_states:
        raise ValueError(f"states must lie in 1..{n_states}")
    return s.astype(np.int64) - 1


def _family_counts(s0: np.ndarray, node: int, parents: Sequence[int], n_states: int) -> np.ndarray:
    """Counts shaped (n,)*len(parents) + (n,)."""
    cols = list(parents) + [node]
    flat = np.ravel_multi_index(tuple(s0[:, c] for c in cols), (n_states,) * len(cols))
    counts = np.bincount(flat, minlength=n_states ** len(cols))
    return counts.reshape((n_states,) * len(cols)).astype(np.float64)


def _local_bic(s0: np.ndarray, node: int, parents: tuple[int, ...], n_states: int) -> float:
    counts = _family_counts(s0, node, parents, n_states).reshape(-1, n_states)
    totals = counts.sum(axis=1, keepdims=True)
    nz = counts > 0
    ll = float(np.sum(counts[nz] * np.log((counts / np.where(totals > 0, totals, 1.0))[nz])))
    n_params = (n_states - 1) * n_states ** len(parents)
    return ll - 0.5 * math.log(s0.shape[0]) * n_params


def score(structure: DagStructure, states: np.ndarray, n_states: int = 5) -> float:
    """BIC: maximized log-likelihood minus ``ln(R)/2`` times the free parameters."""
    s0 = _check_states(states, n_states)
    if s0.shape[1] != structure.n_nodes:
        raise ValueError("structure size does not match the number of columns")
    return sum(_local_bic(s0, i, structure.parents(i), n_states) for i in range(structure.n_nodes))


def log_likelihood(structure: DagStructure, states: np.ndarray, n_states: int = 5) -> float:
    """Penalty-free part of :func:`score`."""
    s0 = _check_states(states, n_states)
    penalty = 0.5 * math.log(s0.shape[0]) * sum(
        (n_states - 1) * n_states ** len(structure.parents(i)) for i in range(structure.n_nodes)
    )
    return score(structure, states, n_states) + penalty


def _tie_key(struct: DagStructure):
    return (len(struct.edges), struct.sorted_edges())


def _neighbours(struct: DagStructure) -> Iterable[DagStructure]:
    n = struct.n_nodes
    for a, b in itertools.permutations(range(n), 2):
        if (a, b) in struct.edges:
            moves = [struct.edges - {(a, b)}, (struct.edges - {(a, b)}) | {(b, a)}]
        elif (b, a) in struct.edges:
            continue
        else:
            moves = [struct.edges | {(a, b)}]
        for edges in moves:
            try:
                yield DagStructure(n, frozenset(edges))
            except CycleError:
                pass


def all_dags(n_nodes: int) -> list[DagStructure]:
    """Every labeled DAG on ``n_nodes`` nodes (25 for three nodes)."""
    pairs = list(itertools.combinations(range(n_nodes), 2))
    out = []
    # each unordered pair is absent, forward or backward
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = frozenset(
            (a, b) if c == 1 else (b, a) for (a, b), c in zip(pairs, choice) if c
        )
        try:
            out.append(DagStructure(n_nodes, edges))
        except CycleError:
            pass
    return out


def learn_structure(states: np.ndarray, mode: Literal["greedy", "exhaustive"] = "greedy",
                    n_states: int = 5) -> DagStructure:
    """BIC-optimal structure.

    ``greedy`` hill-climbs from the empty graph with single-edge add, remove
    and reverse moves, taking the best strictly improving move until none is
    left. ``exhaustive`` scores every DAG (at most four nodes). Ties go to
    fewer edges, then the lexicographically smaller edge list.
    """
    s0 = _check_states(states, n_states)
    if s0.shape[0] < 2:
        raise ValueError("need at least two records to learn a structure")
    n = s0.shape[1]

    @lru_cache(maxsize=None)
    def local(node: int, parents: tuple[int, ...]) -> float:
        return _local_bic(s0, node, parents, n_states)

    def total(struct: DagStructure) -> float:
        return sum(local(i, struct.parents(i)) for i in range(n))

    if mode == "exhaustive":
        if n > MAX_EXHAUSTIVE_NODES:
            raise ValueError(f"exhaustive search capped at {MAX_EXHAUSTIVE_NODES} nodes")
        scored = [(total(d), d) for d in all_dags(n)]
        best_score = max(sc for sc, _ in scored)
        tied = [d for sc, d in scored if _close(sc, best_score)]
        return min(tied, key=_tie_key)
    if mode != "greedy":
        raise ValueError(f"unknown structure-learning mode {mode!r}")

    current = DagStructure(n)
    current_score = total(current)
    while True:
        cands = [(total(d), d) for d in _neighbours(current)]
        better = [(sc, d) for sc, d in cands if sc > current_score and not _close(sc, current_score)]
        if not better:
            return current
        top = max(sc for sc, _ in better)
        current = min((d for sc, d in better if _close(sc, top)), key=_tie_key)
        current_score = total(current)


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


@dataclass
class DiscreteBayesNet:
    """DAG plus one CPT per node.

    ``cpts[i]`` has shape ``(n,) * len(parents) + (n,)``: parent axes in
    ascending node order, the node's own state last.
    """

    structure: DagStructure
    cpts: list[np.ndarray]
    n_states: int = 5
    node_labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.cpts) != self.structure.n_nodes:
            raise ValueError("one CPT per node required")
        for i, cpt in enumerate(self.cpts):
            k = len(self.structure.parents(i))
            if cpt.shape != (self.n_states,) * (k + 1):
                raise ValueError(f"CPT of node {i} has shape {cpt.shape}")
            if np.any(cpt < 0) or not np.allclose(cpt.sum(axis=-1), 1.0, rtol=0, atol=1e-12):
                raise ValueError(f"CPT of node {i} is not normalized")
        if not self.node_labels:
            self.node_labels = [f"p{i + 1}" for i in range(self.structure.n_nodes)]


def learn_cpts(structure: DagStructure, states: np.ndarray, n_states: int = 5,
               node_labels: Sequence[str] | None = None) -> DiscreteBayesNet:
    """Add-one smoothed frequencies ``(count(x, pa) + 1) / (count(pa) + n)``."""
    s0 = _check_states(states, n_states)
    cpts = []
    for i in range(structure.n_nodes):
        counts = _family_counts(s0, i, structure.parents(i), n_states) + 1.0
        cpts.append(counts / counts.sum(axis=-1, keepdims=True))
    return DiscreteBayesNet(structure, cpts, n_states, list(node_labels or []))


def joint(net: DiscreteBayesNet) -> np.ndarray:
    """Full table ``P[x_1, ..., x_N] = prod_i P(x_i | pa_i)`` (0-based axes)."""
    n = net.structure.n_nodes
    size = net.n_states ** n
    if size > MAX_JOINT_SIZE:
        raise ValueError(
            f"state space of {size} configurations exceeds exact-enumeration limit {MAX_JOINT_SIZE}"
        )
    table = np.ones((net.n_states,) * n)
    for i, cpt in enumerate(net.cpts):
        axes = list(net.structure.parents(i)) + [i]
        order = np.argsort(axes)
        shape = [1] * n
        for ax in axes:
            shape[ax] = net.n_states
        table = table * np.transpose(cpt, order).reshape(shape)
    return table


def marginal(net: DiscreteBayesNet, process: int, disc: Discretization) -> BinnedPdf:
    """Node marginal as an order-1 pdf on that process's bin width."""
    table = joint(net)
    others = tuple(ax for ax in range(table.ndim) if ax != process)
    mass = table.sum(axis=others)
    return BinnedPdf(mass, float(disc.bin_widths[process]), order=1)
