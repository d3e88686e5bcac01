"""Seed correspondences and greedy entropy-based seed selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class SeedSet:
    """Ordered seed pairs ``(g1_vertex, g2_vertex)``; no vertex repeats on either side."""

    pairs: tuple = ()

    def __post_init__(self):
        pairs = tuple((int(u), int(v)) for u, v in self.pairs)
        left = [u for u, _ in pairs]
        right = [v for _, v in pairs]
        if len(set(left)) != len(left) or len(set(right)) != len(right):
            raise ParameterError("seed set repeats a vertex")
        if any(u < 0 or v < 0 for u, v in pairs):
            raise ParameterError("seed vertices must be non-negative")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def identity(cls, vertices: Iterable[int]) -> "SeedSet":
        return cls(tuple((v, v) for v in vertices))

    @classmethod
    def from_arrays(cls, g1: Sequence[int], g2: Sequence[int]) -> "SeedSet":
        if len(g1) != len(g2):
            raise ParameterError("seed arrays differ in length")
        return cls(tuple(zip(g1, g2)))

    @property
    def g1(self) -> np.ndarray:
        return np.array([u for u, _ in self.pairs], dtype=np.int64)

    @property
    def g2(self) -> np.ndarray:
        return np.array([v for _, v in self.pairs], dtype=np.int64)

    def subset(self, indices: Iterable[int]) -> "SeedSet":
        return SeedSet(tuple(self.pairs[i] for i in indices))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def _entropy_from_codes(codes: np.ndarray) -> float:
    if codes.size == 0:
        return 0.0
    _, counts = np.unique(codes, return_counts=True)
    p = counts / codes.size
    return float(-(p * np.log2(p)).sum())


def column_entropy(adj_block) -> float:
    """Shannon entropy (bits) of the columns of a binary matrix, read as words.

    >>> column_entropy([[1, 0, 1, 0], [0, 1, 1, 0]])
    2.0
    """
    block = np.asarray(adj_block)
    if block.ndim != 2:
        raise ParameterError("adjacency block must be two-dimensional")
    if block.shape[0] == 0 or block.shape[1] == 0:
        return 0.0
    _, codes = np.unique(block.T != 0, axis=0, return_inverse=True)
    return _entropy_from_codes(np.asarray(codes).ravel())


@dataclass(frozen=True)
class EntropySelection:
    """Greedy selection trace: chosen row indices, the maximisers at each step
    and the summed two-graph entropy after each step."""

    order: tuple
    ties: tuple
    entropy: tuple


def _refine(codes: np.ndarray, row: np.ndarray) -> np.ndarray:
    _, inv = np.unique(codes * 2 + row, return_inverse=True)
    return np.asarray(inv).ravel()


def _candidate_entropies(codes: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Entropy after refining ``codes`` by each row of ``rows``, all at once."""
    r, m = rows.shape
    if m == 0:
        return np.zeros(r)
    width = 2 * (int(codes.max()) + 1)
    keys = codes[None, :] * 2 + rows + width * np.arange(r)[:, None]
    counts = np.bincount(keys.ravel(), minlength=r * width).reshape(r, width)
    p = counts / m
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(counts > 0, p * np.log2(p), 0.0)
    return -terms.sum(axis=1)


def greedy_entropy_selection(block1, block2, budget: int) -> EntropySelection:
    """Pick ``budget`` rows (seeds) greedily maximising ``H(block1[S]) + H(block2[S])``.

    Row ``i`` of each block is seed ``i``'s adjacency to the unseeded cluster
    vertices of that graph. Ties go to the lowest row index.
    """
    b1 = (np.asarray(block1) != 0).astype(np.int64)
    b2 = (np.asarray(block2) != 0).astype(np.int64)
    if b1.ndim != 2 or b2.ndim != 2 or b1.shape[0] != b2.shape[0]:
        raise ParameterError("blocks must be 2-D with one row per seed in both graphs")
    s = b1.shape[0]
    if not 0 <= budget <= s:
        raise ParameterError(f"budget {budget} outside [0, {s}]")
    codes1 = np.zeros(b1.shape[1], dtype=np.int64)
    codes2 = np.zeros(b2.shape[1], dtype=np.int64)
    remaining = np.arange(s)
    order, ties, trail = [], [], []
    for _ in range(budget):
        scores = (_candidate_entropies(codes1, b1[remaining])
                  + _candidate_entropies(codes2, b2[remaining]))
        best = scores.max()
        winners = remaining[scores >= best - _TIE_TOL]
        pick = int(winners[0])
        order.append(pick)
        ties.append(tuple(int(w) for w in winners))
        trail.append(float(best))
        remaining = remaining[remaining != pick]
        if b1.shape[1]:
            codes1 = _refine(codes1, b1[pick])
        if b2.shape[1]:
            codes2 = _refine(codes2, b2[pick])
    return EntropySelection(tuple(order), tuple(ties), tuple(trail))


def _dense_block(adj, rows, cols) -> np.ndarray:
    """``adj[rows][:, cols]`` as a dense 0/1 array, read straight from the CSR arrays."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    pos = np.full(adj.shape[1], -1, dtype=np.int64)
    pos[cols] = np.arange(len(cols))
    start, stop = adj.indptr[rows], adj.indptr[rows + 1]
    lengths = stop - start
    owner = np.repeat(np.arange(len(rows)), lengths)
    offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    col = pos[adj.indices[np.repeat(start, lengths) + offsets]]
    keep = col >= 0
    out = np.zeros((len(rows), len(cols)), dtype=np.int8)
    out[owner[keep], col[keep]] = 1
    return out


def seed_blocks(a, b, seeds: SeedSet, cluster1, cluster2):
    """Dense 0/1 seed-to-cluster adjacency blocks for both graphs."""
    return (_dense_block(a.adjacency, seeds.g1, cluster1),
            _dense_block(b.adjacency, seeds.g2, cluster2))


def select_seeds(a, b, all_seeds: SeedSet, cluster1, cluster2, budget: int) -> SeedSet:
    """Choose ``budget`` of ``all_seeds`` for matching one cluster, in greedy order."""
    if len(cluster1) == 0 or len(cluster2) == 0:
        raise ParameterError("cannot select seeds for an empty cluster")
    if budget > len(all_seeds):
        raise ParameterError(f"budget {budget} exceeds the {len(all_seeds)} available seeds")
    block1, block2 = seed_blocks(a, b, all_seeds, cluster1, cluster2)
    sel = greedy_entropy_selection(block1, block2, budget)
    return all_seeds.subset(sel.order)
