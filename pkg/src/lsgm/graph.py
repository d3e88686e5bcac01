"""Simple undirected graphs, correlated SBM sampling and edge-list I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, ParseError

# Number of vertex pairs drawn per RNG call while sampling; does not affect output.
_PAIR_CHUNK = 1 << 22


def _canonical_edges(n: int, edges) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ParameterError("edges must be an (E, 2) array of vertex pairs")
    if arr.min() < 0 or arr.max() >= n:
        raise ParameterError(f"edge endpoint outside [0, {n})")
    if np.any(arr[:, 0] == arr[:, 1]):
        raise ParameterError("self-loops are not allowed in a simple graph")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    keys = np.unique(lo * n + hi)
    return np.column_stack((keys // n, keys % n))


class SparseGraph:
    """Immutable simple undirected graph on vertices ``0..n-1``.

    Edges are stored once as sorted pairs ``u < v``; the symmetric CSR
    adjacency matrix (sorted neighbour lists per row) is built lazily.
    """

    def __init__(self, n: int, edges=()):
        n = int(n)
        if n < 0:
            raise ParameterError("vertex count must be non-negative")
        self._n = n
        e = _canonical_edges(n, edges) if n > 0 else np.empty((0, 2), np.int64)
        e.setflags(write=False)
        self._edges = e

    @classmethod
    def from_dense(cls, adj) -> "SparseGraph":
        a = np.asarray(adj)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ParameterError("adjacency matrix must be square")
        if not np.array_equal(a, a.T):
            raise ParameterError("adjacency matrix must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ParameterError("adjacency matrix must be hollow")
        u, v = np.nonzero(np.triu(a, 1))
        return cls(a.shape[0], np.column_stack((u, v)))

    @classmethod
    def from_sparse(cls, adj) -> "SparseGraph":
        m = sp.triu(sp.csr_matrix(adj), k=1).tocoo()
        keep = m.data != 0
        return cls(m.shape[0], np.column_stack((m.row[keep], m.col[keep])))

    @property
    def n(self) -> int:
        return self._n

    @property
    def edges(self) -> np.ndarray:
        """Read-only ``(E, 2)`` array of edges with ``u < v``, sorted."""
        return self._edges

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency as float CSR with sorted column indices."""
        u, v = self._edges[:, 0], self._edges[:, 1]
        rows = np.concatenate((u, v))
        cols = np.concatenate((v, u))
        data = np.ones(len(rows), dtype=np.float64)
        a = sp.csr_matrix((data, (rows, cols)), shape=(self._n, self._n))
        a.sort_indices()
        return a

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self._edges.ravel(), minlength=self._n)

    def neighbors(self, v: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[v]:a.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        return v in self.neighbors(u)

    @cached_property
    def edge_keys(self) -> np.ndarray:
        """Sorted int64 keys ``u * n + v`` (``u < v``); used for fast set ops."""
        return self._edges[:, 0] * self._n + self._edges[:, 1]

    def to_dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def subgraph(self, vertices: Sequence[int]) -> "SparseGraph":
        """Induced subgraph, relabelled so ``vertices[i]`` becomes vertex ``i``."""
        idx = np.asarray(vertices, dtype=np.int64)
        sub = self.adjacency[idx][:, idx]
        return SparseGraph.from_sparse(sub)

    def __eq__(self, other):
        if not isinstance(other, SparseGraph):
            return NotImplemented
        return self._n == other._n and np.array_equal(self._edges, other._edges)

    def __hash__(self):
        return hash((self._n, self._edges.tobytes()))

    def __repr__(self):
        return f"SparseGraph(n={self._n}, edges={self.num_edges})"


def _check_bijection(perm, n: int) -> np.ndarray:
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != (n,):
        raise ParameterError(f"permutation must have length {n}")
    if n and (p.min() < 0 or p.max() >= n or len(np.unique(p)) != n):
        raise ParameterError("permutation is not a bijection on the vertex set")
    return p


def apply_permutation(g: SparseGraph, perm) -> SparseGraph:
    """Relabel vertices: edge ``{u, v}`` becomes ``{perm[u], perm[v]}``."""
    p = _check_bijection(perm, g.n)
    return SparseGraph(g.n, p[g.edges])


def random_permutation(n: int, rng) -> np.ndarray:
    return np.random.default_rng(rng).permutation(n)


# ---------------------------------------------------------------------------
# Stochastic block model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SbmParams:
    """Block-collapsed SBM parameters.

    ``block_probs`` is the K x K matrix of edge probabilities between blocks;
    ``latent`` (K x d, optional) is a factor with ``latent @ latent.T ==
    block_probs``. The full per-vertex matrices are never materialised.
    """

    block_sizes: tuple
    block_probs: np.ndarray
    latent: np.ndarray | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        if not sizes or any(s < 0 for s in sizes):
            raise ParameterError("block_sizes must be a non-empty list of non-negative integers")
        probs = np.array(self.block_probs, dtype=np.float64)
        k = len(sizes)
        if probs.shape != (k, k):
            raise ParameterError(f"probability matrix must be {k}x{k}")
        if not np.allclose(probs, probs.T, atol=1e-12):
            raise ParameterError("probability matrix must be symmetric")
        if np.any(~np.isfinite(probs)) or probs.min() < -1e-12 or probs.max() > 1 + 1e-12:
            raise ParameterError("edge probabilities must lie in [0, 1]")
        probs = np.clip((probs + probs.T) / 2, 0.0, 1.0)
        for i in range(k):
            for j in range(i + 1, k):
                if np.array_equal(probs[i], probs[j]):
                    raise ParameterError(f"blocks {i} and {j} have identical latent rows")
        probs.setflags(write=False)
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "block_probs", probs)
        if self.latent is not None:
            lat = np.array(self.latent, dtype=np.float64)
            lat.setflags(write=False)
            object.__setattr__(self, "latent", lat)

    @classmethod
    def from_latent(cls, block_sizes, latent) -> "SbmParams":
        lat = np.atleast_2d(np.asarray(latent, dtype=np.float64))
        if len(block_sizes) != lat.shape[0]:
            raise ParameterError("latent must have one row per block")
        return cls(tuple(block_sizes), lat @ lat.T, lat)

    @classmethod
    def from_probability_matrix(cls, block_sizes, probs) -> "SbmParams":
        return cls(tuple(block_sizes), np.asarray(probs, dtype=np.float64))

    @property
    def K(self) -> int:
        return len(self.block_sizes)

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    @cached_property
    def block_of(self) -> np.ndarray:
        """Vertex -> block map; blocks occupy contiguous ranges in order."""
        return np.repeat(np.arange(self.K), self.block_sizes)

    def latent_factor(self) -> np.ndarray:
        """Return ``latent`` or a PSD factor of ``block_probs`` (rank-revealing)."""
        if self.latent is not None:
            return self.latent
        w, v = np.linalg.eigh(self.block_probs)
        tol = 1e-10 * max(1.0, np.abs(w).max())
        if w.min() < -tol:
            raise ParameterError("probability matrix is not positive semidefinite; no latent factor exists")
        keep = w > tol
        order = np.argsort(-w[keep])
        return v[:, keep][:, order] * np.sqrt(w[keep][order])

    def expected_adjacency(self) -> np.ndarray:
        """Dense ``n x n`` matrix ``D`` (diagonal included). Only for small n."""
        b = self.block_of
        return self.block_probs[np.ix_(b, b)]


@dataclass(frozen=True, eq=False)
class CorrelatedPair:
    g1: SparseGraph
    g2: SparseGraph
    rho: float
    block_of: np.ndarray
    truth: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.g1.n != self.g2.n:
            raise ParameterError("correlated pair must have equal vertex counts")
        if self.truth is None:
            object.__setattr__(self, "truth", np.arange(self.g1.n))


def _pair_rows(n: int, start: int, stop: int):
    """Lexicographic (u, v), u < v, for rows ``start..stop-1``."""
    counts = n - 1 - np.arange(start, stop)
    u = np.repeat(np.arange(start, stop), counts)
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    v = np.arange(len(u)) - offsets + u + 1
    return u, v


def generate_correlated_sbm(params: SbmParams, rho: float, rng_seed: int) -> CorrelatedPair:
    """Sample a rho-correlated pair of SBM graphs with identity latent alignment.

    Vertex pairs are visited in lexicographic order. The first graph uses one
    child stream, the conditional draws of the second graph another, so the
    output depends only on ``rng_seed``.
    """
    rho = float(rho)
    if not 0.0 <= rho <= 1.0 or not np.isfinite(rho):
        raise ParameterError(f"rho must lie in [0, 1], got {rho}")
    n = params.n
    block = params.block_of
    probs = params.block_probs
    ss = np.random.SeedSequence(int(rng_seed))
    r1, r2 = (np.random.default_rng(s) for s in ss.spawn(2))

    e1, e2 = [], []
    row = 0
    while row < n - 1:
        # grow the row range until the chunk holds about _PAIR_CHUNK pairs
        stop, total = row, 0
        while stop < n - 1 and total < _PAIR_CHUNK:
            total += n - 1 - stop
            stop += 1
        u, v = _pair_rows(n, row, stop)
        p = probs[block[u], block[v]]
        x1 = r1.random(len(u)) < p
        p2 = np.where(x1, p + rho * (1.0 - p), p * (1.0 - rho))
        x2 = r2.random(len(u)) < p2
        e1.append(np.column_stack((u[x1], v[x1])))
        e2.append(np.column_stack((u[x2], v[x2])))
        row = stop
    empty = np.empty((0, 2), np.int64)
    g1 = SparseGraph(n, np.concatenate(e1) if e1 else empty)
    g2 = SparseGraph(n, np.concatenate(e2) if e2 else empty)
    return CorrelatedPair(g1, g2, rho, params.block_of.copy())


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------


def save_edge_list(g: SparseGraph, path) -> None:
    lines = [f"# n={g.n}\n"]
    lines.extend(f"{u} {v}\n" for u, v in g.edges.tolist())
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.writelines(lines)


def load_edge_list(path) -> SparseGraph:
    """Read whitespace-separated ``u v`` lines; ``# n=<count>`` declares order."""
    declared = None
    pairs = []
    try:
        text = Path(path).read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise ParseError("file is not ASCII", path=path) from exc
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("n="):
                    try:
                        declared = int(tok[2:])
                    except ValueError:
                        raise ParseError(f"bad vertex count {tok!r}", lineno, path) from None
                    if declared < 0:
                        raise ParseError("negative vertex count", lineno, path)
            continue
        toks = line.split()
        if len(toks) != 2:
            raise ParseError(f"expected 'u v', got {raw!r}", lineno, path)
        try:
            u, v = int(toks[0]), int(toks[1])
        except ValueError:
            raise ParseError(f"non-integer vertex in {raw!r}", lineno, path) from None
        if u < 0 or v < 0:
            raise ParseError("negative vertex index", lineno, path)
        if u == v:
            raise ParseError(f"self-loop on vertex {u}", lineno, path)
        if declared is not None and max(u, v) >= declared:
            raise ParseError(f"vertex {max(u, v)} exceeds declared n={declared}", lineno, path)
        pairs.append((u, v))
    if declared is None:
        declared = 1 + max((max(p) for p in pairs), default=-1)
    return SparseGraph(declared, pairs if pairs else np.empty((0, 2), np.int64))


def load_pairs(path) -> list[tuple[int, int]]:
    """Read a two-column integer TSV (seeds or truth); '#' lines are comments."""
    out = []
    text = Path(path).read_text(encoding="ascii")
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        if len(toks) != 2:
            raise ParseError(f"expected two columns, got {raw!r}", lineno, path)
        try:
            out.append((int(toks[0]), int(toks[1])))
        except ValueError:
            if not out and lineno == 1:
                continue  # header row
            raise ParseError(f"non-integer entry in {raw!r}", lineno, path) from None
    return out


def save_pairs(pairs: Iterable[tuple[int, int]], path, header=("g1_vertex", "g2_vertex")) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for u, v in pairs:
            fh.write(f"{int(u)}\t{int(v)}\n")


def sbm_params_from_dict(cfg: dict) -> SbmParams:
    """Build :class:`SbmParams` from a ``K / block_sizes / latent|probability_matrix`` mapping."""
    if "block_sizes" not in cfg:
        raise ParameterError("config is missing 'block_sizes'")
    sizes = cfg["block_sizes"]
    if "K" in cfg and int(cfg["K"]) != len(sizes):
        raise ParameterError(f"K={cfg['K']} disagrees with {len(sizes)} block sizes")
    if ("latent" in cfg) == ("probability_matrix" in cfg):
        raise ParameterError("config needs exactly one of 'latent' or 'probability_matrix'")
    if "latent" in cfg:
        return SbmParams.from_latent(sizes, cfg["latent"])
    return SbmParams.from_probability_matrix(sizes, cfg["probability_matrix"])


def load_sbm_config(path) -> dict:
    """Read a JSON SBM config; returns ``{"params", "rho", "rng_seed", **rest}``."""
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None
    if not isinstance(cfg, dict):
        raise ParseError("config must be a JSON object", path=path)
    out = dict(cfg)
    out["params"] = sbm_params_from_dict(cfg)
    out["rho"] = float(cfg.get("rho", 1.0))
    out["rng_seed"] = int(cfg.get("rng_seed", 0))
    return out
