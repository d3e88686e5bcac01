"""Within-cluster seeded graph matching.

The main solver relaxes the seeded quadratic assignment problem to the
Birkhoff polytope and runs Frank-Wolfe with exact line search, projecting the
final doubly stochastic iterate back to a permutation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NumericalError, ParameterError
from .graph import SparseGraph
from .seedsel import SeedSet

BRUTE_FORCE_MAX = 9
DEFAULT_MAX_ITERS = 30
FW_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Matching:
    """Alignment of unseeded vertices plus the seeds it extends.

    ``objective`` is the number of unordered vertex pairs whose adjacency
    disagrees across the graphs under the combined alignment.
    """

    mapping: dict
    seeds: SeedSet
    objective: int
    unmatched1: tuple = ()
    unmatched2: tuple = ()
    iterations: int = 0
    history: tuple = field(default=(), repr=False)

    def alignment(self, n: int) -> np.ndarray:
        """Graph-1 vertex -> graph-2 vertex array; ``-1`` where unmatched."""
        out = np.full(n, -1, dtype=np.int64)
        for u, v in self.seeds:
            out[u] = v
        for u, v in self.mapping.items():
            out[u] = v
        return out

    def rows(self):
        """``(g1, g2, status)`` rows in a fixed order; ``None`` marks a missing side."""
        for u, v in self.seeds:
            yield u, v, "seed"
        for u in sorted(self.mapping):
            yield u, self.mapping[u], "matched"
        for u in sorted(self.unmatched1):
            yield u, None, "unmatched"
        for v in sorted(self.unmatched2):
            yield None, v, "unmatched"

    def to_tsv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("g1_vertex\tg2_vertex\tstatus\n")
            for u, v, status in self.rows():
                fh.write(f"{'-' if u is None else u}\t{'-' if v is None else v}\t{status}\n")


# ---------------------------------------------------------------------------
# Linear assignment
# ---------------------------------------------------------------------------


def _row_potentials(c: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Shortest-path potentials certifying optimality of ``perm`` (Bellman-Ford)."""
    m = len(perm)
    own = c[np.arange(m), perm]
    w = c[:, perm] - own[None, :]
    d = np.zeros(m)
    for _ in range(m):
        nd = np.minimum(d, (d[:, None] + w).min(axis=0))
        if np.array_equal(nd, d):
            break
        d = nd
    return d


def _lexicographic_refine(c: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Lexicographically smallest optimal assignment, given one optimal ``perm``.

    Optimal assignments are exactly the perfect matchings on zero reduced-cost
    edges for an optimal dual; rows are fixed in order, each taking the lowest
    column that still admits a completion (checked by an alternating path).
    """
    m = len(perm)
    d = _row_potentials(c, perm)
    inv = np.empty(m, dtype=np.int64)
    inv[perm] = np.arange(m)
    own = c[inv, np.arange(m)]
    reduced = c + d[:, None] - d[inv][None, :] - own[None, :]
    scale = max(1.0, float(np.abs(c).max()))
    tight = reduced <= 1e-9 * scale
    tight[np.arange(m), perm] = True
    adj = [np.flatnonzero(tight[i]) for i in range(m)]
    if all(len(a) == 1 for a in adj):
        return perm
    match = perm.copy()
    owner = inv.copy()
    fixed = np.zeros(m, dtype=bool)

    def augment(row, target, seen):
        # move ``row`` off its column along tight edges until ``target`` is reached
        for col in adj[row]:
            if col == match[row] or seen[col]:
                continue
            seen[col] = True
            if col == target:
                return [(row, col)]
            nxt = owner[col]
            if fixed[nxt]:
                continue
            path = augment(nxt, target, seen)
            if path is not None:
                return [(row, col)] + path
        return None

    for i in range(m):
        for j in adj[i]:
            if j >= match[i]:
                break
            r = owner[j]
            if fixed[r]:
                continue
            seen = np.zeros(m, dtype=bool)
            seen[j] = True
            path = augment(r, match[i], seen)
            if path is None:
                continue
            old = match[i]
            match[i], owner[j] = j, i
            for row, col in path:
                match[row], owner[col] = col, row
            assert owner[old] != i
            break
        fixed[i] = True
    return match


def lap_solve(cost, maximize: bool = False, lexicographic: bool = True) -> np.ndarray:
    """Exact square linear assignment; returns ``perm`` with row ``i`` -> column ``perm[i]``.

    Among optimal assignments the lexicographically smallest ``perm`` is
    returned unless ``lexicographic`` is off.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ParameterError("cost matrix must be square")
    if np.isnan(c).any():
        raise NumericalError("cost matrix contains NaN")
    if not np.isfinite(c).all():
        raise ParameterError("cost matrix contains infinite entries")
    m = c.shape[0]
    if m == 0:
        return np.empty(0, dtype=np.int64)
    work = -c if maximize else c
    _, cols = linear_sum_assignment(work)
    cols = cols.astype(np.int64)
    if lexicographic and m > 1:
        cols = _lexicographic_refine(work, cols)
    return cols


# ---------------------------------------------------------------------------
# Edge disagreements
# ---------------------------------------------------------------------------


def _as_alignment(alignment, n: int) -> np.ndarray:
    if isinstance(alignment, dict):
        if set(alignment) != set(range(n)):
            raise ParameterError("alignment must be defined on every vertex of the first graph")
        return np.array([alignment[i] for i in range(n)], dtype=np.int64)
    arr = np.asarray(alignment, dtype=np.int64)
    if arr.shape != (n,) or (n and arr.min() < 0):
        raise ParameterError("alignment must be defined on every vertex of the first graph")
    return arr


def edge_disagreements(a: SparseGraph, b: SparseGraph, alignment) -> int:
    """Unordered pairs ``{i, j}`` adjacent in exactly one of ``a`` and ``b`` under the alignment."""
    psi = _as_alignment(alignment, a.n)
    if len(np.unique(psi)) != a.n or (a.n and psi.max() >= b.n):
        raise ParameterError("alignment must be injective into the second graph")
    nb = b.n
    e = psi[a.edges]
    mapped = np.minimum(e[:, 0], e[:, 1]) * nb + np.maximum(e[:, 0], e[:, 1])
    if a.n == nb:
        bkeys = b.edge_keys
    else:
        image = np.zeros(nb, dtype=bool)
        image[psi] = True
        keep = image[b.edges[:, 0]] & image[b.edges[:, 1]]
        bkeys = b.edge_keys[keep]
    common = np.intersect1d(mapped, bkeys, assume_unique=True).size
    return int(len(mapped) + len(bkeys) - 2 * common)


# ---------------------------------------------------------------------------
# Seeded Frank-Wolfe
# ---------------------------------------------------------------------------


def _split(a: SparseGraph, b: SparseGraph, seeds: SeedSet):
    n = a.n
    s1, s2 = seeds.g1, seeds.g2
    if len(seeds) and (s1.max() >= n or s2.max() >= n):
        raise ParameterError("seed vertex outside the graph")
    rest1 = np.setdiff1d(np.arange(n), s1)
    rest2 = np.setdiff1d(np.arange(n), s2)
    idx1 = np.concatenate((s1, rest1))
    idx2 = np.concatenate((s2, rest2))
    A = a.adjacency[idx1][:, idx1].tocsr()
    B = b.adjacency[idx2][:, idx2].tocsr()
    return A, B, rest1, rest2


class RelaxedObjective:
    """``g(P) = <A22 P B22, P> + <2 A21 B21^T, P>`` for the unseeded blocks."""

    def __init__(self, a: SparseGraph, b: SparseGraph, seeds: SeedSet):
        if a.n != b.n:
            raise ParameterError(f"graphs differ in order: {a.n} vs {b.n}")
        A, B, self.rest1, self.rest2 = _split(a, b, seeds)
        s = len(seeds)
        self.a22 = A[s:, s:].tocsr()
        self.b22 = B[s:, s:].tocsr()
        self.m = self.a22.shape[0]
        if s:
            self.linear = 2.0 * (A[s:, :s] @ B[s:, :s].T).toarray()
        else:
            self.linear = np.zeros((self.m, self.m))

    def apb(self, p: np.ndarray) -> np.ndarray:
        left = self.a22 @ p
        return np.asarray((self.b22 @ left.T).T)

    def value(self, p: np.ndarray) -> float:
        return float(np.vdot(self.apb(p), p) + np.vdot(self.linear, p))

    def gradient(self, p: np.ndarray) -> np.ndarray:
        return 2.0 * self.apb(p) + self.linear


def _line_search(quad: float, lin: float) -> float:
    """Maximiser over [0, 1] of ``quad * t**2 + lin * t``."""
    if quad == 0.0:
        return 1.0 if lin > 0 else 0.0
    best_t, best_f = 0.0, 0.0
    cands = [1.0]
    if quad < 0:
        cands.append(min(1.0, max(0.0, -lin / (2 * quad))))
    for t in cands:
        f = quad * t * t + lin * t
        if f > best_f:
            best_t, best_f = t, f
    return best_t


def sgm_match(a: SparseGraph, b: SparseGraph, seeds: SeedSet = SeedSet(),
              max_iters: int = DEFAULT_MAX_ITERS,
              callback: Callable[[int, np.ndarray, float], None] | None = None) -> Matching:
    """Seeded graph matching of two equal-order graphs.

    Starts from the barycenter of the Birkhoff polytope; each iteration solves
    a linear assignment against the gradient for the Frank-Wolfe direction and
    takes the exact line-search step. Iteration stops after ``max_iters``
    steps, or when the step or the relative change of the relaxed objective
    drops below 1e-9. ``callback(iteration, P, g)`` sees every iterate.
    """
    obj = RelaxedObjective(a, b, seeds)
    m = obj.m
    if m == 0:
        return Matching({}, seeds, edge_disagreements(a, b, _seed_alignment(seeds, a.n)))
    p = np.full((m, m), 1.0 / m)
    apb = obj.apb(p)
    g = float(np.vdot(apb, p) + np.vdot(obj.linear, p))
    history = [g]
    if callback is not None:
        callback(0, p, g)
    it = 0
    for it in range(1, max_iters + 1):
        grad = 2.0 * apb + obj.linear
        q = lap_solve(grad, maximize=True)
        aqb = obj.apb(_perm_matrix(q))
        direction = -p
        direction[np.arange(m), q] += 1.0
        adb = aqb - apb
        lin = float(np.vdot(grad, direction))
        quad = float(np.vdot(adb, direction))
        alpha = _line_search(quad, lin)
        gain = quad * alpha * alpha + lin * alpha
        if alpha > 0:
            p = p + alpha * direction
            apb = apb + alpha * adb
        g_new = g + gain
        history.append(g_new)
        if callback is not None:
            callback(it, p, g_new)
        step = alpha * float(np.linalg.norm(direction))
        rel = abs(g_new - g) / max(1.0, abs(g))
        g = g_new
        if step < FW_TOL or rel < FW_TOL:
            break
    perm = lap_solve(p, maximize=True)
    mapping = {int(u): int(v) for u, v in zip(obj.rest1, obj.rest2[perm])}
    align = _seed_alignment(seeds, a.n)
    align[obj.rest1] = obj.rest2[perm]
    return Matching(mapping, seeds, edge_disagreements(a, b, align), iterations=it,
                    history=tuple(history))


def _perm_matrix(q: np.ndarray) -> np.ndarray:
    m = len(q)
    out = np.zeros((m, m))
    out[np.arange(m), q] = 1.0
    return out


def _seed_alignment(seeds: SeedSet, n: int) -> np.ndarray:
    out = np.full(n, -1, dtype=np.int64)
    if len(seeds):
        out[seeds.g1] = seeds.g2
    return out


def pad_and_match(a: SparseGraph, b: SparseGraph, seeds: SeedSet = SeedSet(),
                  max_iters: int = DEFAULT_MAX_ITERS) -> Matching:
    """Match graphs of different order by padding the smaller with isolated vertices.

    Vertices paired with a padding vertex are reported as unmatched.
    """
    if a.n == b.n:
        return sgm_match(a, b, seeds, max_iters)
    n = max(a.n, b.n)
    pa = SparseGraph(n, a.edges) if a.n < n else a
    pb = SparseGraph(n, b.edges) if b.n < n else b
    res = sgm_match(pa, pb, seeds, max_iters)
    mapping, lost1, lost2 = {}, [], []
    for u, v in res.mapping.items():
        if u < a.n and v < b.n:
            mapping[u] = v
        elif u < a.n:
            lost1.append(u)
        elif v < b.n:
            lost2.append(v)
    return Matching(mapping, seeds, res.objective, tuple(lost1), tuple(lost2),
                    res.iterations, res.history)


def brute_force_match(a: SparseGraph, b: SparseGraph, seeds: SeedSet = SeedSet()) -> Matching:
    """Exhaustive minimum of the edge-disagreement count over all seed-extending bijections.

    Ties go to the lexicographically smallest assignment of the sorted
    unseeded graph-1 vertices.
    """
    if a.n != b.n:
        raise ParameterError(f"graphs differ in order: {a.n} vs {b.n}")
    A, B, rest1, rest2 = _split(a, b, seeds)
    s = len(seeds)
    m = a.n - s
    if m > BRUTE_FORCE_MAX:
        raise ParameterError(f"{m} unseeded vertices: brute force is limited to {BRUTE_FORCE_MAX}")
    A = A.toarray().astype(np.int8)
    B = B.toarray().astype(np.int8)
    base = int(np.abs(A[:s, :s] - B[:s, :s]).sum()) // 2
    a22, b22 = A[s:, s:], B[s:, s:]
    a21, b21 = A[s:, :s], B[s:, :s]
    iu = np.triu_indices(m, 1)
    best_cost, best_perm = None, None
    perms = itertools.permutations(range(m))
    chunk = 40320
    while True:
        block = np.array(list(itertools.islice(perms, chunk)), dtype=np.int64).reshape(-1, m)
        if block.shape[0] == 0:
            break
        permuted = b22[block[:, :, None], block[:, None, :]]
        inner = np.abs(permuted[:, iu[0], iu[1]] - a22[iu]).sum(axis=1)
        cross = np.abs(b21[block] - a21[None]).sum(axis=(1, 2)) if s else 0
        cost = inner + cross
        j = int(np.argmin(cost))
        if best_cost is None or cost[j] < best_cost:
            best_cost, best_perm = int(cost[j]), block[j]
    if best_perm is None:
        best_perm, best_cost = np.empty(0, dtype=np.int64), 0
    mapping = {int(u): int(v) for u, v in zip(rest1, rest2[best_perm])}
    return Matching(mapping, seeds, base + int(best_cost), iterations=math.factorial(m))
