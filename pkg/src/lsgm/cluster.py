"""Joint k-means of the stacked embeddings and bijective cluster-size resolution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateInputError, ParameterError

MAX_LLOYD_ITER = 300
N_RESTARTS = 5


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Labels for the ``2n`` stacked points (graph-1 rows first) and centroids.

    ``history`` holds the within-cluster sum of squares after every
    assignment and update step of the winning restart.
    """

    labels: np.ndarray
    centroids: np.ndarray
    objective: float
    spherical: bool = False
    n_iter: int = 0
    history: tuple = ()

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def normalize_rows(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms == 0)[0])
        raise DegenerateInputError(f"row {bad} is zero and cannot be projected onto the sphere")
    return x / norms[:, None]


def _sse(x, labels, centroids) -> float:
    diff = x - centroids[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _kmeanspp(x, k, rng) -> np.ndarray:
    """Greedy D^2 seeding: several candidates per step, keep the best potential."""
    m = x.shape[0]
    trials = 2 + int(math.log(k))
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(m)]
    closest = cdist(centers[:1], x, "sqeuclidean")[0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[c:] = centers[0]
            break
        cum = np.cumsum(closest)
        cand = np.minimum(np.searchsorted(cum, rng.random(trials) * total), m - 1)
        dist = cdist(x[cand], x, "sqeuclidean")
        np.minimum(dist, closest, out=dist)
        best = int(np.argmin(dist.sum(axis=1)))
        centers[c] = x[cand[best]]
        closest = dist[best]
    return centers


def _means(x, labels, k, centroids):
    counts = np.bincount(labels, minlength=k)
    out = centroids.copy()
    nonempty = counts > 0
    for j in range(x.shape[1]):
        sums = np.bincount(labels, weights=x[:, j], minlength=k)
        out[nonempty, j] = sums[nonempty] / counts[nonempty]
    return out, counts


def _lloyd(x, centers, max_iter):
    k = centers.shape[0]
    dist = cdist(x, centers, "sqeuclidean")
    labels = np.argmin(dist, axis=1)
    history = [float(dist[np.arange(len(x)), labels].sum())]
    it = 0
    for it in range(1, max_iter + 1):
        centers, counts = _means(x, labels, k, centers)
        for e in np.flatnonzero(counts == 0):
            # re-seed an empty cluster at the point farthest from its own centroid
            far = np.einsum("ij,ij->i", x - centers[labels], x - centers[labels])
            p = int(np.argmax(far))
            if far[p] <= 0:
                break
            counts[labels[p]] -= 1
            labels[p] = e
            centers[e] = x[p]
            counts[e] = 1
        history.append(_sse(x, labels, centers))
        dist = cdist(x, centers, "sqeuclidean")
        new = np.argmin(dist, axis=1)
        # keep the current label when it is already among the nearest (no churn on ties)
        keep = dist[np.arange(len(x)), labels] <= dist[np.arange(len(x)), new]
        new[keep] = labels[keep]
        if np.array_equal(new, labels):
            break
        labels = new
        history.append(_sse(x, labels, centers))
    return labels, centers, history, it


def kmeans(points, k: int, init_seed: int = 0, spherical: bool = False,
           n_init: int = N_RESTARTS, max_iter: int = MAX_LLOYD_ITER) -> ClusterAssignment:
    """Lloyd's k-means with greedy k-means++ seeding, best of ``n_init`` restarts.

    Points are processed in lexicographic row order and clusters are numbered
    by lexicographic centroid order, so relabelling the input rows permutes
    the output labels in the same way.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ParameterError("points must be a 2-D array")
    m = x.shape[0]
    k = int(k)
    if k < 1 or k > m:
        raise ParameterError(f"k must lie in [1, {m}], got {k}")
    if not np.all(np.isfinite(x)):
        raise DegenerateInputError("points contain non-finite values")
    if spherical:
        x = normalize_rows(x)
    order = np.lexsort(x.T[::-1])
    xs = x[order]
    rng = np.random.default_rng(init_seed)
    best = None
    for _ in range(max(1, n_init)):
        centers = _kmeanspp(xs, k, rng)
        labels, centers, history, it = _lloyd(xs, centers, max_iter)
        obj = _sse(xs, labels, centers)
        if best is None or obj < best[2]:
            best = (labels, centers, obj, history, it)
    labels, centers, obj, history, it = best
    # canonical cluster ids: lexicographic order of centroids
    rank = np.lexsort(centers.T[::-1])
    relabel = np.empty(k, dtype=np.int64)
    relabel[rank] = np.arange(k)
    out = np.empty(m, dtype=np.int64)
    out[order] = relabel[labels]
    return ClusterAssignment(out, centers[rank], obj, spherical, it, tuple(history))


@dataclass(frozen=True, eq=False)
class ResolvedClusters:
    """Equal-sized per-graph member lists; ``sizes[i] == 2 * len(members1[i])``."""

    members1: list
    members2: list
    sizes: np.ndarray
    source_ids: np.ndarray
    reassigned1: int = 0
    reassigned2: int = 0
    raw_counts: np.ndarray = field(default=None)

    @property
    def k(self) -> int:
        return len(self.members1)

    def cluster_of1(self) -> dict:
        return {int(v): i for i, mem in enumerate(self.members1) for v in mem}

    def cluster_of2(self) -> dict:
        return {int(v): i for i, mem in enumerate(self.members2) for v in mem}


def resized_cluster_sizes(counts1, counts2, n: int) -> np.ndarray:
    """Target combined sizes for clusters already sorted by decreasing ``counts1 + counts2``.

    ``size_i = 2 ceil(c_i / 2) - 2 [sum_j ceil(c_j / 2) >= i + n]`` with 1-based ``i``.
    """
    c = np.asarray(counts1, dtype=np.int64) + np.asarray(counts2, dtype=np.int64)
    half = (c + 1) // 2
    total = int(half.sum())
    i = np.arange(1, len(c) + 1)
    return 2 * half - 2 * (total >= i + n).astype(np.int64)


def resolve_cluster_sizes(assignment: ClusterAssignment, points, seeds=None) -> ResolvedClusters:
    """Turn a joint clustering into clusters with equally many vertices per graph.

    Clusters are ranked by combined size (ties by lower id), resized, and then
    filled greedily in rank order with the unassigned vertices of each graph
    nearest to the cluster centroid (ties by lower vertex index). Seeded
    vertices, when ``seeds`` is given, are left out: the clusters partition
    the unseeded vertices of each graph.
    """
    x = np.asarray(points, dtype=np.float64)
    labels = np.asarray(assignment.labels)
    if x.shape[0] != labels.shape[0] or x.shape[0] % 2:
        raise ParameterError("assignment must cover 2n stacked points")
    if assignment.spherical:
        x = normalize_rows(x)
    n = x.shape[0] // 2
    k = assignment.k
    free1 = np.ones(n, dtype=bool)
    free2 = np.ones(n, dtype=bool)
    if seeds is not None and len(seeds):
        free1[seeds.g1] = False
        free2[seeds.g2] = False
    if free1.sum() != free2.sum():
        raise ParameterError("graphs have different unseeded vertex counts")
    n_free = int(free1.sum())
    lab1, lab2 = labels[:n], labels[n:]
    counts1 = np.bincount(lab1[free1], minlength=k)
    counts2 = np.bincount(lab2[free2], minlength=k)
    combined = counts1 + counts2
    rank = np.lexsort((np.arange(k), -combined))
    sizes = resized_cluster_sizes(counts1[rank], counts2[rank], n_free)
    if np.any(sizes < 0) or sizes.sum() != 2 * n_free:
        raise ParameterError("cluster resizing failed to conserve vertex counts")

    d1 = cdist(x[:n], assignment.centroids, "sqeuclidean")
    d2 = cdist(x[n:], assignment.centroids, "sqeuclidean")
    members1, members2, kept, kept_sizes = [], [], [], []
    moved1 = moved2 = 0
    for pos, cid in enumerate(rank):
        half = int(sizes[pos]) // 2
        if half == 0:
            continue
        picked = []
        for dist, free, lab in ((d1, free1, lab1), (d2, free2, lab2)):
            cand = np.flatnonzero(free)
            take = cand[np.argsort(dist[cand, cid], kind="stable")[:half]]
            free[take] = False
            picked.append(np.sort(take))
        moved1 += int(np.sum(lab1[picked[0]] != cid))
        moved2 += int(np.sum(lab2[picked[1]] != cid))
        members1.append(picked[0])
        members2.append(picked[1])
        kept.append(int(cid))
        kept_sizes.append(2 * half)
    return ResolvedClusters(members1, members2, np.array(kept_sizes, dtype=np.int64),
                            np.array(kept, dtype=np.int64), moved1, moved2,
                            np.column_stack((counts1, counts2)))


def force_coclustered_seeds(assignment: ClusterAssignment, seeds) -> ClusterAssignment:
    """Put each graph-1 seed row in the cluster of its graph-2 partner."""
    if seeds is None or len(seeds) == 0:
        return assignment
    labels = assignment.labels.copy()
    n = len(labels) // 2
    labels[seeds.g1] = labels[n + seeds.g2]
    return ClusterAssignment(labels, assignment.centroids, assignment.objective,
                             assignment.spherical, assignment.n_iter, assignment.history)


def clustering_consistency(resolved: ResolvedClusters, truth) -> float:
    """Fraction of clustered graph-1 vertices whose true partner shares their cluster."""
    t = dict(truth) if isinstance(truth, dict) else {i: int(v) for i, v in enumerate(truth)}
    where2 = resolved.cluster_of2()
    total = hits = 0
    for i, mem in enumerate(resolved.members1):
        for v in mem:
            total += 1
            hits += where2.get(t[int(v)], -1) == i
    return hits / total if total else 1.0


def write_assignment_csv(path, vertices, clusters) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("vertex_id,cluster_id\n")
        for v, c in zip(vertices, clusters):
            fh.write(f"{int(v)},{int(c)}\n")


def resolved_labels(resolved: ResolvedClusters, n: int, graph: int) -> np.ndarray:
    """Per-vertex cluster index for one graph (``-1`` for vertices not clustered)."""
    out = np.full(n, -1, dtype=np.int64)
    members = resolved.members1 if graph == 1 else resolved.members2
    for i, mem in enumerate(members):
        out[mem] = i
    return out
