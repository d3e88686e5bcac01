"""Divide-and-conquer seeded graph matching.

embed both graphs -> rotate graph 1 onto graph 2 using the seeds -> jointly
cluster -> equalise cluster sizes -> re-cluster oversized clusters -> match
each cluster (in parallel) -> take the direct sum of the cluster matchings.
"""

from __future__ import annotations

import logging
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .cluster import (
    ResolvedClusters,
    force_coclustered_seeds,
    kmeans,
    resolve_cluster_sizes,
)
from .embed import align_embeddings, estimate_dimension, spectral_embed, top_eigenpairs
from .errors import LsgmError, ParameterError, SeedlessAlignmentError
from .graph import SparseGraph
from .match import (
    DEFAULT_MAX_ITERS,
    Matching,
    brute_force_match,
    edge_disagreements,
    pad_and_match,
    sgm_match,
)
from .seedsel import SeedSet, select_seeds

log = logging.getLogger(__name__)

STAGES = ("embed", "procrustes", "cluster", "match")
MATCHERS = ("sgm", "brute_force")


@dataclass
class LsgmConfig:
    """Knobs of the pipeline.

    ``d`` and ``k`` accept ``"auto"``. ``seed_budget=None`` means
    ``min(s, max_cluster_size // 4)`` seeds per cluster; ``"all"`` disables
    seed selection.
    """

    d: int | str = "auto"
    k: int | str = "auto"
    max_cluster_size: int = 800
    spherical: bool = False
    seed_budget: int | str | None = None
    matcher: str = "sgm"
    workers: int = 1
    recluster_depth: int = 2
    rng_seed: int = 0
    max_iters: int = DEFAULT_MAX_ITERS
    bijective: bool = True

    def __post_init__(self):
        if self.max_cluster_size < 2:
            raise ParameterError("max_cluster_size must be at least 2")
        if self.recluster_depth < 0:
            raise ParameterError("recluster_depth must be non-negative")
        if self.workers < 1:
            raise ParameterError("workers must be at least 1")
        if self.matcher not in MATCHERS:
            raise ParameterError(f"matcher must be one of {MATCHERS}, got {self.matcher!r}")
        for name in ("d", "k"):
            val = getattr(self, name)
            if val != "auto" and (not isinstance(val, (int, np.integer)) or val < 1):
                raise ParameterError(f"{name} must be a positive integer or 'auto'")
        b = self.seed_budget
        if b is not None and b != "all" and (not isinstance(b, (int, np.integer)) or b < 0):
            raise ParameterError("seed_budget must be a non-negative integer, 'all' or None")

    def budget_for(self, s: int) -> int:
        if self.seed_budget == "all":
            return s
        if self.seed_budget is None:
            return min(s, self.max_cluster_size // 4)
        return min(s, int(self.seed_budget))


@dataclass
class ClusterRecord:
    cluster_id: int
    size1: int
    size2: int
    seeds_used: int
    iterations: int
    disagreements: int
    seconds: float
    depth: int
    members1: np.ndarray = field(default=None, repr=False)
    members2: np.ndarray = field(default=None, repr=False)
    seeds: SeedSet = field(default=None, repr=False)


@dataclass
class LsgmResult:
    matching: Matching
    clusters: list
    timings: dict
    d: int
    k: int
    accuracy: float | None = None
    consistency: float | None = None
    warnings: list = field(default_factory=list)

    @property
    def total_iterations(self) -> int:
        return sum(c.iterations for c in self.clusters)


def accuracy(matching: Matching, truth, seeds: SeedSet) -> float:
    """Fraction of unseeded graph-1 vertices sent to their true partner."""
    t = np.asarray([truth[i] for i in range(len(truth))] if isinstance(truth, dict) else truth)
    unseeded = np.setdiff1d(np.arange(len(t)), seeds.g1)
    if unseeded.size == 0:
        return 1.0
    hits = sum(matching.mapping.get(int(v), -1) == int(t[v]) for v in unseeded)
    return hits / unseeded.size


# ---------------------------------------------------------------------------
# Divide
# ---------------------------------------------------------------------------


def _choose_dimension(a: SparseGraph, b: SparseGraph, d) -> int:
    n = min(a.n, b.n)
    if d != "auto":
        return min(int(d), n)
    trial = max(1, min(math.ceil(math.sqrt(n)), 50, n))
    va, _ = top_eigenpairs(a, trial)
    vb, _ = top_eigenpairs(b, trial)
    spectrum = (va + vb) / 2
    positive = int(min((va > 0).sum(), (vb > 0).sum()))
    if positive < 3:
        return max(1, positive)
    est = estimate_dimension(spectrum[:positive])
    return min(est.dim, positive)


class _Timer:
    def __init__(self, timings, stage):
        self.timings, self.stage = timings, stage

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.timings[self.stage] += time.perf_counter() - self.t0


def _embed_and_cluster(a, b, seeds, d, k, config, timings):
    with _Timer(timings, "embed"):
        xhat = spectral_embed(a, d)
        yhat = spectral_embed(b, d)
    with _Timer(timings, "procrustes"):
        aligned_x, _ = align_embeddings(xhat, yhat, seeds)
    with _Timer(timings, "cluster"):
        points = np.vstack((aligned_x, yhat.coords))
        assignment = kmeans(points, k, init_seed=config.rng_seed, spherical=config.spherical)
        assignment = force_coclustered_seeds(assignment, seeds)
        if config.bijective:
            resolved = resolve_cluster_sizes(assignment, points, seeds)
        else:
            resolved = _raw_clusters(assignment, a.n, seeds)
    return resolved


def _raw_clusters(assignment, n1, seeds) -> ResolvedClusters:
    lab1, lab2 = assignment.labels[:n1], assignment.labels[n1:]
    free1 = np.ones(n1, dtype=bool)
    free2 = np.ones(len(lab2), dtype=bool)
    free1[seeds.g1] = False
    free2[seeds.g2] = False
    m1, m2, ids, sizes = [], [], [], []
    for c in range(assignment.k):
        u = np.flatnonzero((lab1 == c) & free1)
        v = np.flatnonzero((lab2 == c) & free2)
        if len(u) or len(v):
            m1.append(u)
            m2.append(v)
            ids.append(c)
            sizes.append(len(u) + len(v))
    return ResolvedClusters(m1, m2, np.array(sizes), np.array(ids))


def _divide(a, b, seeds, d, k, config, timings, depth, warn):
    """Return a list of ``(members1, members2, depth)`` over unseeded vertices."""
    n_free = a.n - len(seeds)
    if k <= 1 or n_free <= 1:
        rest1 = np.setdiff1d(np.arange(a.n), seeds.g1)
        rest2 = np.setdiff1d(np.arange(b.n), seeds.g2)
        out = [(rest1, rest2, depth)]
    else:
        resolved = _embed_and_cluster(a, b, seeds, min(d, a.n, b.n), min(k, a.n + b.n), config, timings)
        out = [(m1, m2, depth) for m1, m2 in zip(resolved.members1, resolved.members2)]
    cap = config.max_cluster_size
    final = []
    for idx, (m1, m2, dep) in enumerate(out):
        size = max(len(m1), len(m2))
        if size <= cap or k <= 1:
            final.append((m1, m2, dep))
            continue
        if depth >= config.recluster_depth:
            msg = f"cluster {idx} at depth {depth} still has {size} > {cap} vertices; matching it whole"
            log.warning(msg)
            warn.append(msg)
            final.append((m1, m2, dep))
            continue
        # seed-bordered subproblem: seeds first, then this cluster's vertices
        keep1 = np.concatenate((seeds.g1, m1))
        keep2 = np.concatenate((seeds.g2, m2))
        sub_a, sub_b = a.subgraph(keep1), b.subgraph(keep2)
        sub_seeds = SeedSet.identity(range(len(seeds)))
        sub_k = math.ceil(size / cap)
        try:
            parts = _divide(sub_a, sub_b, sub_seeds, d, sub_k, config, timings, depth + 1, warn)
        except LsgmError as exc:
            raise type(exc)(f"re-clustering cluster {idx} (depth {depth + 1}): {exc}") from exc
        for p1, p2, pdep in parts:
            final.append((keep1[p1], keep2[p2], pdep))
    return final


# ---------------------------------------------------------------------------
# Conquer
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Task:
    cluster_id: int
    a: SparseGraph
    b: SparseGraph
    s: int
    matcher: str
    max_iters: int
    bijective: bool


def _run_task(task: _Task):
    t0 = time.perf_counter()
    with threadpool_limits(limits=1):
        seeds = SeedSet.identity(range(task.s))
        if not task.bijective or task.a.n != task.b.n:
            res = pad_and_match(task.a, task.b, seeds, task.max_iters)
        elif task.matcher == "brute_force":
            res = brute_force_match(task.a, task.b, seeds)
        else:
            res = sgm_match(task.a, task.b, seeds, task.max_iters)
    pairs = np.array(sorted(res.mapping.items()), dtype=np.int64).reshape(-1, 2)
    return (task.cluster_id, pairs, np.array(res.unmatched1, dtype=np.int64),
            np.array(res.unmatched2, dtype=np.int64), res.objective, res.iterations,
            time.perf_counter() - t0)


def _pool_context():
    methods = multiprocessing.get_all_start_methods()
    return multiprocessing.get_context("fork" if "fork" in methods else None)


def _run_tasks(tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks)),
                             mp_context=_pool_context()) as pool:
        return list(pool.map(_run_task, tasks))


def lsgm(a: SparseGraph, b: SparseGraph, seeds: SeedSet, config: LsgmConfig | None = None,
         truth=None) -> LsgmResult:
    """Match ``a`` to ``b`` given ``seeds``; optionally score against ``truth``.

    ``truth`` maps every graph-1 vertex to its true graph-2 partner (array or
    dict). Stage wall times are reported in seconds.
    """
    config = config or LsgmConfig()
    if config.bijective and a.n != b.n:
        raise ParameterError(f"bijective matching needs equal orders, got {a.n} and {b.n}")
    if len(seeds) == 0:
        raise SeedlessAlignmentError("at least one seed is required to align the embeddings")
    timings = {s: 0.0 for s in STAGES}
    warn: list[str] = []
    n = max(a.n, b.n)
    k = math.ceil(n / config.max_cluster_size) if config.k == "auto" else int(config.k)
    with _Timer(timings, "embed"):
        d = _choose_dimension(a, b, config.d) if k > 1 else 0
    clusters = _divide(a, b, seeds, d, k, config, timings, 0, warn)

    t0 = time.perf_counter()
    s = len(seeds)
    budget = config.budget_for(s)
    tasks, members, used = [], [], []
    for cid, (m1, m2, _) in enumerate(clusters):
        if s > budget and len(m1) and len(m2):
            chosen = select_seeds(a, b, seeds, m1, m2, budget)
        else:
            chosen = seeds
        keep1 = np.concatenate((chosen.g1, m1)).astype(np.int64)
        keep2 = np.concatenate((chosen.g2, m2)).astype(np.int64)
        tasks.append(_Task(cid, a.subgraph(keep1), b.subgraph(keep2), len(chosen),
                           config.matcher, config.max_iters, config.bijective))
        members.append((keep1, keep2))
        used.append(chosen)
    outputs = _run_tasks(tasks, config.workers)

    mapping, lost1, lost2, records = {}, [], [], []
    total_obj = 0
    for (cid, pairs, un1, un2, obj, iters, secs), (keep1, keep2), (m1, m2, dep), su in zip(
            outputs, members, clusters, used):
        for u, v in pairs:
            mapping[int(keep1[u])] = int(keep2[v])
        lost1.extend(int(keep1[u]) for u in un1)
        lost2.extend(int(keep2[v]) for v in un2)
        total_obj += obj
        records.append(ClusterRecord(cid, len(m1), len(m2), len(su), iters, obj, secs, dep,
                                     np.asarray(m1), np.asarray(m2), su))
    if config.bijective:
        align = np.empty(a.n, dtype=np.int64)
        align[seeds.g1] = seeds.g2
        for u, v in mapping.items():
            align[u] = v
        objective = edge_disagreements(a, b, align)
    else:
        objective = total_obj
    matching = Matching(dict(sorted(mapping.items())), seeds, objective, tuple(sorted(lost1)),
                        tuple(sorted(lost2)), sum(r.iterations for r in records))
    timings["match"] += time.perf_counter() - t0

    result = LsgmResult(matching, records, timings, d, len(clusters), warnings=warn)
    if truth is not None:
        result.accuracy = accuracy(matching, truth, seeds)
        result.consistency = _consistency(clusters, truth)
    return result


def _consistency(clusters, truth) -> float:
    t = np.asarray([truth[i] for i in range(len(truth))] if isinstance(truth, dict) else truth)
    where2 = {}
    for i, (_, m2, _) in enumerate(clusters):
        for v in m2:
            where2[int(v)] = i
    total = hits = 0
    for i, (m1, _, _) in enumerate(clusters):
        for v in m1:
            total += 1
            hits += where2.get(int(t[v]), -1) == i
    return hits / total if total else 1.0
