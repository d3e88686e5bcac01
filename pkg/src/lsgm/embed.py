"""Adjacency spectral embedding and seed-anchored orthogonal alignment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EmbeddingRankError, NumericalError, ParameterError, SeedlessAlignmentError
from .graph import SbmParams, SparseGraph

DENSE_SOLVER_MAX_N = 2000
LANCZOS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Embedding:
    """Rows of ``U @ diag(sqrt(eigenvalues))``, one per vertex."""

    coords: np.ndarray
    eigenvalues: np.ndarray
    vectors: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def to_csv(self, path) -> None:
        np.savetxt(path, self.coords, delimiter=",", fmt="%.17g")


@dataclass(frozen=True, eq=False)
class OrthogonalTransform:
    q: np.ndarray
    residual: float = 0.0

    @property
    def d(self) -> int:
        return self.q.shape[0]


def _as_operator(g):
    if isinstance(g, SparseGraph):
        return g.adjacency
    if sp.issparse(g):
        return sp.csr_matrix(g, dtype=np.float64)
    m = np.asarray(g, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError("matrix to embed must be square")
    return m


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive; argmax returns the lowest index on ties
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def top_eigenpairs(g, d: int):
    """The ``d`` largest algebraic eigenpairs, eigenvalues nonincreasing.

    Dense symmetric solver up to ``DENSE_SOLVER_MAX_N`` vertices, implicitly
    restarted Lanczos above that.
    """
    mat = _as_operator(g)
    n = mat.shape[0]
    if not 1 <= d <= n:
        raise ParameterError(f"embedding dimension must lie in [1, {n}], got {d}")
    if n <= DENSE_SOLVER_MAX_N or d >= n - 1:
        dense = mat.toarray() if sp.issparse(mat) else mat
        if not np.all(np.isfinite(dense)):
            raise NumericalError("matrix has non-finite entries")
        vals, vecs = la.eigh(dense, subset_by_index=[n - d, n - 1])
    else:
        v0 = np.full(n, 1.0 / math.sqrt(n))  # fixed start vector keeps runs reproducible
        try:
            vals, vecs = spla.eigsh(mat, k=d, which="LA", tol=LANCZOS_TOL,
                                    maxiter=300 * d, v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise NumericalError(f"Lanczos did not converge for d={d}: {exc}") from None
    order = np.argsort(-vals, kind="stable")
    return vals[order], _fix_signs(vecs[:, order])


def spectral_embed(g, d: int) -> Embedding:
    """Adjacency spectral embedding ``U S^{1/2}`` from the top ``d`` eigenpairs.

    Parameters
    ----------
    g : SparseGraph or square symmetric matrix
    d : int
        Embedding dimension, ``1 <= d <= n``.

    Raises
    ------
    EmbeddingRankError
        If one of the top ``d`` eigenvalues is not positive.
    """
    vals, vecs = top_eigenpairs(g, d)
    scale = max(1.0, float(np.abs(vals).max()))
    bad = np.flatnonzero(vals <= 1e-10 * scale)
    if bad.size:
        raise EmbeddingRankError(
            f"eigenvalue {bad[0] + 1} of the top {d} is {vals[bad[0]]:.3g} (not positive); "
            f"use an embedding dimension of at most {int(bad[0])}"
        )
    return Embedding(vecs * np.sqrt(vals), vals, vecs)


def estimate_dimension(partial_spectrum) -> "DimensionEstimate":
    """Elbow of a nonincreasing spectrum by two-group Gaussian profile likelihood.

    Every split ``q`` in ``1..m-1`` models the first ``q`` values and the rest
    as normals with separate means and a shared variance; the split with the
    largest maximised log-likelihood wins (the lowest ``q`` on ties). A
    constant spectrum has no elbow and is reported as ``degenerate`` with
    dimension 1.
    """
    x = np.asarray(partial_spectrum, dtype=np.float64).ravel()
    m = x.size
    if m < 3:
        raise ParameterError("need at least 3 spectrum values to locate an elbow")
    if np.any(np.diff(x) > 1e-12 * max(1.0, np.abs(x).max())):
        raise ParameterError("spectrum must be sorted nonincreasing")
    if np.ptp(x) <= 1e-12 * max(1.0, np.abs(x).max()):
        return DimensionEstimate(1, True, np.full(m - 1, np.inf))
    # pooled within-group sum of squares for every split, via prefix sums
    c1 = np.cumsum(x)
    c2 = np.cumsum(x * x)
    q = np.arange(1, m)
    ss_left = c2[q - 1] - c1[q - 1] ** 2 / q
    tail1 = c1[-1] - c1[q - 1]
    tail2 = c2[-1] - c2[q - 1]
    ss_right = tail2 - tail1 ** 2 / (m - q)
    ss = np.maximum(ss_left + ss_right, 0.0)
    var = ss / m
    with np.errstate(divide="ignore"):
        loglik = np.where(var > 0, -0.5 * m * (np.log(2 * np.pi * var) + 1.0), np.inf)
    best = int(np.argmax(loglik))
    return DimensionEstimate(best + 1, False, loglik)


@dataclass(frozen=True, eq=False)
class DimensionEstimate:
    dim: int
    degenerate: bool
    profile: np.ndarray

    def __int__(self):
        return self.dim


def procrustes_align(xs, ys) -> OrthogonalTransform:
    """Orthogonal ``Q`` minimising ``||xs @ Q - ys||_F`` (``Q = U V^T`` from the SVD of ``xs^T ys``)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    if xs.shape != ys.shape:
        raise ParameterError(f"Procrustes inputs differ in shape: {xs.shape} vs {ys.shape}")
    if xs.shape[0] < 1:
        raise SeedlessAlignmentError("Procrustes alignment needs at least one anchor row")
    u, _, vt = np.linalg.svd(xs.T @ ys)
    q = u @ vt
    return OrthogonalTransform(q, float(np.linalg.norm(xs @ q - ys)))


def align_embeddings(xhat: Embedding, yhat: Embedding, seeds):
    """Rotate the first embedding onto the second using the seed rows.

    Returns ``(xhat.coords @ Q, transform)``; the second embedding is left as is.
    """
    if len(seeds) == 0:
        raise SeedlessAlignmentError("no seeds: the Procrustes alignment has no anchors")
    if xhat.d != yhat.d:
        raise ParameterError(f"embedding dimensions differ: {xhat.d} vs {yhat.d}")
    s1, s2 = seeds.g1, seeds.g2
    if s1.max() >= xhat.n or s2.max() >= yhat.n:
        raise ParameterError("seed vertex outside the embedded graph")
    t = procrustes_align(xhat.coords[s1], yhat.coords[s2])
    return xhat.coords @ t.q, t


def two_to_infinity(m) -> float:
    """Largest row norm."""
    m = np.atleast_2d(np.asarray(m))
    return float(np.sqrt((m * m).sum(axis=1)).max()) if m.size else 0.0


# ---------------------------------------------------------------------------
# Perfect-clustering diagnostics (theory-side; nothing at runtime depends on them)
# ---------------------------------------------------------------------------


def eigengap_delta(params: SbmParams, d: int) -> float:
    """Smallest gap among the top ``d + 1`` eigenvalues of ``D``, divided by ``n``."""
    b = params.block_of
    sizes = np.asarray(params.block_sizes, dtype=np.float64)
    # nonzero spectrum of D equals that of S^{1/2} P S^{1/2}, S = diag(block sizes)
    root = np.sqrt(sizes)
    small = root[:, None] * params.block_probs * root[None, :]
    vals = np.sort(np.linalg.eigvalsh(small))[::-1]
    n = len(b)
    full = np.concatenate((vals, np.zeros(max(0, d + 1 - len(vals)))))[: d + 1]
    gaps = np.abs(full[:, None] - full[None, :])[~np.eye(d + 1, dtype=bool)]
    return float(gaps.min() / n)


def concentration_beta(n: int, d: int, delta: float) -> float:
    """Row-wise embedding error scale ``260 d log(n) / (delta sqrt(n))``."""
    if delta <= 0:
        return math.inf
    return 260.0 * d * math.log(n) / (delta * math.sqrt(n))


def seed_spread_alpha(params: SbmParams, seed_vertices) -> float:
    """Largest ``alpha`` with ``min_{|v|=1} ||X[seeds] v|| >= alpha sqrt(s)``."""
    x = params.latent_factor()[params.block_of[np.asarray(seed_vertices)]]
    if x.shape[0] == 0:
        return 0.0
    sv = np.linalg.svd(x, compute_uv=False)
    smin = sv[-1] if x.shape[0] >= x.shape[1] else 0.0
    return float(smin / math.sqrt(x.shape[0]))


def latent_separation_ok(params: SbmParams, d: int) -> bool:
    """Whether distinct latent rows are farther apart than ``6 n^{1/6} beta``."""
    n = params.n
    beta = concentration_beta(n, d, eigengap_delta(params, d))
    x = params.latent_factor()
    dist = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    off = dist[~np.eye(len(x), dtype=bool)]
    return bool(off.size == 0 or off.min() > 6 * n ** (1 / 6) * beta)
