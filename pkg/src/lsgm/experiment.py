"""Correlated-SBM experiment grids with resumable CSV output."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import LsgmError, ParameterError, ParseError
from .graph import SbmParams, SparseGraph, apply_permutation, generate_correlated_sbm, sbm_params_from_dict
from .pipeline import LsgmConfig, lsgm
from .seedsel import SeedSet

log = logging.getLogger(__name__)


@dataclass
class Instance:
    g1: SparseGraph
    g2: SparseGraph
    seeds: SeedSet
    truth: np.ndarray
    block_of: np.ndarray


def draw_seed_vertices(block_of, seeds_spec, rng) -> np.ndarray:
    """``seeds_spec`` is a total count (uniform over vertices) or a per-block count list."""
    if isinstance(seeds_spec, (list, tuple)):
        if len(seeds_spec) != block_of.max() + 1:
            raise ParameterError("per-block seed counts must list one count per block")
        parts = []
        for blk, cnt in enumerate(seeds_spec):
            pool = np.flatnonzero(block_of == blk)
            if cnt > len(pool):
                raise ParameterError(f"block {blk} has only {len(pool)} vertices for {cnt} seeds")
            parts.append(rng.choice(pool, int(cnt), replace=False))
        return np.concatenate(parts).astype(np.int64)
    cnt = int(seeds_spec)
    if not 0 <= cnt <= len(block_of):
        raise ParameterError(f"cannot draw {cnt} seeds from {len(block_of)} vertices")
    return rng.choice(len(block_of), cnt, replace=False).astype(np.int64)


def make_instance(params: SbmParams, rho: float, seeds_spec, rng_seed, shuffle: bool = True) -> Instance:
    """Sample a correlated pair, hide the alignment behind a random relabelling
    of the second graph (unless ``shuffle`` is off) and draw seeds."""
    ss = np.random.SeedSequence(rng_seed if isinstance(rng_seed, (list, tuple)) else int(rng_seed))
    graph_seed, aux = ss.spawn(2)
    pair = generate_correlated_sbm(params, rho, int(graph_seed.generate_state(1)[0]))
    rng = np.random.default_rng(aux)
    n = params.n
    perm = rng.permutation(n) if shuffle else np.arange(n)
    g2 = apply_permutation(pair.g2, perm) if shuffle else pair.g2
    sv = draw_seed_vertices(pair.block_of, seeds_spec, rng)
    seeds = SeedSet(tuple((int(v), int(perm[v])) for v in sv))
    return Instance(pair.g1, g2, seeds, perm, pair.block_of)


# ---------------------------------------------------------------------------
# Grid specification and result rows
# ---------------------------------------------------------------------------

CONFIG_KEYS = {f.name for f in fields(LsgmConfig)}


def config_from_dict(cfg: dict, base: LsgmConfig | None = None) -> LsgmConfig:
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    merged = asdict(base) if base is not None else {}
    merged.update(cfg)
    return LsgmConfig(**merged)


@dataclass
class ExperimentSpec:
    name: str
    params: SbmParams
    rhos: list
    seed_counts: list
    replicates: int
    config: LsgmConfig
    output: str
    rng_seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.replicates < 1:
            raise ParameterError("replicates must be at least 1")
        if not self.rhos or not self.seed_counts:
            raise ParameterError("experiment grid is empty: need at least one rho and one seed count")

    @classmethod
    def from_dict(cls, raw: dict, base_dir=None) -> "ExperimentSpec":
        try:
            output = raw.get("output", "results.csv")
            if base_dir is not None and not os.path.isabs(output):
                output = str(Path(base_dir) / output)
            return cls(
                name=str(raw.get("name", "experiment")),
                params=sbm_params_from_dict(raw["sbm"]),
                rhos=[float(r) for r in raw["rho"]],
                seed_counts=list(raw["seeds"]),
                replicates=int(raw.get("replicates", 1)),
                config=config_from_dict(raw.get("config", {})),
                output=output,
                rng_seed=int(raw.get("rng_seed", 0)),
                shuffle=bool(raw.get("shuffle", True)),
            )
        except KeyError as exc:
            raise ParameterError(f"experiment spec is missing {exc.args[0]!r}") from None

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, path) from None
        return cls.from_dict(raw, base_dir=Path(path).parent)

    def runs(self):
        """Yield ``(experiment_id, rho_index, seed_index, rho, seeds_spec, replicate)``."""
        for i, rho in enumerate(self.rhos):
            for j, spec in enumerate(self.seed_counts):
                label = "-".join(map(str, spec)) if isinstance(spec, (list, tuple)) else str(spec)
                eid = f"{self.name}/rho={rho:g}/s={label}"
                for r in range(self.replicates):
                    yield eid, i, j, rho, spec, r


@dataclass
class ResultRow:
    experiment_id: str
    replicate: int
    rho: float
    s: int
    n: int
    k: int
    d: int
    accuracy: float
    consistency: float
    embed_s: float
    procrustes_s: float
    cluster_s: float
    match_s: float
    iterations: int
    status: str = "ok"
    message: str = ""

    def to_csv(self) -> dict:
        out = asdict(self)
        for key in ("embed_s", "procrustes_s", "cluster_s", "match_s"):
            out[key] = f"{out[key]:.3f}"
        for key in ("accuracy", "consistency"):
            out[key] = "" if np.isnan(out[key]) else f"{out[key]:.6f}"
        out["rho"] = f"{self.rho:g}"
        return out

    @classmethod
    def from_csv(cls, row: dict) -> "ResultRow":
        kw = {}
        for f in fields(cls):
            raw = row[f.name]
            if f.type in ("int", int):
                kw[f.name] = int(raw)
            elif f.type in ("float", float):
                kw[f.name] = float(raw) if raw != "" else float("nan")
            else:
                kw[f.name] = raw
        return cls(**kw)


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]


def read_results(path) -> list[ResultRow]:
    if not Path(path).exists():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return [ResultRow.from_csv(r) for r in csv.DictReader(fh)]


def run_one(spec: ExperimentSpec, eid, i, j, rho, seeds_spec, rep) -> ResultRow:
    inst = make_instance(spec.params, rho, seeds_spec, [spec.rng_seed, i, j, rep], spec.shuffle)
    s = len(inst.seeds)
    try:
        res = lsgm(inst.g1, inst.g2, inst.seeds, spec.config, truth=inst.truth)
    except LsgmError as exc:
        nan = float("nan")
        return ResultRow(eid, rep, rho, s, spec.params.n, 0, 0, nan, nan, 0.0, 0.0, 0.0, 0.0, 0,
                         "error", f"{type(exc).__name__}: {exc}")
    t = res.timings
    return ResultRow(eid, rep, rho, s, spec.params.n, res.k, res.d, res.accuracy, res.consistency,
                     t["embed"], t["procrustes"], t["cluster"], t["match"], res.total_iterations)


def run_experiment(spec: ExperimentSpec, progress=None) -> list[ResultRow]:
    """Run every grid point that is not already in the output CSV; append as we go."""
    done = {(r.experiment_id, r.replicate) for r in read_results(spec.output)}
    path = Path(spec.output)
    fresh = not path.exists() or path.stat().st_size == 0
    path.parent.mkdir(parents=True, exist_ok=True)
    new_rows = []
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        if fresh:
            writer.writeheader()
        for eid, i, j, rho, seeds_spec, rep in spec.runs():
            if (eid, rep) in done:
                continue
            row = run_one(spec, eid, i, j, rho, seeds_spec, rep)
            if row.status != "ok":
                log.warning("%s replicate %d failed: %s", eid, rep, row.message)
            writer.writerow(row.to_csv())
            fh.flush()
            new_rows.append(row)
            if progress is not None:
                progress(row)
    return new_rows


def summarize(rows) -> dict:
    """Mean accuracy per experiment id over successful rows."""
    acc: dict[str, list] = {}
    for r in rows:
        if r.status == "ok":
            acc.setdefault(r.experiment_id, []).append(r.accuracy)
    return {k: float(np.mean(v)) for k, v in acc.items()}
