"""Command-line entry point: ``lsgm generate | match | experiment``.

Exit codes: 0 success, 2 bad input (parse or parameter errors, missing
files), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .errors import NumericalError, ParameterError, ParseError
from .experiment import ExperimentSpec, config_from_dict, make_instance, run_experiment, summarize
from .graph import load_edge_list, load_pairs, load_sbm_config, save_edge_list, save_pairs
from .pipeline import LsgmConfig, lsgm
from .seedsel import SeedSet

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("lsgm")


def _int_or_auto(text):
    return text if text == "auto" else int(text)


def _budget(text):
    return text if text == "all" else int(text)


def _add_pipeline_flags(p):
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", help="JSON file with pipeline settings (flags override it)")
    g.add_argument("--d", type=_int_or_auto, help="embedding dimension or 'auto'")
    g.add_argument("--k", type=_int_or_auto, help="number of clusters or 'auto'")
    g.add_argument("--max-cluster-size", type=int)
    g.add_argument("--spherical", action="store_true", default=None)
    g.add_argument("--workers", type=int)
    g.add_argument("--seed-budget", type=_budget, help="seeds per cluster, or 'all'")
    g.add_argument("--matcher", choices=("sgm", "brute_force"))
    g.add_argument("--rng-seed", type=int)
    g.add_argument("--recluster-depth", type=int)
    g.add_argument("--max-iters", type=int)
    g.add_argument("--non-bijective", dest="bijective", action="store_false", default=None)


FLAG_TO_KEY = {
    "d": "d", "k": "k", "max_cluster_size": "max_cluster_size", "spherical": "spherical",
    "workers": "workers", "seed_budget": "seed_budget", "matcher": "matcher",
    "rng_seed": "rng_seed", "recluster_depth": "recluster_depth", "max_iters": "max_iters",
    "bijective": "bijective",
}


def build_config(args) -> LsgmConfig:
    settings = {}
    if args.config:
        try:
            settings.update(json.loads(Path(args.config).read_text()))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, args.config) from None
    for flag, key in FLAG_TO_KEY.items():
        val = getattr(args, flag, None)
        if val is not None:
            settings[key] = val
    return config_from_dict(settings)


def cmd_generate(args) -> int:
    cfg = load_sbm_config(args.config)
    rho = args.rho if args.rho is not None else cfg["rho"]
    rng_seed = args.rng_seed if args.rng_seed is not None else cfg["rng_seed"]
    seeds_spec = args.num_seeds if args.num_seeds is not None else cfg.get("seeds", 0)
    shuffle = args.shuffle or bool(cfg.get("shuffle", False))
    inst = make_instance(cfg["params"], rho, seeds_spec, rng_seed, shuffle=shuffle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_edge_list(inst.g1, out / "g1.edges")
    save_edge_list(inst.g2, out / "g2.edges")
    save_pairs(enumerate(inst.truth), out / "truth.tsv")
    save_pairs(inst.seeds, out / "seeds.tsv")
    print(f"wrote {out}: n={inst.g1.n} edges=({inst.g1.num_edges}, {inst.g2.num_edges}) "
          f"seeds={len(inst.seeds)} rho={rho:g}")
    return EXIT_OK


def cmd_match(args) -> int:
    config = build_config(args)
    g1 = load_edge_list(args.g1)
    g2 = load_edge_list(args.g2)
    seeds = SeedSet(tuple(load_pairs(args.seeds)))
    truth = None
    if args.truth:
        pairs = load_pairs(args.truth)
        truth = {u: v for u, v in pairs}
        if set(truth) != set(range(g1.n)):
            raise ParameterError("truth file must list every graph-1 vertex exactly once")
    t0 = time.perf_counter()
    res = lsgm(g1, g2, seeds, config, truth=truth)
    elapsed = time.perf_counter() - t0
    res.matching.to_tsv(args.out)
    parts = [f"n={g1.n}", f"s={len(seeds)}", f"d={res.d}", f"k={res.k}",
             f"disagreements={res.matching.objective}"]
    if res.accuracy is not None:
        parts.append(f"accuracy={res.accuracy:.6f}")
        parts.append(f"consistency={res.consistency:.6f}")
    parts.extend(f"{stage}={secs:.3f}s" for stage, secs in res.timings.items())
    parts.append(f"total={elapsed:.3f}s")
    print(" ".join(parts))
    return EXIT_OK


def cmd_experiment(args) -> int:
    spec = ExperimentSpec.load(args.spec)
    if args.out:
        spec.output = args.out
    if args.workers is not None:
        spec.config.workers = args.workers

    def progress(row):
        if not args.quiet:
            acc = "nan" if np.isnan(row.accuracy) else f"{row.accuracy:.4f}"
            print(f"{row.experiment_id} rep={row.replicate} acc={acc} status={row.status}", flush=True)

    rows = run_experiment(spec, progress)
    for eid, acc in summarize(rows).items():
        print(f"{eid}: mean accuracy {acc:.4f}")
    print(f"{len(rows)} new rows -> {spec.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsgm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a correlated SBM pair to files")
    p.add_argument("--config", required=True, help="JSON SBM config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rho", type=float)
    p.add_argument("--rng-seed", type=int)
    p.add_argument("--num-seeds", type=int)
    p.add_argument("--shuffle", action="store_true",
                   help="relabel graph 2 randomly to hide the true alignment")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("match", help="match two edge-list graphs")
    p.add_argument("g1")
    p.add_argument("g2")
    p.add_argument("seeds", help="two-column seed file (g1_vertex g2_vertex)")
    p.add_argument("--truth", help="two-column true alignment; enables accuracy")
    p.add_argument("--out", default="matching.tsv")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("experiment", help="run an experiment grid to CSV (resumable)")
    p.add_argument("spec")
    p.add_argument("--out", help="override the output CSV")
    p.add_argument("--workers", type=int)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, ParameterError, OSError) as exc:
        print(f"lsgm: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"lsgm: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
