"""Command-line interface: ``graphtension generate|detect|eval|knn|batch``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .ac import AcConfig
from .energy import optimal_w, profile_energy, score
from .evaluation import RunResult, knn_graph, nmi, read_feature_csv
from .exceptions import GraphtensionError, UndefinedScoreError
from .generators import gen_lfr_style, gen_multiscale, gen_pp
from .graph import Graph, Partition, load_edge_list, read_partition, write_edge_list, write_partition
from .mbo import MboConfig
from .mcf import McfConfig
from .pipeline import PipelineConfig, em_fit, kl_baseline, split_merge

log = logging.getLogger("graphtension")

THREADS_ENV = "GRAPHTENSION_THREADS"


# -- experiment plumbing ----------------------------------------------------------

def _load_graph(path) -> Graph:
    with open(path) as fh:
        return load_edge_list(fh)


def _load_partition(path, n_nodes) -> Partition:
    with open(path) as fh:
        return read_partition(fh, n_nodes)


def pipeline_config(opts: dict) -> PipelineConfig:
    """Build a ``PipelineConfig`` from a flat option dictionary (CLI names)."""
    g = opts.get
    return PipelineConfig(
        n_hat_expected=g("nhat", 2),
        solver=g("solver", "mcf") if g("solver", "mcf") != "kl" else "mcf",
        penalty_coeff=g("penalty", 0.1),
        inf_reset_factor=g("inf_reset", 1.1),
        em_max_rounds=g("em_rounds", 30),
        seed=g("seed", 0),
        warm_start=not g("cold_start", False),
        split_restarts=g("split_restarts", 3),
        mcf=McfConfig(max_iters=g("max_iter", 500), serial_mode=g("serial", False), seed=g("seed", 0)),
        ac=AcConfig(
            epsilon=g("epsilon", 0.004), dt=g("dt"), c=g("c"), max_iters=g("ac_iters", 300),
            stop_tol=g("stop_tol", 1e-4), seed=g("seed", 0), m_eig=g("meig"),
        ),
        mbo=MboConfig(
            outer_steps=g("outer_steps", 100), tau=g("tau"), dt_inner=g("dt_inner"),
            threshold_rule=g("threshold_rule", "sigma-weighted"), seed=g("seed", 0), m_eig=g("meig"),
        ),
    )


def evaluate(graph: Graph, partition: Partition, reference: Partition | None, base: RunResult | None = None) -> RunResult:
    """Energy, learned affinities and (with a reference) score and NMI of a partition."""
    part = partition.compact()
    e = profile_energy(graph, part)
    sc = nm = None
    if reference is not None:
        try:
            sc = score(e, profile_energy(graph, reference))
        except UndefinedScoreError:
            sc = "undefined"
        nm = nmi(part, reference)
    return RunResult(
        energy=e,
        n_communities=part.n_hat,
        w_matrix=optimal_w(graph, part).tolist(),
        runtime_s=base.runtime_s if base else 0.0,
        seed=base.seed if base else None,
        solver=base.solver if base else "none",
        score=sc,
        nmi=nm,
        params=base.params if base else {},
    )


def detect(graph: Graph, opts: dict) -> tuple[Partition, float]:
    """Run the configured detector; returns the partition and wall time."""
    t0 = time.perf_counter()
    mode = opts.get("mode", "split-merge")
    seed = opts.get("seed", 0)
    if opts.get("solver") == "kl":
        part = kl_baseline(graph, opts.get("nhat", 2), seed=seed).partition
    elif mode == "em":
        part = em_fit(graph, opts.get("nhat", 2), pipeline_config(opts)).partition
    elif mode == "split-merge":
        part = split_merge(graph, pipeline_config(opts)).partition
    else:
        raise GraphtensionError(f"unknown detection mode {mode!r}")
    return part, time.perf_counter() - t0


def _write_json(path, result: RunResult):
    Path(path).write_text(result.to_json() + "\n")


def run_experiment(config: dict) -> RunResult:
    """Generate or load a graph, detect communities, evaluate, and write outputs.

    Recognised keys: ``model`` (pp|lfr|ms, with generator parameters under
    ``generator``) or ``edges`` (path), optional ``reference`` (path), the
    detection options accepted by ``pipeline_config``, and output paths
    ``out_partition`` / ``out_json``.
    """
    opts = dict(config)
    reference = None
    if opts.get("model"):
        planted = generate(opts["model"], opts.get("generator", {}), opts.get("seed", 0))
        graph, reference = planted.graph, planted.reference
    else:
        graph = _load_graph(opts["edges"])
        if opts.get("reference"):
            reference = _load_partition(opts["reference"], graph.n_nodes)
    part, runtime = detect(graph, opts)
    echo = {k: v for k, v in sorted(opts.items()) if k not in ("out_partition", "out_json")}
    base = RunResult(0.0, 0, [], runtime, opts.get("seed", 0), opts.get("solver", "mcf"), params=echo)
    result = evaluate(graph, part, reference, base)
    if opts.get("out_partition"):
        with open(opts["out_partition"], "w") as fh:
            write_partition(part.compact(), fh)
    if opts.get("out_json"):
        _write_json(opts["out_json"], result)
    return result


def generate(model: str, params: dict, seed):
    if model == "pp":
        return gen_pp(seed=seed, **params)
    if model == "lfr":
        return gen_lfr_style(seed=seed, **params)
    if model == "ms":
        return gen_multiscale(seed=seed, **params)
    raise GraphtensionError(f"unknown model {model!r}")


# -- argument parsing ------------------------------------------------------------------

def _add_detect_flags(p):
    p.add_argument("--nhat", type=int, default=2, help="expected number of communities")
    p.add_argument("--solver", choices=["mcf", "ac", "mbo", "kl"], default="mcf")
    p.add_argument("--mode", choices=["split-merge", "em"], default="split-merge")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--penalty", type=float, default=0.1)
    p.add_argument("--inf-reset", type=float, default=1.1)
    p.add_argument("--em-rounds", type=int, default=30)
    p.add_argument("--cold-start", action="store_true", help="re-randomise each EM partition step")
    p.add_argument("--split-restarts", type=int, default=3, help="random EM starts per split attempt")
    p.add_argument("--serial", action="store_true", help="serial MCF updates")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--epsilon", type=float, default=0.004)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--meig", type=int, default=None)
    p.add_argument("--stop-tol", type=float, default=1e-4)
    p.add_argument("--ac-iters", type=int, default=300)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--dt-inner", type=float, default=None)
    p.add_argument("--threshold-rule", choices=["sigma-weighted", "argmax"], default="sigma-weighted")
    p.add_argument("--outer-steps", type=int, default=100)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphtension", description="Surface-tension community detection.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic graph and its planted partition")
    g.add_argument("--model", choices=["pp", "lfr", "ms"], required=True)
    g.add_argument("--out-edges", required=True)
    g.add_argument("--out-ref", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=None, help="number of nodes (pp, lfr)")
    g.add_argument("--communities", type=int, default=None, help="pp: number of communities")
    g.add_argument("--degree-exponent", type=float, default=None)
    g.add_argument("--k-min", type=float, default=None, help="pp: minimum target degree")
    g.add_argument("--k-max", type=float, default=None, help="pp: maximum target degree")
    g.add_argument("--omega-in", type=float, default=None)
    g.add_argument("--omega-out", type=float, default=None)
    g.add_argument("--mean-k", type=float, default=None, help="lfr: mean degree")
    g.add_argument("--max-k", type=float, default=None, help="lfr: maximum degree")
    g.add_argument("--size-exponent", type=float, default=None)
    g.add_argument("--size-min", type=int, default=None)
    g.add_argument("--size-max", type=int, default=None)
    g.add_argument("--mu", type=float, default=None)
    g.add_argument("--components", type=int, default=None, help="ms: number of components")

    d = sub.add_parser("detect", help="find communities in an edge-list graph")
    d.add_argument("--edges", required=True)
    d.add_argument("--reference", default=None, help="partition file to score against")
    d.add_argument("--out-partition", required=True)
    d.add_argument("--out-json", default=None)
    _add_detect_flags(d)

    e = sub.add_parser("eval", help="score a partition against a reference")
    e.add_argument("--edges", required=True)
    e.add_argument("--partition", required=True)
    e.add_argument("--reference", default=None)
    e.add_argument("--result", default=None, help="JSON from detect to carry solver, seed and runtime")
    e.add_argument("--out-json", default=None)

    k = sub.add_parser("knn", help="build a k-nearest-neighbour graph from a feature CSV")
    k.add_argument("--features", required=True)
    k.add_argument("--k", type=int, default=10)
    k.add_argument("--out-edges", required=True)

    b = sub.add_parser("batch", help="run detect over several seeds in parallel")
    b.add_argument("--edges", required=True)
    b.add_argument("--reference", default=None)
    b.add_argument("--seeds", type=int, nargs="+", required=True)
    b.add_argument("--out-dir", required=True)
    b.add_argument("--workers", type=int, default=None)
    _add_detect_flags(b)
    b.set_defaults(seed=None)
    return parser


_GEN_FLAGS = {
    "pp": {"n": "n_nodes", "communities": "n_hat", "degree_exponent": "degree_exponent", "k_min": "k_min",
           "k_max": "k_max", "omega_in": "omega_in", "omega_out": "omega_out"},
    "lfr": {"n": "n_nodes", "degree_exponent": "degree_exponent", "mean_k": "mean_k", "max_k": "max_k",
            "size_exponent": "size_exponent", "size_min": "size_min", "size_max": "size_max", "mu": "mu"},
    "ms": {"components": "n_components"},
}

_DETECT_KEYS = (
    "nhat", "solver", "mode", "seed", "penalty", "inf_reset", "em_rounds", "cold_start", "split_restarts", "serial",
    "max_iter",
    "epsilon", "dt", "c", "meig", "stop_tol", "ac_iters", "tau", "dt_inner", "threshold_rule", "outer_steps",
)


def _detect_opts(args) -> dict:
    return {k: getattr(args, k) for k in _DETECT_KEYS}


def _cmd_generate(args):
    params = {dst: getattr(args, src) for src, dst in _GEN_FLAGS[args.model].items() if getattr(args, src) is not None}
    planted = generate(args.model, params, args.seed)
    with open(args.out_edges, "w") as fh:
        write_edge_list(planted.graph, fh)
    with open(args.out_ref, "w") as fh:
        write_partition(planted.reference, fh)
    log.info("wrote %d nodes, %d edges", planted.graph.n_nodes, planted.graph.n_edges)


def _detect_one(edges, reference, opts, out_partition, out_json):
    return run_experiment(dict(opts, edges=edges, reference=reference, out_partition=out_partition, out_json=out_json))


def _cmd_detect(args):
    result = _detect_one(args.edges, args.reference, _detect_opts(args), args.out_partition, args.out_json)
    if not args.out_json:
        print(result.to_json())


def _cmd_eval(args):
    graph = _load_graph(args.edges)
    part = _load_partition(args.partition, graph.n_nodes)
    reference = _load_partition(args.reference, graph.n_nodes) if args.reference else None
    base = RunResult.from_json(Path(args.result).read_text()) if args.result else None
    result = evaluate(graph, part, reference, base)
    if args.out_json:
        _write_json(args.out_json, result)
    else:
        print(result.to_json())


def _cmd_knn(args):
    with open(args.features) as fh:
        features = read_feature_csv(fh)
    graph = knn_graph(features, args.k)
    with open(args.out_edges, "w") as fh:
        write_edge_list(graph, fh)


def worker_count(requested: int | None, n_tasks: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = requested or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise GraphtensionError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, min(n, n_tasks))


def _cmd_batch(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    opts = _detect_opts(args)
    jobs = [
        (args.edges, args.reference, dict(opts, seed=s), str(out / f"partition_seed{s}.txt"), str(out / f"result_seed{s}.json"))
        for s in args.seeds
    ]
    n_workers = worker_count(args.workers, len(jobs))
    if n_workers == 1:
        results = [_detect_one(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_detect_one, *zip(*jobs)))
    summary = [{"seed": s, "energy": r.energy, "n_communities": r.n_communities} for s, r in zip(args.seeds, results)]
    print(json.dumps(summary, indent=2))


_COMMANDS = {
    "generate": _cmd_generate,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "knn": _cmd_knn,
    "batch": _cmd_batch,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        _COMMANDS[args.command](args)
    except (GraphtensionError, OSError, ValueError) as exc:
        print(f"graphtension {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
