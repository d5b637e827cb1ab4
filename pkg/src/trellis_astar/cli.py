"""Command-line surface: cluster / baseline / oracle / gen / bench.

Every run writes a self-describing result JSON whose "cost" field always
equals a from-scratch re-evaluation of its "tree" field.  All randomness
descends from one --seed through named substreams, so any run is
reproducible from its config echo.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .baselines import beam_search, brute_force_map, default_beam_width, greedy
from .construct import Extender, approx_search
from .core import (
    BadInputError,
    CapacityError,
    DomainError,
    SearchExhaustedError,
    TrellisAstarError,
    tree_cost,
)
from .ginkgo import generate_jet, load_jet, save_jet
from .graph_costs import graph_from_points, load_graph, load_points_csv
from .models import COST_NAMES, HEURISTIC_NAMES, make_cost_model
from .search import astar_search
from .trellis import full_trellis

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_BAD_INPUT = 3
EXIT_CAPACITY = 4
EXIT_SEARCH_EXHAUSTED = 5
EXIT_DOMAIN = 6

_EXIT_BY_ERROR = (
    (BadInputError, EXIT_BAD_INPUT),
    (CapacityError, EXIT_CAPACITY),
    (SearchExhaustedError, EXIT_SEARCH_EXHAUSTED),
    (DomainError, EXIT_DOMAIN),
)


def seed_substream(seed: int, label: str) -> int:
    """Stable named sub-seed of one master seed."""
    return (seed * 0x9E3779B1 + zlib.crc32(label.encode())) & 0x7FFFFFFF


def _load_context(path: str, cost: str, *, points: bool):
    if cost == "ginkgo":
        return load_jet(path)
    if points or path.endswith(".csv"):
        return graph_from_points(load_points_csv(path))
    return load_graph(path)


def _write_result(out: str, result, model, ctx, config: dict) -> None:
    recomputed = tree_cost(result.tree, model, ctx)
    payload = {
        "cost": recomputed,
        "tree": result.tree.to_nested(),
        "stats": result.stats.as_dict(),
        "config": config,
        "format_version": FORMAT_VERSION,
    }
    if not math.isclose(recomputed, result.cost, rel_tol=1e-9, abs_tol=1e-9):
        payload["reported_cost"] = result.cost  # should never diverge; keep evidence
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def _maybe_snapshot(trellis, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(trellis.snapshot(), fh, indent=1)
            fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_cluster(args) -> int:
    model = make_cost_model(args.cost, args.heuristic)
    ctx = _load_context(args.infile, args.cost, points=args.points)
    config = {
        "command": f"cluster {args.mode}",
        "cost": args.cost,
        "heuristic": model.heuristic_name,
        "in": args.infile,
        "seed": args.seed,
    }
    if args.mode == "exact":
        trellis = full_trellis(ctx.n)
        result = astar_search(trellis, model, ctx)
        _maybe_snapshot(trellis, args.snapshot)
    else:
        ext = Extender(
            mode=args.sampler.replace("-", "_"),
            k=args.top_k,
            pool=args.pool,
            rng_seed=seed_substream(args.seed, "sampler"),
        )
        config.update(
            {
                "pool": args.pool,
                "top_k": args.top_k,
                "sampler": args.sampler,
                "rounds": args.rounds,
                "init": args.init,
                "width": args.width,
            }
        )
        results = approx_search(
            model, ctx, ext, rounds=args.rounds, init=args.init, beam_width=args.width
        )
        config["round_costs"] = [r.cost for r in results]
        result = results[-1]
    _write_result(args.out, result, model, ctx, config)
    return EXIT_OK


def _cmd_baseline(args) -> int:
    model = make_cost_model(args.cost, "zero")
    ctx = _load_context(args.infile, args.cost, points=args.points)
    config = {
        "command": f"baseline {args.algorithm}",
        "cost": args.cost,
        "in": args.infile,
    }
    if args.algorithm == "greedy":
        result = greedy(model, ctx)
    else:
        width = args.width if args.width else default_beam_width(ctx.n)
        config["width"] = width
        config["dedup"] = not args.no_dedup
        result = beam_search(model, ctx, width, dedupe=not args.no_dedup)
    _write_result(args.out, result, model, ctx, config)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    model = make_cost_model(args.cost, "zero")
    ctx = _load_context(args.infile, args.cost, points=args.points)
    result, count = brute_force_map(model, ctx)
    config = {
        "command": "oracle",
        "cost": args.cost,
        "in": args.infile,
        "tree_count": count,
    }
    _write_result(args.out, result, model, ctx, config)
    return EXIT_OK


def _cmd_gen(args) -> int:
    event = generate_jet(
        args.lam,
        args.t_root,
        args.t_cut,
        max_leaves=args.max_leaves,
        seed=seed_substream(args.seed, "generator"),
    )
    if args.target_leaves is not None:
        attempt = 0
        while event.n != args.target_leaves:
            attempt += 1
            if attempt > 100_000:
                raise DomainError(
                    f"no jet with exactly {args.target_leaves} leaves near seed {args.seed}"
                )
            event = generate_jet(
                args.lam,
                args.t_root,
                args.t_cut,
                max_leaves=args.target_leaves,
                seed=seed_substream(args.seed, f"generator:{attempt}"),
            )
    save_jet(event, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------

BENCH_COLUMNS = [
    "instance",
    "n",
    "algorithm",
    "cost",
    "cost_minus_greedy",
    "nodes_explored",
    "log10_trees_explored_minus_n_log10_3",
    "wall_ms",
    "seed",
    "error",
]


def _bench_task(task: dict) -> dict:
    """One (instance, algorithm, repetition) bench cell; errors become row text."""
    row = {
        "instance": task["path"],
        "algorithm": task["algorithm"],
        "seed": task["seed"],
    }
    try:
        cost_name = task["cost"]
        model = make_cost_model(cost_name, task.get("heuristic"))
        ctx = _load_context(task["path"], cost_name, points=task["format"] == "points")
        row["n"] = ctx.n
        spec = task["spec"]
        name = task["algorithm"]
        if name == "greedy":
            result = greedy(model, ctx)
        elif name == "beam":
            result = beam_search(model, ctx, spec.get("width"))
        elif name == "oracle":
            result, _ = brute_force_map(model, ctx)
        elif name == "exact-astar":
            result = astar_search(full_trellis(ctx.n), model, ctx)
        elif name == "approx-astar":
            ext = Extender(
                mode=spec.get("sampler", "best_k").replace("-", "_"),
                k=spec.get("top_k", 5),
                pool=spec.get("pool", 1000),
                rng_seed=task["seed"],
            )
            result = approx_search(
                model,
                ctx,
                ext,
                rounds=spec.get("rounds", 1),
                init=spec.get("init", "greedy"),
                beam_width=spec.get("width"),
            )[-1]
        else:
            raise DomainError(f"unknown bench algorithm {name!r}")
        greedy_cost = greedy(model, ctx).cost if name != "greedy" else result.cost
        row["cost"] = result.cost
        row["cost_minus_greedy"] = result.cost - greedy_cost
        row["nodes_explored"] = result.stats.nodes_explored
        trees = result.stats.trees_in_trellis_log10
        row["log10_trees_explored_minus_n_log10_3"] = (
            trees - ctx.n * math.log10(3.0) if math.isfinite(trees) else ""
        )
        row["wall_ms"] = result.stats.wall_time * 1000.0
        row["error"] = ""
    except (TrellisAstarError, OSError) as exc:
        row.setdefault("n", "")
        row["error"] = str(exc)
        for key in ("cost", "cost_minus_greedy", "nodes_explored",
                    "log10_trees_explored_minus_n_log10_3", "wall_ms"):
            row[key] = ""
    return row


def _load_manifest(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise BadInputError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadInputError(f"manifest {path} is not valid JSON: {exc}") from exc
    for key in ("instances", "algorithms", "cost"):
        if key not in manifest:
            raise BadInputError(f"manifest is missing {key!r}")
    return manifest


def _cmd_bench(args) -> int:
    manifest = _load_manifest(args.manifest)
    base_seed = manifest.get("seed", args.seed)
    reps = int(manifest.get("repetitions", 1))
    cost = manifest["cost"]
    heuristic = manifest.get("heuristic")
    tasks = []
    for inst in manifest["instances"]:
        if isinstance(inst, str):
            inst = {"path": inst, "format": "jet" if cost == "ginkgo" else "graph"}
        for spec in manifest["algorithms"]:
            name = spec["name"] if isinstance(spec, dict) else spec
            spec = spec if isinstance(spec, dict) else {"name": spec}
            for rep in range(reps):
                tasks.append(
                    {
                        "path": inst["path"],
                        "format": inst.get("format", "graph"),
                        "cost": cost,
                        "heuristic": heuristic,
                        "algorithm": name,
                        "spec": spec,
                        "seed": seed_substream(
                            base_seed, f"{inst['path']}:{name}:{rep}"
                        ),
                    }
                )
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_bench_task, tasks))
    else:
        rows = [_bench_task(t) for t in tasks]

    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        fh.write("\n# aggregates: mean and standard error per (n, algorithm)\n")
        agg_writer = csv.writer(fh)
        agg_writer.writerow(
            ["n", "algorithm", "runs", "mean_cost", "stderr_cost",
             "mean_cost_minus_greedy", "stderr_cost_minus_greedy"]
        )
        groups: dict[tuple, list[dict]] = {}
        for row in rows:
            if row["error"]:
                continue
            groups.setdefault((row["n"], row["algorithm"]), []).append(row)
        for (n, alg), members in sorted(groups.items()):
            costs = np.array([m["cost"] for m in members], dtype=float)
            deltas = np.array([m["cost_minus_greedy"] for m in members], dtype=float)
            k = len(members)

            def stderr(x: np.ndarray) -> float:
                return float(x.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0

            agg_writer.writerow(
                [n, alg, k, float(costs.mean()), stderr(costs),
                 float(deltas.mean()), stderr(deltas)]
            )
    failed = sum(1 for r in rows if r["error"])
    if failed:
        print(f"bench: {failed}/{len(rows)} cells failed; see the error column",
              file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trellis-astar",
        description="Exact and approximate minimum-cost hierarchical clustering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, *, needs_out=True):
        p.add_argument("--cost", required=True, choices=COST_NAMES)
        p.add_argument("--in", dest="infile", required=True, help="instance file")
        p.add_argument("--points", action="store_true",
                       help="treat --in as a points CSV (cosine + mean-center)")
        if needs_out:
            p.add_argument("--out", required=True, help="result JSON path")

    cluster = sub.add_parser("cluster", help="trellis search")
    cluster_sub = cluster.add_subparsers(dest="mode", required=True)

    exact = cluster_sub.add_parser("exact", help="full-trellis optimal search")
    add_io(exact)
    exact.add_argument("--heuristic", choices=HEURISTIC_NAMES, default=None)
    exact.add_argument("--seed", type=int, default=0)
    exact.add_argument("--snapshot", default=None, help="write a trellis snapshot JSON")
    exact.set_defaults(func=_cmd_cluster)

    approx = cluster_sub.add_parser("approx", help="sparse-trellis approximate search")
    add_io(approx)
    approx.add_argument("--heuristic", choices=HEURISTIC_NAMES, default=None)
    approx.add_argument("--seed", type=int, default=0)
    approx.add_argument("--pool", type=int, default=1000,
                        help="candidate splits sampled per exploration")
    approx.add_argument("--top-k", type=int, default=5, dest="top_k",
                        help="splits retained per exploration")
    approx.add_argument("--sampler", choices=("best-k", "importance"), default="best-k")
    approx.add_argument("--rounds", type=int, default=1)
    approx.add_argument("--init", choices=("greedy", "beam", "none"), default="greedy")
    approx.add_argument("--width", type=int, default=None, help="beam width for --init beam")
    approx.set_defaults(func=_cmd_cluster)

    baseline = sub.add_parser("baseline", help="greedy / beam reference algorithms")
    baseline.add_argument("algorithm", choices=("greedy", "beam"))
    add_io(baseline)
    baseline.add_argument("--width", type=int, default=None)
    baseline.add_argument("--no-dedup", action="store_true",
                          help="disable equal-cost state dedup in beam search")
    baseline.set_defaults(func=_cmd_baseline)

    oracle = sub.add_parser("oracle", help="exhaustive small-n optimum")
    add_io(oracle)
    oracle.set_defaults(func=_cmd_oracle)

    gen = sub.add_parser("gen", help="generate synthetic instances")
    gen_sub = gen.add_subparsers(dest="generator", required=True)
    gj = gen_sub.add_parser("ginkgo", help="toy jet event")
    gj.add_argument("--lambda", type=float, required=True, dest="lam")
    gj.add_argument("--t-root", type=float, required=True, dest="t_root")
    gj.add_argument("--t-cut", type=float, required=True, dest="t_cut")
    gj.add_argument("--seed", type=int, default=0)
    gj.add_argument("--max-leaves", type=int, default=100, dest="max_leaves")
    gj.add_argument("--target-leaves", type=int, default=None, dest="target_leaves")
    gj.add_argument("--out", required=True)
    gj.set_defaults(func=_cmd_gen)

    bench = sub.add_parser("bench", help="run a benchmark manifest to CSV")
    bench.add_argument("--manifest", required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--seed", type=int, default=0)
    bench.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrellisAstarError as exc:
        for err_type, code in _EXIT_BY_ERROR:
            if isinstance(exc, err_type):
                print(f"trellis-astar: {exc}", file=sys.stderr)
                return code
        print(f"trellis-astar: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"trellis-astar: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
