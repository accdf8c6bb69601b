"""Command-line surface.

Subcommands wire the pipeline end to end: `gen` writes the bundled graph
set, `featurize` inspects a graph, `profile` collects timing records,
`train` fits a selector, `select` queries it, `run` executes one layer
(optionally with the selector choosing the composition) and `bench`
compares compositions across graphs. Machine-readable JSON goes to stdout,
diagnostics to stderr. Exit codes: 0 ok, 1 error, 3 insufficient training
data.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INSUFFICIENT_DATA = 3


def _parse_sizes(text: str) -> list[tuple[int, int]]:
    sizes = []
    for part in text.split(","):
        k1, _, k2 = part.partition(":")
        sizes.append((int(k1), int(k2)))
    return sizes


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _load_graph(path):
    from .mtxio import read_matrix_market

    return read_matrix_market(path)


def _load_graph_dir(path) -> list:
    files = sorted(Path(path).glob("*.mtx"))
    if not files:
        raise FileNotFoundError(f"no .mtx files under {path}")
    return [(f.stem, _load_graph(f)) for f in files]


def _checksum(out: np.ndarray) -> dict:
    return {
        "shape": list(out.shape),
        "sum": float(out.sum()),
        "frobenius": float(np.sqrt((out * out).sum())),
    }


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def cmd_gen(args) -> int:
    from .graphs import bundled_graphs
    from .mtxio import write_matrix_market

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    listing = []
    for name, a in bundled_graphs():
        path = outdir / f"{name}.mtx"
        write_matrix_market(path, a)
        listing.append({"name": name, "path": str(path), "n_rows": a.n_rows, "n_nnzs": a.nnz})
    _emit({"graphs": listing})
    return EXIT_OK


def cmd_featurize(args) -> int:
    from .features import extract_features

    a = _load_graph(args.graph)
    _emit(extract_features(a).to_dict())
    return EXIT_OK


def cmd_profile(args) -> int:
    from .profiling import profile, write_records
    from .tiling import autotune

    graphs = _load_graph_dir(args.graphs)
    opt_config = None
    if args.opt:
        # One tuned tiling config per run, picked on the first graph.
        opt_config = autotune(
            graphs[0][1], max(k for s in _parse_sizes(args.sizes) for k in s),
            budget=args.budget, seed=args.seed,
        ).best
    records = profile(
        graphs,
        _parse_sizes(args.sizes),
        args.model,
        reps=args.reps,
        warmup=args.warmup,
        seed=args.seed,
        amortize_precompute=args.amortize_precompute == "yes",
        hw_tag=args.hw_tag,
        hw_desc=tuple(float(x) for x in args.hw_desc.split(",")) if args.hw_desc else (),
        opt_config=opt_config,
    )
    if args.out:
        write_records(args.out, records)
        _emit({"records": len(records), "out": args.out})
    else:
        for rec in records:
            print(json.dumps(rec.to_dict()))
    return EXIT_OK


def cmd_train(args) -> int:
    from .profiling import read_records
    from .selector import SelectorHyperparams, train

    records = read_records(args.profiles)
    system = "opt" if any(r.opt_config is not None for r in records) else "plain"
    hyper = SelectorHyperparams.for_system(system)
    if args.n_estimators is not None:
        hyper.n_estimators = args.n_estimators
    if args.learning_rate is not None:
        hyper.learning_rate = args.learning_rate
    if args.max_depth is not None:
        hyper.max_depth = args.max_depth
    model = train(records, args.model, hyper)
    model.save(args.out)
    _emit(
        {
            "model": args.model,
            "out": args.out,
            "records": len(records),
            "n_estimators": model.n_estimators,
            "learning_rate": model.learning_rate,
        }
    )
    return EXIT_OK


def cmd_select(args) -> int:
    from .features import extract_features
    from .selector import SelectorInput, SelectorModel, select_with_scores
    from .tiling import TilingConfig

    model = SelectorModel.load(args.model_file)
    a = _load_graph(args.graph)
    opt = None
    if args.opt_col_width:
        opt = TilingConfig(args.opt_col_width, args.opt_row_height, args.opt_reorder)
    inp = SelectorInput(
        features=extract_features(a),
        k1=args.k1,
        k2=args.k2,
        opt_config=opt,
        hw_descriptor=tuple(float(x) for x in args.hw_desc.split(",")) if args.hw_desc else (),
    )
    comp, scores = select_with_scores(model, inp)
    _emit({"model": model.model_tag, "composition": comp, "scores": scores})
    return EXIT_OK


def cmd_run(args) -> int:
    from .features import extract_features
    from .gat import GatLayerSpec, gat_layer
    from .gcn import GcnLayerSpec, NormalizedGraph, gcn_layer
    from .profiling import _config_rng, _time_iterations
    from .selector import SelectorInput, SelectorModel, select_with_scores
    from .sparse import add_self_loops, inv_sqrt_degrees
    from .tiling import TiledSpmmRunner, TilingConfig, autotune

    if args.composition == "auto" and not args.model_file:
        raise ValueError("--composition auto requires --model-file")

    t0 = time.perf_counter()
    a = _load_graph(args.graph)
    ingest_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    feats = extract_features(a)
    features_s = time.perf_counter() - t0

    opt_config = None
    tuning = None
    if args.opt:
        result = autotune(a, max(args.k1, args.k2), budget=args.budget, seed=args.seed)
        opt_config = result.best
        tuning = result.to_dict()

    selection_s = 0.0
    scores = None
    composition = args.composition
    if composition == "auto":
        model = SelectorModel.load(args.model_file)
        t0 = time.perf_counter()
        inp = SelectorInput(
            features=feats, k1=args.k1, k2=args.k2, opt_config=opt_config,
            hw_descriptor=tuple(float(x) for x in args.hw_desc.split(",")) if args.hw_desc else (),
        )
        composition, scores = select_with_scores(model, inp)
        selection_s = time.perf_counter() - t0

    rng = _config_rng(args.seed, Path(args.graph).stem, args.k1, args.k2)
    h = rng.uniform(-0.5, 0.5, size=(a.n_rows, args.k1))
    w = rng.uniform(-0.5, 0.5, size=(args.k1, args.k2))

    t0 = time.perf_counter()
    a_tilde = add_self_loops(a)
    spmm_fn = TiledSpmmRunner(a_tilde, opt_config) if opt_config else None
    if args.model == "gcn":
        g = NormalizedGraph(a_tilde=a_tilde, d_inv_sqrt=inv_sqrt_degrees(a_tilde))
        if composition == "precompute":
            g.with_precomputed()
        spec = GcnLayerSpec(args.k1, args.k2, w, composition=composition)
        run = lambda: gcn_layer(g, h, spec, spmm_fn=spmm_fn)
    else:
        spec = GatLayerSpec(
            args.k1,
            args.k2,
            w,
            attn_src=rng.uniform(-0.5, 0.5, size=args.k2),
            attn_dst=rng.uniform(-0.5, 0.5, size=args.k2),
            composition=composition,
            activation=args.activation,
        )
        run = lambda: gat_layer(a_tilde, h, spec, spmm_fn=spmm_fn)
    setup_s = time.perf_counter() - t0

    out = run()
    median_s, cv = _time_iterations(run, warmup=max(0, args.warmup - 1), reps=args.reps)

    report = {
        "graph": str(args.graph),
        "model": args.model,
        "k1": args.k1,
        "k2": args.k2,
        "requested_composition": args.composition,
        "composition": str(composition),
        "n_rows": a.n_rows,
        "n_nnzs": a.nnz,
        "iterations": args.reps,
        "times": {
            "ingest_s": ingest_s,
            "features_s": features_s,
            "selection_s": selection_s,
            "setup_s": setup_s,
            "iteration_median_s": median_s,
            "iteration_cv": cv,
        },
        "selection_overhead_s": features_s + selection_s,
        "selection_overhead_iterations": (features_s + selection_s) / median_s,
        "selector_scores": scores,
        "tuning": tuning,
        "output_checksum": _checksum(out),
    }
    _emit(report)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .profiling import profile
    from .tiling import autotune

    graphs = _load_graph_dir(args.graphs)
    sizes = _parse_sizes(args.sizes)
    opt_config = None
    tuning = None
    if args.opt:
        result = autotune(
            graphs[0][1], max(k for s in sizes for k in s), budget=args.budget,
            seed=args.seed,
        )
        opt_config = result.best
        tuning = result.to_dict()
    records = profile(
        graphs, sizes, args.model, reps=args.reps, warmup=args.warmup,
        seed=args.seed, opt_config=opt_config,
    )
    by_config: dict = {}
    for rec in records:
        by_config.setdefault((rec.graph_id, rec.k1, rec.k2), {})[rec.composition] = rec
    rows = []
    for (gid, k1, k2), comps in sorted(by_config.items()):
        entry = {
            "graph": gid,
            "k1": k1,
            "k2": k2,
            "timings_s": {c: r.median_time_s for c, r in comps.items()},
        }
        if comps:
            entry["fastest"] = min(comps, key=lambda c: comps[c].median_time_s)
        rows.append(entry)
    _emit({"model": args.model, "opt": bool(args.opt), "tuning": tuning, "results": rows})
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gnncompose",
        description="Input-adaptive dense-sparse composition engine for GNN layers",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, threads=True):
        sp.add_argument("--seed", type=int, default=0)
        if threads:
            sp.add_argument("--threads", type=int, default=None)

    sp = sub.add_parser("gen", help="write the bundled synthetic graphs as .mtx")
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(fn=cmd_gen)

    sp = sub.add_parser("featurize", help="print the 8 selector features of a graph")
    sp.add_argument("--graph", required=True)
    common(sp)
    sp.set_defaults(fn=cmd_featurize)

    sp = sub.add_parser("profile", help="time compositions and emit NDJSON records")
    sp.add_argument("--graphs", required=True, help="directory of .mtx files")
    sp.add_argument("--model", choices=("gcn", "gat"), required=True)
    sp.add_argument("--sizes", required=True, help="comma list of k1:k2 pairs")
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--warmup", type=int, default=3)
    sp.add_argument("--out", default=None)
    sp.add_argument("--amortize-precompute", choices=("yes", "no"), default="yes")
    sp.add_argument("--hw-tag", default=None)
    sp.add_argument("--hw-desc", default="", help="comma list of numeric descriptors")
    sp.add_argument("--opt", action="store_true", help="autotune a tiling config first")
    sp.add_argument("--budget", type=int, default=20)
    common(sp)
    sp.set_defaults(fn=cmd_profile)

    sp = sub.add_parser("train", help="fit a selector on NDJSON profile records")
    sp.add_argument("--profiles", required=True)
    sp.add_argument("--model", choices=("gcn", "gat"), required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-estimators", type=int, default=None)
    sp.add_argument("--learning-rate", type=float, default=None)
    sp.add_argument("--max-depth", type=int, default=None)
    common(sp)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("select", help="query a trained selector for one input")
    sp.add_argument("--model-file", required=True)
    sp.add_argument("--graph", required=True)
    sp.add_argument("--k1", type=int, required=True)
    sp.add_argument("--k2", type=int, required=True)
    sp.add_argument("--hw-desc", default="")
    sp.add_argument("--opt-col-width", type=int, default=0)
    sp.add_argument("--opt-row-height", type=int, default=64)
    sp.add_argument("--opt-reorder", action="store_true")
    common(sp)
    sp.set_defaults(fn=cmd_select)

    sp = sub.add_parser("run", help="execute one layer and print a JSON report")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--model", choices=("gcn", "gat"), default="gcn")
    sp.add_argument("--k1", type=int, required=True)
    sp.add_argument("--k2", type=int, required=True)
    sp.add_argument(
        "--composition",
        default="auto",
        choices=("auto", "precompute", "dynamic", "reuse", "recompute"),
    )
    sp.add_argument("--model-file", default=None)
    sp.add_argument("--hw-desc", default="")
    sp.add_argument("--opt", action="store_true")
    sp.add_argument("--budget", type=int, default=20)
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--warmup", type=int, default=3)
    sp.add_argument("--activation", choices=("relu", "none"), default="relu")
    common(sp)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("bench", help="compare both compositions across graphs")
    sp.add_argument("--graphs", required=True)
    sp.add_argument("--model", choices=("gcn", "gat"), required=True)
    sp.add_argument("--sizes", required=True)
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--warmup", type=int, default=3)
    sp.add_argument("--opt", action="store_true")
    sp.add_argument("--budget", type=int, default=20)
    common(sp)
    sp.set_defaults(fn=cmd_bench)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .runtime import configure_threads
    from .selector import InsufficientDataError

    configure_threads(getattr(args, "threads", None))
    try:
        return args.fn(args)
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
