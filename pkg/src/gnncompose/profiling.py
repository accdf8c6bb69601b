"""Offline timing harness: run layer compositions across graphs and sizes and
emit training records for the selector.

The timed region covers one full layer forward pass. Graph ingestion,
self-loop augmentation, degree computation and feature extraction are
excluded. The one-time cost of building the normalized adjacency for the
GCN precompute composition is recorded separately; by default it is
amortized to zero (it is independent of any specific layer), with a policy
knob to fold it back in as setup/iterations.
"""

from __future__ import annotations

import json
import platform
import time
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import GraphFeatures, extract_features
from .gat import GatComposition, GatLayerSpec, gat_layer
from .gcn import GcnComposition, GcnLayerSpec, NormalizedGraph, gcn_layer
from .sparse import CsrMatrix, add_self_loops
from .tiling import TiledSpmmRunner, TilingConfig, reorder_degree, permute_rows

MODEL_TAGS = ("gcn", "gat")


def default_hw_tag() -> str:
    import os

    return f"{platform.machine()}-{os.cpu_count()}cpu"


@dataclass
class ProfileRecord:
    """One timed (graph, sizes, composition, optimization) observation."""

    graph_id: str
    model: str
    k1: int
    k2: int
    composition: str
    features: GraphFeatures
    hw_tag: str
    median_time_s: float
    iterations: int
    setup_time_s: float = 0.0
    cv: float = 0.0
    unreliable: bool = False
    opt_config: TilingConfig | None = None
    hw_desc: tuple[float, ...] = ()

    def __post_init__(self):
        if self.median_time_s <= 0:
            raise ValueError("median_time_s must be positive")
        if self.iterations < 3:
            raise ValueError("iterations must be >= 3")

    def to_dict(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "model": self.model,
            "k1": self.k1,
            "k2": self.k2,
            "composition": self.composition,
            "features": self.features.to_dict(),
            "opt_config": (
                {
                    "col_segment_width": self.opt_config.col_segment_width,
                    "row_tile_height": self.opt_config.row_tile_height,
                    "reorder": self.opt_config.reorder,
                }
                if self.opt_config is not None
                else None
            ),
            "hw_tag": self.hw_tag,
            "hw_desc": list(self.hw_desc),
            "median_time_s": self.median_time_s,
            "setup_time_s": self.setup_time_s,
            "cv": self.cv,
            "iterations": self.iterations,
            "unreliable": self.unreliable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProfileRecord":
        opt = d.get("opt_config")
        return cls(
            graph_id=d["graph_id"],
            model=d["model"],
            k1=int(d["k1"]),
            k2=int(d["k2"]),
            composition=d["composition"],
            features=GraphFeatures(**d["features"]),
            hw_tag=d["hw_tag"],
            median_time_s=float(d["median_time_s"]),
            iterations=int(d["iterations"]),
            setup_time_s=float(d.get("setup_time_s", 0.0)),
            cv=float(d.get("cv", 0.0)),
            unreliable=bool(d.get("unreliable", False)),
            opt_config=TilingConfig(**opt) if opt else None,
            hw_desc=tuple(d.get("hw_desc", ())),
        )


def write_records(path, records: list[ProfileRecord]) -> None:
    with Path(path).open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def read_records(path) -> list[ProfileRecord]:
    records = []
    with Path(path).open("r") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ProfileRecord.from_dict(json.loads(line)))
    return records


def _config_rng(seed: int, graph_id: str, k1: int, k2: int) -> np.random.Generator:
    # Stable across processes (no salted hash); shared by both compositions
    # of a group so they see identical inputs.
    return np.random.default_rng([seed, zlib.crc32(graph_id.encode()), k1, k2])


def _time_iterations(run, warmup: int, reps: int) -> tuple[float, float]:
    for _ in range(warmup):
        run()
    times = np.empty(reps)
    for i in range(reps):
        t0 = time.perf_counter()
        run()
        times[i] = time.perf_counter() - t0
    med = float(np.median(times))
    mean = float(times.mean())
    cv = float(times.std() / mean) if mean > 0 else 0.0
    return med, cv


def profile(
    graphs: list[tuple[str, CsrMatrix]],
    sizes: list[tuple[int, int]],
    model: str,
    reps: int = 10,
    *,
    warmup: int = 3,
    seed: int = 0,
    amortize_precompute: bool = True,
    hw_tag: str | None = None,
    hw_desc: tuple[float, ...] = (),
    opt_config: TilingConfig | None = None,
    activation: str = "relu",
) -> list[ProfileRecord]:
    """Time every (graph, size, composition) combination.

    Emits one record per composition per configuration; configurations that
    run out of memory are skipped with a warning, mirroring how OOM failures
    are reported rather than fatal.
    """
    if model not in MODEL_TAGS:
        raise ValueError(f"unknown model {model!r}")
    if reps < 3:
        raise ValueError("reps must be >= 3")
    hw_tag = hw_tag if hw_tag is not None else default_hw_tag()

    records: list[ProfileRecord] = []
    for graph_id, a in graphs:
        feats = extract_features(a)
        try:
            prepared = _prepare_graph(a, model, opt_config)
        except MemoryError:
            warnings.warn(f"{graph_id}: skipped (out of memory during preparation)")
            continue
        for k1, k2 in sizes:
            rng = _config_rng(seed, graph_id, k1, k2)
            try:
                inputs = _draw_inputs(rng, prepared["n"], k1, k2, model, activation)
            except MemoryError:
                warnings.warn(f"{graph_id} {k1}x{k2}: skipped (out of memory)")
                continue
            for comp in _compositions(model):
                run, setup_s = _make_runner(prepared, inputs, model, comp)
                try:
                    med, cv = _time_iterations(run, warmup, reps)
                except MemoryError:
                    warnings.warn(
                        f"{graph_id} {k1}x{k2} {comp}: skipped (out of memory)"
                    )
                    continue
                if not amortize_precompute and setup_s:
                    med += setup_s / reps
                records.append(
                    ProfileRecord(
                        graph_id=graph_id,
                        model=model,
                        k1=k1,
                        k2=k2,
                        composition=comp,
                        features=feats,
                        hw_tag=hw_tag,
                        median_time_s=med,
                        iterations=reps,
                        setup_time_s=setup_s,
                        cv=cv,
                        unreliable=cv > 0.3,
                        opt_config=opt_config,
                        hw_desc=tuple(hw_desc),
                    )
                )
    return records


def _compositions(model: str) -> tuple[str, ...]:
    if model == "gcn":
        return (GcnComposition.PRECOMPUTE.value, GcnComposition.DYNAMIC.value)
    return (GatComposition.REUSE.value, GatComposition.RECOMPUTE.value)


def _prepare_graph(a: CsrMatrix, model: str, opt_config: TilingConfig | None) -> dict:
    prepared: dict = {"n": a.n_rows, "opt": opt_config}
    a_tilde = add_self_loops(a)
    if opt_config is not None and opt_config.reorder:
        a_tilde, perm = reorder_degree(a_tilde)
        prepared["perm"] = perm
    if model == "gcn":
        g = NormalizedGraph(a_tilde=a_tilde, d_inv_sqrt=_inv_sqrt(a_tilde))
        t0 = time.perf_counter()
        g.with_precomputed()
        prepared["setup_precompute_s"] = time.perf_counter() - t0
        prepared["graph"] = g
    else:
        prepared["graph"] = a_tilde
    if opt_config is not None:
        prepared["spmm_fn"] = TiledSpmmRunner(a_tilde, opt_config)
    return prepared


def _inv_sqrt(a_tilde: CsrMatrix) -> np.ndarray:
    from .sparse import inv_sqrt_degrees

    return inv_sqrt_degrees(a_tilde)


def _draw_inputs(rng, n: int, k1: int, k2: int, model: str, activation: str) -> dict:
    h = rng.uniform(-0.5, 0.5, size=(n, k1))
    w = rng.uniform(-0.5, 0.5, size=(k1, k2))
    inputs = {"h": h, "w": w, "k1": k1, "k2": k2}
    if model == "gat":
        inputs["attn_src"] = rng.uniform(-0.5, 0.5, size=k2)
        inputs["attn_dst"] = rng.uniform(-0.5, 0.5, size=k2)
        inputs["activation"] = activation
    return inputs


def _make_runner(prepared: dict, inputs: dict, model: str, comp: str):
    spmm_fn = prepared.get("spmm_fn")
    h = inputs["h"]
    if "perm" in prepared:
        h = permute_rows(h, prepared["perm"])
    if model == "gcn":
        spec = GcnLayerSpec(
            k1=inputs["k1"], k2=inputs["k2"], weights=inputs["w"], composition=comp
        )
        g = prepared["graph"]
        setup = (
            prepared.get("setup_precompute_s", 0.0)
            if comp == GcnComposition.PRECOMPUTE.value
            else 0.0
        )
        return (lambda: gcn_layer(g, h, spec, spmm_fn=spmm_fn)), setup
    spec = GatLayerSpec(
        k1=inputs["k1"],
        k2=inputs["k2"],
        weights=inputs["w"],
        attn_src=inputs["attn_src"],
        attn_dst=inputs["attn_dst"],
        composition=comp,
        activation=inputs["activation"],
    )
    a_tilde = prepared["graph"]
    return (lambda: gat_layer(a_tilde, h, spec, spmm_fn=spmm_fn)), 0.0
