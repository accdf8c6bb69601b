"""Learned composition selector: gradient-boosted trees with a pairwise
ranking objective.

Training data comes from profiler records. Records are grouped by
(graph, k1, k2, optimization config, hardware tag); within each group the
faster composition must rank higher, which is exactly a pairwise logistic
rank loss. Each boosting round fits a regression tree to the Newton
gradients of that loss, XGBoost style: split gain
G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda) and leaf value
-G/(H+lambda).

Only within-group time ordering matters, so selection is invariant to any
group-wise monotone rescaling of the measured times.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .features import FEATURE_NAMES, GraphFeatures

if TYPE_CHECKING:
    from .profiling import ProfileRecord
    from .tiling import TilingConfig

MODEL_FORMAT_VERSION = 1
MIN_GROUPS = 20

COMPOSITIONS = {
    "gcn": ("precompute", "dynamic"),
    "gat": ("reuse", "recompute"),
}
# A no-signal model must reproduce framework-default behavior.
DEFAULT_COMPOSITION = {"gcn": "dynamic", "gat": "reuse"}


class InsufficientDataError(ValueError):
    """Too few complete profiling groups to train on."""


class SchemaError(ValueError):
    """Feature layout does not match the trained model."""


@dataclass
class SelectorInput:
    features: GraphFeatures
    k1: int
    k2: int
    opt_config: "TilingConfig | None" = None
    hw_descriptor: tuple[float, ...] = ()


@dataclass
class SelectorHyperparams:
    n_estimators: int = 300
    learning_rate: float = 0.001
    max_depth: int = 6
    reg_lambda: float = 1.0

    @classmethod
    def for_system(cls, system: str) -> "SelectorHyperparams":
        """Defaults: 300 trees / lr 0.001 for the plain execution system,
        410 / 0.05 for the optimized (tiled) one."""
        if system == "opt":
            return cls(n_estimators=410, learning_rate=0.05)
        return cls()


def feature_layout(n_hw: int) -> list[str]:
    names = list(FEATURE_NAMES)
    names += ["k1", "k2", "composition"]
    names += ["opt_col_segment_width", "opt_row_tile_height", "opt_reorder"]
    names += [f"hw_{i}" for i in range(n_hw)]
    return names


def encode_input(inp: SelectorInput, composition_flag: int) -> np.ndarray:
    opt = inp.opt_config.encode() if inp.opt_config is not None else (0.0, 0.0, 0.0)
    vec = np.concatenate(
        (
            inp.features.vector(),
            [float(inp.k1), float(inp.k2), float(composition_flag)],
            opt,
            np.asarray(inp.hw_descriptor, dtype=np.float64),
        )
    )
    if not np.isfinite(vec).all():
        raise SchemaError("selector input contains non-finite values")
    return vec


# ----------------------------------------------------------------------
# regression trees
# ----------------------------------------------------------------------


@dataclass
class _Tree:
    feature: np.ndarray  # int64, -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "_Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
        )


def _fit_tree(X, g, h, max_depth, reg_lambda, gain_acc):
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def build(idx: np.ndarray, depth: int) -> int:
        G = float(g[idx].sum())
        H = float(h[idx].sum())
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-G / (H + reg_lambda))
        if depth >= max_depth or idx.size < 2:
            return node

        parent_score = G * G / (H + reg_lambda)
        best_gain = 1e-12
        best_feat = -1
        best_thr = 0.0
        for f in range(X.shape[1]):
            xs = X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs_sorted = xs[order]
            splittable = xs_sorted[:-1] < xs_sorted[1:]
            if not splittable.any():
                continue
            GL = np.cumsum(g[idx][order])[:-1][splittable]
            HL = np.cumsum(h[idx][order])[:-1][splittable]
            GR, HR = G - GL, H - HL
            gains = GL**2 / (HL + reg_lambda) + GR**2 / (HR + reg_lambda) - parent_score
            p = int(np.argmax(gains))
            if gains[p] > best_gain:
                pos = np.flatnonzero(splittable)[p]
                best_gain = float(gains[p])
                best_feat = f
                best_thr = 0.5 * (xs_sorted[pos] + xs_sorted[pos + 1])
        if best_feat < 0:
            return node

        feature[node] = best_feat
        threshold[node] = best_thr
        gain_acc[best_feat] += best_gain
        go_left = X[idx, best_feat] < best_thr
        left[node] = build(idx[go_left], depth + 1)
        right[node] = build(idx[~go_left], depth + 1)
        return node

    build(np.arange(X.shape[0]), 0)
    return _Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
    )


def _tree_predict_batch(tree: _Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        f = tree.feature[node]
        split = f >= 0
        if not split.any():
            break
        rows = np.flatnonzero(split)
        go_left = X[rows, f[rows]] < tree.threshold[node[rows]]
        node[rows] = np.where(go_left, tree.left[node[rows]], tree.right[node[rows]])
    return tree.value[node]


# ----------------------------------------------------------------------
# model
# ----------------------------------------------------------------------


@dataclass
class SelectorModel:
    model_tag: str
    feature_names: list[str]
    trees: list[_Tree] = field(default_factory=list)
    learning_rate: float = 0.001
    base_score: float = 0.0
    objective: str = "pairwise-rank"
    feature_gain: np.ndarray | None = None
    _stacked: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def expects_hw(self) -> bool:
        return any(name.startswith("hw_") for name in self.feature_names)

    # -- scoring -------------------------------------------------------

    def _stack(self):
        # Pad per-tree node arrays to a rectangle for vectorized inference.
        if self._stacked is None:
            n_nodes = max((t.feature.size for t in self.trees), default=1)
            n_trees = max(len(self.trees), 1)
            feat = np.full((n_trees, n_nodes), -1, dtype=np.int64)
            thr = np.zeros((n_trees, n_nodes))
            lc = np.zeros((n_trees, n_nodes), dtype=np.int64)
            rc = np.zeros((n_trees, n_nodes), dtype=np.int64)
            val = np.zeros((n_trees, n_nodes))
            for i, t in enumerate(self.trees):
                m = t.feature.size
                feat[i, :m] = t.feature
                thr[i, :m] = t.threshold
                lc[i, :m] = t.left
                rc[i, :m] = t.right
                val[i, :m] = t.value
            self._stacked = (feat, thr, lc, rc, val)
        return self._stacked

    def score(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise SchemaError(
                f"expected {self.n_features} features, got {x.shape}"
            )
        if not self.trees:
            return self.base_score
        feat, thr, lc, rc, val = self._stack()
        t_idx = np.arange(len(self.trees))
        node = np.zeros(len(self.trees), dtype=np.int64)
        while True:
            f = feat[t_idx, node]
            split = f >= 0
            if not split.any():
                break
            rows = t_idx[split]
            go_left = x[f[split]] < thr[rows, node[split]]
            node[split] = np.where(go_left, lc[rows, node[split]], rc[rows, node[split]])
        return float(self.base_score + self.learning_rate * val[t_idx, node].sum())

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "model_tag": self.model_tag,
            "objective": self.objective,
            "feature_names": self.feature_names,
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "n_estimators": self.n_estimators,
            "feature_gain": (
                self.feature_gain.tolist()
                if self.feature_gain is not None
                else [0.0] * self.n_features
            ),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectorModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise SchemaError(f"unsupported model format {d.get('format_version')}")
        return cls(
            model_tag=d["model_tag"],
            feature_names=list(d["feature_names"]),
            trees=[_Tree.from_dict(t) for t in d["trees"]],
            learning_rate=float(d["learning_rate"]),
            base_score=float(d["base_score"]),
            objective=d.get("objective", "pairwise-rank"),
            feature_gain=np.asarray(d["feature_gain"], dtype=np.float64),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "SelectorModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ----------------------------------------------------------------------
# training
# ----------------------------------------------------------------------


def _record_key(rec) -> tuple:
    opt = rec.opt_config.encode() if rec.opt_config is not None else None
    return (rec.graph_id, rec.k1, rec.k2, opt, rec.hw_tag)


def _record_vector(rec, model_tag: str) -> np.ndarray:
    flag = COMPOSITIONS[model_tag].index(rec.composition)
    inp = SelectorInput(
        features=rec.features,
        k1=rec.k1,
        k2=rec.k2,
        opt_config=rec.opt_config,
        hw_descriptor=tuple(rec.hw_desc),
    )
    return encode_input(inp, flag)


def train(
    records: Iterable["ProfileRecord"],
    model_tag: str,
    hyper: SelectorHyperparams | None = None,
) -> SelectorModel:
    """Fit the ranking model on profiler records for one GNN type.

    Groups missing one of the two compositions are dropped with a warning;
    fewer than 20 usable groups raises InsufficientDataError.
    """
    if model_tag not in COMPOSITIONS:
        raise ValueError(f"unknown model tag {model_tag!r}")
    hyper = hyper or SelectorHyperparams()

    records = [r for r in records if r.model == model_tag]
    groups: dict[tuple, list[int]] = {}
    for i, rec in enumerate(records):
        groups.setdefault(_record_key(rec), []).append(i)

    usable: list[list[int]] = []
    for key, idxs in groups.items():
        comps = {records[i].composition for i in idxs}
        if len(comps) < 2:
            warnings.warn(f"group {key} has a single composition; excluded")
            continue
        usable.append(idxs)
    if len(usable) < MIN_GROUPS:
        raise InsufficientDataError(
            f"need >= {MIN_GROUPS} complete groups, got {len(usable)}"
        )

    hw_lens = {len(records[i].hw_desc) for idxs in usable for i in idxs}
    if len(hw_lens) > 1:
        raise SchemaError("records mix hardware descriptors of different lengths")
    n_hw = hw_lens.pop()

    keep = [i for idxs in usable for i in idxs]
    remap = {old: new for new, old in enumerate(keep)}
    X = np.stack([_record_vector(records[i], model_tag) for i in keep])
    times = np.array([records[i].median_time_s for i in keep])
    group_idx = [np.array([remap[i] for i in idxs]) for idxs in usable]

    names = feature_layout(n_hw)
    model = SelectorModel(
        model_tag=model_tag,
        feature_names=names,
        learning_rate=hyper.learning_rate,
        feature_gain=np.zeros(len(names)),
    )

    scores = np.zeros(X.shape[0])
    for _ in range(hyper.n_estimators):
        g = np.zeros_like(scores)
        h = np.zeros_like(scores)
        for idxs in group_idx:
            for a in range(idxs.size):
                for b in range(idxs.size):
                    if times[idxs[a]] >= times[idxs[b]]:
                        continue
                    win, lose = idxs[a], idxs[b]
                    rho = 1.0 / (1.0 + np.exp(scores[win] - scores[lose]))
                    g[win] -= rho
                    g[lose] += rho
                    hv = max(rho * (1.0 - rho), 1e-16)
                    h[win] += hv
                    h[lose] += hv
        tree = _fit_tree(X, g, h, hyper.max_depth, hyper.reg_lambda, model.feature_gain)
        model.trees.append(tree)
        scores += hyper.learning_rate * _tree_predict_batch(tree, X)

    return model


# ----------------------------------------------------------------------
# inference
# ----------------------------------------------------------------------


def score_input(model: SelectorModel, inp: SelectorInput, composition_flag: int) -> float:
    return model.score(encode_input(inp, composition_flag))


def select(model: SelectorModel, inp: SelectorInput) -> str:
    """Score both candidate compositions and return the better one.

    Ties fall back to the framework default so a constant model reproduces
    baseline behavior.
    """
    comp, _ = select_with_scores(model, inp)
    return comp


def select_with_scores(model: SelectorModel, inp: SelectorInput) -> tuple[str, dict]:
    comps = COMPOSITIONS[model.model_tag]
    scores = {c: score_input(model, inp, flag) for flag, c in enumerate(comps)}
    if scores[comps[0]] == scores[comps[1]]:
        return DEFAULT_COMPOSITION[model.model_tag], scores
    best = max(comps, key=lambda c: scores[c])
    return best, scores


def feature_importance(model: SelectorModel) -> list[tuple[str, float]]:
    """Per-feature total split gain, normalized to sum to 1, descending."""
    gains = (
        model.feature_gain
        if model.feature_gain is not None
        else np.zeros(model.n_features)
    )
    total = gains.sum()
    norm = gains / total if total > 0 else gains
    order = np.argsort(-norm, kind="stable")
    return [(model.feature_names[i], float(norm[i])) for i in order]
