"""Bagged regression trees (random forest) on top of the compiled tree kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import InsufficientDataError, InvalidInputError

N_TREES = 400
MIN_SPLIT = 4


@dataclass(frozen=True, eq=False)
class ForestParams:
    # every tree's nodes concatenated; child indices are global
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    y_range: tuple[float, float]
    seed: int = 0
    min_node: int = MIN_SPLIT
    node_rule: str = "split"

    @property
    def n_trees(self) -> int:
        return self.roots.size

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        out = kernels.forest_predict(X, self.feature, self.threshold, self.left, self.right, self.value, self.roots)
        return np.clip(np.asarray(out), *self.y_range)

    def trees(self):
        """Per-tree node arrays with tree-local child indices."""
        bounds = np.append(self.roots, self.feature.size)
        for a, b in zip(bounds[:-1], bounds[1:]):
            local = lambda c: np.where(c >= 0, c - a, -1)
            yield (self.feature[a:b], self.threshold[a:b], local(self.left[a:b]), local(self.right[a:b]),
                   self.value[a:b])

    def to_dict(self) -> dict:
        """Nested per-tree node arrays.

        Right children always follow their left sibling, so only ``left`` is
        stored; leaf thresholds and internal-node values are never read and
        are written as 0.
        """
        trees = []
        for f, t, le, _, v in self.trees():
            leaf = f < 0
            trees.append({"feature": f.tolist(), "threshold": np.where(leaf, 0.0, t).tolist(), "left": le.tolist(),
                          "value": np.where(leaf, v, 0.0).tolist()})
        return {"trees": trees, "y_range": list(self.y_range), "seed": self.seed,
                "min_node": self.min_node, "node_rule": self.node_rule}

    @classmethod
    def from_dict(cls, d) -> "ForestParams":
        trees = []
        for t in d["trees"]:
            f = np.asarray(t["feature"], dtype=np.int64)
            le = np.asarray(t["left"], dtype=np.int64)
            trees.append((f, np.asarray(t["threshold"], dtype=float), le, np.where(le >= 0, le + 1, -1),
                          np.asarray(t["value"], dtype=float)))
        return _assemble(trees, tuple(d["y_range"]), int(d["seed"]), int(d["min_node"]), d["node_rule"])


def _assemble(trees, y_range, seed, min_node, node_rule) -> ForestParams:
    roots, parts, offset = [], [[], [], [], [], []], 0
    for f, t, le, r, v in trees:
        roots.append(offset)
        parts[0].append(f)
        parts[1].append(t)
        parts[2].append(np.where(le >= 0, le + offset, -1))
        parts[3].append(np.where(r >= 0, r + offset, -1))
        parts[4].append(v)
        offset += f.size
    cat = [np.ascontiguousarray(np.concatenate(p)) for p in parts]
    return ForestParams(cat[0].astype(np.int64), cat[1], cat[2].astype(np.int64), cat[3].astype(np.int64), cat[4],
                        np.asarray(roots, dtype=np.int64), (float(y_range[0]), float(y_range[1])),
                        seed, min_node, node_rule)


def tree_streams(seed: int, tree: int, n: int) -> tuple[np.ndarray, int]:
    """Bootstrap rows and node-sampling RNG state for one tree, keyed by (seed, tree)."""
    ss = np.random.SeedSequence([int(seed), int(tree)])
    boot_seq, node_seq = ss.spawn(2)
    rows = np.random.Generator(np.random.Philox(boot_seq)).integers(0, n, size=n, dtype=np.int64)
    state = int(node_seq.generate_state(1, np.uint64)[0])
    return rows, state


def train_forest(X, y, n_trees: int = N_TREES, min_node: int = MIN_SPLIT, seed: int = 0, *,
                 mtry: int | None = None, node_rule: str = "split") -> ForestParams:
    """Random forest of variance-reduction trees on bootstrap resamples.

    ``node_rule="split"`` reads ``min_node`` as the smallest node that may be
    split; ``"leaf"`` reads it as the smallest allowed leaf. Rows are put in a
    canonical (lexicographic) order first, so the forest does not depend on
    the order the samples arrive in.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n, p = X.shape
    if node_rule not in ("split", "leaf"):
        raise InvalidInputError("node_rule must be 'split' or 'leaf'")
    if n_trees < 1 or min_node < 1:
        raise InvalidInputError("need n_trees >= 1 and min_node >= 1")
    if n < min_node:
        raise InsufficientDataError(f"forest needs >= {min_node} samples")
    order = np.lexsort(np.vstack([y, X.T[::-1]]))
    X, y = np.ascontiguousarray(X[order]), np.ascontiguousarray(y[order])
    mtry = max(1, math.ceil(p / 3)) if mtry is None else int(mtry)
    if not 1 <= mtry <= p:
        raise InvalidInputError("mtry must be in [1, n_features]")
    min_split, min_leaf = (min_node, 1) if node_rule == "split" else (2 * min_node, min_node)
    trees = []
    for t in range(n_trees):
        rows, state = tree_streams(seed, t, n)
        trees.append(kernels.build_tree(X, y, rows, min_split, min_leaf, mtry, np.uint64(state)))
    return _assemble(trees, (float(y.min()), float(y.max())), int(seed), int(min_node), node_rule)
