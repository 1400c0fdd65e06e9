"""Regression trees, random forests, and gradient-boosted trees.

One histogram-based splitter backs all three model families. Feature values
are bucketed once per training matrix (exact midpoint thresholds when a
feature has few distinct values, quantile cuts otherwise), which makes split
search a prefix scan over bin statistics. Trained trees store thresholds in
raw value space, so prediction never touches the binning.

Determinism: split ties break on the lowest feature index, then the lowest
threshold; all randomness (bootstrap rows, per-split feature subsets) comes
from one seeded generator drawn in node-processing order.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .base import Regressor, TrainingError, register_model, validate_training_data

DEFAULT_MAX_BINS = 128
_LEAF = -1


@dataclass
class _Binned:
    codes: np.ndarray        # (n, p) uint8 bin codes
    thresholds: list         # per feature: value-space cut at each bin edge
    n_bins: np.ndarray       # (p,) number of occupied bins
    pitch: int = 0           # max bins across features
    flat: np.ndarray = None  # (n, p) int32 codes with feature offsets baked in

    def __post_init__(self):
        if self.pitch == 0:
            self.pitch = int(self.n_bins.max())
        if self.flat is None:
            offsets = (np.arange(self.codes.shape[1], dtype=np.int32)
                       * self.pitch)
            self.flat = self.codes.astype(np.int32) + offsets[None, :]


def bin_matrix(X: np.ndarray, max_bins: int = DEFAULT_MAX_BINS) -> _Binned:
    """Bucket each column; code <= b exactly means value < thresholds[b]."""
    if not 2 <= max_bins <= 256:
        raise ValueError("max_bins must be in [2, 256]")
    n, p = X.shape
    codes = np.empty((n, p), dtype=np.uint8)
    thresholds = []
    n_bins = np.empty(p, dtype=np.int64)
    for j in range(p):
        col = X[:, j]
        distinct = np.unique(col)
        if len(distinct) <= max_bins:
            edges = (distinct[1:] + distinct[:-1]) / 2.0
        else:
            qs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
            edges = np.unique(np.quantile(col, qs))
        codes[:, j] = np.searchsorted(edges, col, side="right")
        thresholds.append(edges)
        n_bins[j] = len(edges) + 1
    return _Binned(codes=codes, thresholds=thresholds, n_bins=n_bins)


@dataclass
class FlatTree:
    """Array-of-nodes tree; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            live = feat >= 0
            if not live.any():
                return self.value[node]
            rows = np.nonzero(live)[0]
            cur = node[rows]
            go_left = X[rows, feat[rows]] < self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == _LEAF))

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist(),
                "n_samples": self.n_samples.tolist()}

    @staticmethod
    def from_dict(payload: dict) -> "FlatTree":
        return FlatTree(
            feature=np.array(payload["feature"], dtype=np.int64),
            threshold=np.array(payload["threshold"], dtype=np.float64),
            left=np.array(payload["left"], dtype=np.int64),
            right=np.array(payload["right"], dtype=np.int64),
            value=np.array(payload["value"], dtype=np.float64),
            n_samples=np.array(payload["n_samples"], dtype=np.int64))


def _leaf_stat(total: float, count: int, lambda_l1: float) -> float:
    if lambda_l1 > 0.0:
        total = math.copysign(max(abs(total) - lambda_l1, 0.0), total)
    return total / count


class _Grower:
    """Grows one tree over pre-binned data.

    Split gain is the reduction in sum of squared errors, computed from
    per-bin counts and target sums; with lambda_l1 > 0 the sums are
    soft-thresholded the way leafwise boosters regularize leaf outputs.

    Two split-search paths share the same result contract: a histogram scan
    for large nodes (with sibling subtraction when all features are in play)
    and a sorted-code scan for small ones, where dense histograms would cost
    more than the node holds.
    """

    SMALL_NODE = 512

    def __init__(self, binned: _Binned, y: np.ndarray, max_depth: int,
                 min_samples_split: int, min_samples_leaf: int,
                 lambda_l1: float = 0.0, max_features: int | None = None,
                 rng: np.random.Generator | None = None):
        self.binned = binned
        self.y = y
        self.max_depth = max_depth
        self.min_split = max(min_samples_split, 2)
        self.min_leaf = max(min_samples_leaf, 1)
        self.lambda_l1 = lambda_l1
        self.max_features = max_features
        self.rng = rng
        self.pitch = binned.pitch
        self.n_features = binned.codes.shape[1]
        self.subsampling = (max_features is not None
                            and max_features < self.n_features)
        # per-feature validity of each cut position (bins beyond a feature's
        # edge count never split)
        self.cut_ok = (np.arange(self.pitch - 1)[None, :]
                       < (binned.n_bins[:, None] - 1))
        # parallel node arrays, appended during growth
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.count = []

    def _shrunk(self, sums: np.ndarray) -> np.ndarray:
        if self.lambda_l1 > 0.0:
            return np.sign(sums) * np.maximum(np.abs(sums) - self.lambda_l1, 0.0)
        return sums

    def _gain_scan(self, nl, sl, n, total, valid, parent_score):
        """Masked gain matrix for left (count, sum) prefixes."""
        sl2 = self._shrunk(sl)
        sr2 = self._shrunk(total - sl)
        # empty-side prefixes are masked below; clamped denominators just
        # keep the division defined there
        gains = (sl2 * sl2 / np.maximum(nl, 1.0)
                 + sr2 * sr2 / np.maximum(n - nl, 1.0) - parent_score)
        return np.where(valid, gains, -np.inf)

    def _parent_score(self, total: float, n: int) -> float:
        shrunk = total
        if self.lambda_l1 > 0.0:
            shrunk = math.copysign(max(abs(total) - self.lambda_l1, 0.0), total)
        return shrunk * shrunk / n

    def _node_hist(self, idx: np.ndarray) -> tuple:
        """(counts, sums) over (p, pitch) bins for an all-features node."""
        flat = self.binned.flat[idx].ravel()
        size = self.n_features * self.pitch
        counts = np.bincount(flat, minlength=size)
        y_node = np.broadcast_to(self.y[idx][:, None],
                                 (len(idx), self.n_features)).ravel()
        sums = np.bincount(flat, weights=y_node, minlength=size)
        return (counts.reshape(self.n_features, self.pitch).astype(np.float64),
                sums.reshape(self.n_features, self.pitch))

    def _split_from_hist(self, hist: tuple, n: int):
        counts, sums = hist
        total = float(sums[0].sum())  # every feature row sums to the same
        nl = np.cumsum(counts, axis=1)[:, :-1]
        sl = np.cumsum(sums, axis=1)[:, :-1]
        valid = (nl >= self.min_leaf) & ((n - nl) >= self.min_leaf) & self.cut_ok
        gains = self._gain_scan(nl, sl, n, total, valid,
                                self._parent_score(total, n))
        best = int(np.argmax(gains))  # first max: lowest feature, lowest bin
        f, b = divmod(best, self.pitch - 1)
        if not np.isfinite(gains[f, b]) or gains[f, b] <= 0.0:
            return None
        return (float(gains[f, b]), int(f),
                float(self.binned.thresholds[f][b]), b)

    def _split_subset(self, idx: np.ndarray, feats: np.ndarray):
        """Histogram scan restricted to a feature subset (forest splits)."""
        n = len(idx)
        y_node = self.y[idx]
        nf = len(feats)
        codes = self.binned.codes[np.ix_(idx, feats)].astype(np.int32)
        codes += (np.arange(nf, dtype=np.int32) * self.pitch)[None, :]
        flat = codes.ravel()
        size = nf * self.pitch
        counts = np.bincount(flat, minlength=size).astype(np.float64)
        sums = np.bincount(flat, weights=np.broadcast_to(
            y_node[:, None], (n, nf)).ravel(), minlength=size)
        counts = counts.reshape(nf, self.pitch)
        sums = sums.reshape(nf, self.pitch)
        total = float(y_node.sum())
        nl = np.cumsum(counts, axis=1)[:, :-1]
        sl = np.cumsum(sums, axis=1)[:, :-1]
        valid = ((nl >= self.min_leaf) & ((n - nl) >= self.min_leaf)
                 & self.cut_ok[feats])
        gains = self._gain_scan(nl, sl, n, total, valid,
                                self._parent_score(total, n))
        best = int(np.argmax(gains))
        f_local, b = divmod(best, self.pitch - 1)
        if not np.isfinite(gains[f_local, b]) or gains[f_local, b] <= 0.0:
            return None
        feat = int(feats[f_local])
        return (float(gains[f_local, b]), feat,
                float(self.binned.thresholds[feat][b]), b)

    def _split_sorted(self, idx: np.ndarray, feats: np.ndarray):
        """Sorted-code scan; cheaper than dense histograms on small nodes."""
        n = len(idx)
        y_node = self.y[idx]
        codes = (self.binned.codes[idx][:, feats] if len(feats) < self.n_features
                 else self.binned.codes[idx])
        order = np.argsort(codes, axis=0, kind="stable")
        sc = np.take_along_axis(codes, order, axis=0)
        sy = y_node[order]
        cum = np.cumsum(sy, axis=0)[:-1]        # (n-1, nf) left sums
        total = float(y_node.sum())
        nl = np.arange(1, n, dtype=np.float64)[:, None]
        valid = (sc[:-1] < sc[1:]) & (nl >= self.min_leaf) \
            & ((n - nl) >= self.min_leaf)
        gains = self._gain_scan(nl, cum, n, total, valid,
                                self._parent_score(total, n))
        # feature-major order to match the histogram path's tie rule
        flat = gains.T.ravel()
        best = int(np.argmax(flat))
        f_local, pos = divmod(best, n - 1)
        if not np.isfinite(flat[best]) or flat[best] <= 0.0:
            return None
        feat = int(feats[f_local])
        b = int(sc[pos, f_local])
        return (float(gains[pos, f_local]), feat,
                float(self.binned.thresholds[feat][b]), b)

    def _best_split(self, idx: np.ndarray, depth: int, hist: tuple = None):
        """(gain, feature, threshold, bin) or None if no valid split."""
        n = len(idx)
        if (self.pitch < 2 or n < self.min_split or n < 2 * self.min_leaf
                or depth >= self.max_depth):
            return None
        y_node = self.y[idx]
        if y_node.max() == y_node.min():
            return None
        if self.subsampling:
            feats = np.sort(self.rng.choice(
                self.n_features, size=self.max_features, replace=False))
            if n < self.SMALL_NODE:
                return self._split_sorted(idx, feats)
            return self._split_subset(idx, feats)
        if hist is not None:
            return self._split_from_hist(hist, n)
        if n < self.SMALL_NODE:
            return self._split_sorted(idx, np.arange(self.n_features))
        return self._split_from_hist(self._node_hist(idx), n)

    def _children(self, idx: np.ndarray, feat: int, b: int,
                  hist: tuple = None) -> tuple:
        """((left_idx, left_hist), (right_idx, right_hist)).

        When the parent histogram is available, only the smaller child is
        recounted; the sibling comes by subtraction. Children small enough
        for the sorted path get no histogram at all.
        """
        left_mask = self.binned.codes[idx, feat] <= b
        left_idx = idx[left_mask]
        right_idx = idx[~left_mask]
        left_hist = right_hist = None
        if (hist is not None and not self.subsampling
                and max(len(left_idx), len(right_idx)) >= self.SMALL_NODE):
            small_idx, small_is_left = ((left_idx, True)
                                        if len(left_idx) <= len(right_idx)
                                        else (right_idx, False))
            small_hist = self._node_hist(small_idx)
            other_hist = (hist[0] - small_hist[0], hist[1] - small_hist[1])
            left_hist, right_hist = ((small_hist, other_hist) if small_is_left
                                     else (other_hist, small_hist))
            if len(left_idx) < self.SMALL_NODE:
                left_hist = None
            if len(right_idx) < self.SMALL_NODE:
                right_hist = None
        return (left_idx, left_hist), (right_idx, right_hist)

    def _new_node(self) -> int:
        for arr in (self.feature, self.threshold, self.left, self.right,
                    self.value, self.count):
            arr.append(0)
        return len(self.feature) - 1

    def _finalize_leaf(self, node: int, idx: np.ndarray,
                       train_pred: np.ndarray) -> None:
        value = _leaf_stat(float(self.y[idx].sum()), len(idx), self.lambda_l1)
        self.feature[node] = _LEAF
        self.threshold[node] = 0.0
        self.left[node] = self.right[node] = _LEAF
        self.value[node] = value
        self.count[node] = len(idx)
        train_pred[idx] = value

    def _set_split(self, node: int, feat: int, thr: float, n: int) -> None:
        self.feature[node] = feat
        self.threshold[node] = thr
        self.value[node] = 0.0
        self.count[node] = n

    def _use_hists(self, n: int) -> bool:
        return (not self.subsampling) and n >= self.SMALL_NODE

    def grow_depthwise(self, idx: np.ndarray) -> tuple:
        train_pred = np.empty(len(self.y))
        root = self._new_node()
        root_hist = self._node_hist(idx) if self._use_hists(len(idx)) else None
        stack = [(root, idx, 0, root_hist)]
        while stack:
            node, node_idx, depth, hist = stack.pop()
            split = self._best_split(node_idx, depth, hist)
            if split is None:
                self._finalize_leaf(node, node_idx, train_pred)
                continue
            _, feat, thr, b = split
            self._set_split(node, feat, thr, len(node_idx))
            (l_idx, l_hist), (r_idx, r_hist) = self._children(
                node_idx, feat, b, hist)
            left_id = self._new_node()
            right_id = self._new_node()
            self.left[node] = left_id
            self.right[node] = right_id
            # LIFO: push right first so the left subtree is grown first
            stack.append((right_id, r_idx, depth + 1, r_hist))
            stack.append((left_id, l_idx, depth + 1, l_hist))
        return self._build(), train_pred

    def grow_leafwise(self, idx: np.ndarray, num_leaves: int) -> tuple:
        train_pred = np.empty(len(self.y))
        root = self._new_node()
        heap = []
        seq = 0

        def push(node, node_idx, depth, hist):
            nonlocal seq
            split = self._best_split(node_idx, depth, hist)
            if split is None:
                self._finalize_leaf(node, node_idx, train_pred)
                return
            heapq.heappush(heap, (-split[0], seq, node, node_idx, depth,
                                  split, hist))
            seq += 1

        n_leaves = 1
        root_hist = self._node_hist(idx) if self._use_hists(len(idx)) else None
        push(root, idx, 0, root_hist)
        while heap and n_leaves < num_leaves:
            _, _, node, node_idx, depth, split, hist = heapq.heappop(heap)
            _, feat, thr, b = split
            self._set_split(node, feat, thr, len(node_idx))
            (l_idx, l_hist), (r_idx, r_hist) = self._children(
                node_idx, feat, b, hist)
            left_id = self._new_node()
            right_id = self._new_node()
            self.left[node] = left_id
            self.right[node] = right_id
            n_leaves += 1
            push(left_id, l_idx, depth + 1, l_hist)
            push(right_id, r_idx, depth + 1, r_hist)
        # whatever is still queued stays a leaf
        for _, _, node, node_idx, _, _, _ in heap:
            self._finalize_leaf(node, node_idx, train_pred)
        return self._build(), train_pred

    def _build(self) -> FlatTree:
        return FlatTree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.array(self.value, dtype=np.float64),
            n_samples=np.array(self.count, dtype=np.int64))


def _check_tree_params(max_depth: int, min_samples_split: int,
                       min_samples_leaf: int) -> None:
    if max_depth < 1:
        raise TrainingError(f"max_depth must be >= 1, got {max_depth}")
    if min_samples_split < 2:
        raise TrainingError(
            f"min_samples_split must be >= 2, got {min_samples_split}")
    if min_samples_leaf < 1:
        raise TrainingError(
            f"min_samples_leaf must be >= 1, got {min_samples_leaf}")


@register_model("decision_tree")
class DecisionTreeModel(Regressor):
    family = "decision_tree"

    def __init__(self, max_depth: int, min_samples_split: int = 2,
                 min_samples_leaf: int = 1, max_bins: int = DEFAULT_MAX_BINS):
        _check_tree_params(max_depth, min_samples_split, min_samples_leaf)
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_bins = max_bins
        self.tree: FlatTree | None = None

    def fit(self, X, y, binned: _Binned | None = None) -> "DecisionTreeModel":
        X, y = validate_training_data(X, y)
        self.n_features = X.shape[1]
        if binned is None:
            binned = bin_matrix(X, self.max_bins)
        grower = _Grower(binned, y, self.max_depth, self.min_samples_split,
                         self.min_samples_leaf)
        self.tree, _ = grower.grow_depthwise(np.arange(len(y)))
        return self

    def predict(self, X):
        return self.tree.predict(self._check(X))

    def to_dict(self) -> dict:
        return {"kind": "decision_tree", "max_depth": self.max_depth,
                "min_samples_split": self.min_samples_split,
                "min_samples_leaf": self.min_samples_leaf,
                "n_features": self.n_features, "tree": self.tree.to_dict()}

    @classmethod
    def from_dict(cls, payload: dict) -> "DecisionTreeModel":
        model = cls(max_depth=payload["max_depth"],
                    min_samples_split=payload["min_samples_split"],
                    min_samples_leaf=payload["min_samples_leaf"])
        model.n_features = int(payload["n_features"])
        model.tree = FlatTree.from_dict(payload["tree"])
        return model


@register_model("random_forest")
class RandomForestModel(Regressor):
    """Bagged trees with ceil(sqrt(p)) random features per split."""

    family = "random_forest"

    def __init__(self, n_estimators: int, max_depth: int,
                 min_samples_split: int = 2, min_samples_leaf: int = 1,
                 bootstrap: bool = True, seed: int = 0,
                 max_features: int | None = None,
                 max_bins: int = DEFAULT_MAX_BINS):
        _check_tree_params(max_depth, min_samples_split, min_samples_leaf)
        if n_estimators < 1:
            raise TrainingError(f"n_estimators must be >= 1, got {n_estimators}")
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.bootstrap = bootstrap
        self.seed = seed
        self.max_features = max_features  # None -> ceil(sqrt(p)) per split
        self.max_bins = max_bins
        self.trees: list = []

    def fit(self, X, y, binned: _Binned | None = None) -> "RandomForestModel":
        X, y = validate_training_data(X, y)
        self.n_features = X.shape[1]
        if binned is None:
            binned = bin_matrix(X, self.max_bins)
        m = (self.max_features if self.max_features is not None
             else math.ceil(math.sqrt(self.n_features)))
        rng = np.random.default_rng(self.seed)
        n = len(y)
        self.trees = []
        for _ in range(self.n_estimators):
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            grower = _Grower(binned, y, self.max_depth, self.min_samples_split,
                             self.min_samples_leaf, max_features=m, rng=rng)
            tree, _ = grower.grow_depthwise(np.sort(idx))
            self.trees.append(tree)
        return self

    def predict(self, X):
        X = self._check(X)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)

    def to_dict(self) -> dict:
        return {"kind": "random_forest", "n_estimators": self.n_estimators,
                "max_depth": self.max_depth,
                "min_samples_split": self.min_samples_split,
                "min_samples_leaf": self.min_samples_leaf,
                "bootstrap": self.bootstrap, "seed": self.seed,
                "max_features": self.max_features,
                "n_features": self.n_features,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, payload: dict) -> "RandomForestModel":
        model = cls(n_estimators=payload["n_estimators"],
                    max_depth=payload["max_depth"],
                    min_samples_split=payload["min_samples_split"],
                    min_samples_leaf=payload["min_samples_leaf"],
                    bootstrap=payload["bootstrap"], seed=payload["seed"],
                    max_features=payload.get("max_features"))
        model.n_features = int(payload["n_features"])
        model.trees = [FlatTree.from_dict(t) for t in payload["trees"]]
        return model


@register_model("gbt")
class GradientBoostedModel(Regressor):
    """Stagewise least-squares boosting with depthwise or leafwise trees.

    Depthwise grows every level to max_depth (XGBoost-style); leafwise grows
    best-gain-first up to num_leaves with optional L1 shrink on leaf outputs
    (LightGBM-style). Both are the same engine behind a policy flag.
    """

    def __init__(self, n_estimators: int, max_depth: int, learning_rate: float,
                 policy: str = "depthwise", num_leaves: int | None = None,
                 lambda_l1: float = 0.0, min_samples_split: int = 2,
                 min_samples_leaf: int = 20, seed: int = 0,
                 max_bins: int = DEFAULT_MAX_BINS):
        _check_tree_params(max_depth, min_samples_split, min_samples_leaf)
        if n_estimators < 1:
            raise TrainingError(f"n_estimators must be >= 1, got {n_estimators}")
        if learning_rate < 0.0:
            raise TrainingError(
                f"learning_rate must be >= 0, got {learning_rate}")
        if policy not in ("depthwise", "leafwise"):
            raise TrainingError(f"unknown growth policy {policy!r}")
        if policy == "leafwise" and (num_leaves is None or num_leaves < 2):
            raise TrainingError("leafwise growth needs num_leaves >= 2")
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.policy = policy
        self.num_leaves = num_leaves
        self.lambda_l1 = lambda_l1
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.max_bins = max_bins
        self.family = f"gbt_{policy}"
        self.init_ = 0.0
        self.trees: list = []
        self.train_mse_path_: list = []

    def fit(self, X, y, binned: _Binned | None = None) -> "GradientBoostedModel":
        X, y = validate_training_data(X, y)
        self.n_features = X.shape[1]
        if binned is None:
            binned = bin_matrix(X, self.max_bins)
        self.init_ = float(y.mean())
        pred = np.full(len(y), self.init_)
        self.trees = []
        self.train_mse_path_ = [float(np.mean((y - pred) ** 2))]
        idx = np.arange(len(y))
        for _ in range(self.n_estimators):
            residual = y - pred
            grower = _Grower(binned, residual, self.max_depth,
                             self.min_samples_split, self.min_samples_leaf,
                             lambda_l1=self.lambda_l1)
            if self.policy == "leafwise":
                tree, fit_vals = grower.grow_leafwise(idx, self.num_leaves)
            else:
                tree, fit_vals = grower.grow_depthwise(idx)
            self.trees.append(tree)
            pred = pred + self.learning_rate * fit_vals
            self.train_mse_path_.append(float(np.mean((y - pred) ** 2)))
        return self

    def predict(self, X):
        X = self._check(X)
        out = np.full(X.shape[0], self.init_)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def to_dict(self) -> dict:
        return {"kind": "gbt", "n_estimators": self.n_estimators,
                "max_depth": self.max_depth,
                "learning_rate": self.learning_rate, "policy": self.policy,
                "num_leaves": self.num_leaves, "lambda_l1": self.lambda_l1,
                "min_samples_split": self.min_samples_split,
                "min_samples_leaf": self.min_samples_leaf,
                "seed": self.seed, "init": self.init_,
                "n_features": self.n_features,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, payload: dict) -> "GradientBoostedModel":
        model = cls(n_estimators=payload["n_estimators"],
                    max_depth=payload["max_depth"],
                    learning_rate=payload["learning_rate"],
                    policy=payload["policy"], num_leaves=payload["num_leaves"],
                    lambda_l1=payload["lambda_l1"],
                    min_samples_split=payload["min_samples_split"],
                    min_samples_leaf=payload["min_samples_leaf"],
                    seed=payload["seed"])
        model.init_ = float(payload["init"])
        model.n_features = int(payload["n_features"])
        model.trees = [FlatTree.from_dict(t) for t in payload["trees"]]
        return model


def train_cart(X, y, max_depth, min_samples_split=2, min_samples_leaf=1,
               **kwargs) -> DecisionTreeModel:
    return DecisionTreeModel(max_depth=max_depth,
                             min_samples_split=min_samples_split,
                             min_samples_leaf=min_samples_leaf).fit(X, y, **kwargs)


def train_forest(X, y, n_estimators, max_depth, min_samples_split=2,
                 bootstrap=True, min_samples_leaf=1, seed=0, max_features=None,
                 **kwargs) -> RandomForestModel:
    return RandomForestModel(n_estimators=n_estimators, max_depth=max_depth,
                             min_samples_split=min_samples_split,
                             min_samples_leaf=min_samples_leaf,
                             bootstrap=bootstrap, seed=seed,
                             max_features=max_features).fit(X, y, **kwargs)


def train_gbt(X, y, n_estimators, max_depth, learning_rate,
              policy="depthwise", num_leaves=None, lambda_l1=0.0, seed=0,
              min_samples_leaf=20, **kwargs) -> GradientBoostedModel:
    return GradientBoostedModel(
        n_estimators=n_estimators, max_depth=max_depth,
        learning_rate=learning_rate, policy=policy, num_leaves=num_leaves,
        lambda_l1=lambda_l1, seed=seed,
        min_samples_leaf=min_samples_leaf).fit(X, y, **kwargs)
