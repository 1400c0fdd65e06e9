"""Reward-driven policy trees prescribing maintain vs reduce production.

Rewards are negated Table-style costs: reducing always costs 2000 (lost
production plus anti-odor injection); maintaining costs nothing when
conditions stay favorable and 2000 + H when they turn dangerous, H being the
tunable public-health cost. Trees maximize total reward with greedy splits
followed by coordinate local search over (feature, threshold) choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .ensemble import MemberPredictions, POLICY_FEATURE_NAMES
from .scenario import Scenario, classify_scenario, is_dangerous

__all__ = [
    "MAINTAIN", "REDUCE", "ACTIONS", "REDUCE_COST",
    "RewardMatrix", "PolicyDataset", "PolicyNode", "PolicyTree",
    "build_policy_dataset", "build_reward_matrix", "train_policy_tree",
    "tune_policy_tree", "prescribe", "prescribe_with_path", "render_tree_text",
]

MAINTAIN = 0
REDUCE = 1
ACTIONS = ("maintain", "reduce")
REDUCE_COST = 2000.0
HEALTH_COST_RANGE = (2000.0, 18000.0)
# local-search candidates tried per node before giving up on a move that
# keeps every leaf at or above min_leaf
_MAX_MOVE_TRIES = 8


@dataclass
class PolicyDataset:
    """Observational rows (x in R^18, historical action z, outcome y)."""

    X: np.ndarray                 # (n, 18) member predictions
    z: np.ndarray                 # (n,) historical action, 0/1
    y: np.ndarray                 # (n,) realized reward of that action
    scenarios: list               # (n,) realized Scenario
    base_times: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != len(POLICY_FEATURE_NAMES):
            raise ValueError(
                f"policy features must be (n, {len(POLICY_FEATURE_NAMES)}), "
                f"got {self.X.shape}")

    def __len__(self) -> int:
        return self.X.shape[0]


@dataclass
class RewardMatrix:
    """Per-observation reward of each action; always nonpositive."""

    gamma: np.ndarray  # (n, 2): column 0 maintain, column 1 reduce
    health_cost: float

    def __len__(self) -> int:
        return self.gamma.shape[0]


def actual_scenarios(rows: MemberPredictions) -> list:
    """Realized scenarios from the actual (speed, cos, sin) targets."""
    speeds = rows.actuals[:, 0]
    directions = np.degrees(
        np.arctan2(rows.actuals[:, 2], rows.actuals[:, 1])) % 360.0
    directions[directions == 360.0] = 0.0
    return [classify_scenario(max(float(s), 0.0), float(d))
            for s, d in zip(speeds, directions)]


def build_policy_dataset(rows: MemberPredictions, health_cost: float,
                         historical_actions: Optional[np.ndarray] = None,
                         ) -> PolicyDataset:
    """Observational triples from member-prediction rows.

    When no historical action series is given, the plant's pre-existing
    policy is emulated: reduce whenever the official baseline's forecast
    scenario is dangerous. Outcomes are the realized rewards of those
    actions.
    """
    scenarios = actual_scenarios(rows)
    if historical_actions is None:
        base_speed = rows.member_column("official_baseline", "speed")
        base_cos = rows.member_column("official_baseline", "dir_cos")
        base_sin = rows.member_column("official_baseline", "dir_sin")
        directions = np.degrees(np.arctan2(base_sin, base_cos)) % 360.0
        directions[directions == 360.0] = 0.0
        historical_actions = np.array([
            REDUCE if is_dangerous(classify_scenario(max(float(s), 0.0),
                                                     float(d))) else MAINTAIN
            for s, d in zip(base_speed, directions)], dtype=np.int64)
    z = np.asarray(historical_actions, dtype=np.int64)
    favorable = np.array([not is_dangerous(s) for s in scenarios])
    y = np.where(z == REDUCE, -REDUCE_COST,
                 np.where(favorable, 0.0, -(REDUCE_COST + health_cost)))
    return PolicyDataset(X=rows.flatten(), z=z, y=y, scenarios=scenarios,
                         base_times=rows.base_times.copy())


def build_reward_matrix(data: Union[PolicyDataset, Sequence[Scenario]],
                        health_cost: float) -> RewardMatrix:
    """Counterfactual reward of both actions for every observation.

    Both outcomes are computable directly from the realized scenario, so no
    counterfactual estimation is involved: reduce always earns -2000;
    maintain earns 0 against favorable conditions and -(2000 + H) against
    dangerous ones.
    """
    lo, hi = HEALTH_COST_RANGE
    if not lo <= health_cost <= hi:
        raise ValueError(
            f"health_cost {health_cost!r} outside [{lo:g}, {hi:g}]")
    scenarios = data.scenarios if isinstance(data, PolicyDataset) else data
    n = len(scenarios)
    gamma = np.empty((n, 2))
    gamma[:, REDUCE] = -REDUCE_COST
    danger = np.array([is_dangerous(s) for s in scenarios])
    gamma[:, MAINTAIN] = np.where(danger, -(REDUCE_COST + health_cost), 0.0)
    return RewardMatrix(gamma=gamma, health_cost=float(health_cost))


@dataclass
class PolicyNode:
    feature: int = -1
    threshold: float = 0.0
    left: Optional["PolicyNode"] = None
    right: Optional["PolicyNode"] = None
    action: int = MAINTAIN
    n_samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class PolicyTree:
    root: PolicyNode
    max_depth: int
    min_leaf: int
    feature_names: tuple = POLICY_FEATURE_NAMES

    def to_dict(self) -> dict:
        def encode(node: PolicyNode) -> dict:
            if node.is_leaf:
                return {"action": ACTIONS[node.action],
                        "n_samples": node.n_samples}
            return {"feature_index": node.feature,
                    "threshold": node.threshold,
                    "left": encode(node.left), "right": encode(node.right)}
        return {"max_depth": self.max_depth, "min_leaf": self.min_leaf,
                "feature_names": list(self.feature_names),
                "root": encode(self.root)}

    @staticmethod
    def from_dict(payload: dict) -> "PolicyTree":
        def decode(obj: dict) -> PolicyNode:
            if "action" in obj:
                return PolicyNode(action=ACTIONS.index(obj["action"]),
                                  n_samples=int(obj["n_samples"]))
            return PolicyNode(feature=int(obj["feature_index"]),
                              threshold=float(obj["threshold"]),
                              left=decode(obj["left"]),
                              right=decode(obj["right"]))
        return PolicyTree(root=decode(payload["root"]),
                          max_depth=int(payload["max_depth"]),
                          min_leaf=int(payload["min_leaf"]),
                          feature_names=tuple(payload["feature_names"]))


def _best_leaf(gamma_sums: np.ndarray) -> tuple:
    """(action, summed reward); maintain preferred on exact ties."""
    if gamma_sums[MAINTAIN] >= gamma_sums[REDUCE]:
        return MAINTAIN, float(gamma_sums[MAINTAIN])
    return REDUCE, float(gamma_sums[REDUCE])


def _best_split(X: np.ndarray, gamma: np.ndarray, idx: np.ndarray,
                min_leaf: int) -> Optional[tuple]:
    """Best (gain, feature, threshold) with exactly-optimal child leaves."""
    n = len(idx)
    if n < 2 * min_leaf:
        return None
    g = gamma[idx]
    totals = g.sum(axis=0)
    _, parent_reward = _best_leaf(totals)
    best = None
    for f in range(X.shape[1]):
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cum = np.cumsum(g[order], axis=0)
        # candidate cuts between consecutive distinct values
        pos = np.nonzero(sv[:-1] < sv[1:])[0]
        if len(pos) == 0:
            continue
        pos = pos[(pos + 1 >= min_leaf) & (n - pos - 1 >= min_leaf)]
        if len(pos) == 0:
            continue
        left_best = np.maximum(cum[pos, MAINTAIN], cum[pos, REDUCE])
        right = totals[None, :] - cum[pos]
        right_best = np.maximum(right[:, MAINTAIN], right[:, REDUCE])
        total = left_best + right_best
        k = int(np.argmax(total))  # ascending thresholds: first max wins
        gain = float(total[k]) - parent_reward
        if gain > 0.0 and (best is None or gain > best[0]):
            threshold = float((sv[pos[k]] + sv[pos[k] + 1]) / 2.0)
            best = (gain, f, threshold)
    return best


def _grow(X: np.ndarray, gamma: np.ndarray, idx: np.ndarray, depth: int,
          max_depth: int, min_leaf: int) -> PolicyNode:
    action, _ = _best_leaf(gamma[idx].sum(axis=0))
    if depth < max_depth:
        split = _best_split(X, gamma, idx, min_leaf)
        if split is not None:
            _, f, threshold = split
            mask = X[idx, f] < threshold
            return PolicyNode(
                feature=f, threshold=threshold,
                left=_grow(X, gamma, idx[mask], depth + 1, max_depth, min_leaf),
                right=_grow(X, gamma, idx[~mask], depth + 1, max_depth, min_leaf),
                n_samples=len(idx))
    return PolicyNode(action=action, n_samples=len(idx))


def _route(node: PolicyNode, X: np.ndarray, idx: np.ndarray,
           assign: dict) -> None:
    """Record which samples land in which node (leaves get their actions)."""
    assign[id(node)] = idx
    if node.is_leaf:
        return
    mask = X[idx, node.feature] < node.threshold
    _route(node.left, X, idx[mask], assign)
    _route(node.right, X, idx[~mask], assign)


def _leaf_rewards(node: PolicyNode, X: np.ndarray,
                  gamma: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Per-sample reward received under the subtree's fixed leaf actions."""
    out = np.empty(len(idx))
    if node.is_leaf:
        out[:] = gamma[idx, node.action]
        return out
    mask = X[idx, node.feature] < node.threshold
    out[mask] = _leaf_rewards(node.left, X, gamma, idx[mask])
    out[~mask] = _leaf_rewards(node.right, X, gamma, idx[~mask])
    return out


def _internal_nodes(root: PolicyNode) -> list:
    found = []
    stack = [root]
    while stack:
        node = stack.pop()
        if not node.is_leaf:
            found.append(node)
            stack.append(node.right)
            stack.append(node.left)
    return found


def _min_leaf_count(node: PolicyNode, X: np.ndarray,
                    idx: np.ndarray) -> int:
    if node.is_leaf:
        return len(idx)
    mask = X[idx, node.feature] < node.threshold
    return min(_min_leaf_count(node.left, X, idx[mask]),
               _min_leaf_count(node.right, X, idx[~mask]))


def _refresh(node: PolicyNode, X: np.ndarray, gamma: np.ndarray,
             idx: np.ndarray) -> float:
    """Re-label leaves optimally, refresh sample counts, return total reward."""
    node.n_samples = len(idx)
    if node.is_leaf:
        action, reward = _best_leaf(gamma[idx].sum(axis=0))
        node.action = action
        return reward
    mask = X[idx, node.feature] < node.threshold
    return (_refresh(node.left, X, gamma, idx[mask])
            + _refresh(node.right, X, gamma, idx[~mask]))


def _local_search(tree: PolicyNode, X: np.ndarray, gamma: np.ndarray,
                  min_leaf: int, max_passes: int = 20) -> None:
    """Re-optimize each internal node's (feature, threshold) in place.

    One candidate move routes a node's samples into its existing left/right
    subtrees (structure and leaf actions held fixed); the best strictly
    improving move that keeps every leaf at or above min_leaf is applied.
    Leaves are re-labeled optimally after every applied move.
    """
    n = X.shape[0]
    all_idx = np.arange(n)
    total = _refresh(tree, X, gamma, all_idx)
    for _ in range(max_passes):
        improved = False
        for node in _internal_nodes(tree):
            assign: dict = {}
            _route(tree, X, all_idx, assign)
            idx = assign[id(node)]
            if len(idx) < 2 * min_leaf:
                continue
            c_left = _leaf_rewards(node.left, X, gamma, idx)
            c_right = _leaf_rewards(node.right, X, gamma, idx)
            current = float(c_left[X[idx, node.feature]
                                   < node.threshold].sum()
                            + c_right[X[idx, node.feature]
                                      >= node.threshold].sum())
            candidates = []
            for f in range(X.shape[1]):
                vals = X[idx, f]
                order = np.argsort(vals, kind="stable")
                sv = vals[order]
                pos = np.nonzero(sv[:-1] < sv[1:])[0]
                pos = pos[(pos + 1 >= min_leaf) & (len(idx) - pos - 1 >= min_leaf)]
                if len(pos) == 0:
                    continue
                cum_l = np.cumsum(c_left[order])
                cum_r = np.cumsum(c_right[order])
                totals = cum_l[pos] + (c_right.sum() - cum_r[pos])
                for k in np.argsort(-totals, kind="stable")[:_MAX_MOVE_TRIES]:
                    gain = float(totals[k]) - current
                    if gain > 1e-9:
                        thr = float((sv[pos[k]] + sv[pos[k] + 1]) / 2.0)
                        candidates.append((-gain, f, thr))
            candidates.sort()
            old = (node.feature, node.threshold)
            for _, f, thr in candidates[:_MAX_MOVE_TRIES]:
                node.feature, node.threshold = f, thr
                if _min_leaf_count(node, X, idx) >= min_leaf:
                    new_total = _refresh(tree, X, gamma, all_idx)
                    if new_total > total + 1e-9:
                        total = new_total
                        improved = True
                        break
                    node.feature, node.threshold = old
                    _refresh(tree, X, gamma, all_idx)
                else:
                    node.feature, node.threshold = old
        if not improved:
            break


def train_policy_tree(X: np.ndarray, rewards: RewardMatrix, max_depth: int,
                      min_leaf: int = 1) -> PolicyTree:
    """Grow and locally improve a tree maximizing total reward.

    Greedy construction only accepts splits strictly better than the best
    single-leaf assignment; depth-1 problems therefore reach the enumerated
    global optimum. Ties break to the lowest feature index, lowest threshold,
    and maintain at equal-reward leaves.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty policy training data")
    if X.shape[0] != len(rewards):
        raise ValueError(
            f"{X.shape[0]} feature rows but {len(rewards)} reward rows")
    if max_depth < 1:
        raise ValueError(f"max_depth must be >= 1, got {max_depth}")
    if min_leaf < 1:
        raise ValueError(f"min_leaf must be >= 1, got {min_leaf}")
    idx = np.arange(X.shape[0])
    root = _grow(X, rewards.gamma, idx, 0, max_depth, min_leaf)
    _local_search(root, X, rewards.gamma, min_leaf)
    return PolicyTree(root=root, max_depth=max_depth, min_leaf=min_leaf,
                      feature_names=POLICY_FEATURE_NAMES
                      if X.shape[1] == len(POLICY_FEATURE_NAMES)
                      else tuple(f"x{i}" for i in range(X.shape[1])))


def tree_reward(tree: PolicyTree, X: np.ndarray,
                rewards: RewardMatrix) -> float:
    """Total reward of the tree's prescriptions over the given rows."""
    actions = prescribe_batch(tree, X)
    return float(rewards.gamma[np.arange(len(actions)), actions].sum())


def tune_policy_tree(X: np.ndarray, rewards: RewardMatrix,
                     depth_grid: Sequence[int], min_leaf_grid: Sequence[int],
                     k: int = 5) -> PolicyTree:
    """Contiguous-block k-fold CV over (max_depth, min_leaf); refit on all."""
    if not depth_grid or not min_leaf_grid:
        raise ValueError("empty tuning grid")
    n = X.shape[0]
    if k > n:
        raise ValueError(f"fold count {k} exceeds {n} rows")
    folds = np.array_split(np.arange(n), k)
    best = None
    for depth in depth_grid:
        for min_leaf in min_leaf_grid:
            held_out = 0.0
            for fold in folds:
                mask = np.ones(n, dtype=bool)
                mask[fold] = False
                fit = train_policy_tree(
                    X[mask], RewardMatrix(rewards.gamma[mask],
                                          rewards.health_cost),
                    max_depth=depth, min_leaf=min_leaf)
                actions = prescribe_batch(fit, X[fold])
                held_out += float(
                    rewards.gamma[fold, :][np.arange(len(fold)), actions].sum())
            mean_reward = held_out / n
            if best is None or mean_reward > best[0]:
                best = (mean_reward, depth, min_leaf)
    _, depth, min_leaf = best
    return train_policy_tree(X, rewards, max_depth=depth, min_leaf=min_leaf)


def prescribe(tree: PolicyTree, x: np.ndarray) -> str:
    """Root-to-leaf descent (left iff feature < threshold); returns the action."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != len(tree.feature_names):
        raise ValueError(
            f"expected {len(tree.feature_names)} features, got {x.shape[0]}")
    node = tree.root
    while not node.is_leaf:
        node = node.left if x[node.feature] < node.threshold else node.right
    return ACTIONS[node.action]


def prescribe_batch(tree: PolicyTree, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0], dtype=np.int64)

    def walk(node: PolicyNode, idx: np.ndarray) -> None:
        if node.is_leaf:
            out[idx] = node.action
            return
        mask = X[idx, node.feature] < node.threshold
        walk(node.left, idx[mask])
        walk(node.right, idx[~mask])

    walk(tree.root, np.arange(X.shape[0]))
    return out


def prescribe_with_path(tree: PolicyTree, x: np.ndarray) -> tuple:
    """(action, path) where path lists each split taken on the descent."""
    x = np.asarray(x, dtype=np.float64).ravel()
    node = tree.root
    path = []
    while not node.is_leaf:
        went_left = bool(x[node.feature] < node.threshold)
        path.append({
            "feature": tree.feature_names[node.feature],
            "threshold": node.threshold,
            "value": float(x[node.feature]),
            "went": "left" if went_left else "right",
        })
        node = node.left if went_left else node.right
    return ACTIONS[node.action], path


def render_tree_text(tree: PolicyTree,
                     feature_names: Optional[Sequence[str]] = None) -> str:
    """Deterministic indented rendering; left (feature < threshold) first."""
    names = tuple(feature_names) if feature_names else tree.feature_names
    lines = []

    def walk(node: PolicyNode, depth: int) -> None:
        pad = "  " * depth
        if node.is_leaf:
            lines.append(
                f"{pad}Prescribe {ACTIONS[node.action]} (n={node.n_samples})")
            return
        lines.append(f"{pad}{names[node.feature]} < {node.threshold!r}")
        walk(node.left, depth + 1)
        walk(node.right, depth + 1)

    walk(tree.root, 0)
    return "\n".join(lines) + "\n"
