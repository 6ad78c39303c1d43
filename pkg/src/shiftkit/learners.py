"""Weighted base learners.

Linear models are trained by deterministic full-batch subgradient descent;
trees are greedy CART with a weighted squared-error criterion; boosting fits
those trees to residuals (regression) or logistic pseudo-residuals.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import expit

from .data import DataError, TabularDataset, fold_indices

LOSS_KINDS = ("hinge", "logistic")


# --------------------------------------------------------------------------
# linear models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 3000
    step_size: float = 1.0
    l2: float = 1e-3
    seed: int = 0
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if not self.l2 >= 0:
            raise ValueError("l2 must be >= 0")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")


@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    loss_kind: str = "hinge"
    objective: float = float("nan")
    history: tuple = field(default=(), repr=False, compare=False)
    degenerate: bool = False

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=float).ravel()
        if not np.all(np.isfinite(coef)) or not math.isfinite(self.intercept):
            raise ValueError("non-finite linear model parameters")
        coef.flags.writeable = False
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def d(self) -> int:
        return self.coefficients.shape[0]

    def decision_function(self, X) -> np.ndarray:
        X = _check_dim(X, self.d)
        return X @ self.coefficients + self.intercept

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))


def _check_dim(X, d) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != d:
        raise DataError(f"expected {d} feature columns, got shape {X.shape}")
    return X


def signed_labels(y) -> np.ndarray:
    return 2.0 * np.asarray(y, dtype=float) - 1.0


def margin_loss(margins: np.ndarray, loss_kind: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample loss and its derivative with respect to the margin."""
    if loss_kind == "hinge":
        loss = np.maximum(0.0, 1.0 - margins)
        dloss = np.where(margins < 1.0, -1.0, 0.0)
    elif loss_kind == "logistic":
        loss = np.logaddexp(0.0, -margins)
        dloss = -expit(-margins)
    else:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    return loss, dloss


def pointwise_loss(model, data: TabularDataset, loss_kind: str = "hinge") -> np.ndarray:
    """Training loss of ``model`` on each row of ``data``."""
    m = signed_labels(data.labels) * model.decision_function(data.features)
    return margin_loss(m, loss_kind)[0]


def subgradient_minimize(fun: Callable, theta0: np.ndarray, cfg: TrainConfig, n_stages: int = 12):
    """Restarted, averaged, normalized subgradient descent.

    ``fun(theta)`` returns ``(value, subgradient)``. Each stage restarts from
    the best point seen and takes normalized steps ``eta / sqrt(t)``; the
    stage average is also evaluated. ``eta`` starts at ``cfg.step_size`` and
    is halved after a stage whose best point moved less than a quarter of the
    distance stepped, so long descents keep their step while oscillation
    around a kink shrinks it. Returns the best point, its value, and the
    running-best history (non-increasing).
    """
    best = np.array(theta0, dtype=float)
    best_val, best_g = fun(best)
    if not math.isfinite(best_val):
        raise FloatingPointError("non-finite objective at the starting point")
    history = [best_val]
    stages = max(1, min(n_stages, cfg.steps))
    per = max(1, cfg.steps // stages)
    eta = cfg.step_size
    for _ in range(stages):
        start = best.copy()
        theta, g = best.copy(), best_g
        avg = np.zeros_like(theta)
        travel = 0.0
        for t in range(1, per + 1):
            gn = float(np.linalg.norm(g))
            if gn <= cfg.tolerance:
                return best, best_val, tuple(history)
            step = eta / math.sqrt(t)
            travel += step
            theta = theta - step * (g / gn)
            avg += (theta - avg) / t
            val, g = fun(theta)
            if not math.isfinite(val):
                raise FloatingPointError("non-finite loss encountered during training")
            if val < best_val:
                best, best_val, best_g = theta.copy(), val, g
            history.append(best_val)
        aval, ag = fun(avg)
        if aval < best_val:
            best, best_val, best_g = avg.copy(), aval, ag
        history.append(best_val)
        if float(np.linalg.norm(best - start)) < 0.25 * travel:
            eta *= 0.5
    return best, best_val, tuple(history)


def _check_trainable(data: TabularDataset):
    if data.n < 2:
        raise DataError("need at least two rows to train")
    pos = data.weights > 0
    if len(np.unique(data.labels[pos])) < 2:
        raise DataError("training data contains a single class")


def linear_objective(
    data: TabularDataset,
    loss_kind: str,
    l2: float,
    reweigh: Callable | None = None,
    penalty: Callable | None = None,
):
    """Build ``theta -> (value, subgradient)`` for a linear model.

    ``theta`` stacks coefficients and intercept. ``reweigh(losses)`` returns
    ``(value, q)``: the aggregated loss and the per-sample weights at which the
    subgradient is taken (Danskin). Without it the empirical weights are used.
    ``penalty(w)`` returns ``(value, subgradient)`` of an extra regularizer.
    """
    X, s = data.features, signed_labels(data.labels)
    p = data.normalized_weights()

    def fun(theta):
        w, b = theta[:-1], theta[-1]
        losses, dl = margin_loss(s * (X @ w + b), loss_kind)
        if reweigh is None:
            q = p
            val = float(q @ losses)
        else:
            val, q = reweigh(losses)
        coef = q * dl * s
        g = np.empty_like(theta)
        g[:-1] = X.T @ coef + l2 * w
        g[-1] = coef.sum()
        val += 0.5 * l2 * float(w @ w)
        if penalty is not None:
            pv, pg = penalty(w)
            val += pv
            g[:-1] += pg
        return val, g

    return fun


def fit_linear(data: TabularDataset, cfg: TrainConfig = TrainConfig(), loss_kind: str = "hinge") -> LinearModel:
    _check_trainable(data)
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    fun = linear_objective(data, loss_kind, cfg.l2)
    theta, val, hist = subgradient_minimize(fun, np.zeros(data.d + 1), cfg)
    return LinearModel(theta[:-1], theta[-1], loss_kind, val, hist)


# --------------------------------------------------------------------------
# decision trees
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DecisionTree:
    """Binary tree stored as parallel node arrays.

    Rows go left when ``x[feature] < threshold``. ``feature == -1`` marks a
    leaf. ``value``, ``weight``, ``count`` and ``variance`` hold the weighted
    mean response, total weight, row count and weighted variance of the
    training rows reaching each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray
    count: np.ndarray
    variance: np.ndarray
    n_features: int
    max_depth: int
    min_leaf: int

    def __post_init__(self):
        for name in ("feature", "threshold", "left", "right", "value", "weight", "count", "variance"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        leaf = self.feature < 0
        if np.any(leaf != (self.left < 0)) or np.any(leaf != (self.right < 0)):
            raise ValueError("malformed tree: internal nodes need two children")
        if not np.all(np.isfinite(self.value)):
            raise ValueError("non-finite leaf prediction")

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def apply(self, X) -> np.ndarray:
        X = _check_dim(X, self.n_features)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] < self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    # classifier view (tree fit on 0/1 labels)
    def predict_proba(self, X) -> np.ndarray:
        return np.clip(self.predict_value(X), 0.0, 1.0)

    def predict(self, X) -> np.ndarray:
        return (self.predict_value(X) >= 0.5).astype(np.int64)

    def decision_function(self, X) -> np.ndarray:
        return 2.0 * self.predict_value(X) - 1.0

    def with_leaf_values(self, leaf_values: np.ndarray) -> "DecisionTree":
        value = np.array(self.value, dtype=float)
        value[self.leaves] = leaf_values
        return replace(self, value=value)

    def leaf_cells(self) -> dict[int, list[tuple[int, float, float]]]:
        """Map each leaf to the interval constraints on its root path."""
        cells = {}
        stack = [(0, {})]
        while stack:
            node, bounds = stack.pop()
            if self.feature[node] < 0:
                cells[int(node)] = sorted((f, lo, hi) for f, (lo, hi) in bounds.items())
                continue
            f, t = int(self.feature[node]), float(self.threshold[node])
            lo, hi = bounds.get(f, (-math.inf, math.inf))
            left = dict(bounds)
            left[f] = (lo, min(hi, t))
            right = dict(bounds)
            right[f] = (max(lo, t), hi)
            stack.append((int(self.right[node]), right))
            stack.append((int(self.left[node]), left))
        return cells


def _node_stats(r: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    W = float(w.sum())
    if W <= 0:
        return 0.0, float(r.mean()) if r.size else 0.0, 0.0
    m = float(w @ r) / W
    var = float(w @ (r - m) ** 2) / W
    return W, m, var


def _best_split_sorted(xs, rs, ws, min_leaf, tol, min_weight=0.0):
    """Best split position for rows already sorted by one feature.

    Returns ``(score, threshold)`` or ``None``; the score to maximize is
    ``S_L^2 / W_L + S_R^2 / W_R``, the lowest threshold wins ties.
    """
    m = xs.shape[0]
    if m < 2 * min_leaf:
        return None
    cw = np.cumsum(ws)[:-1]
    cs = np.cumsum(ws * rs)[:-1]
    W, S = cw[-1] + ws[-1], cs[-1] + ws[-1] * rs[-1]
    k = np.arange(m - 1)
    valid = (xs[:-1] < xs[1:]) & (k + 1 >= min_leaf) & (m - k - 1 >= min_leaf)
    WR = W - cw
    valid &= (cw > 0) & (WR > 0) & (cw >= min_weight) & (WR >= min_weight)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(valid, cs**2 / cw + (S - cs) ** 2 / WR, -np.inf)
    top = score.max()
    pos = int(np.flatnonzero(score >= top - tol)[0])
    lo, hi = xs[pos], xs[pos + 1]
    t = 0.5 * (lo + hi)
    if not lo < t <= hi:
        t = hi
    return float(score[pos]), float(t)


def _radix_key(node_of: np.ndarray) -> np.ndarray:
    return node_of.astype(np.uint16) if node_of.max(initial=0) < 65535 else node_of


def _grow_tree(X, r, w, max_depth, min_leaf, order=None, min_weight_fraction=0.0):
    n, d = X.shape
    if order is None:
        order = np.argsort(X, axis=0, kind="stable").T
    node_of = np.zeros(n, dtype=np.int64)
    feat, thr, left, right, val, wt, cnt, var = [], [], [], [], [], [], [], []

    def add(rows):
        W, m, v = _node_stats(r[rows], w[rows])
        for lst, x in zip((feat, thr, left, right, val, wt, cnt, var), (-1, np.nan, -1, -1, m, W, len(rows), v)):
            lst.append(x)
        return len(feat) - 1

    add(np.arange(n))
    frontier = [0]
    scale = float(w @ (r * r))
    tol = 1e-12 * scale + 1e-300
    min_weight = min_weight_fraction * float(w.sum())
    for _ in range(max_depth):
        cand = [
            nid for nid in frontier if cnt[nid] >= 2 * min_leaf and wt[nid] > 0 and var[nid] * wt[nid] > 1e-14 * scale
        ]
        if not cand:
            break
        best = {nid: None for nid in cand}
        for j in range(d):
            o = order[j]
            nk = node_of[o]
            grouped = o[np.argsort(_radix_key(nk), kind="stable")]
            keys = node_of[grouped]
            for nid in cand:
                a, b = np.searchsorted(keys, [nid, nid + 1])
                rows = grouped[a:b]
                res = _best_split_sorted(X[rows, j], r[rows], w[rows], min_leaf, tol, min_weight)
                if res is None:
                    continue
                cur = best[nid]
                if cur is None or res[0] > cur[0] + tol:
                    best[nid] = (res[0], j, res[1])
        frontier = []
        for nid in cand:
            if best[nid] is None:
                continue
            _, j, t = best[nid]
            rows = np.flatnonzero(node_of == nid)
            go_left = X[rows, j] < t
            li, ri = add(rows[go_left]), add(rows[~go_left])
            feat[nid], thr[nid], left[nid], right[nid] = j, t, li, ri
            node_of[rows[go_left]] = li
            node_of[rows[~go_left]] = ri
            frontier += [li, ri]
    tree = DecisionTree(
        np.array(feat, dtype=np.int64),
        np.array(thr, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(val, dtype=float),
        np.array(wt, dtype=float),
        np.array(cnt, dtype=np.int64),
        np.array(var, dtype=float),
        d,
        max_depth,
        min_leaf,
    )
    return tree, node_of


def _response(data: TabularDataset, target) -> np.ndarray:
    if isinstance(target, str):
        if target != "labels":
            raise ValueError(f"target must be 'labels' or a response vector, got {target!r}")
        return data.labels.astype(float)
    r = np.asarray(target, dtype=float)
    if r.shape != (data.n,):
        raise DataError("response vector length does not match data")
    if not np.all(np.isfinite(r)):
        raise DataError("response must be finite")
    return r


def fit_tree(
    data: TabularDataset, target="labels", max_depth: int = 3, min_leaf: int = 1, min_weight_fraction: float = 0.0
) -> DecisionTree:
    """Greedy weighted-CART regression tree.

    Each split minimizes the weighted child sum of squared errors. Candidate
    thresholds are midpoints between consecutive distinct feature values;
    ties go to the lowest feature index, then the lowest threshold. A node
    with (numerically) constant response stays a leaf. ``min_weight_fraction``
    additionally requires each child to hold that share of the total weight.
    Fewer than ``2 * min_leaf`` rows is an error.
    """
    if data.n == 0:
        raise DataError("cannot fit a tree on empty data")
    if max_depth < 0 or min_leaf < 1:
        raise ValueError("max_depth must be >= 0 and min_leaf >= 1")
    if data.n < 2 * min_leaf:
        raise DataError(f"{data.n} rows cannot fill two leaves of {min_leaf}")
    r = _response(data, target)
    return _grow_tree(data.features, r, data.weights, max_depth, min_leaf, None, min_weight_fraction)[0]


# --------------------------------------------------------------------------
# gradient boosting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GBTModel:
    trees: tuple
    learning_rate: float
    base_score: float
    task: str = "classification"
    n_features: int = 0

    def raw_score(self, X) -> np.ndarray:
        X = _check_dim(X, self.n_features)
        F = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            F += self.learning_rate * t.predict_value(X)
        return F

    decision_function = raw_score

    def predict_proba(self, X) -> np.ndarray:
        if self.task != "classification":
            raise ValueError("predict_proba needs a classification model")
        return expit(self.raw_score(X))

    def predict(self, X) -> np.ndarray:
        if self.task == "classification":
            return (self.raw_score(X) > 0).astype(np.int64)
        return self.raw_score(X)


def fit_gbt(
    data: TabularDataset,
    target="labels",
    rounds: int = 50,
    learning_rate: float = 0.2,
    max_depth: int = 3,
    min_leaf: int = 20,
    task: str | None = None,
    min_weight_fraction: float = 0.0,
) -> GBTModel:
    """Stagewise boosting of squared-error trees.

    ``target="labels"`` (or ``task="classification"``) boosts the logistic
    loss: each tree is grown on the pseudo-residuals ``y - p`` and its leaves
    take one Newton step. A real response vector gives least-squares
    boosting on residuals.
    """
    if data.n == 0:
        raise DataError("cannot fit boosting on empty data")
    if rounds < 0 or not learning_rate > 0:
        raise ValueError("rounds must be >= 0 and learning_rate > 0")
    y = _response(data, target)
    if task is None:
        task = "classification" if isinstance(target, str) else "regression"
    w = data.weights
    W = w.sum()
    if task == "classification":
        pbar = float(np.clip(w @ y / W, 1e-6, 1 - 1e-6))
        base = math.log(pbar / (1 - pbar))
    elif task == "regression":
        base = float(w @ y / W)
    else:
        raise ValueError(f"unknown task {task!r}")
    X = data.features
    order = np.argsort(X, axis=0, kind="stable").T
    F = np.full(data.n, base)
    trees = []
    for _ in range(rounds):
        if task == "classification":
            p = expit(F)
            resid = y - p
        else:
            resid = y - F
        tree, leaf_of = _grow_tree(X, resid, w, max_depth, min_leaf, order, min_weight_fraction)
        if task == "classification":
            leaves = tree.leaves
            num = np.bincount(leaf_of, weights=w * resid, minlength=tree.n_nodes)[leaves]
            den = np.bincount(leaf_of, weights=w * p * (1 - p), minlength=tree.n_nodes)[leaves]
            tree = tree.with_leaf_values(num / np.maximum(den, 1e-12 * W + 1e-300))
        F = F + learning_rate * tree.value[leaf_of]
        trees.append(tree)
    return GBTModel(tuple(trees), float(learning_rate), base, task, data.d)


def weighted_training_loss(model: GBTModel, data: TabularDataset, target="labels") -> float:
    y = _response(data, target)
    F = model.raw_score(data.features)
    p = data.normalized_weights()
    if model.task == "classification":
        return float(p @ (np.logaddexp(0, F) - y * F))
    return float(p @ (y - F) ** 2)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def _macro_f1(y, yhat, w) -> float:
    scores = []
    for c in (0, 1):
        tp = w[(yhat == c) & (y == c)].sum()
        fp = w[(yhat == c) & (y != c)].sum()
        fn = w[(yhat != c) & (y == c)].sum()
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(scores))


def evaluate(model, data: TabularDataset, loss: str = "zero_one") -> float:
    """Weighted mean loss of ``model`` on ``data`` (or weighted macro-F1)."""
    w = data.weights
    if loss in ("zero_one", "accuracy", "macro_f1"):
        yhat = model.predict(data.features)
        if loss == "macro_f1":
            return _macro_f1(data.labels, yhat, w)
        err = float(w @ (yhat != data.labels)) / float(w.sum())
        return 1.0 - err if loss == "accuracy" else err
    if loss in LOSS_KINDS:
        return float(data.normalized_weights() @ pointwise_loss(model, data, loss))
    raise ValueError(f"unknown evaluation loss {loss!r}")


def accuracy(model, data: TabularDataset) -> float:
    return evaluate(model, data, "accuracy")


@dataclass(frozen=True)
class LearnerSpec:
    """Recipe for fitting one learner family on a weighted dataset."""

    kind: str = "gbt"
    loss_kind: str = "hinge"
    train: TrainConfig = TrainConfig()
    rounds: int = 50
    learning_rate: float = 0.2
    max_depth: int = 3
    min_leaf: int = 20
    min_weight_fraction: float = 0.0

    def fit(self, data: TabularDataset):
        if self.kind == "linear":
            return fit_linear(data, self.train, self.loss_kind)
        if self.kind == "tree":
            return fit_tree(data, "labels", self.max_depth, self.min_leaf, self.min_weight_fraction)
        if self.kind == "gbt":
            return fit_gbt(
                data,
                "labels",
                self.rounds,
                self.learning_rate,
                self.max_depth,
                self.min_leaf,
                min_weight_fraction=self.min_weight_fraction,
            )
        raise ValueError(f"unknown learner kind {self.kind!r}")


def kfold_accuracy(data: TabularDataset, k: int, learner: LearnerSpec, seed: int = 0) -> float:
    """Cross-validated weighted accuracy.

    Rows are partitioned into ``k`` folds; each fold is scored by a model fit
    on the others. Weights enter both fitting and scoring, so the result is
    total correctly-classified held-out weight over total weight.
    """
    if k < 2:
        raise DataError("k must be >= 2")
    n_eff = int(np.count_nonzero(data.weights > 0))
    if k > data.n or k > n_eff:
        raise DataError(f"k={k} exceeds the number of rows with positive weight ({n_eff})")
    correct = total = 0.0
    for fold in fold_indices(data.n, k, seed):
        mask = np.ones(data.n, dtype=bool)
        mask[fold] = False
        model = learner.fit(data.take(np.flatnonzero(mask)))
        held = data.take(fold)
        correct += float(held.weights @ (model.predict(held.features) == held.labels))
        total += float(held.weights.sum())
    if total <= 0:
        raise DataError("held-out folds carry no weight")
    return correct / total


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _tree_to_dict(t: DecisionTree) -> dict:
    return {
        "feature": t.feature.tolist(),
        "threshold": [None if math.isnan(v) else v for v in t.threshold.tolist()],
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "value": t.value.tolist(),
        "weight": t.weight.tolist(),
        "count": t.count.tolist(),
        "variance": t.variance.tolist(),
        "n_features": t.n_features,
        "max_depth": t.max_depth,
        "min_leaf": t.min_leaf,
    }


def _tree_from_dict(d: dict) -> DecisionTree:
    thr = np.array([np.nan if v is None else v for v in d["threshold"]], dtype=float)
    return DecisionTree(
        np.array(d["feature"], dtype=np.int64),
        thr,
        np.array(d["left"], dtype=np.int64),
        np.array(d["right"], dtype=np.int64),
        np.array(d["value"], dtype=float),
        np.array(d["weight"], dtype=float),
        np.array(d["count"], dtype=np.int64),
        np.array(d["variance"], dtype=float),
        int(d["n_features"]),
        int(d["max_depth"]),
        int(d["min_leaf"]),
    )


def model_to_dict(model, feature_names=None) -> dict:
    if isinstance(model, LinearModel):
        out = {
            "type": "linear",
            "coefficients": model.coefficients.tolist(),
            "intercept": model.intercept,
            "loss_kind": model.loss_kind,
            "objective": None if math.isnan(model.objective) else model.objective,
        }
    elif isinstance(model, DecisionTree):
        out = {"type": "tree", **_tree_to_dict(model)}
    elif isinstance(model, GBTModel):
        out = {
            "type": "gbt",
            "task": model.task,
            "base_score": model.base_score,
            "learning_rate": model.learning_rate,
            "n_features": model.n_features,
            "trees": [_tree_to_dict(t) for t in model.trees],
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if feature_names is not None:
        out["feature_names"] = list(feature_names)
    return out


def model_from_dict(d: dict):
    kind = d.get("type")
    if kind == "linear":
        obj = d.get("objective")
        return LinearModel(
            np.array(d["coefficients"], dtype=float),
            d["intercept"],
            d.get("loss_kind", "hinge"),
            float("nan") if obj is None else obj,
        )
    if kind == "tree":
        return _tree_from_dict(d)
    if kind == "gbt":
        return GBTModel(
            tuple(_tree_from_dict(t) for t in d["trees"]),
            float(d["learning_rate"]),
            float(d["base_score"]),
            d["task"],
            int(d["n_features"]),
        )
    raise ValueError(f"unknown model type {kind!r}")


def save_model(model, path, feature_names=None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, feature_names), indent=2))


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
