"""Locating covariate regions where the outcome model changes.

The main search fits the best source and target predictors on the shared
covariate distribution, then grows a shallow regression tree on the gap
between them; leaves whose mean gap clears a threshold are reported as
regions. A light variant fits only the source model and regresses its
target-side error instead.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .data import DataError, DomainPair, Region, TabularDataset, make_rng
from .diagnostics import DOMAIN_CLASSIFIER, SharedWeights, fit_shared_weights
from .learners import DecisionTree, LearnerSpec, evaluate, fit_tree

MODEL_SPEC = LearnerSpec(kind="gbt", rounds=50, learning_rate=0.2, max_depth=3, min_leaf=20)
MIN_TARGET = 100
MIN_TARGET_LIGHT = 20
UNDEFINED_MEAN = 1e-9


@dataclass(frozen=True)
class RegionSearch:
    regions: list
    tree: DecisionTree
    shared: SharedWeights
    lambda_source: np.ndarray
    lambda_target: np.ndarray


def _cells(tree: DecisionTree, nodes, feature_names):
    total = tree.weight[0] if tree.weight[0] > 0 else 1.0
    wanted, found = set(int(n) for n in nodes), {}
    stack = [(0, {})]
    while stack:
        node, bounds = stack.pop()
        if node in wanted:
            cons = tuple(sorted((f, lo, hi) for f, (lo, hi) in bounds.items()))
            found[node] = Region(cons, float(tree.value[node]), float(tree.weight[node] / total), feature_names)
        if tree.feature[node] < 0:
            continue
        f, t = int(tree.feature[node]), float(tree.threshold[node])
        lo, hi = bounds.get(f, (-math.inf, math.inf))
        stack.append((int(tree.left[node]), {**bounds, f: (lo, min(hi, t))}))
        stack.append((int(tree.right[node]), {**bounds, f: (max(lo, t), hi)}))
    return [found[n] for n in sorted(found)]


def leaf_regions(tree: DecisionTree, feature_names=None) -> list[Region]:
    """Every leaf cell of ``tree`` as a region, ordered by node id."""
    return _cells(tree, tree.leaves, feature_names)


def clearing_nodes(tree: DecisionTree, b: float, merge: bool = True) -> list[int]:
    """Nodes whose cells make up ``{x : h(x) >= b}``.

    Without ``merge`` these are the clearing leaves. With ``merge`` a split
    whose whole subtree clears ``b`` is undone, so each returned node is the
    largest tree cell lying inside the thresholded set.
    """
    leaf = tree.feature < 0
    clear = np.zeros(tree.n_nodes, dtype=bool)
    # children always carry larger ids than their parent
    for node in range(tree.n_nodes - 1, -1, -1):
        if leaf[node]:
            clear[node] = tree.value[node] >= b
        else:
            clear[node] = clear[tree.left[node]] and clear[tree.right[node]]
    if not merge:
        return [int(n) for n in np.flatnonzero(leaf & clear)]
    parent = np.full(tree.n_nodes, -1)
    internal = np.flatnonzero(~leaf)
    parent[tree.left[internal]] = internal
    parent[tree.right[internal]] = internal
    return [int(n) for n in range(tree.n_nodes) if clear[n] and (parent[n] < 0 or not clear[parent[n]])]


def _threshold(tree, b, names, merge=True):
    regs = _cells(tree, clearing_nodes(tree, b, merge), names)
    return sorted(regs, key=lambda r: -r.discrepancy)


def _check_labels(data: TabularDataset, what: str):
    if len(np.unique(data.labels[data.weights > 0])) < 2:
        raise DataError(f"{what} domain must contain both labels")


def identify_region(
    pair: DomainPair,
    b: float = 0.3,
    tree_depth: int = 3,
    classifier: LearnerSpec = DOMAIN_CLASSIFIER,
    model: LearnerSpec = MODEL_SPEC,
    min_weight_fraction: float = 0.01,
    shared: SharedWeights | None = None,
    merge: bool = True,
    details: bool = False,
):
    """Regions of strong outcome shift between source and target.

    Steps: domain classifier and shared-distribution weights; source and
    target classifiers fit under those weights; a depth-``tree_depth`` tree on
    the pooled rows with response ``|f_P(x) - f_Q(x)|`` (probabilities), each
    side carrying half the total weight. Leaves with mean response ``>= b``
    are returned, largest first; with ``merge`` (default) sibling cells that
    both clear ``b`` are reported as their common parent cell, which leaves
    the thresholded set unchanged. ``details=True`` returns a
    :class:`RegionSearch` instead of the bare list.
    """
    if b < 0:
        raise ValueError("b must be >= 0")
    src, tgt = pair.source, pair.target
    if tgt.n < MIN_TARGET:
        raise DataError(f"target has {tgt.n} rows; need {MIN_TARGET} (use identify_region_light for less)")
    _check_labels(src, "source")
    _check_labels(tgt, "target")
    if shared is None:
        shared = fit_shared_weights(pair, classifier)
    lp, lq = shared.lambdas(pair)
    f_p = model.fit(src.with_weights(src.weights * shared.w_source))
    f_q = model.fit(tgt.with_weights(tgt.weights * shared.w_target))
    X = np.vstack([src.features, tgt.features])
    gap = np.abs(f_p.predict_proba(X) - f_q.predict_proba(X))
    pooled = TabularDataset(X, np.zeros(X.shape[0], int), np.concatenate([0.5 * lp, 0.5 * lq]), src.feature_names)
    h = fit_tree(pooled, gap, tree_depth, 1, min_weight_fraction)
    regions = _threshold(h, b, src.feature_names, merge)
    if details:
        return RegionSearch(regions, h, shared, lp, lq)
    return regions


def identify_region_light(
    pair: DomainPair,
    b: float = 0.3,
    tree_depth: int = 3,
    classifier: LearnerSpec = DOMAIN_CLASSIFIER,
    model: LearnerSpec = MODEL_SPEC,
    min_weight_fraction: float = 0.01,
    use_proba: bool = False,
    merge: bool = True,
    details: bool = False,
):
    """Sample-light region search: only the source model is fit.

    The tree is grown on target rows (weights ``lambda_Q``) against the source
    model's error ``|f_P(x) - y|``; hard predictions by default, predicted
    probabilities with ``use_proba``.
    """
    if b < 0:
        raise ValueError("b must be >= 0")
    src, tgt = pair.source, pair.target
    if tgt.n < MIN_TARGET_LIGHT:
        raise DataError(f"target has {tgt.n} rows; need at least {MIN_TARGET_LIGHT}")
    _check_labels(src, "source")
    shared = fit_shared_weights(pair, classifier)
    lp, lq = shared.lambdas(pair)
    f_p = model.fit(src.with_weights(src.weights * shared.w_source))
    pred = f_p.predict_proba(tgt.features) if use_proba else f_p.predict(tgt.features)
    resid = np.abs(pred - tgt.labels)
    h = fit_tree(tgt.with_weights(lq), resid, tree_depth, 1, min_weight_fraction)
    regions = _threshold(h, b, src.feature_names, merge)
    if details:
        return RegionSearch(regions, h, shared, lp, lq)
    return regions


@dataclass(frozen=True)
class FeatureShiftScore:
    scores: np.ndarray
    undefined: np.ndarray
    top_k: tuple

    def to_dict(self, feature_names=None) -> dict:
        names = feature_names or [f"x{j + 1}" for j in range(len(self.scores))]
        return {
            "scores": {names[j]: (None if self.undefined[j] else float(self.scores[j])) for j in range(len(names))},
            "ranking": [names[j] for j in self.top_k],
        }


def feature_shift_scores(reference: TabularDataset, worst_group: TabularDataset) -> FeatureShiftScore:
    """Relative mean difference of each feature between two samples.

    ``s_j = |m_ref - m_worst| / min(m_ref, m_worst)`` from weighted means.
    When the smaller mean is at most 1e-9 the score is flagged undefined
    (stored as NaN) and ranked after every defined score.
    """
    if reference.d != worst_group.d:
        raise DataError("reference and worst group must have the same features")
    m_ref = reference.normalized_weights() @ reference.features
    m_w = worst_group.normalized_weights() @ worst_group.features
    low = np.minimum(m_ref, m_w)
    undefined = low <= UNDEFINED_MEAN
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(undefined, np.nan, np.abs(m_ref - m_w) / np.where(undefined, 1.0, low))
    defined = np.flatnonzero(~undefined)
    ranked = defined[np.argsort(-s[defined], kind="stable")]
    order = tuple(int(j) for j in np.concatenate([ranked, np.flatnonzero(undefined)]))
    return FeatureShiftScore(s, undefined, order)


ARMS = ("source_only", "random", "region")


def simulate_collection(
    pair: DomainPair,
    region: Region,
    n_extra: int,
    learners,
    seed: int = 0,
    eval_fraction: float = 0.5,
) -> list[dict]:
    """Compare spending ``n_extra`` target labels at random vs. inside ``region``.

    The target is split into a collection pool and an evaluation set. Each
    learner is trained on the source alone, on the source plus ``n_extra``
    random pool rows, and on the source plus ``n_extra`` pool rows from inside
    the region; all arms are scored on the evaluation set.
    """
    if n_extra < 0:
        raise ValueError("n_extra must be >= 0")
    if not 0 < eval_fraction < 1:
        raise ValueError("eval_fraction must lie in (0, 1)")
    if not isinstance(learners, dict):
        learners = {f"learner{i}": spec for i, spec in enumerate(learners)}
    rng = make_rng(seed)
    tgt = pair.target
    perm = rng.permutation(tgt.n)
    n_eval = int(round(eval_fraction * tgt.n))
    ev, pool = tgt.take(np.sort(perm[:n_eval])), tgt.take(np.sort(perm[n_eval:]))
    inside = np.flatnonzero(region.contains(pool.features))
    if inside.size == 0:
        raise DataError("region contains no target rows")
    if inside.size < n_extra or pool.n < n_extra:
        raise DataError(f"need {n_extra} pool rows inside the region, found {inside.size}")
    arms = {"source_only": pair.source}
    if n_extra == 0:
        arms["random"] = arms["region"] = pair.source
    else:
        pick_rand = np.sort(rng.choice(pool.n, n_extra, replace=False))
        pick_reg = np.sort(rng.choice(inside, n_extra, replace=False))
        arms["random"] = TabularDataset.concat([pair.source, pool.take(pick_rand)])
        arms["region"] = TabularDataset.concat([pair.source, pool.take(pick_reg)])
    rows = []
    for name, spec in learners.items():
        for arm in ARMS:
            model = spec.fit(arms[arm])
            rows.append({"learner": name, "arm": arm, "n_extra": n_extra, "target_acc": evaluate(model, ev, "accuracy")})
    return rows


def write_rows_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        wr.writerows(rows)
