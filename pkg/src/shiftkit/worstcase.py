"""Worst-case distributions of divergence-based DRO and what they look like.

The worst case of an f-divergence set is a reweighting of the training rows,
so it can be studied with ordinary weighted learners: how well the best
model does on it (optimal in-distribution accuracy) and how a model fit on it
transfers to real target domains.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .data import DataError, TabularDataset, make_rng
from .dro import F_KINDS, AmbiguitySpec, WorstCaseWeights, inner_worst_case, train_f_dro
from .learners import LearnerSpec, TrainConfig, evaluate, kfold_accuracy, pointwise_loss


def extract_worst_case(data: TabularDataset, model, spec: AmbiguitySpec) -> WorstCaseWeights:
    """Worst-case reweighting of ``data`` for a fixed model's training losses."""
    if spec.kind not in F_KINDS:
        raise ValueError(f"worst-case extraction supports {F_KINDS}, got {spec.kind!r}")
    losses = pointwise_loss(model, data, getattr(model, "loss_kind", "hinge"))
    return inner_worst_case(losses, data.normalized_weights(), spec)


def _reweighted(data: TabularDataset, weights, resample: bool, seed: int) -> TabularDataset:
    w = weights.weights if isinstance(weights, WorstCaseWeights) else np.asarray(weights, dtype=float)
    if w.shape != (data.n,):
        raise DataError("worst-case weights do not match the data length")
    if not resample:
        return data.with_weights(w)
    idx = make_rng(seed).choice(data.n, size=data.n, replace=True, p=w / w.sum())
    return data.take(np.sort(idx)).with_weights(np.ones(data.n))


def optimal_iid_accuracy(
    weights, data: TabularDataset, learner: LearnerSpec, k: int = 4, seed: int = 0, resample: bool = False
) -> float:
    """Cross-validated accuracy of ``learner`` on the worst-case distribution."""
    return kfold_accuracy(_reweighted(data, weights, resample, seed), k, learner, seed)


def transfer_accuracy(
    weights, source: TabularDataset, targets, learner: LearnerSpec, resample: bool = False, seed: int = 0
) -> dict:
    """Target accuracy of a model fit on the reweighted source.

    ``targets`` is a mapping from identifier to dataset, or a sequence (keys
    become positions).
    """
    if not isinstance(targets, dict):
        targets = dict(enumerate(targets))
    for key, t in targets.items():
        if t.d != source.d:
            raise DataError(f"target {key!r} has {t.d} features, source has {source.d}")
    model = learner.fit(_reweighted(source, weights, resample, seed))
    return {key: evaluate(model, t, "accuracy") for key, t in targets.items()}


@dataclass(frozen=True)
class WorstCaseStudy:
    spec: AmbiguitySpec
    model: object
    weights: WorstCaseWeights
    optimal_iid_acc: float
    transfer_acc: dict = field(default_factory=dict)

    def median_transfer(self) -> float:
        vals = list(self.transfer_acc.values())
        return float(np.median(vals)) if vals else math.nan


def run_study(
    data: TabularDataset,
    spec: AmbiguitySpec,
    targets,
    learner: LearnerSpec,
    cfg: TrainConfig = TrainConfig(),
    k: int = 4,
    seed: int = 0,
) -> WorstCaseStudy:
    """Train the DRO model for ``spec``, extract its worst case, and score it."""
    model = train_f_dro(data, spec, cfg)
    wc = extract_worst_case(data, model, spec)
    iid = optimal_iid_accuracy(wc, data, learner, k, seed)
    return WorstCaseStudy(spec, model, wc, iid, transfer_accuracy(wc, data, targets, learner))


def write_transfer_csv(studies, path) -> None:
    """Long-format rows ``kind, radius, target_id, transfer_acc``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["kind", "radius", "target_id", "transfer_acc"])
        for st in studies:
            for key, acc in st.transfer_acc.items():
                wr.writerow([st.spec.kind, repr(st.spec.radius), key, repr(acc)])
