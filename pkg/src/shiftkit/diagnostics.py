"""Performance-gap diagnostics: regret, accuracy gap, and the DISDE split.

The decomposition compares source and target on a shared covariate
distribution ``s(x) ~ p(x) q(x) / (p(x) + q(x))``, reached from either side
by reweighting with a domain classifier:

    gap = (E_S[R_P] - E_P[l])  +  (E_S[R_Q] - E_S[R_P])  +  (E_Q[l] - E_S[R_Q])
              term I (X)              term II (Y|X)            term III (X)

where ``R_mu(x)`` is the conditional risk of the fixed model under domain mu.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .data import DataError, DomainPair, TabularDataset
from .learners import GBTModel, LearnerSpec, evaluate, fit_gbt, kfold_accuracy

PI_CLIP = 1e-3
MIN_REGRET_TARGET = 50
GAP_EPS = 1e-12

DOMAIN_CLASSIFIER = LearnerSpec(kind="gbt", rounds=50, learning_rate=0.2, max_depth=3, min_leaf=1, min_weight_fraction=1e-3)
RISK_REGRESSOR = LearnerSpec(kind="gbt", rounds=100, learning_rate=0.3, max_depth=4, min_leaf=1, min_weight_fraction=1e-3)


def zero_one_losses(model, data: TabularDataset) -> np.ndarray:
    return (model.predict(data.features) != data.labels).astype(float)


def relative_regret(pair: DomainPair, learner: LearnerSpec, k: int = 4, seed: int = 0) -> float:
    """Target error of the source-trained model relative to the best in class.

    The best-in-class target error is estimated by k-fold on the target and
    capped at the source model's own target error (the source model belongs
    to the class), so the result is never negative. A perfect target model
    gives ``inf``.
    """
    if pair.target.n < MIN_REGRET_TARGET:
        raise DataError(f"target needs at least {MIN_REGRET_TARGET} rows for regret, got {pair.target.n}")
    f_p = learner.fit(pair.source)
    err = evaluate(f_p, pair.target, "zero_one")
    best = min(err, 1.0 - kfold_accuracy(pair.target, k, learner, seed))
    if best <= GAP_EPS:
        return math.inf
    return err / best - 1.0


def accuracy_decomposition(pair: DomainPair, model) -> tuple[float, float, float]:
    """``(source_acc, gap, target_acc)`` with ``gap = target_acc - source_acc``."""
    src = evaluate(model, pair.source, "accuracy")
    tgt = evaluate(model, pair.target, "accuracy")
    return src, tgt - src, tgt


@dataclass(frozen=True)
class SharedWeights:
    alpha_hat: float
    pi_model: GBTModel | None
    w_source: np.ndarray
    w_target: np.ndarray

    def __post_init__(self):
        for name in ("w_source", "w_target"):
            w = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(w)) or np.any(w < 0) or not np.any(w > 0):
                raise ValueError(f"{name} must be finite, non-negative and not all zero")
            w.flags.writeable = False
            object.__setattr__(self, name, w)

    def swapped(self) -> "SharedWeights":
        return SharedWeights(1.0 - self.alpha_hat, None, self.w_target, self.w_source)

    def lambdas(self, pair: DomainPair) -> tuple[np.ndarray, np.ndarray]:
        """Normalized shared-distribution weights on each side (each sums to 1)."""
        lp = self.w_source * pair.source.weights
        lq = self.w_target * pair.target.weights
        return lp / lp.sum(), lq / lq.sum()


def shared_weight_formula(pi, alpha):
    """``(w_P, w_Q)`` from the domain probability ``pi`` and target share ``alpha``."""
    pi = np.asarray(pi, dtype=float)
    den = (1 - alpha) * pi + alpha * (1 - pi)
    return pi / den, (1 - pi) / den


def fit_shared_weights(pair: DomainPair, classifier: LearnerSpec = DOMAIN_CLASSIFIER) -> SharedWeights:
    """Domain-classifier weights mapping each side onto the shared distribution."""
    if pair.source.n == 0 or pair.target.n == 0:
        raise DataError("both domains must be non-empty")
    pooled = TabularDataset(
        np.vstack([pair.source.features, pair.target.features]),
        np.concatenate([np.zeros(pair.source.n, int), np.ones(pair.target.n, int)]),
        np.concatenate([pair.source.weights, pair.target.weights]),
        pair.source.feature_names,
    )
    alpha = pair.target.n / pooled.n
    clf = classifier.fit(pooled)
    pi = np.clip(clf.predict_proba(pooled.features), PI_CLIP, 1 - PI_CLIP)
    wp, _ = shared_weight_formula(pi[: pair.source.n], alpha)
    _, wq = shared_weight_formula(pi[pair.source.n :], alpha)
    return SharedWeights(alpha, clf, wp, wq)


@dataclass(frozen=True)
class ShiftDecomposition:
    total_gap: float
    term_x_source: float
    term_yx: float
    term_x_target: float
    yx_ratio: float
    source_loss: float = math.nan
    target_loss: float = math.nan

    def __post_init__(self):
        parts = self.term_x_source + self.term_yx + self.term_x_target
        if abs(parts - self.total_gap) > 1e-9:
            raise ValueError(f"terms sum to {parts}, not the total gap {self.total_gap}")
        if abs(self.total_gap) > GAP_EPS and not math.isclose(self.yx_ratio, self.term_yx / self.total_gap, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("yx_ratio must equal term_yx / total_gap")

    @property
    def ratio_defined(self) -> bool:
        return not math.isnan(self.yx_ratio)

    def to_dict(self) -> dict:
        return {
            "total_gap": self.total_gap,
            "term_I": self.term_x_source,
            "term_II": self.term_yx,
            "term_III": self.term_x_target,
            "yx_ratio": self.yx_ratio if self.ratio_defined else None,
            "source_loss": self.source_loss,
            "target_loss": self.target_loss,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def to_csv(self, path) -> None:
        d = self.to_dict()
        cols = ["total_gap", "term_I", "term_II", "term_III", "yx_ratio"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            wr.writerow(["" if d[c] is None else repr(d[c]) for c in cols])


def disde(
    pair: DomainPair,
    model,
    classifier: LearnerSpec = DOMAIN_CLASSIFIER,
    risk: LearnerSpec = RISK_REGRESSOR,
    shared: SharedWeights | None = None,
) -> ShiftDecomposition:
    """Split the 0-1 loss gap of ``model`` into X-shift and Y|X-shift terms.

    Conditional risks are boosted regressions of the pointwise 0-1 loss on X
    within each domain. Pass ``shared`` to reuse precomputed weights.
    """
    src, tgt = pair.source, pair.target
    if shared is None:
        shared = fit_shared_weights(pair, classifier)
    lp, lq = shared.lambdas(pair)
    loss_p = zero_one_losses(model, src)
    loss_q = zero_one_losses(model, tgt)
    e_p = float(src.normalized_weights() @ loss_p)
    e_q = float(tgt.normalized_weights() @ loss_q)

    def fit_risk(data, losses):
        return fit_gbt(
            data,
            losses,
            risk.rounds,
            risk.learning_rate,
            risk.max_depth,
            risk.min_leaf,
            task="regression",
            min_weight_fraction=risk.min_weight_fraction,
        )

    r_p = fit_risk(src, loss_p)
    r_q = fit_risk(tgt, loss_q)

    def shared_mean(r):
        return 0.5 * float(lp @ r.predict(src.features)) + 0.5 * float(lq @ r.predict(tgt.features))

    s_p, s_q = shared_mean(r_p), shared_mean(r_q)
    t1, t2, t3 = s_p - e_p, s_q - s_p, e_q - s_q
    gap = e_q - e_p
    ratio = t2 / gap if abs(gap) > GAP_EPS else math.nan
    return ShiftDecomposition(gap, t1, t2, t3, ratio, e_p, e_q)
