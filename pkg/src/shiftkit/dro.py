"""Distributionally robust training of linear classifiers.

Every trainer builds a robust objective ``theta -> (value, subgradient)``
and hands it to the shared subgradient stepper from :mod:`shiftkit.learners`.
For reweighting-type sets the subgradient is the loss gradient under the
inner worst-case weights (Danskin); for Wasserstein sets the hinge-loss
reformulation is used directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .data import DataError, TabularDataset
from .learners import (
    LinearModel,
    TrainConfig,
    _check_trainable,
    fit_linear,
    linear_objective,
    margin_loss,
    signed_labels,
    subgradient_minimize,
)

F_KINDS = ("kl", "chi2", "tv", "cvar")
WASSERSTEIN_KINDS = ("wasserstein", "aug_wasserstein", "satisficing_wasserstein")
GROUP_KINDS = ("marginal_cvar", "conditional_gamma")
KINDS = F_KINDS + WASSERSTEIN_KINDS + GROUP_KINDS

MAX_GROUPS = 64
GAMMA_CAP = 1e6


@dataclass(frozen=True)
class AmbiguitySpec:
    """One ambiguity set.

    ``radius`` is the divergence budget for kl/chi2/tv and the transport
    budget for Wasserstein kinds. For ``cvar`` and ``marginal_cvar`` it is the
    level alpha in (0, 1]; for ``conditional_gamma`` it is Gamma >= 1.
    ``cost_scale`` holds the diagonal of the transport cost matrix; ``inf``
    marks a feature that cannot be perturbed.
    """

    kind: str
    radius: float = 0.0
    label_cost: float = 1.0
    target_ratio: float = 1.1
    cost_scale: tuple | None = None
    z_features: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ambiguity kind {self.kind!r}")
        r = float(self.radius)
        object.__setattr__(self, "radius", r)
        if math.isnan(r):
            raise ValueError("radius must be a number")
        if self.kind in ("cvar", "marginal_cvar"):
            if not 0 < r <= 1:
                raise ValueError(f"{self.kind} level alpha must lie in (0, 1], got {r}")
        elif self.kind == "conditional_gamma":
            if not r >= 1:
                raise ValueError(f"Gamma must be >= 1, got {r}")
        elif not (r >= 0 and math.isfinite(r)):
            raise ValueError(f"radius must be finite and >= 0, got {r}")
        if not self.label_cost > 0:
            raise ValueError("label_cost must be > 0")
        if not self.target_ratio > 1:
            raise ValueError("target_ratio must be > 1")
        if self.cost_scale is not None:
            v = tuple(float(x) for x in self.cost_scale)
            if any(math.isnan(x) or x < 0 for x in v):
                raise ValueError("cost_scale entries must be non-negative")
            object.__setattr__(self, "cost_scale", v)
        z = tuple(int(i) for i in self.z_features)
        object.__setattr__(self, "z_features", z)
        if self.kind in GROUP_KINDS and not z:
            raise ValueError(f"{self.kind} needs at least one z feature")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "radius": self.radius,
            "label_cost": self.label_cost,
            "target_ratio": self.target_ratio,
            "cost_scale": None if self.cost_scale is None else ["inf" if math.isinf(x) else x for x in self.cost_scale],
            "z_features": list(self.z_features),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AmbiguitySpec":
        d = dict(d)
        if d.get("cost_scale") is not None:
            d["cost_scale"] = tuple(float(x) for x in d["cost_scale"])
        d["z_features"] = tuple(d.get("z_features") or ())
        return cls(**d)


@dataclass(frozen=True)
class WorstCaseWeights:
    weights: np.ndarray
    attained_value: float
    dual: float = float("nan")

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


# --------------------------------------------------------------------------
# inner maximization
# --------------------------------------------------------------------------


def divergence(q, p, kind: str) -> float:
    """Divergence of ``q`` from ``p`` in the units of the kind's radius.

    For ``cvar`` this returns ``log max(q / p)``: the set ``q <= p / alpha``
    is then ``divergence <= log(1 / alpha)``.
    """
    q, p = np.asarray(q, float), np.asarray(p, float)
    if np.any((p == 0) & (q > 0)):
        return math.inf
    s = p > 0
    q, p = q[s], p[s]
    r = q / p
    if kind == "kl":
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(r > 0, r * np.log(r), 0.0)
        return float(p @ (t - r + 1))
    if kind == "chi2":
        return float(p @ (r - 1) ** 2)
    if kind == "tv":
        return float(p @ np.abs(r - 1))
    if kind == "cvar":
        return float(math.log(r.max()))
    raise ValueError(f"no divergence for kind {kind!r}")


def _check_inner(losses, base):
    losses = np.asarray(losses, dtype=float)
    p = np.asarray(base, dtype=float)
    if losses.ndim != 1 or losses.shape != p.shape or losses.size == 0:
        raise ValueError("losses and base weights must be equal-length vectors")
    if not np.all(np.isfinite(losses)):
        raise FloatingPointError("non-finite losses")
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ValueError("base weights must form a probability vector")
    return losses, p


def _cvar(losses, p, alpha):
    order = np.argsort(-losses, kind="stable")
    cap = p[order] / alpha
    before = np.concatenate(([0.0], np.cumsum(cap)[:-1]))
    take = np.clip(1.0 - before, 0.0, cap)
    q = np.empty_like(p)
    q[order] = take
    return q


def _tv(losses, p, eps):
    top = int(np.argmax(losses))
    delta = min(eps / 2.0, 1.0 - p[top])
    q = p.copy()
    if delta <= 0:
        return q
    order = np.argsort(losses, kind="stable")
    order = order[order != top]
    avail = p[order]
    before = np.concatenate(([0.0], np.cumsum(avail)[:-1]))
    removed = np.clip(delta - before, 0.0, avail)
    q[order] -= removed
    q[top] += removed.sum()
    return q


def _max_set(losses, p):
    lmax = losses[p > 0].max()
    top = (losses >= lmax) & (p > 0)
    return top, float(p[top].sum())


def _feasible_root(div, eps, lo, hi):
    """Smallest log-temperature in [lo, hi] whose divergence is within ``eps``."""
    f = lambda t: div(t) - eps
    if f(lo) <= 0:
        return lo
    t = brentq(f, lo, hi, xtol=1e-14, rtol=1e-15)
    while f(t) > 1e-12:
        t += 1e-12 * max(1.0, abs(t))
    return t


def _kl(losses, p, eps):
    top, pm = _max_set(losses, p)
    if pm >= 1 - 1e-15:
        return p.copy(), math.inf
    if eps >= -math.log(pm):
        return np.where(top, p / pm, 0.0), 0.0
    lmax = losses[top][0]

    def tilt(log_lam):
        t = p * np.exp((losses - lmax) / math.exp(log_lam))
        return t / t.sum()

    spread = lmax - losses[p > 0].min()
    t = _feasible_root(lambda u: divergence(tilt(u), p, "kl"), eps, math.log(spread * 1e-9), math.log(spread * 1e9))
    return tilt(t), math.exp(t)


def _chi2_solver(losses, p):
    """Return ``lam -> q`` with ``q = p (1 + (loss - eta) / lam)_+`` summing to one."""
    order = np.argsort(-losses, kind="stable")
    ls, ps = losses[order], p[order]
    cp, cpl = np.cumsum(ps), np.cumsum(ps * ls)
    nxt = np.append(ls[1:], -np.inf)
    pos = cp > 0
    safe = np.where(pos, cp, 1.0)

    def solve(lam):
        # eta - lam for each candidate active prefix; ls are shifted by lam too
        e = cpl / safe - lam / safe
        ok = pos & (e < ls) & (e >= nxt)
        k = int(np.argmax(ok)) if ok.any() else len(ls) - 1
        q = p * np.maximum(0.0, (losses - e[k]) / lam)
        return q / q.sum()

    return solve


def _chi2(losses, p, eps):
    top, pm = _max_set(losses, p)
    if pm >= 1 - 1e-15:
        return p.copy(), math.inf
    if eps >= (1 - pm) / pm:
        return np.where(top, p / pm, 0.0), 0.0
    mean = float(p @ losses)
    sd = math.sqrt(float(p @ (losses - mean) ** 2))
    solve = _chi2_solver(losses, p)
    t = _feasible_root(
        lambda u: divergence(solve(math.exp(u)), p, "chi2"), eps, math.log(sd * 1e-12), math.log(2 * sd / math.sqrt(eps))
    )
    lam = math.exp(t)
    return solve(lam), lam


def inner_worst_case(losses, base_weights, spec: AmbiguitySpec) -> WorstCaseWeights:
    """Exact maximizer of the weighted loss over an f-divergence ball.

    Solved per kind: CVaR fills the highest losses up to ``p / alpha``; TV
    moves up to ``eps / 2`` of mass from the lowest losses onto the largest;
    KL tilts ``p`` exponentially with the temperature found by bisection;
    chi-square uses ``q = p (1 + (loss - eta) / lam)_+`` with ``eta`` exact and
    ``lam`` bisected. ``dual`` carries the temperature/multiplier when one
    exists.
    """
    if spec.kind not in F_KINDS:
        raise ValueError(f"inner_worst_case supports {F_KINDS}, got {spec.kind!r}")
    losses, p = _check_inner(losses, base_weights)
    eps = spec.radius
    lam = math.nan
    if spec.kind == "cvar":
        q = p.copy() if eps == 1 else _cvar(losses, p, eps)
    elif eps == 0:
        q = p.copy()
    elif spec.kind == "tv":
        q = _tv(losses, p, eps)
    elif spec.kind == "kl":
        q, lam = _kl(losses, p, eps)
    else:
        q, lam = _chi2(losses, p, eps)
    return WorstCaseWeights(q, float(q @ losses), lam)


# --------------------------------------------------------------------------
# objectives
# --------------------------------------------------------------------------


def group_index(X: np.ndarray, z_features, labels=None) -> np.ndarray:
    """Integer id of each row's distinct Z tuple (optionally with the label)."""
    if any(j < 0 or j >= X.shape[1] for j in z_features):
        raise DataError("z feature index out of range")
    Z = X[:, list(z_features)]
    if labels is not None:
        Z = np.column_stack([Z, labels])
    _, inv = np.unique(Z, axis=0, return_inverse=True)
    inv = inv.ravel()
    if inv.max() + 1 > MAX_GROUPS:
        raise DataError(f"Z has {inv.max() + 1} distinct values; at most {MAX_GROUPS} allowed (bin it first)")
    return inv


def _marginal_reweigh(groups, p, alpha):
    G = groups.max() + 1
    mass = np.bincount(groups, weights=p, minlength=G)
    spec = AmbiguitySpec("cvar", alpha)
    keep = mass > 0

    def reweigh(losses):
        if alpha == 1:
            return float(p @ losses), p
        gl = np.bincount(groups, weights=p * losses, minlength=G)[keep] / mass[keep]
        Q = np.zeros(G)
        Q[keep] = inner_worst_case(gl, mass[keep] / mass[keep].sum(), spec).weights
        q = p * (Q / np.where(keep, mass, 1.0))[groups]
        return float(q @ losses), q

    return reweigh


def conditional_ratios(cell_losses: np.ndarray, cond_mass: np.ndarray, gamma: float) -> np.ndarray:
    """Worst per-label density ratios inside one Z cell.

    ``cell_losses`` and ``cond_mass`` are indexed by label. The higher-loss
    label receives the largest ratio allowed by both the band ``[1/gamma,
    gamma]`` and the requirement that the conditional stays a distribution.
    """
    r = np.ones(2)
    if gamma == 1 or np.any(cond_mass <= 0) or cell_losses[0] == cell_losses[1]:
        return r
    w = int(np.argmax(cell_losses))
    o = 1 - w
    rw = min(gamma, (1.0 - cond_mass[o] / gamma) / cond_mass[w])
    r[w] = rw
    r[o] = (1.0 - cond_mass[w] * rw) / cond_mass[o]
    return r


def _conditional_reweigh(groups, y, p, gamma):
    gamma = min(gamma, GAMMA_CAP)
    G = groups.max() + 1
    cell = groups * 2 + y
    mass = np.bincount(cell, weights=p, minlength=2 * G).reshape(G, 2)
    zmass = mass.sum(axis=1, keepdims=True)
    cond = mass / np.where(zmass > 0, zmass, 1.0)

    def reweigh(losses):
        if gamma == 1:
            return float(p @ losses), p
        tot = np.bincount(cell, weights=p * losses, minlength=2 * G).reshape(G, 2)
        mean = np.divide(tot, mass, out=np.zeros_like(tot), where=mass > 0)
        ratio = np.array([conditional_ratios(mean[g], cond[g], gamma) for g in range(G)])
        q = p * ratio.reshape(-1)[cell]
        return float(q @ losses), q

    return reweigh


def _inverse_scale(spec: AmbiguitySpec, d: int):
    v = np.ones(d) if spec.cost_scale is None else np.asarray(spec.cost_scale, dtype=float)
    if v.shape != (d,):
        raise DataError(f"cost_scale has length {v.shape[0]}, data has {d} features")
    if np.any(v == 0):
        raise ValueError("cost_scale entries must be strictly positive (use inf to freeze a feature)")
    keep = np.flatnonzero(np.isfinite(v))
    return keep, 1.0 / v[keep]


def dual_norm_penalty(radius: float, features: np.ndarray, inv_scale: np.ndarray):
    """``radius * sqrt(sum_{j in features} inv_scale_j * w_j^2)`` and a subgradient."""
    features = np.asarray(features, dtype=np.int64)
    inv_scale = np.asarray(inv_scale, dtype=float)

    def penalty(w):
        g = np.zeros_like(w)
        if radius == 0 or features.size == 0:
            return 0.0, g
        ws = w[features]
        nrm = math.sqrt(float(inv_scale @ (ws * ws)))
        if nrm > 0:
            g[features] = radius * inv_scale * ws / nrm
        return radius * nrm, g

    return penalty


def _aug_objective(data: TabularDataset, radius, kappa, features, inv_scale, l2):
    X, s = data.features, signed_labels(data.labels)
    p = data.normalized_weights()
    dn = dual_norm_penalty(1.0, features, inv_scale)

    def fun(theta):
        w, b = theta[:-1], theta[-1]
        m = s * (X @ w + b)
        l, dl = margin_loss(m, "hinge")
        lf, dlf = margin_loss(-m, "hinge")
        nrm, gn = dn(w)
        brk = (lf - l) / kappa
        lam, budget = nrm, radius / kappa
        above = brk > nrm
        if p[above].sum() > budget:
            # smallest breakpoint past the norm where the flipped mass fits the budget
            order = np.argsort(brk, kind="stable")
            bs, cp = brk[order], np.cumsum(p[order])
            cand = np.unique(bs[bs > nrm])
            W = cp[-1] - cp[np.searchsorted(bs, cand, side="right") - 1]
            lam = float(cand[np.flatnonzero(W <= budget)[0]])
        flip = brk > lam
        val = lam * radius + float(p @ np.where(flip, lf - lam * kappa, l))
        mu = 0.0
        if lam == nrm:
            mu = max(0.0, radius - kappa * float(p[above].sum()))
        coef = p * np.where(flip, -dlf, dl) * s
        g = np.empty_like(theta)
        g[:-1] = X.T @ coef + l2 * w + mu * gn
        g[-1] = coef.sum()
        val += 0.5 * l2 * float(w @ w)
        return val, g

    return fun


def robust_objective_fn(data: TabularDataset, spec: AmbiguitySpec, cfg: TrainConfig, loss_kind: str = "hinge"):
    """Robust training objective of ``spec`` as ``theta -> (value, subgradient)``."""
    kind = spec.kind
    if kind in WASSERSTEIN_KINDS:
        if loss_kind != "hinge":
            raise ValueError("Wasserstein reformulation requires hinge loss")
        features, inv = _inverse_scale(spec, data.d)
        if kind == "aug_wasserstein":
            return _aug_objective(data, spec.radius, spec.label_cost, features, inv, cfg.l2)
        return linear_objective(data, "hinge", cfg.l2, penalty=dual_norm_penalty(spec.radius, features, inv))
    p = data.normalized_weights()
    if kind in F_KINDS:
        def reweigh(losses):
            wc = inner_worst_case(losses, p, spec)
            return wc.attained_value, wc.weights
    elif kind == "marginal_cvar":
        reweigh = _marginal_reweigh(group_index(data.features, spec.z_features), p, spec.radius)
    else:
        reweigh = _conditional_reweigh(group_index(data.features, spec.z_features), data.labels, p, spec.radius)
    return linear_objective(data, loss_kind, cfg.l2, reweigh=reweigh)


def robust_objective(model: LinearModel, data: TabularDataset, spec: AmbiguitySpec, cfg: TrainConfig = TrainConfig()) -> float:
    fun = robust_objective_fn(data, spec, cfg, model.loss_kind)
    return fun(np.append(model.coefficients, model.intercept))[0]


def is_trivial(spec: AmbiguitySpec, d: int) -> bool:
    """True when the ambiguity set is the empirical distribution alone."""
    if spec.kind in ("cvar", "marginal_cvar", "conditional_gamma"):
        return spec.radius == 1
    if spec.kind in WASSERSTEIN_KINDS:
        return spec.radius == 0 or _inverse_scale(spec, d)[0].size == 0
    return spec.radius == 0


def _erm_theta(data, cfg, loss_kind, erm=None):
    if erm is None:
        erm = fit_linear(data, cfg, loss_kind)
    return erm, np.append(erm.coefficients, erm.intercept)


def _restricted_theta(data, cfg, features):
    """Hinge ERM with the coefficients of ``features`` held at zero."""
    X = np.array(data.features)
    X[:, features] = 0.0
    m = fit_linear(TabularDataset(X, data.labels, data.weights, data.feature_names), cfg, "hinge")
    theta = np.append(m.coefficients, m.intercept)
    theta[features] = 0.0
    return theta


def _solve(fun, data, cfg, loss_kind, erm=None, screen=None, degenerate=False) -> LinearModel:
    """Subgradient descent from zero plus candidate points.

    The ERM solution is always a candidate, so the result is never worse
    than ERM under the robust objective. For a norm penalty on ``screen``
    features, the restricted solution with those coefficients at zero is a
    second candidate: it covers optima sitting on the penalty's kink, where
    plain subgradient steps converge slowly.
    """
    theta, val, hist = subgradient_minimize(fun, np.zeros(data.d + 1), cfg)
    cands = [_erm_theta(data, cfg, loss_kind, erm)[1]]
    if screen is not None and len(screen):
        cands.append(_restricted_theta(data, cfg, screen))
    for c in cands:
        cv = fun(c)[0]
        if cv < val:
            theta, val = c, cv
            hist = hist + (val,)
    return LinearModel(theta[:-1], theta[-1], loss_kind, val, hist, degenerate)


def _train(data, spec, cfg, loss_kind, degenerate=False, erm=None) -> LinearModel:
    """Minimize the robust objective; a trivial ambiguity set returns ERM."""
    _check_trainable(data)
    fun = robust_objective_fn(data, spec, cfg, loss_kind)
    if is_trivial(spec, data.d):
        return replace(_erm_theta(data, cfg, loss_kind, erm)[0], degenerate=degenerate)
    screen = _inverse_scale(spec, data.d)[0] if spec.kind in WASSERSTEIN_KINDS else None
    return _solve(fun, data, cfg, loss_kind, erm, screen, degenerate)


# --------------------------------------------------------------------------
# public trainers
# --------------------------------------------------------------------------


def train_f_dro(data: TabularDataset, spec: AmbiguitySpec, cfg: TrainConfig = TrainConfig(), loss_kind: str = "hinge") -> LinearModel:
    if spec.kind not in F_KINDS:
        raise ValueError(f"train_f_dro supports {F_KINDS}, got {spec.kind!r}")
    return _train(data, spec, cfg, loss_kind)


def train_wasserstein(
    data: TabularDataset, spec: AmbiguitySpec, cfg: TrainConfig = TrainConfig(), loss_kind: str = "hinge", erm=None
) -> LinearModel:
    """Hinge-loss Wasserstein DRO with diagonal Mahalanobis transport cost.

    The robust problem equals the empirical hinge loss plus ``radius`` times
    ``sqrt(sum_j w_j^2 / v_j)`` over perturbable features. Features with
    ``v_j = inf`` drop out of the penalty; if none remain the model is plain
    ERM and ``degenerate`` is set. ``erm`` optionally supplies a precomputed
    ERM solution.
    """
    if spec.kind not in ("wasserstein", "aug_wasserstein"):
        raise ValueError(f"train_wasserstein supports wasserstein kinds, got {spec.kind!r}")
    if loss_kind != "hinge":
        raise ValueError("Wasserstein reformulation requires hinge loss")
    features, _ = _inverse_scale(spec, data.d)
    degenerate = features.size == 0 and spec.radius > 0
    return _train(data, spec, cfg, "hinge", degenerate, erm)


def fit_penalized_hinge(
    data: TabularDataset, radius: float, features, inv_scale, cfg: TrainConfig = TrainConfig()
) -> LinearModel:
    """Hinge ERM plus an explicit dual-norm penalty on the listed features.

    Runs the same solver and candidates as :func:`train_wasserstein`.
    """
    _check_trainable(data)
    features = np.asarray(features, dtype=np.int64)
    fun = linear_objective(data, "hinge", cfg.l2, penalty=dual_norm_penalty(radius, features, inv_scale))
    if radius == 0 or features.size == 0:
        return fit_linear(data, cfg, "hinge")
    return _solve(fun, data, cfg, "hinge", screen=features)


@dataclass(frozen=True)
class SatisficingResult:
    model: LinearModel
    achieved_radius: float
    target: float
    evaluations: tuple = field(default=(), repr=False)


def train_satisficing(
    data: TabularDataset,
    target_ratio: float,
    cfg: TrainConfig = TrainConfig(),
    cost_scale=None,
    upper: float = 100.0,
    width: float = 1e-3,
) -> SatisficingResult:
    """Largest Wasserstein radius whose robust optimum stays below a target.

    The target is ``target_ratio`` times the ERM optimum. The radius is found
    by halving ``[0, upper]`` until the bracket is narrower than ``width``.
    """
    if not target_ratio > 1:
        raise ValueError("target_ratio must be > 1")
    erm = fit_linear(data, cfg, "hinge")
    tau = target_ratio * erm.objective
    evals = []

    def solve(eps):
        m = train_wasserstein(data, AmbiguitySpec("wasserstein", eps, cost_scale=cost_scale), cfg, erm=erm)
        evals.append((eps, m.objective))
        return m

    top = solve(upper)
    if top.objective <= tau:
        return SatisficingResult(top, upper, tau, tuple(evals))
    lo, hi, best = 0.0, upper, erm
    while hi - lo >= width:
        mid = 0.5 * (lo + hi)
        m = solve(mid)
        if m.objective <= tau:
            lo, best = mid, m
        else:
            hi = mid
    return SatisficingResult(best, lo, tau, tuple(evals))


def train_marginal_dro(data: TabularDataset, z_features, alpha: float, cfg: TrainConfig = TrainConfig(), loss_kind: str = "hinge") -> LinearModel:
    """CVaR at level ``alpha`` over the mean losses of the distinct Z groups."""
    return _train(data, AmbiguitySpec("marginal_cvar", alpha, z_features=tuple(z_features)), cfg, loss_kind)


def train_conditional_dro(data: TabularDataset, z_features, gamma: float, cfg: TrainConfig = TrainConfig(), loss_kind: str = "hinge") -> LinearModel:
    """Worst case over label conditionals banded in ``[1/gamma, gamma]`` per Z cell."""
    return _train(data, AmbiguitySpec("conditional_gamma", gamma, z_features=tuple(z_features)), cfg, loss_kind)


def train(data: TabularDataset, spec: AmbiguitySpec | None, cfg: TrainConfig = TrainConfig(), loss_kind: str = "hinge") -> LinearModel:
    """Dispatch on ``spec.kind``; ``None`` means ERM."""
    if spec is None:
        return fit_linear(data, cfg, loss_kind)
    if spec.kind in F_KINDS:
        return train_f_dro(data, spec, cfg, loss_kind)
    if spec.kind in ("wasserstein", "aug_wasserstein"):
        return train_wasserstein(data, spec, cfg, loss_kind)
    if spec.kind == "satisficing_wasserstein":
        return train_satisficing(data, spec.target_ratio, cfg, spec.cost_scale).model
    if spec.kind == "marginal_cvar":
        return train_marginal_dro(data, spec.z_features, spec.radius, cfg, loss_kind)
    return train_conditional_dro(data, spec.z_features, spec.radius, cfg, loss_kind)


def rescale_radius(spec: AmbiguitySpec) -> float:
    """Common-scale radius used when comparing ambiguity sizes across kinds."""
    k, r = spec.kind, spec.radius
    if k in WASSERSTEIN_KINDS:
        return math.sqrt(r)
    if k == "tv":
        return r
    if k == "cvar":
        return math.log(1.0 / r)
    if k in ("kl", "chi2"):
        return 2.0 * r
    raise ValueError(f"no radius rescaling defined for {k!r}")
