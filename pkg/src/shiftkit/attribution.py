"""OLS attribution of method accuracy to design components.

A table of run records (one per trained configuration and target domain) is
aggregated under one of two designs, turned into a dummy-coded design
matrix with setting/domain fixed effects, and fit by least squares.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .data import DataError
from .dro import AmbiguitySpec, rescale_radius

MODEL_CLASSES = ("linear", "xgb", "nn")
VALIDATION_TYPES = ("in_dist", "target_probe", "average_case", "worst_case")
DISTANCE_DUMMIES = {
    "wasserstein": "Wasserstein",
    "aug_wasserstein": "Wasserstein",
    "satisficing_wasserstein": "Wasserstein",
    "chi2": "Chi-squared",
    "kl": "Kullback-Leibler",
    "tv": "Total Variation",
    "cvar": "CVaR",
}
DESIGNS = ("best_config", "worst_domain")


class CollinearityError(DataError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("collinear design columns: " + ", ".join(self.columns))


@dataclass(frozen=True)
class RunRecord:
    setting_id: str
    domain_id: str
    method_id: str
    config_id: str
    model_class: str
    ambiguity_kind: str | None
    raw_radius: float
    validation_type: str
    yx_ratio: float
    target_accuracy: float
    source_accuracy: float

    def __post_init__(self):
        if self.model_class not in MODEL_CLASSES:
            raise DataError(f"unknown model class {self.model_class!r}")
        if self.validation_type not in VALIDATION_TYPES:
            raise DataError(f"unknown validation type {self.validation_type!r}")
        kind = self.ambiguity_kind or None
        if kind is not None and kind not in DISTANCE_DUMMIES:
            raise DataError(f"ambiguity kind {kind!r} has no attribution coding")
        object.__setattr__(self, "ambiguity_kind", kind)
        for name in ("target_accuracy", "source_accuracy"):
            v = float(getattr(self, name))
            if not 0 <= v <= 1:
                raise DataError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)

    @property
    def radius(self) -> float:
        if self.ambiguity_kind is None:
            return 0.0
        return rescale_radius(AmbiguitySpec(self.ambiguity_kind, self.raw_radius))


@dataclass(frozen=True)
class Design:
    X: np.ndarray
    y: np.ndarray
    names: tuple
    rows: tuple = field(repr=False)


def _select(records, design):
    groups: dict = {}
    for r in records:
        if design == "best_config":
            key = (r.setting_id, r.domain_id, r.method_id)
            better = lambda new, old: new.target_accuracy > old.target_accuracy
        else:
            key = (r.setting_id, r.method_id, r.config_id)
            better = lambda new, old: new.target_accuracy < old.target_accuracy
        if key not in groups or better(r, groups[key]):
            groups[key] = r
    return [groups[k] for k in sorted(groups)]


def _levels(values):
    return sorted(set(values), key=str)


def build_design(
    records,
    design: str = "best_config",
    dependent: str = "target_accuracy",
    radius_squared: bool = False,
    class_ratio: bool = False,
    fixed_effects: bool = True,
) -> Design:
    """Aggregate records and build the regression design.

    ``best_config`` keeps the top-accuracy configuration per (setting,
    domain, method); ``worst_domain`` keeps the lowest-accuracy domain per
    (setting, method, config). Regressors: intercept, model-class and
    distance dummies (reference: linear ERM), rescaled radius, and setting
    fixed effects; ``best_config`` adds the Y|X ratio, validation-type dummies
    and domain fixed effects. Dummies for levels absent from the table are
    left out.
    """
    records = list(records)
    if not records:
        raise DataError("no run records")
    if design not in DESIGNS:
        raise ValueError(f"design must be one of {DESIGNS}")
    if dependent not in ("target_accuracy", "performance_gap"):
        raise ValueError("dependent must be target_accuracy or performance_gap")
    rows = _select(records, design)
    best = design == "best_config"
    cols: dict[str, list] = {"Intercept": [1.0] * len(rows)}
    for cls, label in (("xgb", "XGB"), ("nn", "NN")):
        if any(r.model_class == cls for r in rows):
            cols[label] = [float(r.model_class == cls) for r in rows]
    for label in dict.fromkeys(DISTANCE_DUMMIES.values()):
        if any(DISTANCE_DUMMIES.get(r.ambiguity_kind) == label for r in rows):
            cols[label] = [float(DISTANCE_DUMMIES.get(r.ambiguity_kind) == label) for r in rows]
    radius = [r.radius for r in rows]
    cols["Radius"] = radius
    if radius_squared:
        cols["Radius^2"] = [v * v for v in radius]
    if best:
        ratio = [float(r.yx_ratio) for r in rows]
        if not all(math.isfinite(v) for v in ratio):
            raise DataError("best_config design needs a finite Y|X ratio on every record")
        cols["Y|X-ratio"] = ratio
        if class_ratio:
            for cls, label in (("xgb", "XGB-Y|X-ratio"), ("nn", "NN-Y|X-ratio")):
                if label.split("-")[0] in cols:
                    cols[label] = [v * (r.model_class == cls) for v, r in zip(ratio, rows)]
        for vt, label in (("target_probe", "Target-probe"), ("average_case", "Average-case"), ("worst_case", "Worst-case")):
            if any(r.validation_type == vt for r in rows):
                cols[label] = [float(r.validation_type == vt) for r in rows]
    if fixed_effects:
        for lvl in _levels(r.setting_id for r in rows)[1:]:
            cols[f"setting[{lvl}]"] = [float(r.setting_id == lvl) for r in rows]
        if best:
            for lvl in _levels(r.domain_id for r in rows)[1:]:
                cols[f"domain[{lvl}]"] = [float(r.domain_id == lvl) for r in rows]
    if dependent == "target_accuracy":
        y = np.array([r.target_accuracy for r in rows])
    else:
        y = np.array([r.target_accuracy - r.source_accuracy for r in rows])
    names = tuple(cols)
    X = np.column_stack([np.asarray(cols[c], dtype=float) for c in names])
    return Design(X, y, names, tuple(rows))


@dataclass(frozen=True)
class OLSResult:
    names: tuple
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    n: int
    rank: int
    r2: float
    adjusted_r2: float
    dropped: tuple = ()
    residuals: np.ndarray = field(default=None, repr=False)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def to_dict(self) -> dict:
        num = lambda v: None if not math.isfinite(v) else float(v)
        return {
            "n": self.n,
            "rank": self.rank,
            "r2": num(self.r2),
            "adjusted_r2": num(self.adjusted_r2),
            "dropped": list(self.dropped),
            "coefficients": {
                nm: {
                    "estimate": num(c),
                    "std_error": num(s),
                    "t": num(t),
                    "p": num(p),
                }
                for nm, c, s, t, p in zip(self.names, self.coefficients, self.standard_errors, self.t_stats, self.p_values)
            },
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def table(self) -> str:
        """Plain-text coefficient table; stars mark two-sided p < .10/.05/.01."""
        w = max(len(n) for n in self.names)
        lines = [f"{'':{w}}  {'coef':>9}  {'se':>9}", "-" * (w + 22)]
        for nm, c, s, p in zip(self.names, self.coefficients, self.standard_errors, self.p_values):
            stars = "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.1 else ""
            lines.append(f"{nm:{w}}  {c:9.4f}  {s:9.4f} {stars}")
        lines.append("-" * (w + 22))
        lines.append(f"N = {self.n}   adj. R2 = {self.adjusted_r2:.4f}")
        if self.dropped:
            lines.append("dropped (collinear): " + ", ".join(self.dropped))
        return "\n".join(lines)


def fit_ols(X, y, names=None, drop_collinear: bool = False, tol: float = 1e-10) -> OLSResult:
    """Least squares by column-pivoted QR with classical standard errors.

    Columns whose pivoted ``R`` diagonal falls below ``tol`` times the largest
    are collinear with earlier ones. They raise :class:`CollinearityError`
    unless ``drop_collinear``, in which case they are removed and listed in
    ``dropped``. Degrees of freedom are ``n - rank``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(k))
    if y.shape != (n,) or len(names) != k:
        raise DataError("design, response and names disagree in size")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("design and response must be finite")
    _, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * diag.max())) if diag.size and diag.max() > 0 else 0
    bad = sorted(piv[rank:].tolist())
    if bad and not drop_collinear:
        raise CollinearityError([names[j] for j in bad])
    keep = [j for j in range(k) if j not in set(bad)]
    if n < len(keep):
        raise DataError(f"{n} rows for {len(keep)} columns")
    Xk = X[:, keep]
    Q, R = linalg.qr(Xk, mode="economic")
    beta = linalg.solve_triangular(R, Q.T @ y)
    resid = y - Xk @ beta
    dof = n - len(keep)
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    if dof > 0:
        sigma2 = rss / dof
        Rinv = linalg.solve_triangular(R, np.eye(len(keep)))
        se = np.sqrt(sigma2 * np.sum(Rinv**2, axis=1))
        adj = 1.0 - (1.0 - r2) * (n - 1) / dof
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(se > 0, beta / se, np.where(beta == 0, 0.0, np.inf * np.sign(beta)))
        p = 2 * stats.t.sf(np.abs(t), dof)
    else:
        se = t = p = np.full(len(keep), np.nan)
        adj = math.nan
    return OLSResult(
        tuple(names[j] for j in keep), beta, se, t, p, n, len(keep), r2, adj, tuple(names[j] for j in bad), resid
    )


def _blank_float(v, default=math.nan):
    return default if v in (None, "") else float(v)


def read_records_csv(path, ratios: dict | None = None) -> list[RunRecord]:
    """Load run records from a results CSV, skipping rows with an error tag.

    The Y|X ratio comes from a ``yx_ratio`` column when present, otherwise
    from ``ratios[(setting_id, domain_id)]``.
    """
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row.get("error_tag"):
                continue
            key = (row["setting_id"], row["domain_id"])
            ratio = _blank_float(row.get("yx_ratio"))
            if math.isnan(ratio) and ratios is not None and key in ratios:
                ratio = float(ratios[key])
            out.append(
                RunRecord(
                    row["setting_id"],
                    row["domain_id"],
                    row["method_id"],
                    row["config_id"],
                    row["model_class"],
                    row.get("ambiguity_kind") or None,
                    _blank_float(row.get("raw_radius"), 0.0),
                    row.get("validation_type") or "in_dist",
                    ratio,
                    float(row["target_acc"]),
                    float(row["source_acc"]),
                )
            )
    return out


def read_ratios_csv(path) -> dict:
    with open(path, newline="") as fh:
        return {(r["setting_id"], r["domain_id"]): float(r["yx_ratio"]) for r in csv.DictReader(fh)}
