"""Tabular containers, CSV ingestion, balancing baselines and synthetic shifts.

All random draws go through :func:`make_rng`, which returns a numpy
``Generator`` backed by the 64-bit PCG64 bit generator. Outputs are therefore
bit-reproducible for a given seed across platforms.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TabularDataset:
    """Weighted feature matrix with binary labels.

    Parameters
    ----------
    features : array-like, shape (n, d)
    labels : array-like, shape (n,)
        Values in {0, 1}.
    weights : array-like, shape (n,), optional
        Non-negative instance weights; defaults to ones.
    feature_names : sequence of str, optional
        Defaults to ``x1, ..., xd``.
    """

    features: np.ndarray
    labels: np.ndarray
    weights: np.ndarray = None
    feature_names: tuple = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        n, d = X.shape
        y = np.asarray(self.labels)
        if y.shape != (n,):
            raise DataError(f"labels length {y.shape} does not match {n} rows")
        if n and not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0/1")
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (n,):
            raise DataError(f"weights length {w.shape} does not match {n} rows")
        if not np.all(np.isfinite(X)):
            raise DataError("feature values must be finite")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DataError("weights must be finite and non-negative")
        if n and not np.any(w > 0):
            raise DataError("weights must not all be zero")
        names = self.feature_names
        names = tuple(f"x{j + 1}" for j in range(d)) if names is None else tuple(str(s) for s in names)
        if len(names) != d:
            raise DataError(f"{len(names)} feature names for {d} columns")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def column(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f"unknown feature {name!r}") from None

    def with_weights(self, weights) -> "TabularDataset":
        return TabularDataset(self.features, self.labels, weights, self.feature_names)

    def with_labels(self, labels) -> "TabularDataset":
        return TabularDataset(self.features, labels, self.weights, self.feature_names)

    def take(self, idx) -> "TabularDataset":
        idx = np.asarray(idx)
        return TabularDataset(self.features[idx], self.labels[idx], self.weights[idx], self.feature_names)

    def normalized_weights(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    @staticmethod
    def concat(parts: Sequence["TabularDataset"]) -> "TabularDataset":
        names = parts[0].feature_names
        for p in parts[1:]:
            if p.feature_names != names:
                raise DataError("cannot concatenate datasets with different columns")
        return TabularDataset(
            np.vstack([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.weights for p in parts]),
            names,
        )


@dataclass(frozen=True)
class DomainPair:
    source: TabularDataset
    target: TabularDataset
    target_probe: TabularDataset | None = None

    def __post_init__(self):
        for other in (self.target, self.target_probe):
            if other is not None and other.feature_names != self.source.feature_names:
                raise DataError("source and target columns differ")

    def swapped(self) -> "DomainPair":
        return DomainPair(self.target, self.source)


@dataclass(frozen=True)
class SplitSpec:
    kind: str = "k_fold"
    value: float = 4
    seed: int = 0

    def __post_init__(self):
        if self.kind == "holdout_fraction":
            if not 0 < self.value < 1:
                raise DataError("holdout fraction must lie strictly between 0 and 1")
        elif self.kind == "k_fold":
            if int(self.value) != self.value or self.value < 2:
                raise DataError("k must be an integer >= 2")
        else:
            raise DataError(f"unknown split kind {self.kind!r}")


def fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Random partition of ``range(n)`` into ``k`` folds of near-equal size."""
    if k < 2:
        raise DataError("k must be >= 2")
    if k > n:
        raise DataError(f"k={k} exceeds the number of rows ({n})")
    perm = make_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def holdout_split(data: TabularDataset, fraction: float, seed: int) -> tuple[TabularDataset, TabularDataset]:
    SplitSpec("holdout_fraction", fraction, seed)
    perm = make_rng(seed).permutation(data.n)
    n_hold = max(1, int(round(fraction * data.n)))
    if n_hold >= data.n:
        raise DataError("holdout leaves no training rows")
    return data.take(np.sort(perm[n_hold:])), data.take(np.sort(perm[:n_hold]))


def load_csv(path, label_column: str) -> TabularDataset:
    """Read a headered CSV into a dataset with unit weights.

    The label column must hold exactly two distinct values; they are mapped to
    0 and 1 by sorted order (numerically when both parse as numbers).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path} is empty")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    if not body:
        raise DataError(f"{path} has a header but no rows")
    if label_column not in header:
        raise DataError(f"label column {label_column!r} not in header")
    li = header.index(label_column)
    names = [h for j, h in enumerate(header) if j != li]
    X = np.empty((len(body), len(names)))
    raw_labels = []
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"row {i + 2} has {len(row)} fields, expected {len(header)}")
        raw_labels.append(row[li].strip())
        vals = [c for j, c in enumerate(row) if j != li]
        for j, cell in enumerate(vals):
            cell = cell.strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"non-numeric value {cell!r} in column {names[j]!r}, row {i + 2}") from None
            if not math.isfinite(v):
                raise DataError(f"missing or non-finite value in column {names[j]!r}, row {i + 2}")
            X[i, j] = v
    distinct = sorted(set(raw_labels), key=_label_sort_key)
    if len(distinct) > 2:
        raise DataError(f"label column has {len(distinct)} distinct values; expected 2")
    if len(distinct) == 0 or "" in distinct:
        raise DataError("label column has missing values")
    mapping = {v: i for i, v in enumerate(distinct)}
    y = np.array([mapping[v] for v in raw_labels])
    return TabularDataset(X, y, None, names)


def _label_sort_key(v: str):
    try:
        return (0, float(v), v)
    except ValueError:
        return (1, 0.0, v)


def write_csv(data: TabularDataset, path, label_column: str = "y") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(data.feature_names) + [label_column])
        for row, lab in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def _balance(data: TabularDataset, groups: np.ndarray, mode: str, seed: int, what: str) -> TabularDataset:
    values = np.unique(groups)
    if len(values) < 2:
        raise DataError(f"balancing needs two {what} values, found {len(values)}")
    if len(values) > 2:
        raise DataError(f"{what} must be binary, found {len(values)} values")
    if mode == "reweight":
        w = data.weights.copy()
        half = data.n / 2.0
        for v in values:
            m = groups == v
            w[m] = data.weights[m] * (half / data.weights[m].sum())
        return data.with_weights(w)
    if mode == "subsample":
        rng = make_rng(seed)
        idx = [np.flatnonzero(groups == v) for v in values]
        size = min(len(i) for i in idx)
        keep = np.sort(np.concatenate([rng.choice(i, size=size, replace=False) for i in idx]))
        out = data.take(keep)
        return out.with_weights(np.ones(out.n))
    raise DataError(f"unknown balancing mode {mode!r}")


def balance_by_label(data: TabularDataset, mode: str = "reweight", seed: int = 0) -> TabularDataset:
    """Equalize the two outcome classes.

    ``reweight`` rescales weights so each class carries total weight ``n/2``;
    ``subsample`` draws the majority class down to the minority size without
    replacement and resets weights to one.
    """
    return _balance(data, data.labels, mode, seed, "label")


def balance_by_group(data: TabularDataset, group_column: str, mode: str = "reweight", seed: int = 0) -> TabularDataset:
    return _balance(data, data.features[:, data.column(group_column)], mode, seed, "group")


@dataclass(frozen=True)
class Region:
    """Conjunction of half-open intervals ``low <= x[feature] < high``.

    Features absent from ``constraints`` are unconstrained.
    """

    constraints: tuple = ()
    discrepancy: float = float("nan")
    support_share: float = float("nan")
    feature_names: tuple = field(default=None, compare=False)

    def __post_init__(self):
        cons = []
        for f, lo, hi in self.constraints:
            f, lo, hi = int(f), float(lo), float(hi)
            if f < 0:
                raise DataError("negative feature index in region")
            if not lo < hi:
                raise DataError(f"empty interval [{lo}, {hi}) for feature {f}")
            cons.append((f, lo, hi))
        object.__setattr__(self, "constraints", tuple(sorted(cons)))

    def contains(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        mask = np.ones(X.shape[0], dtype=bool)
        for f, lo, hi in self.constraints:
            mask &= (X[:, f] >= lo) & (X[:, f] < hi)
        return mask

    def box(self, d: int, bounds=(0.0, 1.0)) -> np.ndarray:
        """Interval per feature, clipped to ``bounds``; shape (d, 2)."""
        out = np.tile(np.asarray(bounds, dtype=float), (d, 1))
        for f, lo, hi in self.constraints:
            out[f, 0] = max(out[f, 0], lo)
            out[f, 1] = min(out[f, 1], hi)
        return out

    def jaccard(self, other: "Region", d: int, bounds=(0.0, 1.0)) -> float:
        """Volume Jaccard index of two regions inside the cube ``bounds^d``."""
        a, b = self.box(d, bounds), other.box(d, bounds)
        vol_a = np.prod(np.clip(a[:, 1] - a[:, 0], 0, None))
        vol_b = np.prod(np.clip(b[:, 1] - b[:, 0], 0, None))
        inter = np.prod(np.clip(np.minimum(a[:, 1], b[:, 1]) - np.maximum(a[:, 0], b[:, 0]), 0, None))
        union = vol_a + vol_b - inter
        return float(inter / union) if union > 0 else 0.0

    def rule(self, feature_names=None) -> str:
        names = feature_names or self.feature_names
        parts = []
        for f, lo, hi in self.constraints:
            name = names[f] if names else f"x{f + 1}"
            if math.isinf(lo):
                parts.append(f"{name} < {hi:g}")
            elif math.isinf(hi):
                parts.append(f"{name} ≥ {lo:g}")
            else:
                parts.append(f"{name} ∈ [{lo:g}, {hi:g})")
        return " AND ".join(parts) if parts else "TRUE"

    def to_dict(self, feature_names=None) -> dict:
        names = feature_names or self.feature_names
        return {
            "constraints": [
                {"feature": names[f] if names else f, "index": f, "low": _json_float(lo), "high": _json_float(hi)}
                for f, lo, hi in self.constraints
            ],
            "discrepancy": _json_float(self.discrepancy),
            "support_share": _json_float(self.support_share),
            "rule": self.rule(names),
        }


def _json_float(v: float):
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def parse_region(text: str, feature_names: Sequence[str]) -> Region:
    """Parse ``"x1:0.5:1.0,x3:-inf:2"`` into a :class:`Region`."""
    cons = []
    for chunk in filter(None, (c.strip() for c in text.split(","))):
        try:
            name, lo, hi = chunk.split(":")
            lo, hi = float(lo), float(hi)
        except ValueError:
            raise DataError(f"bad region term {chunk!r}; expected name:low:high") from None
        if name not in feature_names:
            raise DataError(f"region references unknown feature {name!r}")
        cons.append((list(feature_names).index(name), lo, hi))
    return Region(tuple(cons), feature_names=tuple(feature_names))


def _source_rule(X: np.ndarray) -> np.ndarray:
    return (X[:, 0] + X[:, 1] > 1).astype(np.int64)


def synth_shift(
    n_source: int,
    n_target: int,
    d: int,
    region: Region,
    flip_prob: float,
    seed: int = 0,
    noise: float = 0.05,
) -> DomainPair:
    """Planted Y|X shift on the unit cube.

    Both domains draw X uniformly on ``[0, 1]^d`` and label with
    ``1{x1 + x2 > 1}`` under symmetric label noise. Target labels inside
    ``region`` are additionally flipped with probability ``flip_prob``.
    """
    if d < 2:
        raise DataError("synth_shift needs d >= 2")
    if not 0 <= flip_prob <= 1:
        raise DataError("flip_prob must lie in [0, 1]")
    for f, lo, hi in region.constraints:
        if f >= d:
            raise DataError(f"region references feature {f} but d={d}")
    rng = make_rng(seed)
    names = tuple(f"x{j + 1}" for j in range(d))

    def draw(n):
        X = rng.random((n, d))
        y = _source_rule(X)
        y = np.where(rng.random(n) < noise, 1 - y, y)
        return X, y

    Xs, ys = draw(n_source)
    Xt, yt = draw(n_target)
    flip = region.contains(Xt) & (rng.random(n_target) < flip_prob)
    yt = np.where(flip, 1 - yt, yt)
    return DomainPair(TabularDataset(Xs, ys, None, names), TabularDataset(Xt, yt, None, names))
