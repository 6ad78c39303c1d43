"""Grid search over method configurations with several validation modes.

Every configuration is trained once per setting on a training split of the
source and scored on a held-out source split, on a small labeled probe from
each target domain, and on the rest of each target. Selection then picks
one configuration per method according to the validation mode.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import DataError, DomainPair, holdout_split, make_rng
from .dro import AmbiguitySpec, train
from .learners import LearnerSpec, TrainConfig, evaluate

FAMILIES = ("erm_linear", "erm_tree", "dro")
MODES = ("in_dist", "target_probe", "worst_domain", "average_domain")
RECORD_VALIDATION = {"in_dist": "in_dist", "target_probe": "target_probe", "worst_domain": "worst_case", "average_domain": "average_case"}
CSV_COLUMNS = [
    "setting_id",
    "domain_id",
    "method_id",
    "config_id",
    "model_class",
    "ambiguity_kind",
    "raw_radius",
    "validation_type",
    "source_acc",
    "target_acc",
    "macro_f1",
    "error_tag",
    "probe_acc",
]
THREADS_ENV = "SHIFTKIT_THREADS"


@dataclass(frozen=True)
class MethodSpec:
    """A method and its hyperparameter grid.

    ``erm_linear`` grids hold :class:`TrainConfig`, ``erm_tree`` grids hold
    :class:`LearnerSpec` (boosted trees) and ``dro`` grids hold
    :class:`AmbiguitySpec`; DRO configs share ``train``.
    """

    method_id: str
    family: str
    grid: tuple
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        grid = tuple(self.grid)
        if not grid:
            raise ValueError(f"method {self.method_id!r} has an empty grid")
        want = {"erm_linear": TrainConfig, "erm_tree": LearnerSpec, "dro": AmbiguitySpec}[self.family]
        if not all(isinstance(g, want) for g in grid):
            raise ValueError(f"{self.family} grid entries must be {want.__name__}")
        object.__setattr__(self, "grid", grid)

    @property
    def model_class(self) -> str:
        return "xgb" if self.family == "erm_tree" else "linear"

    def config_id(self, i: int) -> str:
        return f"{self.method_id}#{i}"

    def describe(self, i: int) -> tuple:
        g = self.grid[i]
        if isinstance(g, AmbiguitySpec):
            return g.kind, g.radius
        return "", 0.0

    def fit(self, i: int, data):
        g = self.grid[i]
        if self.family == "erm_linear":
            return train(data, None, g)
        if self.family == "erm_tree":
            return g.fit(data)
        return train(data, g, self.train)


@dataclass(frozen=True)
class ValidationMode:
    kind: str = "in_dist"

    def __post_init__(self):
        if self.kind not in MODES:
            raise ValueError(f"validation mode must be one of {MODES}")


@dataclass(frozen=True)
class NamedPair:
    setting_id: str
    domain_id: str
    pair: DomainPair


@dataclass(frozen=True)
class GridRow:
    setting_id: str
    domain_id: str
    method_id: str
    config_id: str
    model_class: str
    ambiguity_kind: str
    raw_radius: float
    validation_type: str
    source_acc: float
    target_acc: float
    macro_f1: float
    error_tag: str
    probe_acc: float

    def as_csv(self) -> list:
        out = []
        for c in CSV_COLUMNS:
            v = getattr(self, c)
            out.append("" if isinstance(v, float) and math.isnan(v) else (repr(v) if isinstance(v, float) else v))
        return out


@dataclass(frozen=True)
class GridResult:
    rows: tuple
    best: tuple
    mode: str = "in_dist"

    def write_csv(self, path) -> None:
        write_rows(self.rows, path)


def write_rows(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for r in rows:
            wr.writerow(r.as_csv())


@dataclass
class _Setting:
    setting_id: str
    train: object
    valid: object
    domains: list = field(default_factory=list)  # (domain_id, probe, test)


def _probe_split(pair: DomainPair, probe_size: int, seed: int):
    if pair.target_probe is not None:
        return pair.target_probe, pair.target
    if pair.target.n <= probe_size:
        raise DataError(f"target has {pair.target.n} rows; cannot hold out a probe of {probe_size}")
    perm = make_rng(seed).permutation(pair.target.n)
    return pair.target.take(np.sort(perm[:probe_size])), pair.target.take(np.sort(perm[probe_size:]))


def _settings(pairs, probe_size, seed, holdout):
    named = [p if isinstance(p, NamedPair) else NamedPair("s0", f"d{i}", p) for i, p in enumerate(pairs)]
    if not named:
        raise DataError("no domain pairs given")
    out: dict[str, _Setting] = {}
    d = named[0].pair.source.d
    for k, np_ in enumerate(named):
        src = np_.pair.source
        if src.d != d:
            raise DataError("all pairs must share the feature dimension")
        if np_.setting_id not in out:
            tr, va = holdout_split(src, holdout, seed)
            out[np_.setting_id] = _Setting(np_.setting_id, tr, va)
        probe, test = _probe_split(np_.pair, probe_size, seed + 1 + k)
        out[np_.setting_id].domains.append((np_.domain_id, probe, test))
    return list(out.values())


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


def run_grid(
    pairs,
    methods,
    mode: ValidationMode | str = "in_dist",
    seed: int = 0,
    probe_size: int = 500,
    holdout: float = 0.2,
    threads: int | None = None,
) -> GridResult:
    """Train every configuration and select the best per method.

    ``pairs`` holds :class:`DomainPair` or :class:`NamedPair` items; pairs
    sharing a setting id share that setting's source. A failing
    configuration yields rows with an ``error_tag`` and NaN scores.
    Threads default to the ``SHIFTKIT_THREADS`` environment variable; the
    output order never depends on it.
    """
    mode = mode if isinstance(mode, ValidationMode) else ValidationMode(mode)
    methods = list(methods)
    if not methods:
        raise ValueError("empty method list")
    settings = _settings(pairs, probe_size, seed, holdout)
    tasks = [(s, m, i) for s in settings for m in methods for i in range(len(m.grid))]
    vtype = RECORD_VALIDATION[mode.kind]

    def work(task):
        s, m, i = task
        kind, radius = m.describe(i)
        base = (s.setting_id, m.method_id, m.config_id(i), m.model_class, kind, radius, vtype)
        try:
            model = m.fit(i, s.train)
            src_acc = evaluate(model, s.valid, "accuracy")
            rows = []
            for dom, probe, test in s.domains:
                rows.append(
                    GridRow(
                        base[0], dom, *base[1:], src_acc,
                        evaluate(model, test, "accuracy"),
                        evaluate(model, test, "macro_f1"),
                        "",
                        evaluate(model, probe, "accuracy"),
                    )
                )
            return rows
        except Exception as exc:  # failures are recorded, not raised
            tag = f"{type(exc).__name__}: {exc}".replace("\n", " ")[:200]
            nan = math.nan
            return [GridRow(base[0], dom, *base[1:], nan, nan, nan, tag, nan) for dom, _, _ in s.domains]

    n = _threads(threads)
    if n == 1:
        results = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=n) as ex:
            results = list(ex.map(work, tasks))
    rows = tuple(r for chunk in results for r in chunk)
    return GridResult(rows, tuple(select_best(rows, mode)), mode.kind)


def _score_table(rows):
    table: dict = {}
    for r in rows:
        if r.error_tag:
            continue
        table.setdefault((r.setting_id, r.method_id, r.config_id), []).append(r)
    return table


def select_best(rows, mode: ValidationMode | str) -> list[dict]:
    """Best configuration per (setting, method), or per domain for ``target_probe``."""
    mode = mode if isinstance(mode, ValidationMode) else ValidationMode(mode)
    table = _score_table(rows)
    cands: dict = {}
    for (sid, mid, cid), rs in table.items():
        if mode.kind == "target_probe":
            for r in rs:
                cands.setdefault((sid, mid, r.domain_id), []).append((r.probe_acc, cid, [r]))
            continue
        if mode.kind == "in_dist":
            score = rs[0].source_acc
        elif mode.kind == "worst_domain":
            score = min(r.probe_acc for r in rs)
        else:
            score = float(np.mean([r.probe_acc for r in rs]))
        cands.setdefault((sid, mid, "*"), []).append((score, cid, rs))
    out = []
    for (sid, mid, dom), cs in sorted(cands.items()):
        # highest score, earliest config id on ties
        score, cid, rs = max(cs, key=lambda c: (c[0], -_config_index(c[1])))
        out.append(
            {
                "setting_id": sid,
                "method_id": mid,
                "domain_id": dom,
                "config_id": cid,
                "mode": mode.kind,
                "selection_score": score,
                "target_acc": float(np.mean([r.target_acc for r in rs])),
                "worst_target_acc": float(min(r.target_acc for r in rs)),
            }
        )
    return out


def _config_index(cid: str) -> int:
    return int(cid.rsplit("#", 1)[1])


def default_methods(radii=(0.01, 0.1), train_cfg: TrainConfig = TrainConfig(steps=1500)) -> list[MethodSpec]:
    """A small catalog: linear ERM, boosted trees, and each f-divergence DRO."""
    out = [
        MethodSpec("erm_linear", "erm_linear", (train_cfg,)),
        MethodSpec("erm_tree", "erm_tree", (LearnerSpec("gbt", rounds=30), LearnerSpec("gbt", rounds=60, max_depth=4))),
    ]
    for kind in ("kl", "chi2", "tv"):
        out.append(MethodSpec(f"{kind}_dro", "dro", tuple(AmbiguitySpec(kind, r) for r in radii), train_cfg))
    out.append(MethodSpec("cvar_dro", "dro", (AmbiguitySpec("cvar", 0.5), AmbiguitySpec("cvar", 0.2)), train_cfg))
    out.append(MethodSpec("wasserstein_dro", "dro", tuple(AmbiguitySpec("wasserstein", r) for r in radii), train_cfg))
    return out
