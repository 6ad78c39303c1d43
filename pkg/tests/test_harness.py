import csv

import numpy as np
import pytest

from shiftkit.data import DataError, DomainPair, TabularDataset, make_rng
from shiftkit.dro import AmbiguitySpec
from shiftkit.harness import (
    CSV_COLUMNS,
    MODES,
    MethodSpec,
    NamedPair,
    ValidationMode,
    default_methods,
    run_grid,
    select_best,
)
from shiftkit.learners import LearnerSpec, TrainConfig

FAST = TrainConfig(steps=300)
SHARP = LearnerSpec("gbt", rounds=20, max_depth=2, min_leaf=5)
# a leaf size no split can satisfy: predicts the weighted majority everywhere
CONSTANT = LearnerSpec("gbt", rounds=5, min_leaf=10**6)


def step_data(n, seed, flip=False):
    rng = make_rng(seed)
    X = rng.random((n, 2))
    y = (X[:, 0] > 0.5).astype(int)
    if flip:
        y = 1 - y
    return TabularDataset(X, y, None, ("x1", "x2"))


@pytest.fixture(scope="module")
def flipped_pairs():
    src = step_data(400, 0)
    return [DomainPair(src, step_data(600, 1 + k, flip=True)) for k in range(2)]


def test_single_config_wins_everywhere(flipped_pairs):
    m = MethodSpec("tree", "erm_tree", (SHARP,))
    for mode in MODES:
        res = run_grid(flipped_pairs, [m], mode, probe_size=100)
        assert {b["config_id"] for b in res.best} == {"tree#0"}


def test_source_winner_vs_probe_winner(flipped_pairs):
    m = MethodSpec("tree", "erm_tree", (SHARP, CONSTANT))
    in_dist = run_grid(flipped_pairs, [m], "in_dist", probe_size=100)
    assert [b["config_id"] for b in in_dist.best] == ["tree#0"]
    probe = run_grid(flipped_pairs, [m], "target_probe", probe_size=100)
    assert len(probe.best) == 2
    assert all(b["config_id"] == "tree#1" for b in probe.best)
    for mode in ("worst_domain", "average_domain"):
        assert run_grid(flipped_pairs, [m], mode, probe_size=100).best[0]["config_id"] == "tree#1"


def test_empty_grid_and_methods():
    with pytest.raises(ValueError):
        MethodSpec("x", "erm_tree", ())
    with pytest.raises(ValueError):
        MethodSpec("x", "dro", (SHARP,))
    with pytest.raises(ValueError):
        MethodSpec("x", "svm", (SHARP,))
    with pytest.raises(ValueError):
        run_grid([DomainPair(step_data(50, 0), step_data(50, 1))], [])
    with pytest.raises(DataError):
        run_grid([], [MethodSpec("t", "erm_tree", (SHARP,))])
    with pytest.raises(ValueError):
        ValidationMode("oracle")


def test_deterministic_and_thread_independent(flipped_pairs, tmp_path):
    methods = [
        MethodSpec("lin", "erm_linear", (FAST,)),
        MethodSpec("tree", "erm_tree", (SHARP, CONSTANT)),
        MethodSpec("kl", "dro", (AmbiguitySpec("kl", 0.05), AmbiguitySpec("kl", 0.2)), FAST),
    ]
    a = run_grid(flipped_pairs, methods, "average_domain", seed=3, probe_size=100, threads=1)
    b = run_grid(flipped_pairs, methods, "average_domain", seed=3, probe_size=100, threads=1)
    c = run_grid(flipped_pairs, methods, "average_domain", seed=3, probe_size=100, threads=4)
    assert a.rows == b.rows == c.rows
    assert a.best == c.best
    a.write_csv(tmp_path / "a.csv")
    c.write_csv(tmp_path / "c.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()
    with open(tmp_path / "a.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 1 + 5 * 2
    assert {r[7] for r in rows[1:]} == {"average_case"}


def test_failing_config_is_tagged(flipped_pairs):
    # the source has only 400 rows, so a 300-row leaf minimum cannot be met by a single tree
    bad = LearnerSpec("tree", min_leaf=300)
    m = MethodSpec("tree", "erm_tree", (SHARP, bad))
    res = run_grid(flipped_pairs, [m], "in_dist", probe_size=100)
    tagged = [r for r in res.rows if r.error_tag]
    assert len(tagged) == 2 and all(r.config_id == "tree#1" for r in tagged)
    assert tagged[0].error_tag.startswith("DataError")
    assert np.isnan(tagged[0].target_acc)
    assert res.best[0]["config_id"] == "tree#0"


def test_worst_not_above_average():
    src = step_data(400, 5)
    pairs = [DomainPair(src, step_data(500, 6 + k, flip=k == 0)) for k in range(3)]
    methods = [MethodSpec("tree", "erm_tree", (SHARP, CONSTANT)), MethodSpec("lin", "erm_linear", (FAST, TrainConfig(steps=300, l2=1.0)))]
    worst = run_grid(pairs, methods, "worst_domain", probe_size=100)
    avg = select_best(worst.rows, "average_domain")
    for w, a in zip(worst.best, avg):
        assert w["method_id"] == a["method_id"]
        assert w["selection_score"] <= a["selection_score"] + 1e-12
        assert w["worst_target_acc"] <= a["target_acc"] + 1e-12


def test_named_pairs_share_setting_source():
    src_a, src_b = step_data(300, 7), step_data(300, 8)
    pairs = [
        NamedPair("A", "a0", DomainPair(src_a, step_data(300, 9))),
        NamedPair("A", "a1", DomainPair(src_a, step_data(300, 10))),
        NamedPair("B", "b0", DomainPair(src_b, step_data(300, 11))),
    ]
    res = run_grid(pairs, [MethodSpec("tree", "erm_tree", (SHARP,))], "in_dist", probe_size=50)
    assert [(r.setting_id, r.domain_id) for r in res.rows] == [("A", "a0"), ("A", "a1"), ("B", "b0")]
    assert res.rows[0].source_acc == res.rows[1].source_acc
    assert [b["setting_id"] for b in res.best] == ["A", "B"]


def test_probe_size_guard_and_explicit_probe():
    src = step_data(200, 0)
    with pytest.raises(DataError):
        run_grid([DomainPair(src, step_data(50, 1))], [MethodSpec("t", "erm_tree", (SHARP,))], probe_size=80)
    probe = step_data(30, 2)
    pair = DomainPair(src, step_data(100, 3), probe)
    res = run_grid([pair], [MethodSpec("t", "erm_tree", (SHARP,))], "target_probe", probe_size=500)
    assert res.rows[0].probe_acc == pytest.approx(1.0)


def test_default_catalog_builds():
    ms = default_methods()
    assert {m.family for m in ms} == {"erm_linear", "erm_tree", "dro"}
    assert {m.model_class for m in ms} == {"linear", "xgb"}
