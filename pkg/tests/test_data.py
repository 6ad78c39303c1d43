import numpy as np
import pytest

from shiftkit.data import (
    DataError,
    DomainPair,
    Region,
    SplitSpec,
    TabularDataset,
    balance_by_group,
    balance_by_label,
    fold_indices,
    holdout_split,
    load_csv,
    make_rng,
    parse_region,
    synth_shift,
    write_csv,
)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_unit_weights(tmp_path):
    p = _write(tmp_path, "a,b,y\n1,2,0\n3,4,1\n5,6,1\n")
    d = load_csv(p, "y")
    assert (d.n, d.d) == (3, 2)
    assert d.weights.tolist() == [1, 1, 1]
    assert d.feature_names == ("a", "b")
    assert d.labels.tolist() == [0, 1, 1]
    assert d.features[2].tolist() == [5.0, 6.0]


def test_load_csv_string_labels_sorted(tmp_path):
    p = _write(tmp_path, "x,y\n1,yes\n2,no\n3,yes\n")
    assert load_csv(p, "y").labels.tolist() == [1, 0, 1]


@pytest.mark.parametrize(
    "text",
    [
        "x,y\n1,0\n2,1\n3,2\n",  # three labels
        "x,y\n1,0\nabc,1\n",  # non-numeric
        "x,y\n1,0\n,1\n",  # missing value
        "",  # empty
        "x,y\n",  # header only
    ],
)
def test_load_csv_rejects(tmp_path, text):
    with pytest.raises(DataError):
        load_csv(_write(tmp_path, text), "y")


def test_load_csv_missing_file_and_column(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "nope.csv", "y")
    with pytest.raises(DataError):
        load_csv(_write(tmp_path, "x,z\n1,0\n"), "y")


def test_csv_round_trip(tmp_path):
    rng = make_rng(1)
    d = TabularDataset(rng.random((20, 3)), rng.integers(0, 2, 20), None, ("u", "v", "w"))
    write_csv(d, tmp_path / "o.csv", "lab")
    back = load_csv(tmp_path / "o.csv", "lab")
    np.testing.assert_array_equal(back.features, d.features)
    np.testing.assert_array_equal(back.labels, d.labels)
    assert back.feature_names == d.feature_names


def test_dataset_invariants():
    X = np.zeros((3, 2))
    with pytest.raises(DataError):
        TabularDataset(X, [0, 1])
    with pytest.raises(DataError):
        TabularDataset(X, [0, 1, 2])
    with pytest.raises(DataError):
        TabularDataset(X, [0, 1, 1], [0, 0, 0])
    with pytest.raises(DataError):
        TabularDataset(X, [0, 1, 1], [1, -1, 1])
    with pytest.raises(DataError):
        TabularDataset(np.array([[np.nan, 0], [0, 0], [0, 0]]), [0, 1, 1])
    d = TabularDataset(X, [0, 1, 1])
    with pytest.raises((ValueError, AttributeError, TypeError)):
        d.features[0, 0] = 1.0


def test_domain_pair_requires_matching_features():
    a = TabularDataset(np.zeros((2, 2)), [0, 1])
    b = TabularDataset(np.zeros((2, 3)), [0, 1])
    with pytest.raises(DataError):
        DomainPair(a, b)
    c = TabularDataset(np.zeros((2, 2)), [0, 1], None, ("p", "q"))
    with pytest.raises(DataError):
        DomainPair(a, c)


def test_split_spec_validation():
    SplitSpec("holdout_fraction", 0.2, 0)
    SplitSpec("k_fold", 4, 0)
    for kind, v in (("holdout_fraction", 0.0), ("holdout_fraction", 1.0), ("k_fold", 1), ("other", 2)):
        with pytest.raises((DataError, ValueError)):
            SplitSpec(kind, v, 0)


def test_folds_partition_rows():
    folds = fold_indices(23, 4, seed=3)
    allidx = np.concatenate(folds)
    assert sorted(allidx.tolist()) == list(range(23))
    assert {len(f) for f in folds} <= {5, 6}
    assert [f.tolist() for f in folds] == [f.tolist() for f in fold_indices(23, 4, seed=3)]


def test_holdout_split_sizes():
    d = TabularDataset(np.arange(20.0).reshape(10, 2), [0, 1] * 5)
    tr, va = holdout_split(d, 0.3, 0)
    assert (tr.n, va.n) == (7, 3)
    rows = {tuple(r) for r in np.vstack([tr.features, va.features])}
    assert rows == {tuple(r) for r in d.features}


def test_balance_by_label_reweight():
    d = TabularDataset(np.zeros((4, 1)), [0, 0, 0, 1])
    out = balance_by_label(d, "reweight")
    np.testing.assert_allclose(out.weights, [2 / 3, 2 / 3, 2 / 3, 2])
    assert out.weights.sum() == pytest.approx(4, abs=1e-12)
    assert balance_by_label(TabularDataset(np.zeros((2, 1)), [0, 1])).weights.tolist() == [1, 1]


def test_balance_by_label_subsample_is_subset():
    X = np.arange(4.0).reshape(4, 1)
    d = TabularDataset(X, [0, 0, 0, 1])
    out = balance_by_label(d, "subsample", seed=5)
    assert out.n == 2 and sorted(out.labels.tolist()) == [0, 1]
    assert set(out.features[:, 0]) <= set(X[:, 0])
    assert out.weights.tolist() == [1, 1]


def test_balance_total_weight_property():
    rng = make_rng(2)
    for _ in range(20):
        n = int(rng.integers(3, 50))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        w = rng.random(n) + 0.1
        out = balance_by_label(TabularDataset(np.zeros((n, 1)), y, w))
        assert out.weights.sum() == pytest.approx(n, rel=1e-12)
        assert out.weights[y == 0].sum() == pytest.approx(out.weights[y == 1].sum(), rel=1e-12)


def test_balance_by_group():
    X = np.array([[0.0, 1], [0, 1], [0, 1], [0, 0]])
    d = TabularDataset(X, [0, 1, 0, 1], None, ("a", "g"))
    out = balance_by_group(d, "g")
    np.testing.assert_allclose(out.weights, [2 / 3, 2 / 3, 2 / 3, 2])
    eq = TabularDataset(np.array([[0.0, 1], [0, 0]]), [0, 1], None, ("a", "g"))
    np.testing.assert_allclose(balance_by_group(eq, "g").weights, [1, 1])
    single = TabularDataset(np.array([[0.0, 1], [0, 1]]), [0, 1], None, ("a", "g"))
    with pytest.raises(DataError):
        balance_by_group(single, "g")
    with pytest.raises(DataError):
        balance_by_label(TabularDataset(np.zeros((3, 1)), [1, 1, 1]))


def test_region_parse_contains_jaccard():
    names = ["x1", "x2", "x3"]
    r = parse_region("x1:0.5:1.0", names)
    assert r.constraints == ((0, 0.5, 1.0),)
    X = np.array([[0.5, 0, 0], [0.49, 0, 0], [1.0, 0, 0]])
    assert r.contains(X).tolist() == [True, False, False]
    assert r.jaccard(r, 3) == pytest.approx(1.0)
    half = parse_region("x1:0.75:1.0", names)
    assert r.jaccard(half, 3) == pytest.approx(0.5)
    assert Region().rule() == "TRUE"
    for bad in ("x9:0:1", "x1:1:0", "x1-0-1"):
        with pytest.raises(DataError):
            parse_region(bad, names)


def test_synth_shift_no_flip_same_law():
    region = parse_region("x1:0.5:1.0", ["x1", "x2", "x3"])
    pair = synth_shift(4000, 4000, 3, region, 0.0, seed=1)
    # same rule and noise on both sides: disagreement with the rule inside vs outside the region
    for d in (pair.source, pair.target):
        rule = (d.features[:, 0] + d.features[:, 1] > 1).astype(int)
        err = (rule != d.labels).mean()
        se = np.sqrt(0.05 * 0.95 / d.n)
        assert abs(err - 0.05) < 3 * se + 1e-3


def test_synth_shift_full_flip_negates_rule():
    region = Region()
    pair = synth_shift(10, 5000, 2, region, 1.0, seed=2)
    t = pair.target
    rule = (t.features[:, 0] + t.features[:, 1] > 1).astype(int)
    assert (t.labels == 1 - rule).mean() == pytest.approx(0.95, abs=0.015)


def test_synth_shift_half_flip_rate_in_region():
    names = ["x1", "x2"]
    region = parse_region("x1:0.5:1.0", names)
    pair = synth_shift(10000, 10000, 2, region, 0.5, seed=3, noise=0.0)
    t = pair.target
    inside = region.contains(t.features)
    rule = (t.features[:, 0] + t.features[:, 1] > 1).astype(int)
    assert (t.labels[inside] != rule[inside]).mean() == pytest.approx(0.5, abs=0.05)
    assert (t.labels[~inside] != rule[~inside]).mean() == 0.0


def test_synth_shift_bad_region():
    with pytest.raises(DataError):
        synth_shift(10, 10, 2, Region(((2, 0.0, 1.0),)), 0.5)
    with pytest.raises(DataError):
        synth_shift(10, 10, 2, Region(), 1.5)


def test_rng_reproducible():
    a = synth_shift(50, 50, 2, Region(), 0.3, seed=9)
    b = synth_shift(50, 50, 2, Region(), 0.3, seed=9)
    np.testing.assert_array_equal(a.target.labels, b.target.labels)
    np.testing.assert_array_equal(a.source.features, b.source.features)
    # PCG64 stream is fixed: first draw pinned
    assert make_rng(0).random() == pytest.approx(0.6369616873214543, abs=0)
