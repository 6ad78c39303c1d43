import csv
import math

import numpy as np
import pytest

from shiftkit.data import DataError, TabularDataset, make_rng
from shiftkit.dro import AmbiguitySpec, WorstCaseWeights, divergence, inner_worst_case, train_f_dro
from shiftkit.learners import LearnerSpec, TrainConfig, evaluate, kfold_accuracy, pointwise_loss
from shiftkit.worstcase import (
    WorstCaseStudy,
    extract_worst_case,
    optimal_iid_accuracy,
    run_study,
    transfer_accuracy,
    write_transfer_csv,
)

from conftest import noisy_linear

FAST = TrainConfig(steps=600)
TREE = LearnerSpec("tree", max_depth=2, min_leaf=5)


@pytest.fixture(scope="module")
def trained():
    data = noisy_linear(200, 2, 0.1, seed=3)
    return data, train_f_dro(data, AmbiguitySpec("kl", 0.0), FAST)


def test_zero_radius_keeps_base_weights(trained):
    data, model = trained
    for kind in ("kl", "chi2", "tv"):
        wc = extract_worst_case(data, model, AmbiguitySpec(kind, 0.0))
        np.testing.assert_allclose(wc.weights, data.normalized_weights(), atol=1e-15)
    wc = extract_worst_case(data, model, AmbiguitySpec("cvar", 1.0))
    np.testing.assert_allclose(wc.weights, data.normalized_weights(), atol=1e-15)


def _bisect_kl_temperature(losses, p, eps):
    """Independent oracle: bisect log-temperature until KL(q_lam || p) = eps."""
    lo, hi = -20.0, 20.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        q = p * np.exp((losses - losses.max()) / math.exp(mid))
        q /= q.sum()
        kl = float(np.sum(q * np.log(q / p)))
        # larger temperature -> closer to p -> smaller divergence
        lo, hi = (mid, hi) if kl > eps else (lo, mid)
    return math.exp(hi)


def test_kl_worst_case_is_exponential_tilt(trained):
    data, model = trained
    eps = 0.05
    wc = extract_worst_case(data, model, AmbiguitySpec("kl", eps))
    losses = pointwise_loss(model, data, "hinge")
    p = data.normalized_weights()
    lam = _bisect_kl_temperature(losses, p, eps)
    assert wc.dual == pytest.approx(lam, rel=1e-6)
    tilt = p * np.exp((losses - losses.max()) / lam)
    np.testing.assert_allclose(wc.weights, tilt / tilt.sum(), rtol=1e-5, atol=1e-12)
    assert divergence(wc.weights, p, "kl") <= eps + 1e-9


def test_cvar_concentrates_on_top_losses():
    losses = np.array([1.0, 1, 1, 5, 1, 1, 7, 1])
    wc = inner_worst_case(losses, np.full(8, 1 / 8), AmbiguitySpec("cvar", 0.25))
    # sorting oracle: each point may carry at most p_i / alpha = 0.5
    expect = np.zeros(8)
    expect[[3, 6]] = 0.5
    np.testing.assert_allclose(wc.weights, expect, atol=1e-15)
    assert wc.attained_value == pytest.approx(6.0)


def test_attained_value_at_least_mean(trained):
    data, model = trained
    mean = float(data.normalized_weights() @ pointwise_loss(model, data, "hinge"))
    for spec in (AmbiguitySpec("kl", 0.1), AmbiguitySpec("chi2", 0.1), AmbiguitySpec("tv", 0.1), AmbiguitySpec("cvar", 0.3)):
        assert extract_worst_case(data, model, spec).attained_value >= mean - 1e-12


def test_wasserstein_extraction_rejected(trained):
    data, model = trained
    with pytest.raises(ValueError):
        extract_worst_case(data, model, AmbiguitySpec("wasserstein", 0.1))


def test_uniform_weights_transfer_equals_plain_fit():
    src = noisy_linear(300, 2, 0.1, seed=1)
    tgt = noisy_linear(300, 2, 0.1, seed=2)
    uniform = np.full(src.n, 1.0 / src.n)
    got = transfer_accuracy(uniform, src, [tgt], TREE)[0]
    want = evaluate(TREE.fit(src), tgt, "accuracy")
    assert abs(got - want) <= 1e-12


def test_optimal_iid_scale_invariant(trained):
    data, model = trained
    wc = extract_worst_case(data, model, AmbiguitySpec("kl", 0.1))
    a = optimal_iid_accuracy(wc, data, TREE)
    b = optimal_iid_accuracy(wc.weights * 37.5, data, TREE)
    assert a == pytest.approx(b, abs=1e-12)


def test_optimal_iid_at_zero_radius_is_kfold(trained):
    data, model = trained
    wc = extract_worst_case(data, model, AmbiguitySpec("kl", 0.0))
    assert optimal_iid_accuracy(wc, data, TREE) == pytest.approx(kfold_accuracy(data, 4, TREE), abs=1e-12)


def test_noise_concentrated_weights_lower_accuracy():
    data = noisy_linear(400, 2, 0.1, seed=4)
    clean = (data.features[:, 0] + data.features[:, 1] > 1).astype(int)
    noisy = clean != data.labels
    w = np.where(noisy, 5.0, 1.0)
    base = optimal_iid_accuracy(np.ones(data.n), data, TREE)
    assert optimal_iid_accuracy(w, data, TREE) < base


def test_single_point_weights_guarded(trained):
    data, _ = trained
    w = np.zeros(data.n)
    w[0] = 1.0
    with pytest.raises(DataError):
        optimal_iid_accuracy(w, data, TREE)


def test_transfer_keys_and_dimension_check():
    src = noisy_linear(200, 2, 0.1, seed=5)
    rng = make_rng(6)
    left = TabularDataset(rng.random((50, 2)) * 0.4, np.zeros(50, int))
    right = TabularDataset(0.6 + rng.random((50, 2)) * 0.4, np.ones(50, int))
    out = transfer_accuracy(np.ones(src.n), src, {"left": left, "right": right}, TREE)
    assert set(out) == {"left", "right"}
    assert all(0 <= v <= 1 for v in out.values())
    with pytest.raises(DataError):
        transfer_accuracy(np.ones(src.n), src, [TabularDataset(np.zeros((5, 3)), np.zeros(5, int))], TREE)
    with pytest.raises(DataError):
        transfer_accuracy(np.ones(src.n - 1), src, [left], TREE)


def test_resampling_mode_is_seeded():
    src = noisy_linear(200, 2, 0.1, seed=7)
    tgt = noisy_linear(200, 2, 0.1, seed=8)
    w = np.linspace(1, 2, src.n)
    a = transfer_accuracy(w, src, [tgt], TREE, resample=True, seed=3)
    b = transfer_accuracy(w, src, [tgt], TREE, resample=True, seed=3)
    assert a == b


def test_run_study_and_csv(tmp_path):
    src = noisy_linear(200, 2, 0.1, seed=9)
    targets = {"t0": noisy_linear(100, 2, 0.1, seed=10), "t1": noisy_linear(100, 2, 0.1, seed=11)}
    studies = [run_study(src, AmbiguitySpec("kl", r), targets, TREE, FAST) for r in (0.0, 0.1)]
    assert all(isinstance(s, WorstCaseStudy) for s in studies)
    assert all(0 <= s.optimal_iid_acc <= 1 for s in studies)
    assert 0 <= studies[0].median_transfer() <= 1
    path = tmp_path / "transfer.csv"
    write_transfer_csv(studies, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["kind", "radius", "target_id", "transfer_acc"]
    assert len(rows) == 5
    assert rows[3][:3] == ["kl", "0.1", "t0"]


def test_empty_study_median_is_nan():
    st = WorstCaseStudy(AmbiguitySpec("kl", 0.0), None, WorstCaseWeights(np.ones(2) / 2, 0.0), 0.5)
    assert math.isnan(st.median_transfer())
