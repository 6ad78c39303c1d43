import numpy as np
import pytest

from shiftkit.data import TabularDataset, make_rng


def noisy_linear(n=200, d=2, noise=0.1, seed=0):
    """X uniform on [0,1]^d, y = 1{x1 + x2 > 1}, symmetric label noise."""
    rng = make_rng(seed)
    X = rng.random((n, d))
    y = (X[:, 0] + X[:, 1] > 1).astype(int)
    y = np.where(rng.random(n) < noise, 1 - y, y)
    return TabularDataset(X, y)


@pytest.fixture
def small_data():
    return noisy_linear(200, 2, 0.1, seed=0)


class ThresholdModel:
    """Hard classifier ``1{x[feature] > t}``; fixed, needs no training."""

    def __init__(self, feature=0, t=0.5):
        self.feature, self.t = feature, t

    def predict(self, X):
        return (np.asarray(X)[:, self.feature] > self.t).astype(int)


def pure_x_shift(n=20000, seed=0):
    """Same labeling rule in both domains; target oversamples the model's mistakes.

    Labels are ``1{x1 + x2 > 1}`` everywhere. The model ``1{x1 > 0.5}`` errs on
    two triangles; target X keeps uniform draws with probability 0.2, or 1
    where the model errs, so only the covariate law moves.
    """
    from shiftkit.data import DomainPair

    rng = make_rng(seed)
    rule = lambda X: (X[:, 0] + X[:, 1] > 1).astype(int)
    Xs = rng.random((n, 2))
    cand = rng.random((5 * n, 2))
    wrong = ThresholdModel().predict(cand) != rule(cand)
    keep = rng.random(5 * n) < np.where(wrong, 1.0, 0.2)
    Xt = cand[keep][:n]
    return DomainPair(TabularDataset(Xs, rule(Xs)), TabularDataset(Xt, rule(Xt))), ThresholdModel()


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, ok: bool | None, detail: str) -> None:
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
    ACCEPTANCE_LINES[number] = f"{status} criterion {number}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
