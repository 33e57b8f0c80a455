from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parden.errors import ConfigError, ContractError
from parden.surrogate import MetricKind, SurrogateSpec, fold_score, macro_f1, ndscore, rank_accuracy


def thin_plate_oracle(X, y, Q, ridge):
    """Direct solve of the bordered thin-plate-spline system with a linear tail."""

    def phi(r):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0, r**2 * np.log(r), 0.0)

    n, d = X.shape
    K = phi(np.linalg.norm(X[:, None] - X[None], axis=2)) + ridge * np.eye(n)
    P = np.hstack([np.ones((n, 1)), X])
    M = np.block([[K, P], [P.T, np.zeros((d + 1, d + 1))]])
    coef = np.linalg.solve(M, np.concatenate([y, np.zeros(d + 1)]))
    Kq = phi(np.linalg.norm(Q[:, None] - X[None], axis=2))
    return Kq @ coef[:n] + np.hstack([np.ones((Q.shape[0], 1)), Q]) @ coef[n:]


def test_nn_is_exact_at_training_points(rng):
    X, Y = rng.random((30, 4)), rng.random((30, 2))
    model = SurrogateSpec(kind="nn").fit(X, Y)
    assert np.array_equal(model.predict(X), Y)


def test_nn_single_neighbour_copies_nearest(rng):
    X, Y = rng.random((10, 2)), rng.random((10, 2))
    Q = X + 1e-6
    # a one-term weighted mean, exact up to one rounding
    assert np.allclose(SurrogateSpec(kind="nn", k=1).fit(X, Y).predict(Q), Y, rtol=1e-15, atol=0)


def test_rbf_interpolates_training_points(rng):
    X, Y = rng.random((40, 4)), rng.normal(size=(40, 2))
    pred = SurrogateSpec().fit(X, Y).predict(X)
    assert np.max(np.abs(pred - Y)) <= 1e-6


def test_rbf_matches_direct_solve(rng):
    X, y = rng.random((25, 3)), rng.normal(size=25)
    Q = rng.random((15, 3))
    got = SurrogateSpec(ridge=1e-3).fit(X, y[:, None]).predict(Q)[:, 0]
    assert np.max(np.abs(got - thin_plate_oracle(X, y, Q, 1e-3))) <= 1e-8


@pytest.mark.parametrize("kind", ["rbf", "nn"])
def test_constant_targets_give_constant_predictions(rng, kind):
    X = rng.random((20, 4))
    Y = np.tile([3.0, -2.0], (20, 1))
    pred = SurrogateSpec(kind=kind).fit(X, Y).predict(rng.random((7, 4)))
    assert np.allclose(pred, Y[:7], rtol=0, atol=1e-8)


def test_rbf_survives_duplicate_decisions(rng):
    X = np.vstack([rng.random((10, 2))] * 2)
    Y = rng.random((20, 2))
    assert np.all(np.isfinite(SurrogateSpec().fit(X, Y).predict(rng.random((3, 2)))))


def test_predict_rejects_dimension_mismatch(rng):
    model = SurrogateSpec(kind="nn").fit(rng.random((5, 3)), rng.random((5, 2)))
    with pytest.raises(ContractError):
        model.predict(rng.random((2, 4)))
    with pytest.raises(ContractError):
        SurrogateSpec().fit(rng.random((5, 3)), rng.random((4, 2)))


def test_spec_validation():
    with pytest.raises(ConfigError, match="kind"):
        SurrogateSpec(kind="gp")
    with pytest.raises(ConfigError, match="ridge"):
        SurrogateSpec(ridge=0.0)


def test_metric_values():
    assert rank_accuracy([0, 0, 1, 1], [0, 1, 1, 1]) == 0.75
    # label 0: tp 1 fp 0 fn 1 -> 2/3; label 1: tp 2 fp 1 fn 0 -> 4/5
    assert macro_f1([0, 0, 1, 1], [0, 1, 1, 1]) == pytest.approx((2 / 3 + 4 / 5) / 2, abs=1e-15)
    assert macro_f1([0, 1, 2], [0, 1, 2]) == 1.0


def test_ndscore_needs_two_k_points(rng):
    v = ndscore(SurrogateSpec(kind="nn"), rng.random((9, 2)), rng.random((9, 2)), k=5)
    assert v.value == 0.0 and v.per_fold == () and "2k" in v.reason
    with pytest.raises(ContractError):
        ndscore(SurrogateSpec(), rng.random((9, 2)), rng.random((9, 2)), k=1)


def test_ndscore_is_min_over_folds_and_perfect_for_exact_model(rng):
    X = rng.random((50, 2))
    Y = np.column_stack([X[:, 0], 1 - X[:, 0] + X[:, 1]])
    v = ndscore(SurrogateSpec(), X, Y, k=5, seed=1)
    assert v.value == min(v.per_fold) and len(v.per_fold) == 5
    assert v.value == 1.0
    assert ndscore(SurrogateSpec(), X, Y, k=5, seed=1) == v


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([MetricKind.ACCURACY, MetricKind.MACRO_F1]))
def test_fold_score_invariant_to_monotone_transforms(seed, kind):
    rng = np.random.Generator(np.random.Philox(seed))
    Y, P = rng.random((15, 2)), rng.random((15, 2))

    def g(A):
        return np.column_stack([np.exp(3 * A[:, 0]), A[:, 1] ** 3 + 2])

    assert fold_score(g(Y), g(P), kind) == fold_score(Y, P, kind)
    assert 0.0 <= fold_score(Y, P, kind) <= 1.0
