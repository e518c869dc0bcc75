import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prunekit.errors import DataError, NumericError
from prunekit.linalg import (
    minmax_normalize,
    population_variance,
    ridge_lsq,
    softmax,
    top_k,
)


def ridge_objective(a, b, w, lam):
    r = a @ w - b
    return float(np.sum(r * r) + lam * np.sum(w * w))


def ridge_gd(a, b, lam, iters=20000):
    """Gradient-descent oracle for the ridge objective."""
    w = np.zeros((a.shape[1], b.shape[1]))
    lip = 2.0 * (np.linalg.norm(a, 2) ** 2 + lam)
    step = 1.0 / lip
    for _ in range(iters):
        grad = 2.0 * (a.T @ (a @ w - b) + lam * w)
        w = w - step * grad
    return w


@pytest.mark.parametrize("trial", range(5))
def test_ridge_matches_gd_oracle(trial):
    rng = np.random.Generator(np.random.PCG64(trial))
    n, p, m = 12, 8, 3
    a = rng.standard_normal((n, p))
    b = rng.standard_normal((n, m))
    lam = 10.0 ** rng.uniform(-3, 0)
    w = ridge_lsq(a, b, lam)
    w_gd = ridge_gd(a, b, lam)
    f, f_gd = ridge_objective(a, b, w, lam), ridge_objective(a, b, w_gd, lam)
    assert f <= f_gd * (1 + 1e-6)


def test_ridge_gradient_zero_at_solution():
    rng = np.random.Generator(np.random.PCG64(7))
    a = rng.standard_normal((10, 6))
    b = rng.standard_normal((10, 2))
    w = ridge_lsq(a, b, 0.5)
    grad = 2.0 * (a.T @ (a @ w - b) + 0.5 * w)
    assert np.abs(grad).max() < 1e-9


def test_ridge_dual_matches_primal():
    """Wide systems (n < p) take the dual path; answers must agree."""
    rng = np.random.Generator(np.random.PCG64(11))
    a = rng.standard_normal((5, 40))
    b = rng.standard_normal((5, 3))
    dual = ridge_lsq(a, b, 1e-3)
    gram = a.T @ a + 1e-3 * np.eye(40)
    primal = np.linalg.solve(gram, a.T @ b)
    np.testing.assert_allclose(dual, primal, atol=1e-8)


def test_ridge_validates_inputs():
    a = np.ones((3, 2))
    with pytest.raises(DataError):
        ridge_lsq(a, np.ones((4, 1)), 1.0)
    with pytest.raises(DataError):
        ridge_lsq(a, np.ones((3, 1)), -1.0)
    bad = a.copy()
    bad[0, 0] = np.nan
    with pytest.raises(NumericError):
        ridge_lsq(bad, np.ones((3, 1)), 1.0)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=64))
def test_softmax_is_distribution(values):
    p = softmax(np.array(values))
    assert np.all(p >= 0)
    assert np.isclose(p.sum(), 1.0)


def test_softmax_shift_invariant():
    v = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(softmax(v), softmax(v + 1e4))


@given(
    st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=50),
    st.data(),
)
@settings(max_examples=100)
def test_top_k_properties(values, data):
    scores = np.array(values)
    k = data.draw(st.integers(1, len(values)))
    idx = top_k(scores, k)
    assert len(idx) == k
    assert np.all(np.diff(idx) > 0)  # ascending, no duplicates
    kept, dropped = set(idx.tolist()), set(range(len(values))) - set(idx.tolist())
    for d in dropped:
        assert all(scores[i] >= scores[d] for i in kept)


def test_top_k_tie_breaks_to_smaller_index():
    idx = top_k(np.array([1.0, 1.0, 1.0, 1.0]), 2)
    np.testing.assert_array_equal(idx, [0, 1])


def test_top_k_validates_k():
    with pytest.raises(DataError):
        top_k(np.array([1.0, 2.0]), 3)
    with pytest.raises(DataError):
        top_k(np.array([1.0, 2.0]), 0)


def test_minmax_normalize_range_and_constant():
    v = minmax_normalize(np.array([3.0, 5.0, 4.0]))
    np.testing.assert_allclose(v, [0.0, 1.0, 0.5])
    np.testing.assert_array_equal(minmax_normalize(np.full(4, 2.5)), np.zeros(4))


def test_population_variance_matches_numpy():
    rng = np.random.Generator(np.random.PCG64(3))
    samples = [rng.standard_normal(9) for _ in range(5)]
    np.testing.assert_allclose(
        population_variance(samples), np.stack(samples).var(axis=0, ddof=0)
    )


def test_population_variance_needs_two_samples():
    with pytest.raises(DataError):
        population_variance([np.ones(3)])
