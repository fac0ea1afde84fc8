import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from climort.exceptions import InputError, ModelError
from climort.lee_carter import fit_lc


def planted(N=4, T=50, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(-5, 1, N)
    b = rng.random(N) + 0.1
    b /= b.sum()
    k = np.cumsum(rng.normal(-0.1, 0.5, T))
    k -= k.mean()
    return a, b, k


def power_iteration(M, iters=5000):
    v = np.ones(M.shape[1])
    for _ in range(iters):
        v = M.T @ (M @ v)
        v /= np.linalg.norm(v)
    u = M @ v
    return np.outer(u, v)


def test_exact_recovery():
    a, b, k = planted()
    p, fitted = fit_lc(a[:, None] + np.outer(b, k))
    np.testing.assert_allclose(p.a, a, atol=1e-8)
    np.testing.assert_allclose(p.b, b, atol=1e-8)
    np.testing.assert_allclose(p.kappa, k, atol=1e-8)
    assert abs(p.b.sum() - 1) < 1e-10 and abs(p.kappa.sum()) < 1e-10


def test_constant_matrix():
    p, fitted = fit_lc(np.full((3, 10), -4.0))
    np.testing.assert_allclose(p.a, -4.0)
    np.testing.assert_allclose(np.outer(p.b, p.kappa), 0)


def test_noisy_within_eckart_young_bound():
    a, b, k = planted(N=5, T=80, seed=1)
    sigma = 0.01
    rank1 = a[:, None] + np.outer(b, k)
    noisy = rank1 + sigma * np.random.default_rng(2).standard_normal(rank1.shape)
    _, fitted = fit_lc(noisy)
    assert np.linalg.norm(fitted - rank1) <= 2 * sigma * np.sqrt(rank1.size)


def test_optimal_against_power_iteration():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(4, 9))
    p, fitted = fit_lc(M)
    centred = M - M.mean(axis=1, keepdims=True)
    oracle = power_iteration(centred)
    assert np.linalg.norm(centred - np.outer(p.b, p.kappa)) <= np.linalg.norm(centred - oracle) + 1e-9


def test_errors():
    with pytest.raises(InputError):
        fit_lc(np.array([[1.0, np.nan], [2.0, 3.0]]))
    with pytest.raises(InputError):
        fit_lc(np.ones((1, 5)))
    # first singular vector orthogonal to the ones vector: loadings sum to zero
    M = np.outer([1.0, -1.0], np.linspace(-1, 1, 6))
    with pytest.raises(ModelError, match="degenerate"):
        fit_lc(M)


@given(arrays(float, (3, 12), elements=st.floats(-8, 0)))
def test_invariants(M):
    try:
        p, fitted = fit_lc(M)
    except ModelError:
        return
    assert abs(p.b.sum() - 1) < 1e-10
    assert abs(p.kappa.sum()) < 1e-10 * max(1, np.abs(p.kappa).max())
    np.testing.assert_allclose((M - fitted).mean(axis=1), 0, atol=1e-10)
    # sign convention: flipping the input's age-time interaction cannot flip b's sum
    assert p.b.sum() > 0
