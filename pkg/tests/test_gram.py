import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ksgl.gram import (
    constant_penalties, factor_grams, grams_from_matrices, ks_sample_inner, penalties,
    plugin_sigma_scale, population_factor_cov, population_grams,
)
from ksgl.ksum import KroneckerSum, assemble_dense
from ksgl.model import from_factors
from ksgl.oracle import dense_partial_trace, random_ksum
from ksgl.tensor import vec

X = np.array([[1.0, 2.0], [3.0, 4.0]])


def naive_grams(samples):
    # per-entry sums over fibers, no unfolding helper involved
    dims = samples[0].shape
    p = int(np.prod(dims))
    out = []
    for k, dk in enumerate(dims):
        S = np.zeros((dk, dk))
        for x in samples:
            for idx in np.ndindex(*dims):
                for j in range(dk):
                    other = list(idx)
                    other[k] = j
                    S[idx[k], j] += x[idx] * x[tuple(other)]
        out.append(S / (len(samples) * p // dk))
    return out


def test_factor_grams_example():
    g = factor_grams([X])
    np.testing.assert_allclose(g.S[0], [[2.5, 5.5], [5.5, 12.5]])
    np.testing.assert_allclose(g.S[1], [[5.0, 7.0], [7.0, 10.0]])
    assert g.energy == pytest.approx(30.0)
    assert 2 * np.trace(g.S[1]) == pytest.approx(30.0)


def test_factor_grams_trivial():
    g = factor_grams([np.zeros((2, 3))])
    assert all(np.all(S == 0) for S in g.S)
    e = np.zeros((2, 2))
    e[0, 0] = 1.0
    g = factor_grams([e])
    for S in g.S:
        np.testing.assert_allclose(S, np.diag([0.5, 0.0]))


def test_factor_grams_naive(rng):
    xs = [rng.standard_normal((2, 3, 2)) for _ in range(3)]
    for a, b in zip(factor_grams(xs).S, naive_grams(xs)):
        np.testing.assert_allclose(a, b, atol=1e-13)


def test_factor_grams_errors(rng):
    with pytest.raises(ValueError):
        factor_grams([])
    with pytest.raises(ValueError):
        factor_grams([np.zeros((2, 3)), np.zeros((3, 2))])


def test_merge(rng):
    xs = [rng.standard_normal((3, 2)) for _ in range(5)]
    merged = factor_grams(xs[:2]).merge(factor_grams(xs[2:]))
    full = factor_grams(xs)
    assert merged.n == 5
    for a, b in zip(merged.S, full.S):
        np.testing.assert_allclose(a, b, atol=1e-14)


def test_population_cov():
    gt = from_factors([np.eye(2), np.eye(3)])  # Omega = 2 I_6
    np.testing.assert_allclose(population_factor_cov(gt, 0), 0.5 * np.eye(2))
    K = random_ksum(np.random.default_rng(2), [4])
    np.testing.assert_allclose(population_factor_cov(from_factors(K.factors), 0),
                               np.linalg.inv(K.factors[0]), atol=1e-12)
    K = random_ksum(np.random.default_rng(3), [2, 3])
    sigma = np.linalg.inv(assemble_dense(K))
    gt = from_factors(K.factors)
    for k, mk in enumerate(gt.dims.m):
        np.testing.assert_allclose(population_factor_cov(gt, k), dense_partial_trace(sigma, [2, 3], k) / mk,
                                   atol=1e-12)


def test_population_grams_have_consistent_energy():
    K = random_ksum(np.random.default_rng(5), [2, 3, 2])
    gt = from_factors(K.factors)
    g = population_grams(gt)
    energies = [mk * np.trace(S) for mk, S in zip(g.dims.m, g.S)]
    np.testing.assert_allclose(energies, np.trace(np.linalg.inv(assemble_dense(K))), rtol=1e-12)


def test_sample_inner_examples():
    g = factor_grams([X])
    assert ks_sample_inner(g, KroneckerSum([np.eye(2), np.eye(2)])) == pytest.approx(60.0)
    assert ks_sample_inner(g, KroneckerSum.zeros([2, 2])) == 0.0
    with pytest.raises(ValueError):
        ks_sample_inner(g, KroneckerSum.zeros([2, 3]))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_projection_identity(dims, n, seed):
    rng = np.random.default_rng(seed)
    xs = [rng.standard_normal(dims) for _ in range(n)]
    K = random_ksum(rng, dims, pd=False)
    S_hat = sum(np.outer(vec(x), vec(x)) for x in xs) / n
    assert ks_sample_inner(factor_grams(xs), K) == pytest.approx(np.sum(S_hat * assemble_dense(K)), rel=1e-10, abs=1e-10)


def test_penalties_example():
    pen = penalties([2, 2], 1, 1.0, 0.5)
    assert pen.delta == pytest.approx((0.83255, 0.83255), abs=1e-5)
    assert pen.rho == pytest.approx((1.66511, 1.66511), abs=1e-5)


def test_penalties_scaling():
    base = penalties([4, 8], 1, 2.0)
    quad = penalties([4, 8], 4, 2.0)
    np.testing.assert_allclose(np.array(quad.delta) * 2, base.delta)
    near_one = penalties([4, 8], 1, 2.0, 1 - 1e-12)
    np.testing.assert_allclose(near_one.rho, near_one.delta, rtol=1e-11)
    mixed = penalties([4, 8], 1, 1.0, [0.25, 0.5])
    assert mixed.rho[0] == pytest.approx(4 * mixed.delta[0])


def test_penalties_validation():
    with pytest.raises(ValueError):
        penalties([4, 4], 1, 1.0, 1.5)
    with pytest.raises(ValueError):
        penalties([4, 4], 1, 0.0)
    with pytest.raises(ValueError):
        penalties([4, 4], 0, 1.0)
    with pytest.warns(UserWarning):
        penalties([50, 1], 1, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        penalties([16, 16], 1, 1.0)


def test_constant_and_plugin():
    pen = constant_penalties([2, 3], 0.3)
    assert pen.rho == (0.3, 0.3)
    g = grams_from_matrices([np.diag([1.0, 4.0]), np.eye(3)])
    assert plugin_sigma_scale(g) == pytest.approx(4.0)
