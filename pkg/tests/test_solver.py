import math

import numpy as np
import pytest

from ksgl.gram import PenaltySet, constant_penalties, factor_grams, grams_from_matrices, penalties, population_grams
from ksgl.ksum import KroneckerSum, assemble_dense, ks_eigen
from ksgl.model import ModelSpec, from_factors, gen_model, sample
from ksgl.oracle import random_ksum
from ksgl.solver import (
    SolverConfig, SolverError, fit, kkt_residual, objective, penalty_value, smooth_grad, smooth_value,
)
from ksgl.tensor import vec

X = np.array([[1.0, 2.0], [3.0, 4.0]])


def dense_objective(K, xs, pen):
    S_hat = sum(np.outer(vec(x), vec(x)) for x in xs) / len(xs)
    A = assemble_dense(K)
    pen_val = sum(mk * r * (np.abs(f).sum() - np.abs(np.diag(f)).sum())
                  for mk, r, f in zip(K.dims.m, pen.rho, K.factors))
    return -np.linalg.slogdet(A)[1] + np.sum(S_hat * A) + pen_val


def fd_grad(K, g, h=1e-6):
    # symmetric perturbations e_ij + e_ji; the Euclidean gradient G satisfies
    # dF = G_ij + G_ji = 2 G_ij off the diagonal and G_ii on it
    out = []
    for k, psi in enumerate(K.factors):
        G = np.zeros_like(psi)
        for i in range(psi.shape[0]):
            for j in range(i, psi.shape[0]):
                E = np.zeros_like(psi)
                E[i, j] = E[j, i] = 1.0
                fs_p = list(K.factors)
                fs_m = list(K.factors)
                fs_p[k] = psi + h * E
                fs_m[k] = psi - h * E
                d = (smooth_value(KroneckerSum(fs_p), g) - smooth_value(KroneckerSum(fs_m), g)) / (2 * h)
                G[i, j] = G[j, i] = d if i == j else d / 2
        out.append(G)
    return out


def test_objective_examples():
    zero = grams_from_matrices([np.zeros((2, 2)), np.zeros((2, 2))])
    pen0 = constant_penalties([2, 2], 0.0)
    assert objective(KroneckerSum.identity([2, 2]), zero, pen0) == pytest.approx(0.0, abs=1e-15)
    g = factor_grams([X])
    two = KroneckerSum([np.eye(2), np.eye(2)])
    assert objective(two, g, pen0) == pytest.approx(-4 * math.log(2) + 60, rel=1e-12)
    assert objective(two, g, pen0) == pytest.approx(57.2274, abs=1e-4)


def test_objective_dense(rng):
    K = random_ksum(rng, [2, 3, 2])
    xs = [rng.standard_normal((2, 3, 2)) for _ in range(3)]
    pen = PenaltySet((0.1, 0.2, 0.3), (0.0,) * 3, (0.5,) * 3, 1.0)
    assert objective(K, factor_grams(xs), pen) == pytest.approx(dense_objective(K, xs, pen), rel=1e-9)


@pytest.mark.parametrize("dims", [[2, 3], [3, 4]])
def test_grad_finite_difference(rng, dims):
    K = random_ksum(rng, dims)
    g = factor_grams([rng.standard_normal(dims) for _ in range(2)])
    for a, b in zip(smooth_grad(K, g), fd_grad(K, g)):
        np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-6)


def test_grad_population_stationary(rng):
    K = random_ksum(rng, [3, 2, 2])
    g = population_grams(from_factors(K.factors))
    assert max(np.abs(G).max() for G in smooth_grad(K, g)) < 1e-12
    assert kkt_residual(K, g, constant_penalties(K.dims, 0.0)) < 1e-12


def test_grad_single_mode(rng):
    K = random_ksum(rng, [4])
    S = np.cov(rng.standard_normal((4, 10)))
    (G,) = smooth_grad(K, grams_from_matrices([S]))
    np.testing.assert_allclose(G, S - np.linalg.inv(K.factors[0]), atol=1e-12)


def test_scalar_closed_form():
    g = grams_from_matrices([np.array([[4.0]])])
    res = fit(g, constant_penalties([1], 0.0))
    assert res.converged
    assert res.omega_hat.factors[0][0, 0] == pytest.approx(0.25, rel=1e-6)
    assert kkt_residual(KroneckerSum([[[0.25]]]), g, constant_penalties([1], 0.0)) == pytest.approx(0.0, abs=1e-15)


def test_huge_penalty_gives_diagonal():
    gt = gen_model(ModelSpec([4, 4], "chain", seed=3))
    g = factor_grams(sample(gt, 4, seed=1))
    res = fit(g, constant_penalties(g.dims, 1e3))
    assert res.converged
    for f in res.omega_hat.factors:
        assert np.count_nonzero(f - np.diag(np.diag(f))) == 0


def test_tiny_fit_converges():
    gt = gen_model(ModelSpec([2, 2], "chain", seed=0))
    g = factor_grams(sample(gt, 4, seed=0))
    res = fit(g, penalties(g.dims, 4, gt.sigma_norm))
    assert res.converged and res.kkt_residual <= 1e-6


def _instance(seed, n=2):
    gt = gen_model(ModelSpec([4, 4], "erdos_renyi:2", seed=seed))
    g = factor_grams(sample(gt, n, seed=seed + 100))
    return g, penalties(g.dims, n, gt.sigma_norm)


def test_trace_monotone_and_pd():
    g, pen = _instance(1)
    res = fit(g, pen)
    assert all(b <= a + 1e-12 for a, b in zip(res.objective_trace, res.objective_trace[1:]))
    assert ks_eigen(res.omega_hat).is_pd()
    assert len(res.objective_trace) == res.iterations + 1
    assert res.objective_trace[-1] == pytest.approx(objective(res.omega_hat, g, pen), rel=1e-12)


def test_warm_start():
    g, pen = _instance(2)
    first = fit(g, pen)
    again = fit(g, pen, init=first.omega_hat)
    assert again.iterations <= 2 and again.converged


def test_step_configs_agree():
    g, pen = _instance(3)
    a = fit(g, pen, SolverConfig(initial_step=1.0))
    b = fit(g, pen, SolverConfig(initial_step=0.1))
    A, B = assemble_dense(a.omega_hat), assemble_dense(b.omega_hat)
    assert np.linalg.norm(A - B) <= 1e-4 * np.linalg.norm(A)


def test_max_iters_reports_unconverged():
    g, pen = _instance(4)
    res = fit(g, pen, SolverConfig(max_iters=1))
    assert not res.converged and res.status == "max_iters" and res.iterations == 1


def test_bad_inputs():
    g, pen = _instance(5)
    with pytest.raises(SolverError):
        fit(g, pen, init=KroneckerSum.identity(g.dims, -1.0))
    with pytest.raises(ValueError):
        fit(g, constant_penalties(g.dims, -0.1))
    with pytest.raises(ValueError):
        SolverConfig(backtrack_factor=1.0)
    with pytest.raises(ValueError):
        SolverConfig.from_json({"step": 1})
    cfg = SolverConfig(initial_step=0.5, max_iters=10)
    assert SolverConfig.from_json(cfg.to_json()) == cfg


def test_penalty_value():
    K = KroneckerSum([np.array([[1.0, -0.5], [-0.5, 1.0]]), np.eye(3)])
    pen = constant_penalties(K.dims, 2.0)
    assert penalty_value(K, pen) == pytest.approx(3 * 2.0 * 1.0)
