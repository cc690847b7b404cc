import math

import numpy as np
import pytest

from ksgl.ksum import KroneckerSum, assemble_dense
from ksgl.metrics import bound_report, condition_number, error_report, support_metrics
from ksgl.model import ModelSpec, from_factors, gen_model
from ksgl.oracle import random_ksum


def test_error_report_identity_cases(rng):
    gt = from_factors(random_ksum(rng, [2, 3]).factors)
    err = error_report(gt.omega0, gt)
    assert err.frob_abs == pytest.approx(0.0, abs=1e-14) and err.op_abs == pytest.approx(0.0, abs=1e-14)
    err = error_report(gt.omega0.add_identity(0.3), gt)
    assert err.op_abs == pytest.approx(0.3)
    assert err.frob_abs / math.sqrt(6) == pytest.approx(0.3)


def test_error_report_dense(rng):
    gt = from_factors(random_ksum(rng, [2, 3]).factors)
    hat = random_ksum(rng, [2, 3])
    D = assemble_dense(hat) - assemble_dense(gt.omega0)
    W = assemble_dense(gt.omega0)
    err = error_report(hat, gt)
    assert err.frob_abs == pytest.approx(np.linalg.norm(D), rel=1e-9)
    assert err.op_abs == pytest.approx(np.linalg.norm(D, 2), rel=1e-9)
    assert err.frob_rel_op == pytest.approx(np.linalg.norm(D) / np.linalg.norm(W, 2), rel=1e-9)
    assert err.op_rel == pytest.approx(np.linalg.norm(D, 2) / np.linalg.norm(W, 2), rel=1e-9)
    assert err.frob_rel == pytest.approx(np.linalg.norm(D) / np.linalg.norm(W), rel=1e-9)
    with pytest.raises(ValueError):
        error_report(random_ksum(rng, [3, 2]), gt)


def test_condition_number(rng):
    assert condition_number(from_factors([np.eye(2), np.eye(3)])) == pytest.approx(1.0)
    assert condition_number(from_factors([np.diag([1.0, 2.0]), np.diag([10.0, 20.0])])) == pytest.approx(2.0)
    K = random_ksum(rng, [2, 2, 2])
    lam = np.linalg.eigvalsh(assemble_dense(K))
    assert condition_number(from_factors(K.factors)) == pytest.approx(lam[-1] / lam[0], rel=1e-9)


def test_bound_report_example():
    gt = gen_model(ModelSpec([16, 16], "diagonal", target_min_eigsum=1.0))
    b = bound_report(gt, 1)
    assert b.s == 0
    assert b.main_op == pytest.approx(b.kappa * math.sqrt(3 * 512) / 16, rel=1e-12)
    assert b.main_op / b.main_frob == pytest.approx(math.sqrt(3 / 16), rel=1e-12)
    assert b.aspect == 1.0


def test_bound_report_cubic_reduction():
    gt = gen_model(ModelSpec([5, 5, 5], "diagonal"))
    b = bound_report(gt, 1)
    assert b.cubic == pytest.approx(b.kappa * math.sqrt(9 * 5 / 25), rel=1e-12)


def test_bound_ratio_grows():
    ratios = []
    for d in (16, 32, 64):
        b = bound_report(gen_model(ModelSpec([d, d], "erdos_renyi:4")), 1)
        ratios.append(b.orig_op / b.main_op)
    assert ratios[0] < ratios[1] < ratios[2]


def test_support_cases():
    psi = np.array([[1.0, 0.2, 0.0], [0.2, 1.0, 0.3], [0.0, 0.3, 1.0]])
    gt = from_factors([psi, np.eye(2)])
    s = support_metrics(gt.omega0, gt, threshold=0.0)
    assert (s[0].precision, s[0].recall, s[0].f1) == (1.0, 1.0, 1.0)
    diag = KroneckerSum([np.eye(3), np.eye(2)])
    assert support_metrics(diag, gt)[0].recall == 0.0
    # two estimated edges, one of them true
    hat_psi = np.array([[1.0, 0.1, 0.4], [0.1, 1.0, 0.0], [0.4, 0.0, 1.0]])
    one = from_factors([np.array([[1.0, 0.2, 0.0], [0.2, 1.0, 0.0], [0.0, 0.0, 1.0]]), np.eye(2)])
    s = support_metrics(KroneckerSum([hat_psi, np.eye(2)]), one)[0]
    assert (s.precision, s.recall, s.est_edges, s.true_edges) == (0.5, 1.0, 2, 1)
    with pytest.raises(ValueError):
        support_metrics(diag, gt, threshold=-1.0)
