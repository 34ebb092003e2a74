import math

import numpy as np
import pytest

from discrete_recovery.exceptions import ContractViolation, SupportTooLargeError
from discrete_recovery.numerics import Rng
from discrete_recovery.signrec import (SignModel, generate_sign, hamming_s, lambda_for_snr,
                                       restricted_lsq, sign_assign, sign_assign_all, sign_loss,
                                       snr, sqrt_slope, sqrt_slope_init, sqrt_slope_objective,
                                       threshold_t)


def test_lsq_zero_support():
    X = Rng(0).standard_normal((5, 3))
    np.testing.assert_array_equal(restricted_lsq(X, np.ones(5), [0, 0, 0]), 0.0)


def test_lsq_noiseless_interpolation():
    rng = Rng(1)
    X = rng.standard_normal((20, 8))
    beta = np.zeros(8)
    beta[[1, 4, 6]] = [1.5, -2.0, 0.5]
    got = restricted_lsq(X, X @ beta, np.sign(beta).astype(int))
    np.testing.assert_allclose(got, beta, atol=1e-8)


def test_lsq_matches_normal_equations_and_orthogonality():
    rng = Rng(2)
    X = rng.standard_normal((20, 8))
    Y = rng.standard_normal(20)
    signs = np.zeros(8, dtype=int)
    S = [0, 3, 5]
    signs[S] = [1, -1, 1]
    got = restricted_lsq(X, Y, signs)
    XS = X[:, S]
    want = np.linalg.solve(XS.T @ XS, XS.T @ Y)
    np.testing.assert_allclose(got[S], want, atol=1e-10)
    assert np.all(np.delete(got, S) == 0)
    np.testing.assert_allclose(XS.T @ (Y - X @ got), 0.0, atol=1e-8)


def test_lsq_support_too_large():
    X = Rng(3).standard_normal((3, 5))
    with pytest.raises(SupportTooLargeError):
        restricted_lsq(X, np.ones(3), np.ones(5, dtype=int))
    beta = restricted_lsq(X, np.ones(3), np.ones(5, dtype=int), allow_ridge=True)
    assert np.all(np.isfinite(beta))


def test_lsq_singular_gram_uses_ridge():
    x = Rng(4).standard_normal(10)
    X = np.column_stack([x, x, Rng(5).standard_normal(10)])
    beta = restricted_lsq(X, x, [1, 1, 0])
    assert np.all(np.isfinite(beta))
    np.testing.assert_allclose(X @ beta, x, atol=1e-6)


def test_threshold_examples():
    assert threshold_t(7.0, 1.3, 10, 5) == pytest.approx(0.65)
    assert threshold_t(100.0, 2.0, 10, 2) == pytest.approx(1 + math.log(4) / 200)
    assert threshold_t(100.0, 2.0, 10, 2) == pytest.approx(1.006931, abs=1e-6)
    a = threshold_t(50.0, 2.0, 10, 2) - 1.0
    b = threshold_t(100.0, 2.0, 10, 2) - 1.0
    assert b == pytest.approx(a / 2)
    assert threshold_t(1.0, 1.0, 3, 3) == -np.inf
    with pytest.raises(ContractViolation):
        threshold_t(1.0, 1.0, 3, 4)


def test_assign_noiseless_examples():
    rng = Rng(6)
    X = rng.standard_normal((40, 6))
    lam = 1.0
    beta = np.zeros(6)
    beta[2] = 2 * lam
    Y = X @ beta
    assert sign_assign(2, X, Y, beta, lam, 1) == 1
    assert sign_assign(0, X, Y, beta, lam, 1) == 0


def test_assign_matches_term_by_term():
    rng = Rng(7)
    n, p, s, lam = 30, 10, 3, 0.8
    X = rng.standard_normal((n, p))
    Y = rng.standard_normal(n)
    beta = rng.standard_normal(p) * (rng.uniform(p) < 0.4)
    got = sign_assign_all(X, Y, beta, lam, s)
    for j in range(p):
        xj = X[:, j]
        u = (xj @ Y - sum(beta[l] * (xj @ X[:, l]) for l in range(p) if l != j)) / (xj @ xj)
        t = lam / 2 + math.log((p - s) / s) / (lam * (xj @ xj))
        want = 1 if u > t else (-1 if u < -t else 0)
        assert got[j] == want == sign_assign(j, X, Y, beta, lam, s)


def test_snr_roundtrip():
    lam = lambda_for_snr(3.0, 500, 1000, 10)
    assert snr(lam, 500, 1000, 10) == pytest.approx(3.0)


def test_sqrt_slope_zero_response():
    X = Rng(8).standard_normal((20, 10))
    np.testing.assert_array_equal(sqrt_slope_init(X, np.zeros(20), 1.0), 0)


def test_sqrt_slope_candidate_dominance():
    inst = generate_sign(60, 20, 2, 1.5, Rng(9))
    b = sqrt_slope(inst.X, inst.Y)
    f = sqrt_slope_objective(inst.X, inst.Y, b, 1.5)
    assert f <= sqrt_slope_objective(inst.X, inst.Y, inst.beta_star, 1.5) + 1e-8
    assert f <= sqrt_slope_objective(inst.X, inst.Y, np.zeros(20), 1.5) + 1e-8


def test_sqrt_slope_init_high_snr():
    n, p, s = 60, 20, 2
    lam = lambda_for_snr(8.0, n, p, s)
    hits = 0
    for r in range(50):
        inst = generate_sign(n, p, s, lam, Rng(10, (0, r)))
        hits += np.array_equal(sqrt_slope_init(inst.X, inst.Y, lam), inst.truth_signs)
    assert hits >= 48


def test_hamming_s():
    z = np.array([1, 0, -1, 0, 1])
    assert hamming_s(z, z, 4) == 0.0
    w = z.copy()
    w[0] = -1
    assert hamming_s(w, z, 4) == 0.25
    rng = Rng(11)
    a, b = rng.integers(3, 30) - 1, rng.integers(3, 30) - 1
    assert hamming_s(a, b, 7) == pytest.approx(np.sum(a != b) / 7)


def test_loss_formula_and_hamming_relation():
    inst = generate_sign(50, 15, 3, 1.2, Rng(12))
    model = inst.model()
    rng = Rng(13)
    cn = model.col_norm_sq
    dm2 = model.delta_min_sq(inst.beta_star)
    for _ in range(30):
        z = rng.integers(3, 15) - 1
        zt = inst.truth_signs
        want = 0.0
        for j in range(15):
            b2 = inst.beta_star[j] ** 2 * cn[j]
            if zt[j] == 0 and z[j] != 0:
                want += inst.lam ** 2 * cn[j]
            elif zt[j] != 0 and z[j] == 0:
                want += b2
            elif z[j] * zt[j] == -1:
                want += 4 * b2
        loss = sign_loss(z, zt, inst.beta_star, inst.lam, cn)
        assert loss == pytest.approx(want)
        assert hamming_s(z, zt, 3) <= loss / (3 * dm2) + 1e-12


def test_generator_column_norms():
    for seed in range(20):
        inst = generate_sign(200, 30, 3, 1.0, Rng(seed))
        ratio = np.sum(inst.X ** 2, axis=0) / 200
        assert np.all((ratio > 0.5) & (ratio < 1.5))
        assert np.sum(inst.truth_signs != 0) == 3
        np.testing.assert_array_equal(np.sign(inst.beta_star), inst.truth_signs)


def test_model_ridge_fallback_counted():
    X = Rng(14).standard_normal((3, 6))
    model = SignModel(X, np.ones(3), 1.0, 2)
    model.fit_block(np.ones(6, dtype=int))
    assert model.ridge_fallbacks == 1
    with pytest.raises(ContractViolation):
        model.validate_labels([2, 0, 0, 0, 0, 0])
