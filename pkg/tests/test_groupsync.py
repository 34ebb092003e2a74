import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discrete_recovery.exceptions import ContractViolation, DegenerateLabelsError
from discrete_recovery.groupsync import (generate_perm, generate_z2, generate_zk,
                                         perm_align, perm_error, perm_error_detail,
                                         perm_fit_lambda, perm_init, perm_matrix,
                                         perm_scores, perm_step, z2_error, z2_init, z2_step,
                                         zk_diff, zk_error, zk_fit_lambda, zk_init, zk_inv,
                                         zk_op, zk_step, _zk_sort_clusters)
from discrete_recovery.numerics import Rng


def rank_one(z):
    Y = np.outer(z, z).astype(float)
    np.fill_diagonal(Y, 0.0)
    return Y


# ---------------------------------------------------------------- Z_2


def test_z2_fixed_points():
    z = np.array([1, -1, -1, 1, 1])
    Y = rank_one(z)
    np.testing.assert_array_equal(z2_step(Y, z), z)
    np.testing.assert_array_equal(z2_step(Y, -z), -z)


def test_z2_step_matches_argmin_form():
    rng = Rng(1)
    for _ in range(20):
        A = rng.standard_normal((5, 5))
        Y = A + A.T
        np.fill_diagonal(Y, 0.0)
        z = rng.signs(5)
        lam = z @ Y @ z / 25
        # argmin over a in {1, -1} of sum_i (Y_ij - lam z_i a)^2, +1 first on ties
        want = []
        for j in range(5):
            cost = [np.sum((Y[:, j] - lam * z * a) ** 2) for a in (1, -1)]
            want.append(1 if cost[0] <= cost[1] else -1)
        np.testing.assert_array_equal(z2_step(Y, z), want)


def test_z2_scale_invariance():
    inst = generate_z2(30, 0.4, Rng(2))
    z = Rng(3).signs(30)
    np.testing.assert_array_equal(z2_step(inst.Y, z), z2_step(7.5 * inst.Y, z))


def test_z2_init_examples():
    z = np.array([1, -1, 1, 1, -1, -1, 1])
    assert z2_error(z2_init(rank_one(z)), z) == 0.0
    assert z2_error(-z, z) == 0.0
    errs = [z2_error(z2_init(inst.Y), inst.truth)
            for inst in (generate_z2(200, np.sqrt(25 / 200), Rng(s)) for s in range(20))]
    assert max(errs) <= 0.1


def test_z2_generator():
    a = generate_z2(20, 0.5, Rng(4))
    b = generate_z2(20, 0.5, Rng(4))
    np.testing.assert_array_equal(a.Y, b.Y)
    np.testing.assert_array_equal(a.Y, a.Y.T)
    assert np.all(np.diag(a.Y) == 0)


# ---------------------------------------------------------------- Z/kZ


def test_zk_group_helpers():
    assert zk_diff(1, 2, 3) == 2
    assert zk_op(2, 2, 3) == 1
    assert zk_inv(1, 3) == 2


def test_zk_noiseless_fixed_point():
    inst = generate_zk(12, 3, 1.5, Rng(5), noise=0.0)
    lam, z = zk_step(inst.Y, inst.truth, 3)
    assert lam == pytest.approx(1.5)
    np.testing.assert_array_equal(z, inst.truth)


def test_zk_step_matches_scan():
    rng = Rng(6)
    for _ in range(10):
        Y = rng.standard_normal((6, 6))
        np.fill_diagonal(Y, 0.0)
        z = rng.integers(3, 6)
        if len(set(z.tolist())) == 1:
            continue
        lam, got = zk_step(Y, z, 3)
        for j in range(6):
            cost = [sum((Y[i, j] - lam * ((z[i] - a) % 3)) ** 2 for i in range(6))
                    for a in range(3)]
            assert got[j] == int(np.argmin(cost))


def test_zk_constant_labels_degenerate():
    with pytest.raises(DegenerateLabelsError):
        zk_fit_lambda(np.ones((4, 4)), [2, 2, 2, 2], 3)


def test_zk_init_examples():
    for seed in range(5):
        inst = generate_zk(60, 3, 1.0, Rng(seed), noise=0.0)
        assert zk_error(zk_init(inst.Y, 3, Rng(seed)), inst.truth, 3) == 0.0
    np.testing.assert_array_equal(zk_init(np.zeros((5, 5)), 1), 0)


def test_zk_sort_semantics():
    # clusters 1..3 with |block mean| 0.4, 2.1, 1.0 against cluster 0
    means = {1: 0.4, 2: 2.1, 3: 1.0}
    clusters = np.array([0, 1, 2, 3])
    Y = np.zeros((4, 4))
    for l, m in means.items():
        Y[l, 0] = m
    np.testing.assert_array_equal(_zk_sort_clusters(Y, clusters, 4), [0, 1, 3, 2])


def test_zk_metric_invariance():
    rng = Rng(7)
    a, b = rng.integers(4, 20), rng.integers(4, 20)
    e = zk_error(a, b, 4)
    for g in range(4):
        assert zk_error(zk_op(a, g, 4), b, 4) == pytest.approx(e)


def test_zk_loss_dominates_hamming():
    inst = generate_zk(15, 4, 0.7, Rng(8))
    model = inst.model()
    dm2 = model.delta_min_sq(inst.lambda_star)
    rng = Rng(9)
    for _ in range(30):
        z = rng.integers(4, 15)
        loss = model.loss(z, inst.truth, inst.lambda_star)
        assert loss >= dm2 * np.sum(z != inst.truth) - 1e-9


# ---------------------------------------------------------------- permutations


def test_perm_noiseless_step():
    p, d, lam = 5, 3, 2.0
    inst = generate_perm(p, d, lam, Rng(10), noise=0.0)
    lam_hat, sig = perm_step(inst.Y, inst.truth, d)
    assert lam_hat == pytest.approx(lam * (1 - 1 / p))
    np.testing.assert_array_equal(sig, inst.truth)


def test_perm_d1():
    inst = generate_perm(4, 1, 1.0, Rng(11))
    _, sig = perm_step(inst.Y, np.zeros((4, 1), dtype=int), 1)
    np.testing.assert_array_equal(sig, 0)


def exhaustive_argmax(M):
    d = M.shape[0]
    best = max(itertools.permutations(range(d)),
               key=lambda s: sum(M[s[c], c] for c in range(d)))
    return np.array(best)


def test_perm_step_matches_exhaustive():
    for seed in range(10):
        inst = generate_perm(4, 3, 0.5, Rng(seed))
        sig0 = np.stack([Rng(seed, (1, j)).permutation(3) for j in range(4)])
        lam, got = perm_step(inst.Y, sig0, 3)
        # independent dense score: M_j = lam sum_i Y_ij^T Z_i
        for j in range(4):
            M = sum(inst.Y[i * 3:(i + 1) * 3, j * 3:(j + 1) * 3].T @ perm_matrix(sig0[i])
                    for i in range(4)) * lam
            np.testing.assert_allclose(perm_scores(inst.Y, sig0, 3, lam)[j], M)
            np.testing.assert_array_equal(got[j], exhaustive_argmax(M))


def test_perm_lambda_dense_oracle():
    inst = generate_perm(3, 4, 1.0, Rng(12))
    sig = inst.truth
    Z = np.vstack([perm_matrix(s) for s in sig])
    assert perm_fit_lambda(inst.Y, sig, 4) == pytest.approx(np.sum(inst.Y * (Z @ Z.T)) / (9 * 4))


def test_perm_init_examples():
    inst = generate_perm(6, 3, 1.0, Rng(13), noise=0.0)
    assert perm_error(perm_init(inst.Y, 6, 3), inst.truth) == 0.0
    one = generate_perm(1, 3, 1.0, Rng(14))
    assert perm_error(perm_init(one.Y, 1, 3), one.truth) == 0.0
    with pytest.raises(ContractViolation):
        perm_init(inst.Y, 5, 3)


def test_perm_metric_invariance_and_align():
    rng = Rng(15)
    truth = np.stack([rng.permutation(4) for _ in range(10)])
    sig = truth.copy()
    sig[:3] = np.stack([rng.permutation(4) for _ in range(3)])
    e = perm_error(sig, truth)
    pi = rng.permutation(4)
    assert perm_error(sig[:, pi], truth) == pytest.approx(e)
    aligned = perm_align(sig[:, pi], truth)
    assert np.mean(np.any(aligned != truth, axis=1)) == pytest.approx(e)


def test_perm_heuristic_flag():
    rng = Rng(16)
    truth = np.stack([rng.permutation(9) for _ in range(5)])
    err, heuristic = perm_error_detail(truth[:, rng.permutation(9)], truth)
    assert heuristic and err == 0.0
    assert perm_error_detail(truth[:, :], truth) == (0.0, True)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_perm_metric_matches_bruteforce(d, seed):
    rng = Rng(seed)
    truth = np.stack([rng.permutation(d) for _ in range(5)])
    sig = np.stack([rng.permutation(d) for _ in range(5)])
    want = min(np.mean([not np.array_equal(sig[j], truth[j][list(pi)]) for j in range(5)])
               for pi in itertools.permutations(range(d)))
    assert perm_error(sig, truth) == pytest.approx(want)
