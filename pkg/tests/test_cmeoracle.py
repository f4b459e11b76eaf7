"""Kernel oracle checks: gram identities, CME weights, KDE expectation."""

import numpy as np
import pytest

from dflkit import cmeoracle as cm
from dflkit import objectives as ob


def test_rbf_gram_diagonal_and_symmetry():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(12, 3))
    K = cm.gram(X, cm.KernelSpec("rbf", bandwidth=0.7))
    assert np.allclose(np.diag(K), 1.0)
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_rbf_gram_hand_value():
    K = cm.gram(np.array([[0.0], [1.0]]), cm.KernelSpec("rbf", bandwidth=1.0))
    assert K[0, 1] == pytest.approx(np.exp(-0.5), rel=1e-15)


def test_identical_rows_give_identical_gram_rows():
    X = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.5]])
    for k in (cm.KernelSpec("rbf", bandwidth=0.5),
              cm.KernelSpec("exponential", scale=2.0)):
        K = cm.gram(X, k)
        assert np.array_equal(K[0], K[1])


def test_exponential_gram_hand_value():
    X = np.array([[1.0, 2.0], [0.0, 1.0]])
    K = cm.gram(X, cm.KernelSpec("exponential", scale=2.0))
    # q.k = 0*1 + 1*2 = 2, divided by scale 2
    assert K[0, 1] == pytest.approx(np.exp(1.0), rel=1e-15)
    assert K[0, 0] == pytest.approx(np.exp(5.0 / 2.0), rel=1e-15)


def test_kernel_vector_matches_gram_column():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(8, 2))
    for k in (cm.KernelSpec("rbf", bandwidth=1.3),
              cm.KernelSpec("exponential", scale=1.5)):
        kv = cm.kernel_vector(X, X[3], k)
        assert np.allclose(kv, cm.gram(X, k)[:, 3], atol=1e-14)


def test_kernel_validation():
    with pytest.raises(ValueError):
        cm.KernelSpec("triangle")
    with pytest.raises(ValueError):
        cm.KernelSpec("rbf", bandwidth=0.0)
    with pytest.raises(ValueError):
        cm.KernelSpec("exponential", scale=-1.0)
    with pytest.raises(ValueError):
        cm.gram(np.array([[np.nan]]), cm.KernelSpec("rbf"))


def test_cme_weights_single_point_scalar_solve():
    k = cm.KernelSpec("rbf", bandwidth=1.0)
    beta = cm.cme_weights(np.array([[0.3]]), [0.3], k, lam=0.1)
    assert beta[0] == pytest.approx(1.0 / 1.1, rel=1e-12)


def test_cme_weights_vanish_far_away():
    k = cm.KernelSpec("rbf", bandwidth=0.5)
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, size=(20, 2))
    beta = cm.cme_weights(X, [50.0, 50.0], k, lam=1e-3)
    assert np.max(np.abs(beta)) < 1e-10


def test_cme_weights_solve_residual():
    rng = np.random.default_rng(3)
    for k in (cm.KernelSpec("rbf", bandwidth=0.8),
              cm.KernelSpec("exponential", scale=4.0)):
        for _ in range(20):
            S = int(rng.integers(2, 40))
            X = rng.uniform(-1, 1, size=(S, 3))
            x = rng.uniform(-1, 1, size=3)
            lam = 10.0 ** rng.uniform(-3, -1)
            beta = cm.cme_weights(X, x, k, lam)
            K = cm.gram(X, k)
            resid = (K + lam * np.eye(S)) @ beta - cm.kernel_vector(X, x, k)
            assert np.max(np.abs(resid)) < 1e-8


def test_cme_weights_not_a_probability_vector():
    # documented contract: no nonnegativity, no sum-to-one
    k = cm.KernelSpec("rbf", bandwidth=1.0)
    beta = cm.cme_weights(np.array([[0.0], [0.1]]), [0.0], k, lam=0.1)
    assert abs(beta.sum() - 1.0) > 1e-3 or np.any(beta < 0)


def test_cme_weights_rejects_bad_lam():
    with pytest.raises(ValueError):
        cm.cme_weights(np.array([[0.0]]), [0.0], cm.KernelSpec("rbf"), lam=0.0)


def test_cme_expectation_one_hot_and_uniform():
    obj = ob.synthetic_convex(dim=2)
    rng = np.random.default_rng(4)
    Y = rng.normal(size=(6, 2))
    a = np.array([0.2, -0.4])
    beta = np.zeros(6); beta[3] = 1.0
    assert cm.cme_expectation(beta, Y, obj, a) == pytest.approx(
        ob.cost(obj, Y[3], a), rel=1e-14)
    uni = np.full(6, 1.0 / 6.0)
    mean_f = np.mean([ob.cost(obj, Y[s], a) for s in range(6)])
    assert cm.cme_expectation(uni, Y, obj, a) == pytest.approx(mean_f, rel=1e-12)


def test_cme_expectation_matches_manual_dot():
    obj = ob.inventory()
    rng = np.random.default_rng(5)
    Y = rng.uniform(0, 3, size=(9, 7))
    a = rng.uniform(0, 3, size=7)
    beta = rng.normal(size=9)
    manual = sum(beta[s] * ob.cost(obj, Y[s], a) for s in range(9))
    assert cm.cme_expectation(beta, Y, obj, a) == pytest.approx(manual, rel=1e-12)
    with pytest.raises(ValueError):
        cm.cme_expectation(beta[:5], Y, obj, a)


def test_kde_all_keys_equal_is_plain_mean():
    obj = ob.synthetic_convex(dim=2)
    rng = np.random.default_rng(6)
    keys = np.tile(rng.normal(size=4), (7, 1))
    values = rng.normal(size=(7, 2))
    a = np.array([0.1, 0.1])
    got = cm.kde_conditional_expectation(keys, values, rng.normal(size=4),
                                         2.0, obj, a)
    mean_f = np.mean([ob.cost(obj, values[s], a) for s in range(7)])
    assert got == pytest.approx(mean_f, rel=1e-12)


def test_kde_single_point():
    obj = ob.synthetic_nonconvex(dim=2)
    v = np.array([[0.5, -0.3]])
    a = np.array([0.0, 0.2])
    got = cm.kde_conditional_expectation(np.array([[1.0, 2.0]]), v,
                                         np.array([3.0, 1.0]), 1.0, obj, a)
    assert got == pytest.approx(ob.cost(obj, v[0], a), rel=1e-14)


def test_kde_matches_manual_softmax():
    obj = ob.synthetic_convex(dim=2)
    rng = np.random.default_rng(7)
    keys = rng.normal(size=(11, 5))
    values = rng.normal(size=(11, 2))
    q = rng.normal(size=5)
    a = np.array([-0.2, 0.6])
    scale = np.sqrt(5.0)
    w = np.exp(keys @ q / scale)
    w /= w.sum()
    manual = sum(w[s] * ob.cost(obj, values[s], a) for s in range(11))
    got = cm.kde_conditional_expectation(keys, values, q, scale, obj, a)
    assert got == pytest.approx(manual, rel=1e-12)


def test_kde_huge_logits_stay_finite():
    obj = ob.synthetic_convex(dim=2)
    keys = np.array([[800.0], [810.0]])
    values = np.array([[0.1, 0.1], [0.2, 0.2]])
    got = cm.kde_conditional_expectation(keys, values, np.array([2.0]), 1.0,
                                         obj, np.array([0.0, 0.0]))
    assert np.isfinite(got)
    with pytest.raises(ValueError):
        cm.kde_conditional_expectation(keys, values, np.array([2.0]), 0.0,
                                       obj, np.array([0.0, 0.0]))


def test_cme_error_shrinks_with_sample_size():
    # 1d task with known p(y|x): y|x ~ N(2x, 0.3^2); reference by quadrature
    obj = ob.synthetic_convex(dim=1)
    a = np.array([0.3])
    xq = 0.25
    m, s = 2 * xq, 0.3
    ygrid = np.linspace(m - 6 * s, m + 6 * s, 4001)
    dens = np.exp(-0.5 * ((ygrid - m) / s) ** 2) / (s * np.sqrt(2 * np.pi))
    f = ob.cost_matrix(obj, ygrid[:, None], a[None, :])[:, 0]
    ref = np.trapezoid(f * dens, ygrid)

    medians = []
    for S in (10, 100, 1000):
        errs = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            X = rng.uniform(-1, 1, size=(S, 1))
            Y = 2 * X[:, 0] + s * rng.standard_normal(S)
            k = cm.KernelSpec("rbf", bandwidth=S ** (-0.2))
            beta = cm.cme_weights(X, [xq], k, lam=1e-3)
            errs.append(abs(cm.cme_expectation(beta, Y[:, None], obj, a) - ref))
        medians.append(np.median(errs))
    assert medians[0] > medians[1] > medians[2]
