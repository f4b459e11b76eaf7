"""Sampler membership, distributional checks, and LP outer boxes."""

import numpy as np
import pytest
from scipy.stats import kstest

from dflkit import samplers as sp
from dflkit.objectives import Box, BudgetSimplex


def test_box_membership_thin_dimension():
    eps = 1e-9
    box = Box(np.array([0.5, -1.0]), np.array([0.5 + eps, 1.0]))
    s = sp.sample_box(box, 200, seed=1)
    assert np.all(s >= box.lower) and np.all(s <= box.upper)


def test_box_mean_clt():
    box = Box(np.array([-1.0, 2.0]), np.array([1.0, 6.0]))
    n = 10_000
    s = sp.sample_box(box, n, seed=7)
    width = box.upper - box.lower
    sigma = width / np.sqrt(12 * n)
    assert np.all(np.abs(s.mean(axis=0) - box.center()) < 3 * sigma)


def test_box_seed_determinism():
    box = Box(np.zeros(3), np.ones(3))
    assert np.array_equal(sp.sample_box(box, 50, seed=3), sp.sample_box(box, 50, seed=3))
    assert not np.array_equal(sp.sample_box(box, 50, seed=3), sp.sample_box(box, 50, seed=4))


def test_box_rejects_nonpositive_n():
    with pytest.raises(ValueError):
        sp.sample_box(Box(np.zeros(2), np.ones(2)), 0)


def test_simplex_rows_sum_to_budget():
    s = sp.sample_simplex(BudgetSimplex(dim=5, budget=3.7), 500, seed=0)
    assert np.all(s >= 0)
    assert np.max(np.abs(s.sum(axis=1) - 3.7)) < 1e-12


def test_simplex_dim2_uniform_marginal():
    s = sp.sample_simplex(BudgetSimplex(dim=2, budget=2.0), 10_000, seed=5)
    stat = kstest(s[:, 0] / 2.0, "uniform")
    assert stat.pvalue > 0.01


def test_simplex_dim1_equals_budget():
    s = sp.sample_simplex(BudgetSimplex(dim=1, budget=4.2), 20, seed=2)
    assert np.allclose(s, 4.2)


def test_sample_actions_dispatch():
    box = Box(np.zeros(2), np.ones(2))
    simp = BudgetSimplex(dim=3, budget=1.0)
    assert sp.sample_actions(box, 10, seed=0).shape == (10, 2)
    assert sp.sample_actions(simp, 10, seed=0).shape == (10, 3)
    with pytest.raises(ValueError):
        sp.sample_actions("nope", 10)


def box_to_Gh(lower, upper):
    m = len(lower)
    G = np.vstack([np.eye(m), -np.eye(m)])
    h = np.concatenate([upper, -np.asarray(lower, dtype=float)])
    return G, h


def test_outer_box_of_unit_box():
    G, h = box_to_Gh([-1.0, -1.0], [1.0, 1.0])
    box = sp.outer_box_of_linear(G, h)
    assert np.allclose(box.lower, [-1, -1]) and np.allclose(box.upper, [1, 1])


def test_outer_box_of_simplex():
    # a >= 0, a1 + a2 <= 1: vertices (0,0), (1,0), (0,1)
    G = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]])
    h = np.array([0.0, 0.0, 1.0])
    box = sp.outer_box_of_linear(G, h)
    assert np.allclose(box.lower, [0, 0]) and np.allclose(box.upper, [1, 1])


def test_outer_box_infeasible_raises():
    G = np.array([[1.0], [-1.0]])
    h = np.array([-2.0, 1.0])  # a <= -2 and a >= -1
    with pytest.raises(ValueError):
        sp.outer_box_of_linear(G, h)


def test_outer_box_unbounded_raises():
    G = np.array([[1.0, 0.0]])  # only a1 <= 1
    h = np.array([1.0])
    with pytest.raises(ValueError):
        sp.outer_box_of_linear(G, h)


def test_hit_and_run_membership():
    G, h = box_to_Gh([-1.0, 0.0, 2.0], [1.0, 3.0, 2.5])
    s = sp.hit_and_run(G, h, np.array([0.0, 1.0, 2.2]), 500, seed=0, burn_in=100)
    assert s.shape == (500, 3)
    assert np.max(G @ s.T - h[:, None]) <= 1e-10


def test_hit_and_run_uniform_mean():
    G, h = box_to_Gh([-1.0, -1.0], [1.0, 1.0])
    n = 10_000
    s = sp.hit_and_run(G, h, np.array([0.3, -0.2]), n, seed=11, burn_in=1000)
    # effective samples are correlated; allow a generous factor over CLT
    sigma = 2.0 / np.sqrt(12 * n)
    assert np.all(np.abs(s.mean(axis=0)) < 12 * sigma)


def test_hit_and_run_zero_samples():
    G, h = box_to_Gh([0.0], [1.0])
    s = sp.hit_and_run(G, h, np.array([0.5]), 0, seed=0, burn_in=10)
    assert s.shape == (0, 1)


def test_hit_and_run_rejects_exterior_start():
    G, h = box_to_Gh([0.0], [1.0])
    with pytest.raises(ValueError):
        sp.hit_and_run(G, h, np.array([2.0]), 5)


def test_hit_and_run_determinism():
    G, h = box_to_Gh([0.0, 0.0], [1.0, 1.0])
    a0 = np.array([0.5, 0.5])
    s1 = sp.hit_and_run(G, h, a0, 50, seed=9, burn_in=20)
    s2 = sp.hit_and_run(G, h, a0, 50, seed=9, burn_in=20)
    assert np.array_equal(s1, s2)
