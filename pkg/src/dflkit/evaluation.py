"""Decision evaluation: realized cost and regret, Monte Carlo oracle,
landscape grids, and a bias-variance decomposition probe.

The oracle lower bound draws outcomes from the TRUE conditional
distribution (known generator, synthetic tasks only) and minimizes the
Monte Carlo mean cost with the task solver, so a model's mean realized
cost minus the oracle's is its regret gap.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import objectives as ob
from . import simdata as sd
from . import solvers
from .objectives import Box, BudgetSimplex


@dataclass
class RegretReport:
    per_sample_cost: np.ndarray
    oracle_cost: np.ndarray | None
    mean_cost: float
    mean_gap: float | None
    infeasible: list[int]
    runtime_s: float
    fingerprint: dict = field(default_factory=dict)

    def to_json(self) -> str:
        n = self.per_sample_cost.size
        std = float(self.per_sample_cost.std(ddof=1)) if n > 1 else 0.0
        blob = {
            "mean_cost": self.mean_cost,
            "std_cost": std,
            "stderr_cost": std / np.sqrt(n) if n else 0.0,
            "mean_gap": self.mean_gap,
            "per_sample_cost": self.per_sample_cost.tolist(),
            "oracle_cost": (None if self.oracle_cost is None
                            else self.oracle_cost.tolist()),
            "infeasible": self.infeasible,
            "runtime_s": self.runtime_s,
            "fingerprint": self.fingerprint,
        }
        return json.dumps(blob, indent=2)


def _test_arrays(testset) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(testset, "subset"):
        return testset.subset("test")
    X, Y = testset
    return np.atleast_2d(np.asarray(X, dtype=float)), \
        np.atleast_2d(np.asarray(Y, dtype=float))


def regret_from_decisions(A, Y, objective, oracle_A=None,
                          fingerprint: dict | None = None,
                          runtime_s: float = 0.0) -> RegretReport:
    """Score precomputed decisions (rows of A) against realized outcomes.

    Infeasible rows are still scored but their indices are reported.
    oracle_A, when given, holds the lower-bound decisions for the same
    rows; the gap is the difference of mean realized costs.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if A.shape[0] != Y.shape[0]:
        raise ValueError("decisions and outcomes disagree on row count")
    costs = ob.cost_batch(objective, Y, A)
    infeasible = [i for i in range(A.shape[0])
                  if not objective.feasible.contains(A[i])]
    oracle_costs = None
    gap = None
    if oracle_A is not None:
        oracle_A = np.atleast_2d(np.asarray(oracle_A, dtype=float))
        oracle_costs = ob.cost_batch(objective, Y, oracle_A)
        gap = float(costs.mean() - oracle_costs.mean())
    return RegretReport(costs, oracle_costs, float(costs.mean()), gap,
                        infeasible, runtime_s, dict(fingerprint or {}))


def decision_regret(decider, testset, objective, oracle=None,
                    fingerprint: dict | None = None) -> RegretReport:
    """Mean realized cost of decider over the test split.

    decider and oracle map x to a feasible action; infeasible decisions
    are still scored but their indices are reported.
    """
    X, Y = _test_arrays(testset)
    t0 = time.perf_counter()
    A = np.stack([np.asarray(decider(X[i]), dtype=float)
                  for i in range(X.shape[0])])
    oracle_A = None
    if oracle is not None:
        oracle_A = np.stack([np.asarray(oracle(X[i]), dtype=float)
                             for i in range(X.shape[0])])
    return regret_from_decisions(A, Y, objective, oracle_A=oracle_A,
                                 fingerprint=fingerprint,
                                 runtime_s=time.perf_counter() - t0)


def oracle_decision(x, generator: sd.GmmGenerator, objective,
                    n_mc: int = 100_000, seed: int = 0, iters: int = 500,
                    lr: float | None = None,
                    restarts: int = 4) -> tuple[np.ndarray, float]:
    """Best action against the true conditional mixture at x.

    Minimizes the n_mc-draw Monte Carlo mean cost from a deterministic
    start plus `restarts` random starts (5 solves at the default).
    """
    draws = sd.sample_conditional(generator, x, n_mc, seed)

    def value_fn(a):
        return float(ob.cost_matrix(objective, draws,
                                    np.asarray(a)[None, :]).mean())

    def grad_fn(a):
        A = np.broadcast_to(np.asarray(a, dtype=float),
                            (draws.shape[0], np.size(a)))
        return ob.grad_a_batch(objective, draws, A).mean(axis=0)

    res = solvers.minimize_over(value_fn, grad_fn, objective.feasible,
                                iters=iters, lr=lr, restarts=restarts,
                                seed=seed)
    return res.a, res.value


def batch_oracle_decisions(X, generator: sd.GmmGenerator, objective,
                           n_mc: int = 2000, seed: int = 0, iters: int = 300,
                           lr: float | None = None, restarts: int = 1):
    """Oracle decisions for every row of X in one batched solve.

    Returns (A, expected_costs). Each row gets its own conditional draw
    set; the solver runs all rows simultaneously, once per start.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    m = int(objective.decision_dim)
    rng = np.random.default_rng(seed)
    draws = np.stack([sd.sample_conditional(generator, X[i], n_mc, rng)
                      for i in range(n)])
    Y_flat = draws.reshape(-1, draws.shape[2])

    def value_fn(A):
        A_rep = np.repeat(np.atleast_2d(A), n_mc, axis=0)
        return ob.cost_batch(objective, Y_flat, A_rep).reshape(n, n_mc).mean(axis=1)

    def grad_fn(A):
        A_rep = np.repeat(np.atleast_2d(A), n_mc, axis=0)
        G = ob.grad_a_batch(objective, Y_flat, A_rep)
        return G.reshape(n, n_mc, m).mean(axis=1)

    res = solvers.minimize_over_batch(value_fn, grad_fn, objective.feasible,
                                      n, iters=iters, lr=lr,
                                      restarts=restarts, seed=seed)
    return res.a, res.value


def landscape_grid(g_like, x, box: Box, resolution: int = 21) -> np.ndarray:
    """resolution x resolution values of g_like(x, a) over a 2D box."""
    if box.dim != 2:
        raise ValueError("landscape grids need a 2D decision space")
    a1 = np.linspace(box.lower[0], box.upper[0], resolution)
    a2 = np.linspace(box.lower[1], box.upper[1], resolution)
    V = np.empty((resolution, resolution))
    for i, u in enumerate(a1):
        for j, v in enumerate(a2):
            V[i, j] = g_like(x, np.array([u, v]))
    return V


def mc_truth_fn(generator: sd.GmmGenerator, objective, n_mc: int = 100_000,
                seed: int = 0):
    """g-like callable for the ground-truth landscape: the Monte Carlo
    estimate of E[f(y, a) | x], with draws cached per x."""
    cache = {}

    def fn(x, a):
        key = np.asarray(x, dtype=float).tobytes()
        if key not in cache:
            cache[key] = sd.sample_conditional(generator, x, n_mc, seed)
        draws = cache[key]
        return float(ob.cost_matrix(objective, draws,
                                    np.asarray(a)[None, :]).mean())

    return fn


def save_landscape_csv(values: np.ndarray, box: Box, path: str) -> None:
    """Rows a1,a2,value in row-major grid order."""
    res = values.shape[0]
    a1 = np.linspace(box.lower[0], box.upper[0], res)
    a2 = np.linspace(box.lower[1], box.upper[1], res)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a1", "a2", "value"])
        for i in range(res):
            for j in range(res):
                w.writerow([repr(float(a1[i])), repr(float(a2[j])),
                            repr(float(values[i, j]))])


def pearson(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    return float(np.corrcoef(u, v)[0, 1])


@dataclass
class BiasVarianceReport:
    mse: float
    bias2: float
    variance: float
    per_probe: dict = field(default_factory=dict)


def bias_variance_probe(fit_fn, generator: sd.GmmGenerator, objective,
                        trials: int, n_train: int, seed: int = 0,
                        n_probe: int = 16,
                        n_mc: int = 20_000) -> BiasVarianceReport:
    """Decompose a model family's error against the true E[f(y,a)|x].

    fit_fn(dataset, seed) must return a callable g(x, a). The family is
    refit on `trials` independent datasets; at n_probe fixed (x, a)
    points we measure, across fits, mse = mean (g - Ef)^2, bias2 =
    (mean g - Ef)^2 and variance (population, ddof=0), so
    mse = bias2 + variance holds identically at every probe point.
    """
    rng = np.random.default_rng(seed)
    Xp = rng.uniform(generator.x_low, generator.x_high,
                     size=(n_probe, generator.p))
    Ap = _sample_feasible(objective.feasible, n_probe, rng)
    truth = np.empty(n_probe)
    for k in range(n_probe):
        draws = sd.sample_conditional(generator, Xp[k], n_mc, rng)
        truth[k] = ob.cost_matrix(objective, draws, Ap[k][None, :]).mean()
    preds = np.empty((trials, n_probe))
    for t in range(trials):
        ds = sd.generate(generator, n_train, seed=seed + 1000 + t)
        g_fit = fit_fn(ds, seed + 1000 + t)
        for k in range(n_probe):
            preds[t, k] = g_fit(Xp[k], Ap[k])
    err = preds - truth
    mse_p = (err ** 2).mean(axis=0)
    bias2_p = err.mean(axis=0) ** 2
    var_p = preds.var(axis=0, ddof=0)
    return BiasVarianceReport(float(mse_p.mean()), float(bias2_p.mean()),
                              float(var_p.mean()),
                              {"mse": mse_p, "bias2": bias2_p,
                               "variance": var_p, "truth": truth,
                               "x": Xp, "a": Ap})


def _sample_feasible(feasible, n: int, rng) -> np.ndarray:
    if isinstance(feasible, Box):
        return rng.uniform(feasible.lower, feasible.upper,
                           size=(n, feasible.dim))
    if isinstance(feasible, BudgetSimplex):
        return feasible.budget * rng.dirichlet(np.ones(feasible.dim), size=n)
    raise ValueError(f"unknown feasible set {type(feasible).__name__}")
