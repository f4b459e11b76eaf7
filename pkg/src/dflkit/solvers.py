"""Decision-time optimizers: projected Adam on boxes, mirror descent on
the budget simplex.

pgd_minimize anneals the Adam step with a cosine schedule over the fixed
iteration budget: constant-step Adam settles into a limit cycle whose
radius tracks the step size, so driving the step to zero late (while
keeping it large early, when the iterate still travels) is what makes
the best iterate land on the minimizer instead of orbiting it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import Box, BudgetSimplex


@dataclass
class SolveResult:
    a: np.ndarray         # best-value feasible iterate
    value: float
    trace: np.ndarray     # best-so-far value per iteration (non-increasing)


@dataclass
class BatchSolveResult:
    a: np.ndarray         # (n, m) best iterates
    value: np.ndarray     # (n,)
    trace: np.ndarray     # (iters+1, n)


def project_box(a: np.ndarray, box: Box) -> np.ndarray:
    """Coordinate-wise clamp onto the box."""
    return np.clip(np.asarray(a, dtype=float), box.lower, box.upper)


def pgd_minimize_batch(value_fn, grad_fn, box: Box, a0: np.ndarray,
                       lr: float = 0.05, iters: int = 500) -> BatchSolveResult:
    """Solve n independent box problems at once.

    value_fn maps (n, m) -> (n,), grad_fn maps (n, m) -> (n, m).
    """
    A = project_box(np.atleast_2d(np.asarray(a0, dtype=float)).copy(), box)
    n = A.shape[0]
    m1 = np.zeros_like(A)
    v1 = np.zeros_like(A)
    b1, b2, eps = 0.9, 0.999, 1e-8
    vals = np.asarray(value_fn(A), dtype=float)
    best_vals = vals.copy()
    best_A = A.copy()
    trace = np.empty((iters + 1, n))
    trace[0] = best_vals
    for t in range(1, iters + 1):
        lr_t = lr * 0.5 * (1.0 + np.cos(np.pi * (t - 1) / iters))
        G = np.asarray(grad_fn(A), dtype=float)
        if not np.all(np.isfinite(G)):
            raise ValueError("nonfinite gradient in pgd_minimize")
        m1 = b1 * m1 + (1 - b1) * G
        v1 = b2 * v1 + (1 - b2) * G * G
        mh = m1 / (1 - b1 ** t)
        vh = v1 / (1 - b2 ** t)
        A = project_box(A - lr_t * mh / (np.sqrt(vh) + eps), box)
        vals = np.asarray(value_fn(A), dtype=float)
        better = vals < best_vals
        best_vals = np.where(better, vals, best_vals)
        best_A[better] = A[better]
        trace[t] = best_vals
    return BatchSolveResult(best_A, best_vals, trace)


def pgd_minimize(value_fn, grad_fn, box: Box, lr: float = 0.05,
                 iters: int = 500, a0: np.ndarray | None = None,
                 seed: int | None = None) -> SolveResult:
    """Projected Adam descent of a scalar objective over a box.

    a0 defaults to the box center; passing seed instead draws a uniform
    start. Returns the best-value iterate and the best-so-far trace.
    """
    if a0 is None:
        if seed is not None:
            rng = np.random.default_rng(seed)
            a0 = rng.uniform(box.lower, box.upper)
        else:
            a0 = box.center()
    res = pgd_minimize_batch(
        lambda A: np.array([float(value_fn(A[0]))]),
        lambda A: np.asarray(grad_fn(A[0]), dtype=float)[None, :],
        box, np.asarray(a0, dtype=float)[None, :], lr=lr, iters=iters)
    return SolveResult(res.a[0], float(res.value[0]), res.trace[:, 0])


def mirror_step(a: np.ndarray, grad: np.ndarray, lr: float,
                budget: float) -> np.ndarray:
    """One multiplicative-weights update on the budget simplex:
    a'[i] = budget * a[i] exp(-lr g[i]) / sum_j a[j] exp(-lr g[j]).
    """
    a = np.asarray(a, dtype=float)
    g = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("nonfinite gradient in mirror_step")
    u = -lr * g
    u -= np.max(u, axis=-1, keepdims=True)  # no-op when max is 0; guards overflow
    w = a * np.exp(u)
    return budget * w / w.sum(axis=-1, keepdims=True)


def mirror_descent_simplex(value_fn, grad_fn, budget: float, lr: float = 0.01,
                           iters: int = 500,
                           a0: np.ndarray | None = None,
                           dim: int | None = None) -> SolveResult:
    """Mirror descent (entropic) over {a >= 0, sum a = budget}.

    a0 must be strictly positive and sum to the budget; defaults to the
    uniform point budget/dim. Returns the best-value iterate.
    """
    if a0 is None:
        if dim is None:
            raise ValueError("need a0 or dim")
        a0 = np.full(dim, budget / dim)
    a = np.asarray(a0, dtype=float).copy()
    if np.any(a <= 0):
        raise ValueError("a0 must be strictly positive")
    if abs(a.sum() - budget) > 1e-9 * max(1.0, budget):
        raise ValueError("a0 must sum to the budget")
    best_val = float(value_fn(a))
    best_a = a.copy()
    trace = np.empty(iters + 1)
    trace[0] = best_val
    for t in range(1, iters + 1):
        a = mirror_step(a, grad_fn(a), lr, budget)
        val = float(value_fn(a))
        if val < best_val:
            best_val = val
            best_a = a.copy()
        trace[t] = best_val
    return SolveResult(best_a, best_val, trace)


def mirror_descent_batch(value_fn, grad_fn, budget: float, a0: np.ndarray,
                         lr: float = 0.01, iters: int = 500) -> BatchSolveResult:
    """Row-wise mirror descent for n independent simplex problems."""
    A = np.atleast_2d(np.asarray(a0, dtype=float)).copy()
    if np.any(A <= 0):
        raise ValueError("a0 rows must be strictly positive")
    n = A.shape[0]
    vals = np.asarray(value_fn(A), dtype=float)
    best_vals = vals.copy()
    best_A = A.copy()
    trace = np.empty((iters + 1, n))
    trace[0] = best_vals
    for t in range(1, iters + 1):
        A = mirror_step(A, grad_fn(A), lr, budget)
        vals = np.asarray(value_fn(A), dtype=float)
        better = vals < best_vals
        best_vals = np.where(better, vals, best_vals)
        best_A[better] = A[better]
        trace[t] = best_vals
    return BatchSolveResult(best_A, best_vals, trace)


def minimize_over(value_fn, grad_fn, feasible, iters: int = 500,
                  lr: float | None = None, restarts: int = 0,
                  seed: int = 0) -> SolveResult:
    """Minimize a scalar objective over a Box or BudgetSimplex.

    Dispatches to the matching solver from a deterministic start
    (center / uniform allocation) plus `restarts` seeded random starts,
    returning the best value found.
    """
    if isinstance(feasible, Box):
        runs = [pgd_minimize(value_fn, grad_fn, feasible,
                             lr=0.05 if lr is None else lr, iters=iters)]
        for r in range(restarts):
            runs.append(pgd_minimize(value_fn, grad_fn, feasible,
                                     lr=0.05 if lr is None else lr,
                                     iters=iters, seed=seed + r))
        return min(runs, key=lambda res: res.value)
    if isinstance(feasible, BudgetSimplex):
        mlr = 0.01 if lr is None else lr
        runs = [mirror_descent_simplex(value_fn, grad_fn, feasible.budget,
                                       lr=mlr, iters=iters,
                                       dim=feasible.dim)]
        rng = np.random.default_rng(seed)
        for _ in range(restarts):
            u = rng.uniform(0.1, 1.0, size=feasible.dim)
            a0 = feasible.budget * u / u.sum()
            runs.append(mirror_descent_simplex(value_fn, grad_fn,
                                               feasible.budget, lr=mlr,
                                               iters=iters, a0=a0))
        return min(runs, key=lambda res: res.value)
    raise ValueError(f"unknown feasible set {type(feasible).__name__}")


def minimize_over_batch(value_fn, grad_fn, feasible, n: int,
                        iters: int = 500, lr: float | None = None,
                        restarts: int = 0, seed: int = 0) -> BatchSolveResult:
    """n independent problems over one feasible set, solved together.

    value_fn maps (n, m) -> (n,), grad_fn maps (n, m) -> (n, m). Each
    row keeps its best value across the deterministic start and
    `restarts` seeded random starts.
    """
    rng = np.random.default_rng(seed)
    m = feasible.dim
    if isinstance(feasible, Box):
        starts = [np.broadcast_to(feasible.center(), (n, m))]
        starts += [rng.uniform(feasible.lower, feasible.upper, size=(n, m))
                   for _ in range(restarts)]
        run = lambda a0: pgd_minimize_batch(value_fn, grad_fn, feasible, a0,
                                            lr=0.05 if lr is None else lr,
                                            iters=iters)
    elif isinstance(feasible, BudgetSimplex):
        starts = [np.broadcast_to(np.full(m, feasible.budget / m), (n, m))]
        for _ in range(restarts):
            u = rng.uniform(0.1, 1.0, size=(n, m))
            starts.append(feasible.budget * u / u.sum(axis=1, keepdims=True))
        run = lambda a0: mirror_descent_batch(value_fn, grad_fn,
                                              feasible.budget, a0,
                                              lr=0.01 if lr is None else lr,
                                              iters=iters)
    else:
        raise ValueError(f"unknown feasible set {type(feasible).__name__}")
    best = None
    for a0 in starts:
        res = run(np.array(a0, dtype=float))
        if best is None:
            best = BatchSolveResult(res.a.copy(), res.value.copy(), res.trace)
        else:
            gain = res.value < best.value
            best.a[gain] = res.a[gain]
            best.value[gain] = res.value[gain]
    return best
