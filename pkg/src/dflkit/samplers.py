"""Training-action samplers over (relaxed) feasible sets.

Box sampling for box-constrained tasks, Dirichlet for the budget
simplex, and a hit-and-run chain plus LP-based outer box for general
linear constraints.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .objectives import Box, BudgetSimplex


def sample_box(feasible: Box, n: int, seed: int | np.random.Generator = 0) -> np.ndarray:
    """n i.i.d. uniform draws from the box, one row per draw."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    return rng.uniform(feasible.lower, feasible.upper, size=(n, feasible.dim))


def sample_simplex(feasible: BudgetSimplex, n: int, seed: int | np.random.Generator = 0) -> np.ndarray:
    """n draws of budget * Dirichlet(1, ..., 1); rows renormalized to the budget."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    d = rng.dirichlet(np.ones(feasible.dim), size=n)
    a = feasible.budget * d
    a *= feasible.budget / a.sum(axis=1, keepdims=True)
    return a


def sample_actions(feasible, n: int, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Dispatch on the feasible-set variant."""
    if isinstance(feasible, Box):
        return sample_box(feasible, n, seed)
    if isinstance(feasible, BudgetSimplex):
        return sample_simplex(feasible, n, seed)
    raise ValueError(f"unknown feasible set {type(feasible).__name__}")


def outer_box_of_linear(G: np.ndarray, h: np.ndarray) -> Box:
    """Tightest axis-aligned box around {a : Ga <= h} via 2m support LPs."""
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    if G.ndim != 2 or h.shape != (G.shape[0],):
        raise ValueError("G must be (r, m) with h of length r")
    m = G.shape[1]
    lo = np.empty(m)
    hi = np.empty(m)
    for i in range(m):
        c = np.zeros(m)
        for sign, dest in ((1.0, lo), (-1.0, hi)):
            c[i] = sign
            res = linprog(c, A_ub=G, b_ub=h, bounds=[(None, None)] * m,
                          method="highs")
            if res.status == 2:
                raise ValueError("infeasible polyhedron")
            if res.status == 3:
                raise ValueError(f"coordinate {i} unbounded over the polyhedron")
            if not res.success:
                raise ValueError(f"LP failed: {res.message}")
            dest[i] = sign * res.fun
        c[i] = 0.0
    return Box(lo, hi)


def hit_and_run(G: np.ndarray, h: np.ndarray, a0: np.ndarray, n: int,
                seed: int = 0, burn_in: int = 1000) -> np.ndarray:
    """Hit-and-run chain targeting the uniform law on {a : Ga <= h}.

    a0 must be strictly interior. Returns n post-burn-in states.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    a = np.asarray(a0, dtype=float).copy()
    if np.any(h - G @ a <= 0):
        raise ValueError("a0 is not strictly interior")
    rng = np.random.default_rng(seed)
    out = np.empty((n, a.size))
    kept = 0
    for t in range(burn_in + n):
        d = rng.normal(size=a.size)
        d /= np.linalg.norm(d)
        slack = h - G @ a
        gd = G @ d
        pos = gd > 1e-12
        neg = gd < -1e-12
        if not np.any(pos) or not np.any(neg):
            raise ValueError("polytope unbounded along a sampled direction")
        t_hi = np.min(slack[pos] / gd[pos])
        t_lo = np.max(slack[neg] / gd[neg])
        a = a + rng.uniform(t_lo, t_hi) * d
        if t >= burn_in:
            out[kept] = a
            kept += 1
    return out
