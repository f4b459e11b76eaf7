"""Metapopulation SEIRV simulator: the vaccine-allocation task's cost.

Explicit Euler on the displayed region-coupled ODEs. Vaccination moves
a[k]/T people per day out of S and E (split proportionally) into V;
mobility couples regions through the normalized origin-destination
tensor. Cost is total new infections, the beta*S*I/N influx into E,
so it is identically zero whenever beta is zero.

Gradients w.r.t. the allocation a use forward-mode sensitivities; the
gradient w.r.t. the OD outcome y (needed to train surrogate value
points) uses the adjoint recursion, which yields the same exact
discrete gradient at a fraction of the cost of K^2*T forward passes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .objectives import BudgetSimplex

COMPARTMENTS = ("S", "E", "I", "R", "V")


@dataclass(frozen=True)
class SeirvParams:
    beta: np.ndarray    # (K,) transmission rate
    sigma: np.ndarray   # (K,) latent rate
    gamma: np.ndarray   # (K,) recovery rate
    N: np.ndarray       # (K,) population
    T: int              # horizon in days
    dt: float = 1.0

    def __post_init__(self):
        for name in ("beta", "sigma", "gamma", "N"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        K = self.N.size
        for name in ("beta", "sigma", "gamma"):
            arr = getattr(self, name)
            if arr.shape != (K,):
                raise ValueError(f"{name} shape {arr.shape}, expected ({K},)")
            if np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
        if np.any(self.N <= 0):
            raise ValueError("populations must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        steps = self.T / self.dt
        if self.T <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ValueError("T must be a positive multiple of dt")

    @property
    def K(self) -> int:
        return self.N.size

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def to_dict(self) -> dict:
        return {"beta": self.beta.tolist(), "sigma": self.sigma.tolist(),
                "gamma": self.gamma.tolist(), "N": self.N.tolist(),
                "T": self.T, "dt": self.dt}


@dataclass
class SeirvState:
    S: np.ndarray
    E: np.ndarray
    I: np.ndarray
    R: np.ndarray
    V: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack([np.asarray(getattr(self, c), dtype=float)
                         for c in COMPARTMENTS])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "SeirvState":
        return cls(*(arr[i].copy() for i in range(5)))

    def total(self) -> float:
        return float(self.as_array().sum())

    def validate(self) -> None:
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            raise ValueError("nonfinite state")
        if np.any(arr < 0):
            raise ValueError("negative compartment")


def normalize_od(od: np.ndarray, N: np.ndarray) -> np.ndarray:
    """Per-origin rates: y[i,j,t]/N[i], diagonal zeroed, outflow rows
    with sum > 1 rescaled to sum exactly 1."""
    od = np.asarray(od, dtype=float)
    N = np.asarray(N, dtype=float)
    if np.any(N <= 0):
        raise ValueError("populations must be positive")
    if np.any(od < 0):
        raise ValueError("OD flows must be nonnegative")
    yn = od / N[:, None, None]
    K = N.size
    yn[np.arange(K), np.arange(K), :] = 0.0
    rows = yn.sum(axis=1)                      # (K, Td)
    scale = np.maximum(rows, 1.0)
    return yn / scale[:, None, :]


def _flow(c: np.ndarray, Yt: np.ndarray, rs: np.ndarray) -> np.ndarray:
    """Mobility operator on a compartment batch: c (n,K), Yt (n,K,K)."""
    return np.einsum("ni,nik->nk", c, Yt) - rs * c


def _flow_sens(D: np.ndarray, Yt: np.ndarray, rs: np.ndarray) -> np.ndarray:
    return np.einsum("nip,nik->nkp", D, Yt) - rs[:, :, None] * D


def _forward(yn: np.ndarray, A: np.ndarray, params: SeirvParams,
             X0: np.ndarray, sens_a: bool = False, store: bool = False):
    """Batched Euler run. yn (n,K,K,Td) normalized, A (n,K), X0 (n,5,K).

    Returns (cost (n,), dcost_da (n,K) | None, traj, masks) where traj
    stacks the n_steps+1 states and masks flags clamped coordinates.
    """
    n, K = A.shape
    beta, sig, gam, N = params.beta, params.sigma, params.gamma, params.N
    dt, T = params.dt, float(params.T)
    steps = params.n_steps
    Td = yn.shape[3]
    X = X0.astype(float).copy()
    cost = np.zeros(n)
    D = np.zeros((n, 5, K, K)) if sens_a else None   # dX/da
    dcost = np.zeros((n, K)) if sens_a else None
    traj = np.empty((n, steps + 1, 5, K)) if store else None
    masks = np.empty((n, steps, 5, K), dtype=bool) if store else None
    if store:
        traj[:, 0] = X
    for t in range(steps):
        day = min(int(np.floor(t * dt + 1e-12)), Td - 1)
        Yt = yn[:, :, :, day]
        rs = Yt.sum(axis=2)
        S, E, I, R, V = (X[:, i] for i in range(5))
        inf = beta * S * I / N
        denom = S + E
        act = denom > 0
        safe = np.where(act, denom, 1.0)
        u = A / T
        vS = np.where(act, u * S / safe, 0.0)
        vE = np.where(act, u * E / safe, 0.0)
        cost += dt * inf.sum(axis=1)
        F = np.empty_like(X)
        F[:, 0] = -inf - vS + _flow(S, Yt, rs)
        F[:, 1] = inf - sig * E - vE + _flow(E, Yt, rs)
        F[:, 2] = sig * E - gam * I + _flow(I, Yt, rs)
        F[:, 3] = gam * I + _flow(R, Yt, rs)
        F[:, 4] = vS + vE + _flow(V, Yt, rs)
        if sens_a:
            dS, dE, dI, dR, dV = (D[:, i] for i in range(5))
            d_inf = (beta * I / N)[:, :, None] * dS + (beta * S / N)[:, :, None] * dI
            dcost += dt * d_inf.sum(axis=1)
            inv2 = np.where(act, 1.0 / (safe * safe), 0.0)
            dvS = (u * inv2)[:, :, None] * (E[:, :, None] * dS - S[:, :, None] * dE)
            dvE = (u * inv2)[:, :, None] * (S[:, :, None] * dE - E[:, :, None] * dS)
            eye = np.eye(K)
            inj = np.where(act, 1.0 / (T * safe), 0.0)
            dvS += (inj * S)[:, :, None] * eye
            dvE += (inj * E)[:, :, None] * eye
            Dn = np.empty_like(D)
            Dn[:, 0] = dS + dt * (-d_inf - dvS + _flow_sens(dS, Yt, rs))
            Dn[:, 1] = dE + dt * (d_inf - sig[:, None] * dE - dvE
                                  + _flow_sens(dE, Yt, rs))
            Dn[:, 2] = dI + dt * (sig[:, None] * dE - gam[:, None] * dI
                                  + _flow_sens(dI, Yt, rs))
            Dn[:, 3] = dR + dt * (gam[:, None] * dI + _flow_sens(dR, Yt, rs))
            Dn[:, 4] = dV + dt * (dvS + dvE + _flow_sens(dV, Yt, rs))
            D = Dn
        Xn = X + dt * F
        clamped = Xn < 0.0
        if store:
            masks[:, t] = clamped
        Xn[clamped] = 0.0
        if sens_a:
            D[clamped] = 0.0
        X = Xn
        if store:
            traj[:, t + 1] = X
    return cost, dcost, traj, masks


def _adjoint_y(yn, A, params, traj, masks):
    """dcost/d(normalized od) via the adjoint recursion. Also returns
    dcost/da as a cross-check byproduct."""
    n, _, _, Td = yn.shape
    K = params.K
    beta, sig, gam, N = params.beta, params.sigma, params.gamma, params.N
    dt, T = params.dt, float(params.T)
    steps = params.n_steps
    lam = np.zeros((n, 5, K))
    dYn = np.zeros_like(yn)
    dA = np.zeros((n, K))
    for t in range(steps - 1, -1, -1):
        day = min(int(np.floor(t * dt + 1e-12)), Td - 1)
        Yt = yn[:, :, :, day]
        rs = Yt.sum(axis=2)
        Xt = traj[:, t]
        S, E, I, R, V = (Xt[:, i] for i in range(5))
        mu = lam.copy()
        mu[masks[:, t]] = 0.0
        muS, muE, muI, muR, muV = (mu[:, i] for i in range(5))
        denom = S + E
        act = denom > 0
        safe = np.where(act, denom, 1.0)
        u = A / T
        inv2 = np.where(act, 1.0 / (safe * safe), 0.0)
        # transposed Jacobian of F applied to mu
        w_inf = muE - muS
        w_vS = muV - muS
        w_vE = muV - muE
        JS = (w_inf * beta * I / N + w_vS * u * E * inv2 - w_vE * u * E * inv2
              + np.einsum("nik,nk->ni", Yt, muS) - rs * muS)
        JE = (-w_vS * u * S * inv2 + w_vE * u * S * inv2 + (muI - muE) * sig
              + np.einsum("nik,nk->ni", Yt, muE) - rs * muE)
        JI = (w_inf * beta * S / N + (muR - muI) * gam
              + np.einsum("nik,nk->ni", Yt, muI) - rs * muI)
        JR = np.einsum("nik,nk->ni", Yt, muR) - rs * muR
        JV = np.einsum("nik,nk->ni", Yt, muV) - rs * muV
        # mobility dependence: dC/dY[i,j] += dt * sum_c X[c,i] (mu_c[j]-mu_c[i])
        dYn[:, :, :, day] += dt * (np.einsum("nci,ncj->nij", Xt, mu)
                                   - (Xt * mu).sum(axis=1)[:, :, None])
        inj = np.where(act, 1.0 / (T * safe), 0.0)
        dA += dt * (muV * act / T - muS * S * inj - muE * E * inj)
        lam = mu + dt * np.stack([JS, JE, JI, JR, JV], axis=1)
        lam[:, 0] += dt * beta * I / N
        lam[:, 2] += dt * beta * S / N
    idx = np.arange(K)
    dYn[:, idx, idx, :] = 0.0
    return dYn, dA


def _map_dyn_to_raw(dYn: np.ndarray, od: np.ndarray, N: np.ndarray) -> np.ndarray:
    """Chain dcost/d(normalized) through the normalization (divide by
    N[i]; clipped rows renormalize by the row sum instead)."""
    od = np.asarray(od, dtype=float)
    K = N.size
    idx = np.arange(K)
    off = od.copy()
    off[..., idx, idx, :] = 0.0
    R = off.sum(axis=-2)                      # (..., K, Td) row sums
    s = R / N[:, None]
    clipped = s > 1.0
    safeR = np.where(clipped, np.where(R > 0, R, 1.0), 1.0)
    dy_unclipped = dYn / N[:, None, None]
    inner = (dYn * off).sum(axis=-2)          # sum_l dYn[i,l] y[i,l]
    dy_clipped = (dYn - (inner / safeR)[..., :, None, :]) / safeR[..., :, None, :]
    dy = np.where(clipped[..., :, None, :], dy_clipped, dy_unclipped)
    dy[..., idx, idx, :] = 0.0
    return dy


def _prep(od, a, params: SeirvParams, init: SeirvState, budget=None):
    od = np.asarray(od, dtype=float)
    a = np.asarray(a, dtype=float)
    K = params.K
    single = a.ndim == 1
    A = a[None, :] if single else a
    OD = od[None] if od.ndim == 3 else od
    if A.shape[1] != K or OD.shape[1:3] != (K, K):
        raise ValueError("dimension mismatch with params")
    if OD.shape[0] == 1 and A.shape[0] > 1:
        OD = np.broadcast_to(OD, (A.shape[0],) + OD.shape[1:])
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(OD))):
        raise ValueError("nonfinite input")
    if np.any(A < 0):
        raise ValueError("allocation must be nonnegative")
    if budget is not None and np.any(A.sum(axis=1) > budget * (1 + 1e-9)):
        raise ValueError("allocation exceeds the budget")
    init.validate()
    X0 = np.broadcast_to(init.as_array()[None], (A.shape[0], 5, K))
    yn = np.stack([normalize_od(OD[i], params.N) for i in range(OD.shape[0])])
    return yn, A, X0, single


def step(state: SeirvState, params: SeirvParams, y_day: np.ndarray,
         a: np.ndarray) -> SeirvState:
    """One Euler step with an already-normalized day matrix y_day (K,K)."""
    state.validate()
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("allocation must be nonnegative")
    X0 = state.as_array()[None]
    beta, sig, gam, N = params.beta, params.sigma, params.gamma, params.N
    Yt = np.asarray(y_day, dtype=float)[None]
    rs = Yt.sum(axis=2)
    S, E, I, R, V = (X0[:, i] for i in range(5))
    inf = beta * S * I / N
    denom = S + E
    act = denom > 0
    safe = np.where(act, denom, 1.0)
    u = a[None, :] / float(params.T)
    vS = np.where(act, u * S / safe, 0.0)
    vE = np.where(act, u * E / safe, 0.0)
    F = np.empty_like(X0)
    F[:, 0] = -inf - vS + _flow(S, Yt, rs)
    F[:, 1] = inf - sig * E - vE + _flow(E, Yt, rs)
    F[:, 2] = sig * E - gam * I + _flow(I, Yt, rs)
    F[:, 3] = gam * I + _flow(R, Yt, rs)
    F[:, 4] = vS + vE + _flow(V, Yt, rs)
    Xn = np.maximum(X0 + params.dt * F, 0.0)
    return SeirvState.from_array(Xn[0])


def simulate(od: np.ndarray, a: np.ndarray, params: SeirvParams,
             init: SeirvState) -> np.ndarray:
    """Full trajectory (n_steps+1, 5, K) from raw OD flows."""
    yn, A, X0, _ = _prep(od, a, params, init)
    _, _, traj, _ = _forward(yn, A, params, X0, store=True)
    return traj[0]


def total_new_infections(od, a, params: SeirvParams, init: SeirvState,
                         budget: float | None = None) -> float:
    yn, A, X0, single = _prep(od, a, params, init, budget)
    cost, _, _, _ = _forward(yn, A, params, X0)
    return float(cost[0]) if single else cost


def total_new_infections_batch(od, A, params: SeirvParams,
                               init: SeirvState) -> np.ndarray:
    yn, A, X0, _ = _prep(od, A, params, init)
    cost, _, _, _ = _forward(yn, A, params, X0)
    return cost


def grad_infections_a(od, a, params: SeirvParams, init: SeirvState,
                      budget: float | None = None) -> np.ndarray:
    """Exact gradient of the discretized cost w.r.t. a (forward mode)."""
    yn, A, X0, single = _prep(od, a, params, init, budget)
    _, dcost, _, _ = _forward(yn, A, params, X0, sens_a=True)
    return dcost[0] if single else dcost


def grad_infections_y(od, a, params: SeirvParams, init: SeirvState):
    """Exact gradient w.r.t. raw OD flows (adjoint), shape (K, K, Td)."""
    yn, A, X0, single = _prep(od, a, params, init)
    _, _, traj, masks = _forward(yn, A, params, X0, store=True)
    dYn, _ = _adjoint_y(yn, A, params, traj, masks)
    OD = np.asarray(od, dtype=float)
    dy = _map_dyn_to_raw(dYn, OD[None] if OD.ndim == 3 else OD, params.N)
    return dy[0] if single else dy


class VaccineObjective:
    """Duck-typed objective: y is a flattened OD tensor, a an allocation.

    Matches the call surface of the closed-form objectives so the
    surrogate, solvers, and evaluation can treat all tasks uniformly.
    """

    variant = "vaccine"
    sense = "minimize"

    def __init__(self, params: SeirvParams, init: SeirvState, budget: float,
                 od_days: int | None = None):
        self.params = params
        self.init = init
        self.od_days = int(od_days if od_days is not None else params.T)
        self.decision_dim = params.K
        self.outcome_dim = params.K * params.K * self.od_days
        self.feasible = BudgetSimplex(params.K, float(budget))

    def _unflatten(self, Y: np.ndarray) -> np.ndarray:
        K, Td = self.params.K, self.od_days
        return np.asarray(Y, dtype=float).reshape(-1, K, K, Td)

    def cost(self, y, a) -> float:
        return float(self.cost_batch(np.atleast_2d(y), np.atleast_2d(a))[0])

    def cost_batch(self, Y, A) -> np.ndarray:
        return total_new_infections_batch(self._unflatten(Y),
                                          np.atleast_2d(np.asarray(A, dtype=float)),
                                          self.params, self.init)

    def cost_matrix(self, Y, A) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        A = np.atleast_2d(np.asarray(A, dtype=float))
        S, J = Y.shape[0], A.shape[0]
        YY = np.repeat(self._unflatten(Y), J, axis=0)
        AA = np.tile(A, (S, 1))
        return total_new_infections_batch(YY, AA, self.params, self.init).reshape(S, J)

    def grad_cost_a(self, y, a) -> np.ndarray:
        return grad_infections_a(self._unflatten(y)[0], np.asarray(a, dtype=float),
                                 self.params, self.init)

    def grad_a_batch(self, Y, A) -> np.ndarray:
        return grad_infections_a(self._unflatten(Y),
                                 np.atleast_2d(np.asarray(A, dtype=float)),
                                 self.params, self.init)

    def grad_cost_y(self, y, a) -> np.ndarray:
        g = grad_infections_y(self._unflatten(y)[0], np.asarray(a, dtype=float),
                              self.params, self.init)
        return g.reshape(-1)

    def grad_y_matrix(self, Y, A) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        A = np.atleast_2d(np.asarray(A, dtype=float))
        S, J = Y.shape[0], A.shape[0]
        YY = np.repeat(self._unflatten(Y), J, axis=0)
        AA = np.tile(A, (S, 1))
        g = grad_infections_y(YY, AA, self.params, self.init)
        return g.reshape(S, J, self.outcome_dim)


def make_vaccine_task(K: int = 5, T: int = 7, seed: int = 0,
                      budget_frac: float = 0.04) -> VaccineObjective:
    """Desk-scale vaccine task: seeded moderate-rate parameters, budget
    a fixed fraction of the total population."""
    rng = np.random.default_rng(seed)
    K = int(K)
    N = rng.uniform(1e5, 1e6, size=K)
    params = SeirvParams(
        beta=rng.uniform(0.2, 0.5, size=K),
        sigma=rng.uniform(0.15, 0.35, size=K),
        gamma=rng.uniform(0.05, 0.2, size=K),
        N=N, T=int(T), dt=1.0)
    E0 = 0.004 * N
    I0 = 0.002 * N
    init = SeirvState(S=N - E0 - I0, E=E0, I=I0, R=np.zeros(K), V=np.zeros(K))
    return VaccineObjective(params, init, budget=budget_frac * float(N.sum()))


def save_trajectory_csv(traj: np.ndarray, path: str) -> None:
    """Rows: step, region, S, E, I, R, V."""
    steps, _, K = traj.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "region", *COMPARTMENTS])
        for t in range(steps):
            for k in range(K):
                w.writerow([t, k, *(repr(float(traj[t, i, k]))
                                    for i in range(5))])
