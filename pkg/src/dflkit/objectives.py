"""Cost families f(y, a) with analytic gradients and feasible sets.

Four closed-form tasks: synthetic convex, synthetic non-convex, wind
bidding (energy + reserve markets), inventory replenishment. The
vaccine task's cost lives in episim. Every objective is exposed in
minimization convention; wind profit is negated.

Subgradient convention at hinge kinks: the (y-a)_+ terms keep their
derivative on the y-a >= 0 side, the (a-y)_+ terms activate strictly
(a-y > 0), so gradients are deterministic at y = a.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise ValueError("box bound shapes differ")
        if not np.all(self.lower < self.upper):
            raise ValueError("box requires lower < upper per coordinate")

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, a: np.ndarray, tol: float = 1e-10) -> bool:
        a = np.asarray(a, dtype=float)
        return bool(np.all(a >= self.lower - tol) and np.all(a <= self.upper + tol))

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class BudgetSimplex:
    dim: int
    budget: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("simplex dim must be >= 1")
        if not self.budget > 0:
            raise ValueError("budget must be positive")

    def contains(self, a: np.ndarray, tol: float = 1e-10) -> bool:
        a = np.asarray(a, dtype=float)
        return bool(a.size == self.dim and np.all(a >= -tol)
                    and abs(a.sum() - self.budget) <= tol * max(1.0, self.budget))

    def center(self) -> np.ndarray:
        return np.full(self.dim, self.budget / self.dim)


@dataclass(frozen=True)
class WindParams:
    P: float = 100.0
    nu: float = 20.0
    mu: float = 110.0
    dP_up1: float = 200.0
    dP_up2: float = 100.0
    dP_down: float = 20.0
    F: float = 10.0
    E_min: float = 0.0
    E_max: float = 4.0
    R_min: float = 0.15
    R_max: float = 4.0

    def __post_init__(self):
        if not self.E_min < self.E_max:
            raise ValueError("E_min must be < E_max")
        if not self.R_min <= self.R_max:
            raise ValueError("R_min must be <= R_max")
        for name in ("P", "nu", "mu", "dP_up1", "dP_up2", "dP_down", "F"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "P", "nu", "mu", "dP_up1", "dP_up2", "dP_down", "F",
            "E_min", "E_max", "R_min", "R_max")}


@dataclass(frozen=True)
class Objective:
    variant: str
    decision_dim: int
    outcome_dim: int
    feasible: Box | BudgetSimplex
    sense: str = "minimize"  # native sense; cost() always minimizes
    wind: WindParams | None = field(default=None)


def synthetic_convex(dim: int = 2) -> Objective:
    box = Box(np.full(dim, -1.0), np.full(dim, 1.0))
    return Objective("synthetic_convex", dim, dim, box)


def synthetic_nonconvex(dim: int = 2) -> Objective:
    box = Box(np.full(dim, -2.0), np.full(dim, 2.0))
    return Objective("synthetic_nonconvex", dim, dim, box)


def wind_bidding(params: WindParams | None = None, horizon: int = 12) -> Objective:
    p = params or WindParams()
    lower = np.concatenate([np.full(horizon, p.E_min), np.full(horizon, p.R_min)])
    upper = np.concatenate([np.full(horizon, p.E_max), np.full(horizon, p.R_max)])
    return Objective("wind_bidding", 2 * horizon, horizon, Box(lower, upper),
                     sense="maximize", wind=p)


def inventory(horizon: int = 7) -> Objective:
    box = Box(np.full(horizon, 0.0), np.full(horizon, 3.0))
    return Objective("inventory", horizon, horizon, box)


def wind_reduce_reserve(obj: Objective) -> Objective:
    """Pin a_R to R_min, leaving the 12-dim energy bid as the decision.

    Valid for the joint problem: moving (a_E, a_R) to (a_E - d, R_min)
    with d = a_R - R_min never increases cost for any y when
    dP_down <= nu, so some optimum has a_R = R_min.
    """
    if obj.variant != "wind_bidding":
        raise ValueError("expected a wind_bidding objective")
    p = obj.wind
    if not p.nu > 0:
        raise ValueError("reserve reduction needs nu > 0")
    h = obj.outcome_dim
    box = Box(np.full(h, p.E_min), np.full(h, p.E_max))
    return Objective("wind_bidding_reduced", h, h, box, sense="maximize", wind=p)


# hinge helpers; indicator conventions give deterministic kink values
def _pos(v):
    return np.maximum(v, 0.0)


def _cost_elems(obj: Objective, y: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Cost summed over the horizon. y, a broadcastable (..., d) arrays."""
    if obj.variant == "synthetic_convex":
        u, v = _pos(y - a), _pos(a - y)
        return (5.0 * u + 20.0 * v + 0.5 * u * u + 0.2 * v * v).sum(axis=-1)
    if obj.variant == "synthetic_nonconvex":
        u, v = _pos(y - a), _pos(a - y)
        return (10.0 * u * u + 2.0 * v * v + 4.0 * a ** 3).sum(axis=-1)
    if obj.variant == "inventory":
        u, v = _pos(y - a), _pos(a - y)
        return (20.0 * u + 5.0 * v + (a - y) ** 2).sum(axis=-1)
    if obj.variant in ("wind_bidding", "wind_bidding_reduced"):
        p = obj.wind
        h = obj.outcome_dim
        if obj.variant == "wind_bidding":
            aE, aR = a[..., :h], a[..., h:]
        else:
            aE, aR = a, np.full_like(a, p.R_min)
        short = aE - aR - y  # >0 in the overbid region
        over = y < aE - aR
        under = y > aE
        profit = p.P * y - p.nu * aR
        branch = np.where(
            over,
            -p.dP_up1 * short - p.dP_up2 * short * short - p.mu * aR - p.F,
            np.where(under, -p.dP_down * (y - aE), -p.mu * (aE - y)),
        )
        return -(profit + branch).sum(axis=-1)
    raise ValueError(f"unknown objective variant {obj.variant!r}")


def _grads_elems(obj: Objective, y: np.ndarray, a: np.ndarray):
    """(d cost/d a, d cost/d y), each broadcast to (..., d*)."""
    if obj.variant in ("synthetic_convex", "synthetic_nonconvex", "inventory"):
        iu = (y - a >= 0).astype(float)   # (y-a)_+ active side
        iv = (a - y > 0).astype(float)    # (a-y)_+ strict side
        u, v = _pos(y - a), _pos(a - y)
        if obj.variant == "synthetic_convex":
            da = -5.0 * iu + 20.0 * iv - u + 0.4 * v
            dy = 5.0 * iu - 20.0 * iv + u - 0.4 * v
        elif obj.variant == "synthetic_nonconvex":
            da = -20.0 * u + 4.0 * v + 12.0 * a * a
            dy = 20.0 * u - 4.0 * v
        else:
            da = -20.0 * iu + 5.0 * iv + 2.0 * (a - y)
            dy = 20.0 * iu - 5.0 * iv - 2.0 * (a - y)
        return da, dy
    if obj.variant in ("wind_bidding", "wind_bidding_reduced"):
        p = obj.wind
        h = obj.outcome_dim
        if obj.variant == "wind_bidding":
            aE, aR = a[..., :h], a[..., h:]
        else:
            aE, aR = a, np.full_like(a, p.R_min)
        short = aE - aR - y
        over = y < aE - aR
        under = y > aE
        up_slope = p.dP_up1 + 2.0 * p.dP_up2 * short
        # cost = -profit; middle branch owns its boundary points
        daE = np.where(over, up_slope, np.where(under, -p.dP_down, p.mu))
        dy = -p.P + np.where(over, -up_slope, np.where(under, p.dP_down, -p.mu))
        if obj.variant == "wind_bidding":
            daR = p.nu + np.where(over, -up_slope + p.mu, 0.0)
            da = np.concatenate([daE, daR], axis=-1)
        else:
            da = daE
        return da, dy
    raise ValueError(f"unknown objective variant {obj.variant!r}")


def _check_pair(obj: Objective, y: np.ndarray, a: np.ndarray):
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    if y.shape[-1] != obj.outcome_dim:
        raise ValueError(f"outcome dim {y.shape[-1]}, expected {obj.outcome_dim}")
    if a.shape[-1] != obj.decision_dim:
        raise ValueError(f"decision dim {a.shape[-1]}, expected {obj.decision_dim}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(a))):
        raise ValueError("nonfinite input")
    return y, a


def cost(obj, y: np.ndarray, a: np.ndarray) -> float:
    """Scalar cost f(y, a); minimization convention for every variant.

    Simulator-backed objectives (duck-typed with their own methods)
    are dispatched to; likewise for the other evaluation helpers.
    """
    if hasattr(obj, "cost"):
        return obj.cost(y, a)
    y, a = _check_pair(obj, np.atleast_1d(y), np.atleast_1d(a))
    return float(_cost_elems(obj, y, a))


def grad_cost_a(obj, y: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Gradient (subgradient at kinks) of cost w.r.t. the decision a."""
    if hasattr(obj, "grad_cost_a"):
        return obj.grad_cost_a(y, a)
    y, a = _check_pair(obj, np.atleast_1d(y), np.atleast_1d(a))
    return _grads_elems(obj, y, a)[0]


def grad_cost_y(obj, y: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Gradient of cost w.r.t. the outcome y (same kink convention)."""
    if hasattr(obj, "grad_cost_y"):
        return obj.grad_cost_y(y, a)
    y, a = _check_pair(obj, np.atleast_1d(y), np.atleast_1d(a))
    return _grads_elems(obj, y, a)[1]


def cost_batch(obj, Y: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Paired rows: Y (n, d_y), A (n, d_a) -> costs (n,)."""
    if hasattr(obj, "cost_batch"):
        return obj.cost_batch(Y, A)
    Y, A = _check_pair(obj, np.asarray(Y, dtype=float), np.asarray(A, dtype=float))
    return _cost_elems(obj, Y, A)


def cost_matrix(obj, Y: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Cross product: Y (S, d_y) x A (J, d_a) -> costs (S, J)."""
    if hasattr(obj, "cost_matrix"):
        return obj.cost_matrix(Y, A)
    Y, A = _check_pair(obj, np.asarray(Y, dtype=float), np.asarray(A, dtype=float))
    return _cost_elems(obj, Y[:, None, :], A[None, :, :])


def grad_y_matrix(obj, Y: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Cross product d cost/d y: -> (S, J, d_y)."""
    if hasattr(obj, "grad_y_matrix"):
        return obj.grad_y_matrix(Y, A)
    Y, A = _check_pair(obj, np.asarray(Y, dtype=float), np.asarray(A, dtype=float))
    return _grads_elems(obj, Y[:, None, :], np.broadcast_to(
        A[None, :, :], (Y.shape[0], A.shape[0], A.shape[1])))[1]


def grad_a_batch(obj, Y: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Paired rows d cost/d a: -> (n, d_a)."""
    if hasattr(obj, "grad_a_batch"):
        return obj.grad_a_batch(Y, A)
    Y, A = _check_pair(obj, np.asarray(Y, dtype=float), np.asarray(A, dtype=float))
    return _grads_elems(obj, Y, A)[0]


def objective_config(obj: Objective) -> dict:
    """JSON config block that objective_from_config inverts."""
    cfg = {"objective": obj.variant}
    if obj.variant in ("synthetic_convex", "synthetic_nonconvex"):
        cfg["dim"] = int(obj.decision_dim)
    elif obj.variant == "inventory":
        cfg["horizon"] = int(obj.decision_dim)
    elif obj.variant in ("wind_bidding", "wind_bidding_reduced"):
        cfg["horizon"] = int(obj.outcome_dim)
        cfg["wind_params"] = obj.wind.to_dict()
    else:
        raise ValueError(f"no config form for {obj.variant!r}")
    return cfg


def objective_from_config(cfg: dict) -> Objective:
    """Build an objective from a JSON config block."""
    name = cfg.get("objective")
    if name == "synthetic_convex":
        return synthetic_convex(int(cfg.get("dim", 2)))
    if name == "synthetic_nonconvex":
        return synthetic_nonconvex(int(cfg.get("dim", 2)))
    if name == "inventory":
        return inventory(int(cfg.get("horizon", 7)))
    if name in ("wind_bidding", "wind_bidding_reduced"):
        params = WindParams(**cfg.get("wind_params", {}))
        full = wind_bidding(params, int(cfg.get("horizon", 12)))
        return wind_reduce_reserve(full) if name == "wind_bidding_reduced" else full
    raise ValueError(f"unknown objective {name!r}")
