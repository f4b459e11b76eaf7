"""Two-stage and policy baselines for the regret comparison.

The two-stage route fits a mixture-density forecaster p(y|x) by
negative log-likelihood, then decides by sample average approximation:
draw outcomes from the fitted mixture and minimize the empirical mean
cost with the task solver. The point-estimate variant is the same
forecaster class with one component trained on plain MSE and decided
on the mean. The policy net skips forecasting entirely and maps x to a
feasible decision through a smooth feasibility map, trained directly
on the realized cost.

All gradients are analytic: mixture responsibilities for the NLL,
sigmoid / softmax Jacobians for the feasibility maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from . import learncore as lc
from . import objectives as ob
from . import solvers
from .objectives import Box, BudgetSimplex

LOG2PI = float(np.log(2.0 * np.pi))


@dataclass
class FitConfig:
    epochs: int = 200
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    patience: int = 10

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class GmmForecaster:
    trunk: lc.DenseNet          # x -> hidden features
    head_mean: lc.Layer         # hidden -> C*m
    head_logvar: lc.Layer       # hidden -> C*m (diagonal covariances)
    head_logit: lc.Layer        # hidden -> C
    C: int
    m: int

    def params(self) -> list[np.ndarray]:
        out = self.trunk.params()
        for h in (self.head_mean, self.head_logvar, self.head_logit):
            out += [h.w, h.b]
        return out


def make_forecaster(x_dim: int, m: int, C: int, seed: int = 0,
                    hidden: tuple = (64, 64)) -> GmmForecaster:
    trunk = lc.init_dense([int(x_dim), *map(int, hidden)], seed=seed,
                          output_activation="relu")
    rng = np.random.default_rng(seed + 1)
    H = int(hidden[-1])

    def head(n_out):
        w = rng.uniform(-1, 1, size=(n_out, H)) / np.sqrt(H)
        return lc.Layer(w, np.zeros(n_out), "identity")

    return GmmForecaster(trunk, head(C * m), head(C * m), head(C),
                         C=int(C), m=int(m))


def _heads_forward(fc: GmmForecaster, X: np.ndarray):
    """(hidden, mu (n,C,m), logvar (n,C,m), logits (n,C)); trunk cached."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    h = np.atleast_2d(lc.forward(fc.trunk, X))
    n = h.shape[0]
    mu = (h @ fc.head_mean.w.T + fc.head_mean.b).reshape(n, fc.C, fc.m)
    lv = (h @ fc.head_logvar.w.T + fc.head_logvar.b).reshape(n, fc.C, fc.m)
    logits = h @ fc.head_logit.w.T + fc.head_logit.b
    return h, mu, lv, logits


def gmm_predict(fc: GmmForecaster, x: np.ndarray):
    """(mu, var, weights) of the fitted mixture at a single x."""
    _, mu, lv, logits = _heads_forward(fc, np.atleast_2d(x))
    w = lc.softmax(logits[0])
    return mu[0], np.exp(lv[0]), w


def gmm_mean_prediction(fc: GmmForecaster, x: np.ndarray) -> np.ndarray:
    mu, _, w = gmm_predict(fc, x)
    return w @ mu


def _log_components(mu, lv, Y):
    """log N(y; mu_c, diag exp(lv_c)) for each component, (n, C)."""
    d2 = (Y[:, None, :] - mu) ** 2
    return -0.5 * (LOG2PI + lv + d2 * np.exp(-lv)).sum(axis=2)


def gmm_nll(fc: GmmForecaster, x: np.ndarray, y: np.ndarray) -> float:
    """-log sum_c w_c N(y; mu_c(x), diag var_c(x)), logsumexp-stabilized."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    Y = np.atleast_2d(np.asarray(y, dtype=float))
    _, mu, lv, logits = _heads_forward(fc, X)
    logw = logits - logsumexp(logits, axis=-1, keepdims=True)
    per = logsumexp(logw + _log_components(mu, lv, Y), axis=-1)
    return float(-per.mean())


def _nll_and_grads(fc: GmmForecaster, Xb: np.ndarray, Yb: np.ndarray):
    """Mean NLL over the batch and gradients in params() order."""
    h, mu, lv, logits = _heads_forward(fc, Xb)
    n = h.shape[0]
    logw = logits - logsumexp(logits, axis=-1, keepdims=True)
    comp = _log_components(mu, lv, Yb)
    t = logw + comp
    per = logsumexp(t, axis=-1)
    loss = float(-per.mean())
    r = np.exp(t - per[:, None])                 # responsibilities (n, C)
    w = np.exp(logw)
    inv_var = np.exp(-lv)
    diff = Yb[:, None, :] - mu
    dmu = (-r[:, :, None] * diff * inv_var) / n
    dlv = (-r[:, :, None] * 0.5 * (diff * diff * inv_var - 1.0)) / n
    dlogits = (w - r) / n
    grads, dh = _heads_backward(fc, h, dmu.reshape(n, -1),
                                dlv.reshape(n, -1), dlogits)
    trunk_grads, _ = lc.backward(fc.trunk, dh)
    return loss, trunk_grads + grads


def _heads_backward(fc: GmmForecaster, h, dmu_flat, dlv_flat, dlogits):
    grads = []
    dh = np.zeros_like(h)
    for head, dz in ((fc.head_mean, dmu_flat), (fc.head_logvar, dlv_flat),
                     (fc.head_logit, dlogits)):
        grads += [dz.T @ h, dz.sum(axis=0)]
        dh += dz @ head.w
    return grads, dh


def _mse_and_grads(fc: GmmForecaster, Xb: np.ndarray, Yb: np.ndarray):
    """Plain MSE on the mixture-weighted mean (point-estimate training)."""
    h, mu, lv, logits = _heads_forward(fc, Xb)
    n = h.shape[0]
    w = lc.softmax(logits, axis=1)
    pred = np.einsum("nc,ncm->nm", w, mu)
    resid = pred - Yb
    loss = float((resid ** 2).mean())
    dpred = 2.0 * resid / resid.size
    dmu = w[:, :, None] * dpred[:, None, :]
    dw = np.einsum("nm,ncm->nc", dpred, mu)
    dlogits = lc.softmax_backward(w, dw, axis=1)
    grads, dh = _heads_backward(fc, h, dmu.reshape(n, -1),
                                np.zeros((n, fc.C * fc.m)), dlogits)
    trunk_grads, _ = lc.backward(fc.trunk, dh)
    return loss, trunk_grads + grads


def train_two_stage(fc: GmmForecaster, dataset, cfg: FitConfig,
                    loss: str = "nll") -> list[dict]:
    """Fit the forecaster by minibatch Adam; early stop on validation.

    loss "nll" is the probabilistic two-stage training; "mse" trains the
    mean only (the point-estimate baseline). Restores the best
    validation parameters and returns the loss curve.
    """
    if loss not in ("nll", "mse"):
        raise ValueError("loss must be nll or mse")
    step_fn = _nll_and_grads if loss == "nll" else _mse_and_grads
    X_tr, Y_tr = dataset.subset("train")
    X_val, Y_val = dataset.subset("val")
    if X_tr.shape[0] == 0:
        raise ValueError("empty training split")
    rng = np.random.default_rng(cfg.seed)
    params = fc.params()
    state = lc.adam_init(params, lr=cfg.lr)
    best_val, best, strikes = np.inf, None, 0
    curve = []
    n = X_tr.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        losses = []
        for s0 in range(0, n, cfg.batch_size):
            idx = perm[s0:s0 + cfg.batch_size]
            bl, grads = step_fn(fc, X_tr[idx], Y_tr[idx])
            if not np.isfinite(bl):
                raise FloatingPointError(
                    f"nonfinite {loss} loss at epoch {epoch}")
            lc.adam_step(params, grads, state)
            losses.append(bl)
        if X_val.shape[0]:
            vl = (gmm_nll(fc, X_val, Y_val) if loss == "nll"
                  else _mse_and_grads(fc, X_val, Y_val)[0])
        else:
            vl = float("nan")
        curve.append({"epoch": epoch, "train_loss": float(np.mean(losses)),
                      "val_loss": vl})
        if X_val.shape[0] and vl < best_val:
            best_val, best, strikes = vl, [p.copy() for p in params], 0
        elif X_val.shape[0]:
            strikes += 1
            if strikes >= cfg.patience:
                break
    if best is not None:
        for p, b in zip(params, best):
            p[...] = b
    return curve


def gmm_sample(fc: GmmForecaster, x: np.ndarray, n: int,
               seed: int | np.random.Generator = 0) -> np.ndarray:
    """Ancestral sampling from the fitted mixture at x."""
    rng = np.random.default_rng(seed)
    mu, var, w = gmm_predict(fc, x)
    comps = rng.choice(fc.C, size=n, p=w)
    return mu[comps] + np.sqrt(var[comps]) * rng.standard_normal((n, fc.m))


def saa_decide(fc: GmmForecaster, x: np.ndarray, objective,
               n_samples: int = 100, seed: int = 0, iters: int = 500,
               lr: float | None = None, restarts: int = 0) -> np.ndarray:
    """Sample-average decision: minimize the mean cost over draws from
    the fitted conditional mixture."""
    draws = gmm_sample(fc, x, n_samples, seed)
    return decide_on_samples(draws, objective, iters=iters, lr=lr,
                             restarts=restarts, seed=seed)


def decide_on_samples(draws: np.ndarray, objective, iters: int = 500,
                      lr: float | None = None, restarts: int = 0,
                      seed: int = 0) -> np.ndarray:
    """Minimize mean_j f(y_j, a) over the feasible set."""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))

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
    return res.a


def point_estimate_decide(fc: GmmForecaster, x: np.ndarray, objective,
                          iters: int = 500, lr: float | None = None,
                          restarts: int = 0, seed: int = 0) -> np.ndarray:
    """Decide against the mean forecast alone (point-estimate baseline)."""
    yhat = gmm_mean_prediction(fc, x)
    return decide_on_samples(yhat[None, :], objective, iters=iters, lr=lr,
                             restarts=restarts, seed=seed)


def decide_on_sample_grid(draws: np.ndarray, objective, iters: int = 500,
                          lr: float | None = None, restarts: int = 0,
                          seed: int = 0) -> np.ndarray:
    """Row-wise SAA over a (n, k, outcome_dim) draw tensor: row i's
    decision minimizes the mean cost over its own k draws."""
    draws = np.asarray(draws, dtype=float)
    n, k, _ = draws.shape
    m = int(objective.decision_dim)
    Y_flat = draws.reshape(n * k, -1)

    def value_fn(A):
        A_rep = np.repeat(np.atleast_2d(A), k, axis=0)
        return ob.cost_batch(objective, Y_flat, A_rep).reshape(n, k).mean(axis=1)

    def grad_fn(A):
        A_rep = np.repeat(np.atleast_2d(A), k, axis=0)
        G = ob.grad_a_batch(objective, Y_flat, A_rep)
        return G.reshape(n, k, m).mean(axis=1)

    res = solvers.minimize_over_batch(value_fn, grad_fn, objective.feasible,
                                      n, iters=iters, lr=lr,
                                      restarts=restarts, seed=seed)
    return res.a


def saa_decide_batch(fc: GmmForecaster, X: np.ndarray, objective,
                     n_samples: int = 100, seed: int = 0, iters: int = 500,
                     lr: float | None = None,
                     restarts: int = 0) -> np.ndarray:
    """saa_decide for every row of X in one batched solve."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rng = np.random.default_rng(seed)
    draws = np.stack([gmm_sample(fc, X[i], n_samples, rng)
                      for i in range(X.shape[0])])
    return decide_on_sample_grid(draws, objective, iters=iters, lr=lr,
                                 restarts=restarts, seed=seed)


def point_estimate_decide_batch(fc: GmmForecaster, X: np.ndarray, objective,
                                iters: int = 500, lr: float | None = None,
                                restarts: int = 0,
                                seed: int = 0) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, mu, lv, logits = _heads_forward(fc, X)
    w = lc.softmax(logits, axis=-1)
    yhat = np.einsum("nc,ncm->nm", w, mu)
    return decide_on_sample_grid(yhat[:, None, :], objective, iters=iters,
                                 lr=lr, restarts=restarts, seed=seed)


@dataclass
class PolicyNet:
    net: lc.DenseNet            # x -> raw pre-feasibility output
    feasible: Box | BudgetSimplex

    def params(self) -> list[np.ndarray]:
        return self.net.params()


def make_policy(x_dim: int, feasible, seed: int = 0,
                hidden: tuple = (64, 64)) -> PolicyNet:
    net = lc.init_dense([int(x_dim), *map(int, hidden), feasible.dim],
                        seed=seed)
    return PolicyNet(net, feasible)


def _feasibility_map(feasible, Z: np.ndarray):
    """Map raw outputs into the feasible set; returns (a, pullback) where
    pullback sends df/da to df/dz."""
    if isinstance(feasible, Box):
        span = feasible.upper - feasible.lower
        s = expit(Z)
        A = feasible.lower + span * s

        def pull(dA):
            return dA * span * s * (1.0 - s)

        return A, pull
    if isinstance(feasible, BudgetSimplex):
        W = lc.softmax(Z, axis=-1)
        A = feasible.budget * W

        def pull(dA):
            return lc.softmax_backward(W, feasible.budget * dA, axis=-1)

        return A, pull
    raise ValueError(f"unknown feasible set {type(feasible).__name__}")


def policy_decide(pn: PolicyNet, x: np.ndarray) -> np.ndarray:
    z = lc.forward(pn.net, np.asarray(x, dtype=float))
    a, _ = _feasibility_map(pn.feasible, np.atleast_2d(z))
    return a[0]


def policy_decide_batch(pn: PolicyNet, X: np.ndarray) -> np.ndarray:
    Z = lc.forward(pn.net, np.atleast_2d(np.asarray(X, dtype=float)))
    A, _ = _feasibility_map(pn.feasible, Z)
    return A


def policy_train(pn: PolicyNet, dataset, objective,
                 cfg: FitConfig) -> list[dict]:
    """Minimize mean realized cost f(y_i, policy(x_i)) by backprop
    through the feasibility map."""
    X_tr, Y_tr = dataset.subset("train")
    X_val, Y_val = dataset.subset("val")
    if X_tr.shape[0] == 0:
        raise ValueError("empty training split")
    rng = np.random.default_rng(cfg.seed)
    params = pn.params()
    state = lc.adam_init(params, lr=cfg.lr)
    best_val, best, strikes = np.inf, None, 0
    curve = []
    n = X_tr.shape[0]

    def mean_cost(X, Y):
        Z = np.atleast_2d(lc.forward(pn.net, X))
        A, _ = _feasibility_map(pn.feasible, Z)
        return float(ob.cost_batch(objective, Y, A).mean())

    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        losses = []
        for s0 in range(0, n, cfg.batch_size):
            idx = perm[s0:s0 + cfg.batch_size]
            Xb, Yb = X_tr[idx], Y_tr[idx]
            Z = np.atleast_2d(lc.forward(pn.net, Xb))
            A, pull = _feasibility_map(pn.feasible, Z)
            loss = float(ob.cost_batch(objective, Yb, A).mean())
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"nonfinite policy loss at epoch {epoch}")
            dA = ob.grad_a_batch(objective, Yb, A) / idx.size
            grads, _ = lc.backward(pn.net, pull(dA))
            lc.adam_step(params, grads, state)
            losses.append(loss)
        vl = mean_cost(X_val, Y_val) if X_val.shape[0] else float("nan")
        curve.append({"epoch": epoch, "train_loss": float(np.mean(losses)),
                      "val_loss": vl})
        if X_val.shape[0] and vl < best_val:
            best_val, best, strikes = vl, [p.copy() for p in params], 0
        elif X_val.shape[0]:
            strikes += 1
            if strikes >= cfg.patience:
                break
    if best is not None:
        for p, b in zip(params, best):
            p[...] = b
    return curve


def _layers_json(net: lc.DenseNet) -> list[dict]:
    return [{"w": l.w.tolist(), "b": l.b.tolist(), "activation": l.activation}
            for l in net.layers]


def _layers_from_json(rows: list[dict]) -> lc.DenseNet:
    net = lc.DenseNet([lc.Layer(np.asarray(r["w"], dtype=float),
                                np.asarray(r["b"], dtype=float),
                                r["activation"]) for r in rows])
    lc.check_net(net)
    return net


def save_forecaster(fc: GmmForecaster, path: str) -> None:
    blob = {"C": fc.C, "m": fc.m, "trunk": _layers_json(fc.trunk)}
    for name in ("head_mean", "head_logvar", "head_logit"):
        l = getattr(fc, name)
        blob[name] = {"w": l.w.tolist(), "b": l.b.tolist()}
    with open(path, "w") as fh:
        json.dump(blob, fh)


def load_forecaster(path: str) -> GmmForecaster:
    with open(path) as fh:
        blob = json.load(fh)
    heads = {name: lc.Layer(np.asarray(blob[name]["w"], dtype=float),
                            np.asarray(blob[name]["b"], dtype=float),
                            "identity")
             for name in ("head_mean", "head_logvar", "head_logit")}
    return GmmForecaster(_layers_from_json(blob["trunk"]), heads["head_mean"],
                         heads["head_logvar"], heads["head_logit"],
                         C=int(blob["C"]), m=int(blob["m"]))


def save_policy(pn: PolicyNet, path: str) -> None:
    if isinstance(pn.feasible, Box):
        feas = {"kind": "box", "lower": pn.feasible.lower.tolist(),
                "upper": pn.feasible.upper.tolist()}
    else:
        feas = {"kind": "simplex", "dim": pn.feasible.dim,
                "budget": pn.feasible.budget}
    with open(path, "w") as fh:
        json.dump({"net": _layers_json(pn.net), "feasible": feas}, fh)


def load_policy(path: str) -> PolicyNet:
    with open(path) as fh:
        blob = json.load(fh)
    feas = blob["feasible"]
    if feas["kind"] == "box":
        feasible = Box(np.asarray(feas["lower"], dtype=float),
                       np.asarray(feas["upper"], dtype=float))
    else:
        feasible = BudgetSimplex(int(feas["dim"]), float(feas["budget"]))
    return PolicyNet(_layers_from_json(blob["net"]), feasible)
