"""Attention-based expected-cost surrogate g(x, a).

g(x,a) = sum_s w_s(x) f(v_s, a), with w = softmax(q(x).k_s / sqrt(d)).
The encoder maps features to a query; keys select which value points
(candidate outcomes) matter for this x; the task's own cost scores
actions against those outcomes. Because the value points live in
outcome space, g inherits structure from f directly: convexity in a
when f is convex, and exact equality with a conditional KDE built from
the same keys and values.

Training regresses g(x_i, a_j) onto f(y_i, a_j) over J sampled
feasible actions per pair. All gradients are hand-derived on top of
learncore primitives (softmax Jacobian, scaled dot products, and the
objective's analytic outcome gradient for the value points).
"""

from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import learncore as lc
from . import objectives as ob
from . import samplers
from . import solvers

# task-specific defaults for the number of attention points
DEFAULT_POINTS = {
    "synthetic_convex": 1000,
    "synthetic_nonconvex": 1000,
    "wind_bidding": 500,
    "wind_bidding_reduced": 500,
    "inventory": 230,
    "vaccine": 100,
}

# cap on S*B*J*dim elements held live during a gradient micro-batch
_CHUNK_BUDGET = 1 << 24


@dataclass
class AttentionSurrogate:
    encoder: lc.DenseNet        # x -> query in R^d
    keys: np.ndarray            # (S, d)
    values: np.ndarray          # (S, outcome_dim), rows are outcomes
    objective: object
    d: int
    S: int
    frozen_values: bool = False
    seed: int = 0

    def __post_init__(self):
        self.keys = np.asarray(self.keys, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.S < 1 or self.d < 1:
            raise ValueError("need S >= 1 and d >= 1")
        if self.keys.shape != (self.S, self.d):
            raise ValueError(f"keys shape {self.keys.shape}, expected "
                             f"({self.S}, {self.d})")
        out = int(self.objective.outcome_dim)
        if self.values.shape != (self.S, out):
            raise ValueError("values must be rows in outcome space, shape "
                             f"({self.S}, {out})")

    def trainable(self) -> list[np.ndarray]:
        ps = self.encoder.params() + [self.keys]
        if not self.frozen_values:
            ps.append(self.values)
        return ps


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    J: int = 100                # sampled actions per (x, y) pair
    seed: int = 0
    sampler: str = "auto"       # dispatch on the feasible set
    patience: int = 10          # early stop on validation MSE

    def __post_init__(self):
        if self.epochs < 1 or self.J < 1 or self.batch_size < 1:
            raise ValueError("epochs, batch_size and J must be >= 1")
        if self.sampler != "auto":
            raise ValueError("only the feasible-set dispatch sampler exists")


def make_surrogate(objective, x_dim: int, S: int | None = None, d: int = 16,
                   seed: int = 0, hidden: tuple = (64, 64),
                   frozen_values: bool = False) -> AttentionSurrogate:
    """Fresh model: relu encoder, unit-scale keys, zero values.

    Call init_values_from_labels afterwards to place the value points
    on training outcomes.
    """
    S = int(S if S is not None else DEFAULT_POINTS[objective.variant])
    rng = np.random.default_rng(seed)
    enc = lc.init_dense([int(x_dim), *map(int, hidden), int(d)], seed=seed)
    keys = rng.standard_normal((S, d)) / np.sqrt(d)
    values = np.zeros((S, int(objective.outcome_dim)))
    return AttentionSurrogate(enc, keys, values, objective, int(d), S,
                              frozen_values=frozen_values, seed=int(seed))


def init_values_from_labels(dataset, S: int, seed: int = 0) -> np.ndarray:
    """S outcome rows drawn uniformly with replacement from training y."""
    if hasattr(dataset, "subset"):
        _, Y = dataset.subset("train")
    else:
        Y = np.asarray(dataset, dtype=float)
    Y = np.atleast_2d(Y)
    if Y.shape[0] == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, Y.shape[0], size=int(S))
    return Y[idx].copy()


def init_attention_points(model: AttentionSurrogate, dataset,
                          seed: int = 0) -> AttentionSurrogate:
    """Paired data init: draw S training rows with replacement, set
    values to their outcomes and keys to the encoder's queries of the
    same rows. The model then starts as a kernel regressor on observed
    (x, y) pairs instead of attending through random keys, which gives
    the optimizer a meaningful similarity structure from step one.
    """
    X, Y = dataset.subset("train")
    if Y.shape[0] == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, Y.shape[0], size=model.S)
    model.values = Y[idx].copy()
    model.keys = lc.forward(model.encoder, X[idx]).copy()
    return model


def _query(model: AttentionSurrogate, X: np.ndarray) -> np.ndarray:
    return lc.forward(model.encoder, np.asarray(X, dtype=float))


def attention_weights(model: AttentionSurrogate, x: np.ndarray) -> np.ndarray:
    """softmax(q(x).k_s / sqrt(d)); a probability vector over points."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("nonfinite input")
    q = _query(model, x)
    z = model.keys @ np.atleast_2d(q)[0] / np.sqrt(model.d)
    return lc.softmax(z)


def g(model: AttentionSurrogate, x: np.ndarray, a: np.ndarray) -> float:
    """sum_s w_s(x) f(v_s, a)."""
    a = np.asarray(a, dtype=float)
    if a.shape != (int(model.objective.decision_dim),):
        raise ValueError("action has wrong dimension")
    w = attention_weights(model, x)
    fvals = ob.cost_matrix(model.objective, model.values, a[None, :])[:, 0]
    return float(w @ fvals)


def grad_g_a(model: AttentionSurrogate, x: np.ndarray,
             a: np.ndarray) -> np.ndarray:
    """Attention-weighted action gradient sum_s w_s grad_a f(v_s, a)."""
    a = np.asarray(a, dtype=float)
    w = attention_weights(model, x)
    A = np.broadcast_to(a, (model.S, a.size))
    G = ob.grad_a_batch(model.objective, model.values, A)
    return w @ G


def grad_g_params(model: AttentionSurrogate, x: np.ndarray,
                  a: np.ndarray) -> dict:
    """Exact gradients of g at (x, a) w.r.t. encoder, keys and values.

    Returns {"encoder": [per-layer arrays], "keys": (S,d),
    "values": (S,outcome_dim) or None when values are frozen}.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    obj = model.objective
    q = _query(model, x)                      # caches the forward pass
    qv = np.atleast_2d(q)[0]
    scale = np.sqrt(model.d)
    z = model.keys @ qv / scale
    w = lc.softmax(z)
    fvals = ob.cost_matrix(obj, model.values, a[None, :])[:, 0]
    dz = lc.softmax_backward(w, fvals)
    dq = model.keys.T @ dz / scale
    enc_grads, _ = lc.backward(model.encoder, dq if q.ndim == 1 else dq[None])
    dkeys = np.outer(dz, qv) / scale
    dvalues = None
    if not model.frozen_values:
        Gy = ob.grad_y_matrix(obj, model.values, a[None, :])[:, 0, :]
        dvalues = w[:, None] * Gy
    return {"encoder": enc_grads, "keys": dkeys, "values": dvalues}


def _pair_chunk(S: int, J: int, width: int, B: int) -> int:
    return int(np.clip(_CHUNK_BUDGET // max(S * J * width, 1), 1, B))


def _forward_matrix(model: AttentionSurrogate, Xb: np.ndarray,
                    A3: np.ndarray) -> np.ndarray:
    """g(x_i, a_ij) for per-pair action blocks A3 (B, J, m) -> (B, J)."""
    obj = model.objective
    B, J, m = A3.shape
    width = max(int(obj.outcome_dim), 4)
    step = _pair_chunk(model.S, J, width, B)
    out = np.empty((B, J))
    for lo in range(0, B, step):
        hi = min(lo + step, B)
        Q = np.atleast_2d(_query(model, Xb[lo:hi]))
        W = lc.softmax(Q @ model.keys.T / np.sqrt(model.d), axis=1)
        F = ob.cost_matrix(obj, model.values, A3[lo:hi].reshape(-1, m))
        out[lo:hi] = np.einsum("bs,sbj->bj", W,
                               F.reshape(model.S, hi - lo, J))
    return out


def _mse(model: AttentionSurrogate, X: np.ndarray, Y: np.ndarray,
         A3: np.ndarray) -> float:
    obj = model.objective
    B, J, m = A3.shape
    G = _forward_matrix(model, X, A3)
    T = ob.cost_batch(obj, np.repeat(Y, J, axis=0),
                      A3.reshape(-1, m)).reshape(B, J)
    return float(np.mean((G - T) ** 2))


def _loss_and_grads(model: AttentionSurrogate, Xb, Yb, A3):
    """Mean squared error over the minibatch and gradients in the order
    of model.trainable(). Streams pair chunks to bound memory."""
    obj = model.objective
    B, J, m = A3.shape
    S, d = model.S, model.d
    p_out = int(obj.outcome_dim)
    scale = np.sqrt(d)
    n_enc = len(model.encoder.params())
    enc_acc = None
    dK = np.zeros_like(model.keys)
    dV = None if model.frozen_values else np.zeros_like(model.values)
    loss = 0.0
    step = _pair_chunk(S, J, max(p_out, 4), B)
    for lo in range(0, B, step):
        hi = min(lo + step, B)
        nb = hi - lo
        A_flat = A3[lo:hi].reshape(-1, m)
        Q = np.atleast_2d(_query(model, Xb[lo:hi]))
        W = lc.softmax(Q @ model.keys.T / scale, axis=1)
        F = ob.cost_matrix(obj, model.values, A_flat).reshape(S, nb, J)
        G = np.einsum("bs,sbj->bj", W, F)
        T = ob.cost_batch(obj, np.repeat(Yb[lo:hi], J, axis=0),
                          A_flat).reshape(nb, J)
        R = G - T
        loss += float((R ** 2).sum())
        U = 2.0 * R / (B * J)
        dW = np.einsum("sbj,bj->bs", F, U)
        dZ = lc.softmax_backward(W, dW, axis=1)
        eg, _ = lc.backward(model.encoder, dZ @ model.keys / scale)
        enc_acc = eg if enc_acc is None else [a + b for a, b in zip(enc_acc, eg)]
        dK += dZ.T @ Q / scale
        if dV is not None:
            Gy = ob.grad_y_matrix(obj, model.values, A_flat)
            UW = W[:, :, None] * U[:, None, :]           # (nb, S, J)
            dV += np.einsum("bsj,sbjp->sp", UW,
                            Gy.reshape(S, nb, J, p_out))
    if enc_acc is None:
        enc_acc = [np.zeros_like(p) for p in model.encoder.params()]
    grads = enc_acc[:n_enc] + [dK]
    if dV is not None:
        grads.append(dV)
    return loss / (B * J), grads


def train(model: AttentionSurrogate, dataset, cfg: TrainConfig) -> list[dict]:
    """Sampled-action MSE training with early stopping on validation MSE.

    Mutates the model in place, restoring the parameters of the best
    validation epoch, and returns the loss curve as a list of
    {"epoch", "train_mse", "val_mse"} rows.
    """
    X_tr, Y_tr = dataset.subset("train")
    X_val, Y_val = dataset.subset("val")
    if X_tr.shape[0] == 0:
        raise ValueError("empty training split")
    obj = model.objective
    m = int(obj.decision_dim)
    rng = np.random.default_rng(cfg.seed)
    # one fixed validation action set keeps val MSE comparable across epochs
    n_val = X_val.shape[0]
    A_val = samplers.sample_actions(obj.feasible, n_val * cfg.J,
                                    rng).reshape(n_val, cfg.J, m)
    params = model.trainable()
    state = lc.adam_init(params, lr=cfg.lr)
    best_val = np.inf
    best = None
    strikes = 0
    curve = []
    n = X_tr.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        tr_losses = []
        for s0 in range(0, n, cfg.batch_size):
            idx = perm[s0:s0 + cfg.batch_size]
            A3 = samplers.sample_actions(obj.feasible, idx.size * cfg.J,
                                         rng).reshape(idx.size, cfg.J, m)
            loss, grads = _loss_and_grads(model, X_tr[idx], Y_tr[idx], A3)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"nonfinite training loss at epoch {epoch}")
            lc.adam_step(params, grads, state)
            tr_losses.append(loss)
        val_mse = _mse(model, X_val, Y_val, A_val) if n_val else float("nan")
        curve.append({"epoch": epoch, "train_mse": float(np.mean(tr_losses)),
                      "val_mse": val_mse})
        if n_val and val_mse < best_val:
            best_val = val_mse
            best = [p.copy() for p in params]
            strikes = 0
        elif n_val:
            strikes += 1
            if strikes >= cfg.patience:
                break
    if best is not None:
        for p, b in zip(params, best):
            p[...] = b
    return curve


def save_loss_csv(curve: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_mse", "val_mse"])
        for row in curve:
            w.writerow([row["epoch"], repr(row["train_mse"]),
                        repr(row["val_mse"])])


def _objective_to_json(obj) -> dict:
    if obj.variant == "vaccine":
        return {"objective": "vaccine",
                "params": obj.params.to_dict(),
                "init": {c: getattr(obj.init, c).tolist()
                         for c in ("S", "E", "I", "R", "V")},
                "budget": float(obj.feasible.budget),
                "od_days": int(obj.od_days)}
    return ob.objective_config(obj)


def _objective_from_json(cfg: dict):
    if cfg.get("objective") == "vaccine":
        from . import episim
        params = episim.SeirvParams(**cfg["params"])
        init = episim.SeirvState(**{k: np.asarray(v, dtype=float)
                                    for k, v in cfg["init"].items()})
        return episim.VaccineObjective(params, init, cfg["budget"],
                                       od_days=cfg["od_days"])
    return ob.objective_from_config(cfg)


def save_surrogate(model: AttentionSurrogate, path: str) -> None:
    blob = {
        "d": model.d, "S": model.S, "seed": model.seed,
        "frozen_values": model.frozen_values,
        "objective": _objective_to_json(model.objective),
        "encoder": {"layers": [{"w": l.w.tolist(), "b": l.b.tolist(),
                                "activation": l.activation}
                               for l in model.encoder.layers]},
        "keys": model.keys.tolist(),
        "values": model.values.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(blob, fh)


def load_surrogate(path: str, objective=None) -> AttentionSurrogate:
    with open(path) as fh:
        blob = json.load(fh)
    layers = [lc.Layer(np.asarray(l["w"], dtype=float),
                       np.asarray(l["b"], dtype=float), l["activation"])
              for l in blob["encoder"]["layers"]]
    enc = lc.DenseNet(layers)
    lc.check_net(enc)
    obj = objective if objective is not None else _objective_from_json(
        blob["objective"])
    return AttentionSurrogate(enc, np.asarray(blob["keys"], dtype=float),
                              np.asarray(blob["values"], dtype=float),
                              obj, int(blob["d"]), int(blob["S"]),
                              frozen_values=bool(blob["frozen_values"]),
                              seed=int(blob["seed"]))


def surrogate_value_fns(model: AttentionSurrogate, x: np.ndarray):
    """(value_fn, grad_fn) closures over batched actions for the solvers."""
    w = attention_weights(model, x)
    obj = model.objective

    def value_fn(A: np.ndarray) -> np.ndarray:
        return w @ ob.cost_matrix(obj, model.values, np.atleast_2d(A))

    def grad_fn(A: np.ndarray) -> np.ndarray:
        A = np.atleast_2d(A)
        out = np.empty_like(A)
        for i in range(A.shape[0]):
            Ai = np.broadcast_to(A[i], (model.S, A.shape[1]))
            out[i] = w @ ob.grad_a_batch(obj, model.values, Ai)
        return out

    return value_fn, grad_fn


def decide(model: AttentionSurrogate, x: np.ndarray, iters: int = 500,
           lr: float | None = None, restarts: int = 0,
           seed: int = 0) -> np.ndarray:
    """argmin_a g(x, a) over the task's feasible set."""
    value_fn, grad_fn = surrogate_value_fns(model, x)
    res = solvers.minimize_over(lambda a: float(value_fn(a)[0]),
                                lambda a: grad_fn(a)[0],
                                model.objective.feasible, iters=iters,
                                lr=lr, restarts=restarts, seed=seed)
    return res.a


def decide_batch(model: AttentionSurrogate, X: np.ndarray, iters: int = 500,
                 lr: float | None = None, restarts: int = 0, seed: int = 0):
    """argmin_a g(x_i, a) for every row of X in one batched solve.

    Returns (A, values). Attention weights are fixed per row, so each
    row's problem is independent and the solver can run them together.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    obj = model.objective
    Q = np.atleast_2d(_query(model, X))
    W = lc.softmax(Q @ model.keys.T / np.sqrt(model.d), axis=1)

    def value_fn(A):
        F = ob.cost_matrix(obj, model.values, np.atleast_2d(A))
        return np.einsum("ns,sn->n", W, F)

    def grad_fn(A):
        A = np.atleast_2d(A)
        Y_rep = np.repeat(model.values, n, axis=0)
        A_rep = np.tile(A, (model.S, 1))
        G = ob.grad_a_batch(obj, Y_rep, A_rep).reshape(model.S, n, A.shape[1])
        return np.einsum("ns,snm->nm", W, G)

    res = solvers.minimize_over_batch(value_fn, grad_fn, obj.feasible, n,
                                      iters=iters, lr=lr, restarts=restarts,
                                      seed=seed)
    return res.a, res.value
