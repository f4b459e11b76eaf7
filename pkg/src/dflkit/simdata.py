"""Synthetic data: mixture-of-Gaussians pairs, AR(1) windows, OD flows.

Every generator is a pure function of (config, seed), and datasets
carry their generator config in provenance so evaluation can draw
fresh outcomes from the true conditional distribution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GmmGenerator:
    """y | x ~ sum_c w_c N(A_c x, noise_var I), x uniform on a box."""
    weights: np.ndarray         # (3,)
    mats: np.ndarray            # (3, m, p)
    noise_var: float = 0.1
    x_low: np.ndarray = field(default=None)
    x_high: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "mats", np.asarray(self.mats, dtype=float))
        p = self.mats.shape[2]
        lo = np.full(p, -1.0) if self.x_low is None else np.asarray(self.x_low, dtype=float)
        hi = np.full(p, 1.0) if self.x_high is None else np.asarray(self.x_high, dtype=float)
        object.__setattr__(self, "x_low", lo)
        object.__setattr__(self, "x_high", hi)
        if self.weights.shape != (self.mats.shape[0],):
            raise ValueError("one weight per component")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be a probability vector")
        # zero is allowed: the degenerate generator y = A_c x grounds
        # several oracle reductions
        if not self.noise_var >= 0:
            raise ValueError("noise variance must be nonnegative")
        if np.any(lo >= hi):
            raise ValueError("empty x box")

    @property
    def p(self) -> int:
        return self.mats.shape[2]

    @property
    def m(self) -> int:
        return self.mats.shape[1]

    def to_config(self) -> dict:
        return {"weights": self.weights.tolist(), "mats": self.mats.tolist(),
                "noise_var": self.noise_var, "x_low": self.x_low.tolist(),
                "x_high": self.x_high.tolist()}


def gmm_from_config(cfg: dict) -> GmmGenerator:
    return GmmGenerator(np.asarray(cfg["weights"]), np.asarray(cfg["mats"]),
                        float(cfg["noise_var"]), np.asarray(cfg["x_low"]),
                        np.asarray(cfg["x_high"]))


def make_gmm_generator(p: int = 2, m: int = 2, seed: int = 0,
                       weights=(0.3, 0.3, 0.4),
                       noise_var: float = 0.1,
                       mat_low: float = 0.0,
                       mat_high: float = 1.0) -> GmmGenerator:
    """Default three-component generator; A entries uniform on [mat_low, mat_high]."""
    rng = np.random.default_rng(seed)
    mats = rng.uniform(mat_low, mat_high, size=(len(weights), m, p))
    return GmmGenerator(np.asarray(weights, dtype=float), mats, noise_var)


def gmm_mean(gen: GmmGenerator, x: np.ndarray) -> np.ndarray:
    """E[y | x] = (sum_c w_c A_c) x."""
    Abar = np.einsum("c,cmp->mp", gen.weights, gen.mats)
    return Abar @ np.asarray(x, dtype=float)


def sample_conditional(gen: GmmGenerator, x: np.ndarray, n: int,
                       seed: int | np.random.Generator = 0) -> np.ndarray:
    """n draws of y | x from the true mixture; rows are outcomes."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    comps = rng.choice(gen.weights.size, size=n, p=gen.weights)
    means = np.einsum("cmp,p->cm", gen.mats, x)[comps]
    return means + np.sqrt(gen.noise_var) * rng.standard_normal((n, gen.m))


@dataclass
class Dataset:
    X: np.ndarray               # (N, p)
    Y: np.ndarray               # (N, m)
    split: np.ndarray           # (N,) tags: train / val / test
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        self.split = np.asarray(self.split)
        n = self.X.shape[0]
        if self.Y.shape[0] != n or self.split.shape != (n,):
            raise ValueError("X, Y and split must agree on the record count")

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, tag: str) -> tuple[np.ndarray, np.ndarray]:
        mask = self.split == tag
        return self.X[mask], self.Y[mask]


def generate(gen: GmmGenerator, n: int, seed: int = 0) -> Dataset:
    """n seeded (x, y) pairs, all tagged train until split() retags."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.uniform(gen.x_low, gen.x_high, size=(n, gen.p))
    comps = rng.choice(gen.weights.size, size=n, p=gen.weights)
    means = np.einsum("cmp,np->ncm", gen.mats, X)[np.arange(n), comps]
    Y = means + np.sqrt(gen.noise_var) * rng.standard_normal((n, gen.m))
    prov = {"generator": gen.to_config(), "kind": "gmm", "seed": int(seed),
            "n": int(n)}
    return Dataset(X, Y, np.full(n, "train", dtype=object), prov)


def split(ds: Dataset, ratios: tuple, seed: int = 0) -> Dataset:
    """Seeded shuffle, contiguous train/val/test blocks.

    Counts use floor for val and test; the remainder goes to train.
    """
    ratios = np.asarray(ratios, dtype=float)
    if ratios.shape != (3,) or np.any(ratios < 0) or abs(ratios.sum() - 1) > 1e-9:
        raise ValueError("ratios must be three nonnegative values summing to 1")
    n = len(ds)
    n_val = int(np.floor(n * ratios[1]))
    n_test = int(np.floor(n * ratios[2]))
    n_train = n - n_val - n_test
    perm = np.random.default_rng(seed).permutation(n)
    tags = np.empty(n, dtype=object)
    tags[perm[:n_train]] = "train"
    tags[perm[n_train:n_train + n_val]] = "val"
    tags[perm[n_train + n_val:]] = "test"
    prov = dict(ds.provenance)
    prov["split"] = {"ratios": ratios.tolist(), "seed": int(seed),
                     "counts": [n_train, n_val, n_test]}
    return Dataset(ds.X.copy(), ds.Y.copy(), tags, prov)


def save(ds: Dataset, path: str) -> None:
    """CSV with header x_0..x_{p-1},y_0..y_{m-1},split; repr floats
    round-trip bit-exactly."""
    p, m = ds.X.shape[1], ds.Y.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i}" for i in range(p)]
                   + [f"y_{i}" for i in range(m)] + ["split"])
        for i in range(len(ds)):
            w.writerow([repr(float(v)) for v in ds.X[i]]
                       + [repr(float(v)) for v in ds.Y[i]] + [ds.split[i]])


def load(path: str) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file, no header")
    header = rows[0]
    xs = [c for c in header if c.startswith("x_")]
    ys = [c for c in header if c.startswith("y_")]
    expected = xs + ys + ["split"]
    if header != expected or not xs or not ys:
        for col in ("x_0", "y_0", "split"):
            if col not in header:
                raise ValueError(f"{path}: missing column {col!r}")
        raise ValueError(f"{path}: malformed header {header}")
    p, m = len(xs), len(ys)
    X = np.empty((len(rows) - 1, p))
    Y = np.empty((len(rows) - 1, m))
    tags = np.empty(len(rows) - 1, dtype=object)
    for i, row in enumerate(rows[1:]):
        if len(row) != p + m + 1:
            raise ValueError(f"{path}: row {i + 1} has {len(row)} fields, "
                             f"expected {p + m + 1}")
        X[i] = [float(v) for v in row[:p]]
        Y[i] = [float(v) for v in row[p:p + m]]
        tags[i] = row[p + m]
    return Dataset(X, Y, tags, {"source": path})


def _ar1_windows(n: int, hist: int, fut: int, rng, base: float, phi: float,
                 amp: float, period: int, noise: float, lo: float,
                 hi: float) -> tuple[np.ndarray, np.ndarray]:
    length = n + hist + fut
    s = np.empty(length)
    s[0] = base
    eps = noise * rng.standard_normal(length)
    t = np.arange(length)
    seas = amp * np.sin(2 * np.pi * t / period)
    for i in range(1, length):
        s[i] = base + phi * (s[i - 1] - base) + seas[i] + eps[i]
    s = np.clip(s, lo, hi)
    X = np.stack([s[i:i + hist] for i in range(n)])
    Y = np.stack([s[i + hist:i + hist + fut] for i in range(n)])
    return X, Y


def synth_timeseries(task: str, n: int, seed: int = 0,
                     cfg: dict | None = None) -> Dataset:
    """Stand-in series for the forecasting tasks.

    wind: 24-step history -> 12-step future power, clipped to [0, 4].
    inventory: 14-day demand history -> 7-day future, clipped to [0, 3].
    od: gravity-model region flows, one week of x and the next week of
    y with multiplicative noise, flattened K*K*7 per record.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cfg = dict(cfg or {})
    rng = np.random.default_rng(seed)
    if task == "wind":
        noise = float(cfg.get("noise", 0.35))
        X, Y = _ar1_windows(n, 24, 12, rng, base=2.0, phi=0.8, amp=1.2,
                            period=24, noise=noise, lo=0.0, hi=4.0)
    elif task == "inventory":
        noise = float(cfg.get("noise", 0.3))
        X, Y = _ar1_windows(n, 14, 7, rng, base=1.5, phi=0.6, amp=0.7,
                            period=7, noise=noise, lo=0.0, hi=3.0)
    elif task == "od":
        K = int(cfg.get("K", 5))
        days = int(cfg.get("days", 7))
        noise = float(cfg.get("noise", 0.2))
        N = np.asarray(cfg.get("populations",
                               np.random.default_rng(seed + 1).uniform(
                                   1e5, 1e6, size=K)), dtype=float)
        dest = N[None, :] / (N.sum() - N[:, None])
        base = 0.15 * N[:, None] * dest
        np.fill_diagonal(base, 0.0)
        Xr = np.empty((n, K, K, days))
        Yr = np.empty((n, K, K, days))
        for i in range(n):
            Xr[i] = base[:, :, None] * np.exp(
                noise * rng.standard_normal((K, K, days)))
            Yr[i] = Xr[i] * np.exp(noise * rng.standard_normal((K, K, days)))
            Xr[i, np.arange(K), np.arange(K), :] = 0.0
            Yr[i, np.arange(K), np.arange(K), :] = 0.0
        X = Xr.reshape(n, -1)
        Y = Yr.reshape(n, -1)
        cfg["populations"] = N.tolist()
        cfg.setdefault("K", K)
        cfg.setdefault("days", days)
    else:
        raise ValueError(f"unknown task {task!r}")
    prov = {"kind": task, "seed": int(seed), "n": int(n), "cfg": cfg}
    return Dataset(X, Y, np.full(n, "train", dtype=object), prov)


def standardize_features(ds: Dataset) -> Dataset:
    """Per-coordinate standardization of X using train-split statistics;
    the statistics land in provenance so deciders can reuse them."""
    X_tr, _ = ds.subset("train")
    if X_tr.shape[0] == 0:
        raise ValueError("no train split to take statistics from")
    mean = X_tr.mean(axis=0)
    std = X_tr.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    prov = dict(ds.provenance)
    prov["standardize"] = {"mean": mean.tolist(), "std": std.tolist()}
    return Dataset((ds.X - mean) / std, ds.Y.copy(), ds.split.copy(), prov)
