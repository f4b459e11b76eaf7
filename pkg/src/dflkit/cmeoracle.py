"""Reference kernel conditional-expectation computations.

Deliberately small and direct: these are the independent oracles the
attention surrogate is checked against. Softmax attention over learned
keys is, term for term, a conditional KDE with an exponential inner
product kernel, so kde_conditional_expectation reproduces the
surrogate's prediction from raw arrays, and cme_weights gives the
regularized conditional-mean-embedding weights for trend checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import objectives


@dataclass(frozen=True)
class KernelSpec:
    variant: str              # "rbf" | "exponential"
    bandwidth: float = 1.0    # rbf: exp(-|x-x'|^2 / (2 h^2))
    scale: float = 1.0        # exponential: exp(x.x' / scale)

    def __post_init__(self):
        if self.variant not in ("rbf", "exponential"):
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "rbf" and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.variant == "exponential" and not self.scale > 0:
            raise ValueError("scale must be positive")


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if not np.all(np.isfinite(X)):
        raise ValueError("nonfinite rows")
    return X


def gram(X, kernel: KernelSpec) -> np.ndarray:
    """Pairwise kernel matrix, symmetric and PSD up to roundoff."""
    X = _as_matrix(X)
    if kernel.variant == "rbf":
        sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2)
        return np.exp(-sq / (2.0 * kernel.bandwidth ** 2))
    return np.exp(X @ X.T / kernel.scale)


def kernel_vector(X, x, kernel: KernelSpec) -> np.ndarray:
    """k_x[s] = k(x_s, x)."""
    X = _as_matrix(X)
    x = np.asarray(x, dtype=float).reshape(-1)
    if kernel.variant == "rbf":
        sq = np.sum((X - x) ** 2, axis=1)
        return np.exp(-sq / (2.0 * kernel.bandwidth ** 2))
    return np.exp(X @ x / kernel.scale)


def cme_weights(X_train, x, kernel: KernelSpec, lam: float = 1e-3) -> np.ndarray:
    """beta = (K + lam I)^-1 k_x.

    The weights are a regularized interpolation system's solution; they
    need not be nonnegative and need not sum to 1. Jitter escalates
    (lam, 10 lam, 100 lam) if the Cholesky factorization fails.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    K = gram(X_train, kernel)
    kx = kernel_vector(X_train, x, kernel)
    eye = np.eye(K.shape[0])
    for mult in (1.0, 10.0, 100.0):
        try:
            cf = scipy.linalg.cho_factor(K + lam * mult * eye, lower=True)
        except scipy.linalg.LinAlgError:
            continue
        return scipy.linalg.cho_solve(cf, kx)
    raise np.linalg.LinAlgError(
        "gram system not positive definite even with 100x jitter")


def cme_expectation(beta, Y_train, obj, a) -> float:
    """Weighted combination sum_s beta_s f(y_s, a)."""
    beta = np.asarray(beta, dtype=float)
    Y = np.atleast_2d(np.asarray(Y_train, dtype=float))
    if beta.shape[0] != Y.shape[0]:
        raise ValueError("one weight per training outcome required")
    fvals = objectives.cost_matrix(obj, Y, np.atleast_2d(a))[:, 0]
    return float(beta @ fvals)


def kde_conditional_expectation(keys, values, q, scale, obj, a) -> float:
    """sum_s exp(q.k_s/scale) f(v_s,a) / sum_s exp(q.k_s/scale).

    Max-subtracted logits, so large inner products cannot overflow.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    keys = np.atleast_2d(np.asarray(keys, dtype=float))
    values = np.atleast_2d(np.asarray(values, dtype=float))
    q = np.asarray(q, dtype=float).reshape(-1)
    logits = keys @ q / scale
    logits -= logits.max()
    w = np.exp(logits)
    w /= w.sum()
    fvals = objectives.cost_matrix(obj, values, np.atleast_2d(a))[:, 0]
    return float(w @ fvals)
