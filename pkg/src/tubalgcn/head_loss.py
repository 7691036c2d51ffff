"""Link-weight regression head, training objective, and error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RegressionHead",
    "LinkObservation",
    "estimate_weight",
    "estimate_weights_batch",
    "loss",
    "params_l2_norm",
    "mae",
    "rmse",
]


@dataclass(frozen=True)
class LinkObservation:
    """One observed weighted link: time slot t (1-based), node ids i, j."""

    t: int
    i: int
    j: int
    y: float


@dataclass(frozen=True)
class RegressionHead:
    """Aggregation vector r of length 2*F_out applied to [h_i || h_j]."""

    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.float64).ravel()
        if not np.all(np.isfinite(r)):
            raise ValueError("regression vector contains non-finite entries")
        object.__setattr__(self, "r", r)


def estimate_weight(h: np.ndarray, obs: LinkObservation, head: RegressionHead) -> float:
    """y_hat = [h_i^t || h_j^t] . r for a single link."""
    n, f, t = h.shape
    if not (1 <= obs.t <= t) or not (0 <= obs.i < n) or not (0 <= obs.j < n):
        raise IndexError(f"observation (t={obs.t}, i={obs.i}, j={obs.j}) out of range for {h.shape}")
    if head.r.shape[0] != 2 * f:
        raise ValueError(f"head length {head.r.shape[0]} != 2*F_out = {2 * f}")
    concat = np.concatenate([h[obs.i, :, obs.t - 1], h[obs.j, :, obs.t - 1]])
    return float(concat @ head.r)


def estimate_weights_batch(
    h: np.ndarray, t_idx: np.ndarray, i_idx: np.ndarray, j_idx: np.ndarray, head: RegressionHead
) -> np.ndarray:
    """Vectorized estimate_weight over index arrays (t_idx is 1-based)."""
    f = h.shape[1]
    hi = h[i_idx, :, t_idx - 1]
    hj = h[j_idx, :, t_idx - 1]
    return hi @ head.r[:f] + hj @ head.r[f:]


def params_l2_norm(param_arrays) -> float:
    """L2 norm of all learnable scalars flattened into one vector."""
    total = 0.0
    for a in param_arrays:
        total += float(np.sum(np.asarray(a) ** 2))
    return float(np.sqrt(total))


def loss(y, y_hat, param_arrays=(), kappa: float = 0.0) -> float:
    """Sum of squared residuals over the training entries plus kappa * ||Theta||_2.

    The regularizer is the plain (unsquared) L2 norm of the flattened
    parameter vector; see ``training.compute_gradients`` for the squared
    variant flag.
    """
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    data_term = float(np.sum((y - y_hat) ** 2))
    if kappa != 0.0:
        return data_term + kappa * params_l2_norm(param_arrays)
    return data_term


def mae(y, y_hat) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.size == 0:
        raise ValueError("MAE requires at least one observation")
    return float(np.mean(np.abs(y - y_hat)))


def rmse(y, y_hat) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.size == 0:
        raise ValueError("RMSE requires at least one observation")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))
