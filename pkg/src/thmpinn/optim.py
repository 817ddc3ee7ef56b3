"""Adam on flat parameter vectors, plus gradient-norm loss-weight balancing."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import AllZeroGradientsWarning, NonFiniteGradientError


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter vector."""

    t: int
    m: np.ndarray
    v: np.ndarray
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n_params: int, learning_rate: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        t=0,
        m=np.zeros(n_params),
        v=np.zeros(n_params),
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray):
    """One bias-corrected Adam update; returns (new_state, new_params)."""
    grads = np.asarray(grads)
    if grads.shape != params.shape:
        raise ValueError(
            f"gradient shape {grads.shape} != parameter shape {params.shape}"
        )
    if not np.all(np.isfinite(grads)):
        bad = int(np.flatnonzero(~np.isfinite(grads))[0])
        raise NonFiniteGradientError(
            f"non-finite gradient at parameter index {bad}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, t=t, m=m, v=v), new_params


@dataclass
class WeightSchedule:
    """Loss-term weights, either fixed or rebalanced by gradient norms."""

    mode: str  # "fixed" | "gradient_norm_balance"
    weights: dict[str, float]
    update_period: int = 100
    alpha: float = 0.1

    def __post_init__(self):
        if self.mode not in ("fixed", "gradient_norm_balance"):
            raise ValueError(f"unknown weight mode {self.mode!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.update_period < 1:
            raise ValueError("update_period must be >= 1")
        for name, lam in self.weights.items():
            if not lam > 0.0:
                raise ValueError(f"weight {name} must be positive, got {lam}")


def update_weights(schedule: WeightSchedule, grad_norms) -> WeightSchedule:
    """Pull each weight toward max_j(g_j)/g_i, smoothed by alpha.

    Terms with zero gradient norm keep their current weight; if every norm is
    zero the schedule is returned unchanged with a warning.
    """
    if schedule.mode == "fixed":
        return schedule
    norms = dict(grad_norms)
    unknown = set(norms) - set(schedule.weights)
    if unknown:
        raise KeyError(f"gradient norms for unknown terms: {sorted(unknown)}")
    for name, g in norms.items():
        if g < 0.0 or not np.isfinite(g):
            raise ValueError(f"invalid gradient norm for {name}: {g}")
    g_max = max(norms.values(), default=0.0)
    if g_max == 0.0:
        warnings.warn(
            "all per-term gradient norms are zero; weights unchanged",
            AllZeroGradientsWarning,
        )
        return schedule
    a = schedule.alpha
    new_weights = dict(schedule.weights)
    for name, g in norms.items():
        if g > 0.0:
            new_weights[name] = (1.0 - a) * new_weights[name] + a * g_max / g
    return replace(schedule, weights=new_weights)
