"""Optimizers: bias-corrected Adam and the weighted-lasso machinery.

The penalized vector is the union of input and output weights; biases
are never penalized. Penalty weights come from a reference network (the
weights just before the penalty is switched on): w_j = |ref_j|^-gamma,
and coordinates whose reference value is exactly zero are frozen at
zero from then on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import NumericError, PradaNetError
from .network import NetworkParams, loss_and_gradient, mse_loss, zeros_like_params


def soft_threshold(x, t):
    """sign(x) * max(|x| - t, 0); the proximal map of t*|.|.

    Exact zeros inside the threshold, bit for bit: 0.0 * sign is used
    nowhere, the max() branch produces literal 0.0.
    """
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


@dataclass
class AdamState:
    """Moment estimates plus step bookkeeping for one training run."""

    first_moment: NetworkParams
    second_moment: NetworkParams
    step_count: int = 0
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def fresh(
        cls,
        params: NetworkParams,
        step_size: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> "AdamState":
        return cls(
            first_moment=zeros_like_params(params),
            second_moment=zeros_like_params(params),
            step_count=0,
            step_size=step_size,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


@dataclass(frozen=True)
class PenaltyWeights:
    """Per-parameter multipliers w_j = |ref_j|^-gamma over the weights.

    frozen_* masks mark coordinates whose reference value was exactly
    zero; their multiplier entries are unused (stored as 0).
    """

    input_weights: np.ndarray
    output_weights: np.ndarray
    gamma: float
    frozen_input: np.ndarray
    frozen_output: np.ndarray

    def penalty_value(self, params: NetworkParams) -> float:
        """Sum of w_j * |theta_j| over non-frozen penalized coordinates."""
        pin = np.where(self.frozen_input, 0.0, self.input_weights * np.abs(params.input_weights))
        pout = np.where(self.frozen_output, 0.0, self.output_weights * np.abs(params.output_weights))
        return float(pin.sum() + pout.sum())


def compute_penalty_weights(reference: NetworkParams, gamma: float) -> PenaltyWeights:
    """Adaptive-lasso multipliers from a reference (pilot) network.

    gamma = 0 reduces to the standard lasso: every non-frozen multiplier
    is exactly 1 regardless of the reference magnitudes.
    """
    if gamma < 0:
        raise PradaNetError("gamma must be >= 0")
    frozen_in = reference.input_weights == 0.0
    frozen_out = reference.output_weights == 0.0
    with np.errstate(divide="ignore"):
        w_in = np.where(frozen_in, 0.0, np.abs(reference.input_weights) ** (-gamma))
        w_out = np.where(frozen_out, 0.0, np.abs(reference.output_weights) ** (-gamma))
    return PenaltyWeights(
        input_weights=w_in,
        output_weights=w_out,
        gamma=float(gamma),
        frozen_input=frozen_in,
        frozen_output=frozen_out,
    )


def penalized_objective(
    params: NetworkParams, data: Dataset, lam: float, weights: PenaltyWeights
) -> float:
    """mse_loss + lam * weighted l1 penalty over non-frozen weights."""
    if lam < 0:
        raise PradaNetError("lambda must be >= 0")
    _check_frozen(params, weights)
    return mse_loss(params, data) + lam * weights.penalty_value(params)


def _check_frozen(params: NetworkParams, weights: PenaltyWeights) -> None:
    if np.any(params.input_weights[weights.frozen_input] != 0.0) or np.any(
        params.output_weights[weights.frozen_output] != 0.0
    ):
        raise PradaNetError("frozen parameter has drifted away from zero")


def _adam_update(p, g, m, v, state: AdamState, t: int):
    m_new = state.beta1 * m + (1.0 - state.beta1) * g
    v_new = state.beta2 * v + (1.0 - state.beta2) * (g * g)
    m_hat = m_new / (1.0 - state.beta1**t)
    v_hat = v_new / (1.0 - state.beta2**t)
    p_new = p - state.step_size * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return p_new, m_new, v_new


def adam_step(
    params: NetworkParams, gradient: NetworkParams, state: AdamState
) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam step on every parameter."""
    gradient.check_finite()
    t = state.step_count + 1
    m, v = state.first_moment, state.second_moment
    in_w, m_iw, v_iw = _adam_update(
        params.input_weights, gradient.input_weights, m.input_weights, v.input_weights, state, t
    )
    in_b, m_ib, v_ib = _adam_update(
        params.input_biases, gradient.input_biases, m.input_biases, v.input_biases, state, t
    )
    out_w, m_ow, v_ow = _adam_update(
        params.output_weights, gradient.output_weights, m.output_weights, v.output_weights, state, t
    )
    ob, m_ob, v_ob = _adam_update(
        params.output_bias, gradient.output_bias, m.output_bias, v.output_bias, state, t
    )
    new_params = NetworkParams(
        input_weights=in_w,
        input_biases=in_b,
        output_weights=out_w,
        output_bias=float(ob),
    )
    new_state = AdamState(
        first_moment=NetworkParams(m_iw, m_ib, m_ow, float(m_ob)),
        second_moment=NetworkParams(v_iw, v_ib, v_ow, float(v_ob)),
        step_count=t,
        step_size=state.step_size,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
    )
    return new_params, new_state


def subgradient_lasso_step(
    params: NetworkParams,
    data: Dataset,
    lam: float,
    weights: PenaltyWeights,
    state: AdamState,
) -> tuple[float, NetworkParams, AdamState]:
    """Adam step on mse gradient plus lam * w_j * sign(theta_j).

    sign(0) is taken as 0, so a penalized parameter sitting exactly at
    zero with no loss gradient stays put. Frozen coordinates receive no
    update at all. Returns (mse_loss_before_step, params, state).
    """
    loss, grad = loss_and_gradient(params, data)
    g_in = grad.input_weights + lam * weights.input_weights * np.sign(params.input_weights)
    g_out = grad.output_weights + lam * weights.output_weights * np.sign(params.output_weights)
    g_in = np.where(weights.frozen_input, 0.0, g_in)
    g_out = np.where(weights.frozen_output, 0.0, g_out)
    full_grad = NetworkParams(
        input_weights=g_in,
        input_biases=grad.input_biases,
        output_weights=g_out,
        output_bias=grad.output_bias,
    )
    new_params, new_state = adam_step(params, full_grad, state)
    new_params = NetworkParams(
        input_weights=np.where(weights.frozen_input, 0.0, new_params.input_weights),
        input_biases=new_params.input_biases,
        output_weights=np.where(weights.frozen_output, 0.0, new_params.output_weights),
        output_bias=new_params.output_bias,
    )
    return loss, new_params, new_state


def proximal_step(
    params: NetworkParams,
    data: Dataset,
    lam: float,
    alpha: float,
    weights: PenaltyWeights,
) -> tuple[float, NetworkParams]:
    """Gradient step on the mse followed by per-coordinate soft-thresholding.

    Penalized coordinates are shrunk by alpha * lam * w_j and set to an
    exact 0.0 when they land inside the threshold; biases take the plain
    gradient step; frozen coordinates stay at zero.
    Returns (mse_loss_before_step, params).
    """
    if alpha <= 0:
        raise PradaNetError("alpha must be > 0")
    if lam < 0:
        raise PradaNetError("lambda must be >= 0")
    loss, grad = loss_and_gradient(params, data)
    eta_in = params.input_weights - alpha * grad.input_weights
    eta_out = params.output_weights - alpha * grad.output_weights
    eta_ib = params.input_biases - alpha * grad.input_biases
    eta_ob = params.output_bias - alpha * grad.output_bias
    if not (
        np.all(np.isfinite(eta_in))
        and np.all(np.isfinite(eta_out))
        and np.all(np.isfinite(eta_ib))
        and np.isfinite(eta_ob)
    ):
        raise NumericError("non-finite gradient step")
    new_in = soft_threshold(eta_in, alpha * lam * weights.input_weights)
    new_out = soft_threshold(eta_out, alpha * lam * weights.output_weights)
    new_in = np.where(weights.frozen_input, 0.0, new_in)
    new_out = np.where(weights.frozen_output, 0.0, new_out)
    return loss, NetworkParams(
        input_weights=new_in,
        input_biases=eta_ib,
        output_weights=new_out,
        output_bias=float(eta_ob),
    )
