"""One-hidden-layer tanh regression network: evaluation, loss, gradients.

The parameter container is also reused as the shape-compatible holder
for gradients and optimizer moments. Hidden node h is dead when its
output weight is zero or its entire input-weight row is zero; dead
nodes contribute nothing to the prediction beyond a constant absorbed
by the output bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import NumericError


@dataclass(frozen=True)
class NetworkParams:
    """All weights and biases of the network.

    Shapes: input_weights (H, D), input_biases (H,), output_weights (H,),
    output_bias scalar. Treated as an immutable value; updates build new
    instances.
    """

    input_weights: np.ndarray
    input_biases: np.ndarray
    output_weights: np.ndarray
    output_bias: float

    def __post_init__(self):
        H, D = self.input_weights.shape
        if H < 1 or D < 1:
            raise ValueError("need H >= 1 and D >= 1")
        if self.input_biases.shape != (H,) or self.output_weights.shape != (H,):
            raise ValueError("bias/output weight shapes do not match hidden size")

    @property
    def n_hidden(self) -> int:
        return self.input_weights.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.input_weights.shape[1]

    def check_finite(self) -> "NetworkParams":
        if not (
            np.all(np.isfinite(self.input_weights))
            and np.all(np.isfinite(self.input_biases))
            and np.all(np.isfinite(self.output_weights))
            and np.isfinite(self.output_bias)
        ):
            raise NumericError("non-finite network parameters")
        return self

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            input_weights=self.input_weights.copy(),
            input_biases=self.input_biases.copy(),
            output_weights=self.output_weights.copy(),
            output_bias=float(self.output_bias),
        )

    def dead_nodes(self) -> np.ndarray:
        """Boolean mask of hidden nodes that cannot affect predictions."""
        zero_out = self.output_weights == 0.0
        zero_in = np.all(self.input_weights == 0.0, axis=1)
        return zero_out | zero_in

    def count_nonzero_penalized(self) -> int:
        """Nonzero entries of the penalized vector (all weights, no biases)."""
        return int(
            np.count_nonzero(self.input_weights)
            + np.count_nonzero(self.output_weights)
        )

    def to_dict(
        self, column_names=None, standardization_stats=None
    ) -> dict:
        d = {
            "input_weights": [[float(v) for v in row] for row in self.input_weights],
            "input_biases": [float(v) for v in self.input_biases],
            "output_weights": [float(v) for v in self.output_weights],
            "output_bias": float(self.output_bias),
        }
        if column_names is not None:
            d["column_names"] = list(column_names)
        if standardization_stats is not None:
            d["standardization_stats"] = standardization_stats.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkParams":
        return cls(
            input_weights=np.asarray(d["input_weights"], dtype=np.float64),
            input_biases=np.asarray(d["input_biases"], dtype=np.float64),
            output_weights=np.asarray(d["output_weights"], dtype=np.float64),
            output_bias=float(d["output_bias"]),
        )


def zeros_like_params(params: NetworkParams) -> NetworkParams:
    return NetworkParams(
        input_weights=np.zeros_like(params.input_weights),
        input_biases=np.zeros_like(params.input_biases),
        output_weights=np.zeros_like(params.output_weights),
        output_bias=0.0,
    )


def init_network(
    n_hidden: int, n_inputs: int, rng: np.random.Generator
) -> NetworkParams:
    """Fan-in scaled uniform initialization; output bias starts at 0."""
    bound_in = 1.0 / np.sqrt(n_inputs)
    bound_out = 1.0 / np.sqrt(n_hidden)
    return NetworkParams(
        input_weights=rng.uniform(-bound_in, bound_in, size=(n_hidden, n_inputs)),
        input_biases=rng.uniform(-bound_in, bound_in, size=n_hidden),
        output_weights=rng.uniform(-bound_out, bound_out, size=n_hidden),
        output_bias=0.0,
    )


def hidden_activations(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """tanh activations, one row per sample: shape (N, H)."""
    return np.tanh(X @ params.input_weights.T + params.input_biases)


def predict(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Vectorized forward pass over an (N, D) matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.n_inputs:
        raise ValueError(
            f"input has {X.shape[1]} columns, network expects {params.n_inputs}"
        )
    T = hidden_activations(params, X)
    return T @ params.output_weights + params.output_bias


def forward(params: NetworkParams, x: np.ndarray) -> float:
    """Prediction for a single input vector."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape != (params.n_inputs,):
        raise ValueError(
            f"input has {x.shape[0]} entries, network expects {params.n_inputs}"
        )
    return float(predict(params, x[None, :])[0])


def mse_loss(params: NetworkParams, data: Dataset) -> float:
    """Mean squared error over the dataset."""
    r = predict(params, data.X) - data.y
    return float(np.mean(r * r))


def loss_and_gradient(params: NetworkParams, data: Dataset):
    """MSE and its exact gradient in one fused pass.

    Returns (loss, gradient) with the gradient packed in a
    NetworkParams-shaped container. Backprop uses tanh'(z) = 1 - tanh(z)^2.
    """
    X, y = data.X, data.y
    n = X.shape[0]
    T = hidden_activations(params, X)
    r = T @ params.output_weights + params.output_bias - y
    loss = float(np.mean(r * r))
    scale = 2.0 / n
    g_out_w = scale * (T.T @ r)
    g_out_b = scale * float(r.sum())
    dz = (r[:, None] * params.output_weights) * (1.0 - T * T) * scale
    g_in_w = dz.T @ X
    g_in_b = dz.sum(axis=0)
    grad = NetworkParams(
        input_weights=g_in_w,
        input_biases=g_in_b,
        output_weights=g_out_w,
        output_bias=g_out_b,
    )
    if not np.isfinite(loss):
        raise NumericError("non-finite loss")
    return loss, grad


def loss_gradient(params: NetworkParams, data: Dataset) -> NetworkParams:
    """Exact gradient of mse_loss with respect to every parameter."""
    _, grad = loss_and_gradient(params, data)
    grad.check_finite()
    return grad
