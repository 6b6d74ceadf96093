"""Three-stage training: smooth fit, adaptive-lasso fit, proximal descent.

Stage 1 trains the network with plain Adam until convergence. Stage 2
turns on the weighted l1 penalty, with multipliers computed from the
stage-1 weights, still using Adam on a subgradient. Stage 3 recomputes
the multipliers from the stage-2 weights and switches to proximal
gradient descent with small fixed step and penalty, which drives the
already-tiny weights to exact zeros.

A standard-lasso baseline is the same pipeline with gamma = 0 (uniform
multipliers); a node-gating baseline trains per-node output gates under
a plain lasso instead of penalizing individual links.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError
from .network import NetworkParams, hidden_activations, init_network, loss_and_gradient, mse_loss, predict
from .optim import (
    AdamState,
    adam_step,
    compute_penalty_weights,
    proximal_step,
    soft_threshold,
    subgradient_lasso_step,
)


@dataclass(frozen=True)
class TrainConfig:
    """Every tunable of the three-stage algorithm."""

    hidden_units: int = 50
    gamma: float = 2.0
    lam: float = 0.1
    stage3_alpha: float = 1e-5
    stage3_lambda: float = 1e-5
    adam_step_size: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    convergence_tol: float = 1e-5
    convergence_patience: int = 10
    max_epochs_stage1: int = 20000
    max_epochs_stage2: int = 20000
    max_epochs_stage3: int = 5000
    n_restarts: int = 5
    rng_seed: int = 0
    joint_gate_training: bool = False

    def __post_init__(self):
        if self.hidden_units < 1:
            raise ConfigError("hidden_units must be >= 1")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.stage3_alpha <= 0 or self.stage3_lambda < 0:
            raise ConfigError("stage-3 constants must be positive")
        if self.convergence_tol <= 0:
            raise ConfigError("convergence_tol must be > 0")
        if self.convergence_patience < 1:
            raise ConfigError("convergence_patience must be >= 1")
        if self.n_restarts < 1:
            raise ConfigError("n_restarts must be >= 1")
        if min(self.max_epochs_stage1, self.max_epochs_stage2, self.max_epochs_stage3) < 1:
            raise ConfigError("max_epochs must be >= 1")


_CONFIG_ALIASES = {"lambda": "lam"}


def load_train_config(path, **overrides) -> TrainConfig:
    """Read a flat key=value file; keyword overrides win."""
    values: dict = {}
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            key = _CONFIG_ALIASES.get(key, key)
            if key not in fields:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce_config_value(key, raw)
    values.update(overrides)
    return TrainConfig(**values)


def _coerce_config_value(key: str, raw: str):
    hints = {f.name: f.default for f in dataclasses.fields(TrainConfig)}
    default = hints[key]
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"config key {key!r}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None


def default_worker_count() -> int:
    """Worker pool size, overridable via PRADANET_WORKERS."""
    env = os.environ.get("PRADANET_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"PRADANET_WORKERS must be an integer, got {env!r}") from None
    return max(1, os.cpu_count() or 1)


class ConvergenceTracker:
    """Streaming form of the plateau rule used by has_converged."""

    def __init__(self, tol: float, patience: int):
        self.tol = tol
        self.patience = patience
        self.best: float | None = None
        self.streak = 0

    def update(self, loss: float) -> bool:
        if self.best is None:
            self.best = loss
            return False
        improvement = (self.best - loss) / max(abs(self.best), 1e-300)
        if improvement < self.tol:
            self.streak += 1
        else:
            self.streak = 0
        if loss < self.best:
            self.best = loss
        return self.streak >= self.patience


def has_converged(loss_history, tol: float, patience: int) -> bool:
    """True iff the running best improved by less than tol (relative)
    for `patience` consecutive epochs."""
    if patience < 1:
        raise ConfigError("patience must be >= 1")
    tracker = ConvergenceTracker(tol, patience)
    return any(tracker.update(float(v)) for v in loss_history)


@dataclass
class TrainResult:
    """Outcome of one full multi-restart training."""

    params: NetworkParams
    test_mse: float
    train_mse: float
    stage1_test_mse: float
    stage_epochs: tuple[int, int, int]
    stage_converged: tuple[bool, bool, bool]
    restart_index: int
    n_restarts: int

    @property
    def converged(self) -> bool:
        return all(self.stage_converged)


def _run_stage1(params, data, config):
    state = AdamState.fresh(
        params, config.adam_step_size, config.adam_beta1, config.adam_beta2, config.adam_epsilon
    )
    tracker = ConvergenceTracker(config.convergence_tol, config.convergence_patience)
    epochs = 0
    converged = False
    for _ in range(config.max_epochs_stage1):
        loss, grad = loss_and_gradient(params, data)
        params, state = adam_step(params, grad, state)
        epochs += 1
        if tracker.update(loss):
            converged = True
            break
    return params, epochs, converged


def _run_stage2(params, data, config, weights):
    state = AdamState.fresh(
        params, config.adam_step_size, config.adam_beta1, config.adam_beta2, config.adam_epsilon
    )
    tracker = ConvergenceTracker(config.convergence_tol, config.convergence_patience)
    epochs = 0
    converged = False
    for _ in range(config.max_epochs_stage2):
        objective_before = config.lam * weights.penalty_value(params)
        loss, params, state = subgradient_lasso_step(params, data, config.lam, weights, state)
        epochs += 1
        if tracker.update(loss + objective_before):
            converged = True
            break
    return params, epochs, converged


def _run_stage3(params, data, config, weights):
    tracker = ConvergenceTracker(config.convergence_tol, config.convergence_patience)
    epochs = 0
    converged = False
    for _ in range(config.max_epochs_stage3):
        objective_before = config.stage3_lambda * weights.penalty_value(params)
        loss, params = proximal_step(
            params, data, config.stage3_lambda, config.stage3_alpha, weights
        )
        epochs += 1
        if tracker.update(loss + objective_before):
            converged = True
            break
    return params, epochs, converged


def _train_single(data_train: Dataset, data_test: Dataset, config: TrainConfig, seed: int, restart_index: int) -> TrainResult:
    rng = np.random.default_rng(seed)
    params = init_network(config.hidden_units, data_train.n_features, rng)

    params, e1, c1 = _run_stage1(params, data_train, config)
    stage1_test = mse_loss(params, data_test)

    weights2 = compute_penalty_weights(params, config.gamma)
    params, e2, c2 = _run_stage2(params, data_train, config, weights2)

    weights3 = compute_penalty_weights(params, config.gamma)
    params, e3, c3 = _run_stage3(params, data_train, config, weights3)

    params.check_finite()
    return TrainResult(
        params=params,
        test_mse=mse_loss(params, data_test),
        train_mse=mse_loss(params, data_train),
        stage1_test_mse=stage1_test,
        stage_epochs=(e1, e2, e3),
        stage_converged=(c1, c2, c3),
        restart_index=restart_index,
        n_restarts=config.n_restarts,
    )


def train_prada(data_train: Dataset, data_test: Dataset, config: TrainConfig) -> TrainResult:
    """Full three-stage training with restarts; returns the restart with
    the lowest test MSE (first one on ties).

    Restart r uses seed config.rng_seed + r, so runs are reproducible
    and individual restarts can be re-executed in isolation.
    """
    if data_train.column_names != data_test.column_names:
        raise ConfigError("train and test data must share columns")
    results = [
        _train_single(data_train, data_test, config, config.rng_seed + r, r)
        for r in range(config.n_restarts)
    ]
    return min(results, key=lambda res: res.test_mse)


def train_standard_lasso(data_train: Dataset, data_test: Dataset, config: TrainConfig) -> TrainResult:
    """Same pipeline with uniform penalty multipliers (gamma = 0)."""
    return train_prada(data_train, data_test, dataclasses.replace(config, gamma=0.0))


@dataclass(frozen=True)
class GatedNetworkParams:
    """Dense network plus one multiplier per hidden node's output."""

    params: NetworkParams
    gates: np.ndarray

    def collapsed(self) -> NetworkParams:
        """Fold gates into the output weights; a zero gate yields an
        exactly-zero output weight, so the node reads as dead."""
        return NetworkParams(
            input_weights=self.params.input_weights.copy(),
            input_biases=self.params.input_biases.copy(),
            output_weights=self.params.output_weights * self.gates,
            output_bias=self.params.output_bias,
        )

    def n_live_nodes(self) -> int:
        return int(np.count_nonzero(self.gates))


@dataclass
class DgrResult:
    gated: GatedNetworkParams
    test_mse: float
    train_mse: float
    stage1_test_mse: float
    stage_epochs: tuple[int, int, int]
    stage_converged: tuple[bool, bool, bool]
    restart_index: int

    @property
    def converged(self) -> bool:
        return all(self.stage_converged)


def _gate_mse_and_grad(F, b_out, y, gates):
    r = F @ gates + b_out - y
    loss = float(np.mean(r * r))
    grad = (2.0 / len(y)) * (F.T @ r)
    return loss, grad


def _train_dgr_single(data_train, data_test, config, seed, restart_index) -> DgrResult:
    rng = np.random.default_rng(seed)
    params = init_network(config.hidden_units, data_train.n_features, rng)
    params, e1, c1 = _run_stage1(params, data_train, config)

    gated = GatedNetworkParams(params=params, gates=np.ones(config.hidden_units))
    stage1_test = mse_loss(gated.collapsed(), data_test)

    # Network weights stay fixed: the gated prediction is linear in the
    # gates, F @ g + b_out, with F precomputed once.
    joint = config.joint_gate_training
    gates = gated.gates

    def make_features(p):
        T = hidden_activations(p, data_train.X)
        return T * p.output_weights

    F = make_features(params)
    y = data_train.y

    # Subgradient stage on the gates (plain lasso, multipliers all 1).
    state_g = np.zeros_like(gates), np.zeros_like(gates)
    state_net = AdamState.fresh(
        params, config.adam_step_size, config.adam_beta1, config.adam_beta2, config.adam_epsilon
    )
    tracker = ConvergenceTracker(config.convergence_tol, config.convergence_patience)
    e2 = 0
    c2 = False
    m, v = state_g
    for t in range(1, config.max_epochs_stage2 + 1):
        if joint:
            F = make_features(params)
        loss, g_mse = _gate_mse_and_grad(F, params.output_bias, y, gates)
        objective = loss + config.lam * float(np.abs(gates).sum())
        g = g_mse + config.lam * np.sign(gates)
        m = config.adam_beta1 * m + (1 - config.adam_beta1) * g
        v = config.adam_beta2 * v + (1 - config.adam_beta2) * g * g
        m_hat = m / (1 - config.adam_beta1**t)
        v_hat = v / (1 - config.adam_beta2**t)
        gates = gates - config.adam_step_size * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)
        if joint:
            _, net_grad = loss_and_gradient(
                GatedNetworkParams(params, gates).collapsed(), data_train
            )
            params, state_net = adam_step(params, net_grad, state_net)
        e2 = t
        if tracker.update(objective):
            c2 = True
            break

    # Proximal stage on the gates, still at the user's gate penalty: the
    # plain lasso has no adaptive amplification, so thresholding with the
    # tiny stage-3 lambda would never reach exact zeros.
    tracker = ConvergenceTracker(config.convergence_tol, config.convergence_patience)
    e3 = 0
    c3 = False
    for t in range(1, config.max_epochs_stage3 + 1):
        if joint:
            F = make_features(params)
        loss, g_mse = _gate_mse_and_grad(F, params.output_bias, y, gates)
        objective = loss + config.lam * float(np.abs(gates).sum())
        gates = soft_threshold(gates - config.stage3_alpha * g_mse, config.stage3_alpha * config.lam)
        e3 = t
        if tracker.update(objective):
            c3 = True
            break

    gated = GatedNetworkParams(params=params, gates=gates)
    collapsed = gated.collapsed()
    return DgrResult(
        gated=gated,
        test_mse=mse_loss(collapsed, data_test),
        train_mse=mse_loss(collapsed, data_train),
        stage1_test_mse=stage1_test,
        stage_epochs=(e1, e2, e3),
        stage_converged=(c1, c2, c3),
        restart_index=restart_index,
    )


def train_dgr(data_train: Dataset, data_test: Dataset, config: TrainConfig) -> DgrResult:
    """Node-gating baseline: train the dense network, then lasso-prune
    per-node output gates. Surviving nodes keep all their input links."""
    if data_train.column_names != data_test.column_names:
        raise ConfigError("train and test data must share columns")
    results = [
        _train_dgr_single(data_train, data_test, config, config.rng_seed + r, r)
        for r in range(config.n_restarts)
    ]
    return min(results, key=lambda res: res.test_mse)
