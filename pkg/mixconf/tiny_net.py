#!/usr/bin/env python3
"""
Tiny Network Module - Feed-Forward Softmax Classifier

A small fully connected classifier trained with hand-written
backpropagation. It provides:
- Seeded He-style initialization
- Softmax forward passes on live and EMA (shadow) parameters
- Soft-label cross-entropy, per sample
- One weighted Adam step followed by an EMA update
- A flat binary checkpoint format

Parameters are stored as lists of numpy arrays, weights with shape
(fan_in, fan_out) so a layer is `x @ W + b`. Every step returns a new
NetState; arrays of the previous state are never written in place.
"""

import logging
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.special import log_softmax, softmax

from mixconf.errors import CheckpointFormatError, ConfigError, DimensionMismatchError, NonFiniteGradientError

logger = logging.getLogger(__name__)

# ============================================================================
# OPTIMIZER AND STABILITY CONSTANTS SECTION
# ============================================================================

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
DEFAULT_EMA_DECAY = 0.999
PROBABILITY_FLOOR = 1e-12  # Clamp before any explicit log of a probability

CHECKPOINT_MAGIC = b"MXCF"
CHECKPOINT_VERSION = 1

# ============================================================================
# DOMAIN TYPES SECTION
# ============================================================================


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"


_ACTIVATION_CODES = {Activation.RELU: 0, Activation.TANH: 1}


@dataclass(frozen=True)
class NetConfig:
    """
    Network architecture

    Attributes:
        layer_sizes: (input_dim, hidden..., n_classes); at least two entries
        activation: Hidden-layer nonlinearity
        seed: Initialization seed
        ema_decay: Shadow-parameter decay in [0, 1)
    """

    layer_sizes: tuple
    activation: Activation = Activation.RELU
    seed: int = 0
    ema_decay: float = DEFAULT_EMA_DECAY

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ConfigError(f"layer_sizes needs at least two positive entries, got {self.layer_sizes}")
        if sizes[-1] < 2:
            raise ConfigError(f"the output layer needs at least two classes, got {sizes[-1]}")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ConfigError(f"ema_decay must lie in [0, 1), got {self.ema_decay}")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class NetState:
    """
    Live parameters, Adam moments and EMA shadow parameters

    Weight and bias lists are ordered input to output. The moment lists and
    EMA lists mirror their shapes.
    """

    config: NetConfig
    weights: list
    biases: list
    adam_m: list
    adam_v: list
    ema_weights: list
    ema_biases: list
    step: int = 0

    @property
    def params(self) -> list:
        return [*self.weights, *self.biases]

    @property
    def ema_params(self) -> list:
        return [*self.ema_weights, *self.ema_biases]


@dataclass
class _ForwardCache:
    inputs: list = field(default_factory=list)  # input to each layer
    pre_activations: list = field(default_factory=list)
    logits: np.ndarray = None


# ============================================================================
# INITIALIZATION SECTION
# ============================================================================


def init_state(config: NetConfig) -> NetState:
    """
    Create a fresh NetState with He-style uniform weights and zero biases

    The EMA copy starts equal to the live parameters and Adam moments at zero.
    """
    rng = np.random.default_rng(config.seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(config.layer_sizes[:-1], config.layer_sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))

    params = weights + biases
    return NetState(
        config=config,
        weights=weights,
        biases=biases,
        adam_m=[np.zeros_like(p) for p in params],
        adam_v=[np.zeros_like(p) for p in params],
        ema_weights=[w.copy() for w in weights],
        ema_biases=[b.copy() for b in biases],
    )


# ============================================================================
# FORWARD PASS SECTION
# ============================================================================


def _activate(activation: Activation, z):
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(activation: Activation, z, a):
    if activation is Activation.RELU:
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def _check_input(config: NetConfig, x_batch):
    x = np.asarray(x_batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != config.layer_sizes[0]:
        raise DimensionMismatchError(f"expected input of shape (N, {config.layer_sizes[0]}), got {x.shape}")
    return x


def _logits(config: NetConfig, weights, biases, x, cache: _ForwardCache = None):
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        if cache is not None:
            cache.inputs.append(h)
        z = h @ w + b
        if i == last:
            if cache is not None:
                cache.logits = z
            return z
        if cache is not None:
            cache.pre_activations.append(z)
        h = _activate(config.activation, z)
    return h


def forward(state: NetState, x_batch) -> np.ndarray:
    """Softmax class probabilities from the live parameters, one row per input"""
    x = _check_input(state.config, x_batch)
    return softmax(_logits(state.config, state.weights, state.biases, x), axis=1)


def ema_forward(state: NetState, x_batch) -> np.ndarray:
    """Softmax class probabilities from the EMA shadow parameters"""
    x = _check_input(state.config, x_batch)
    return softmax(_logits(state.config, state.ema_weights, state.ema_biases, x), axis=1)


# ============================================================================
# LOSS SECTION
# ============================================================================


def cross_entropy(pred, target) -> np.ndarray:
    """
    Per-sample soft-label cross-entropy -sum_j target_ij * log(pred_ij)

    Predictions are clamped at PROBABILITY_FLOOR before the log.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionMismatchError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return -np.sum(target * np.log(np.maximum(pred, PROBABILITY_FLOOR)), axis=1)


def per_sample_loss(state: NetState, x_batch, target_batch) -> np.ndarray:
    """Cross-entropy of the live network on each row, via log-softmax of the logits"""
    x = _check_input(state.config, x_batch)
    target = np.asarray(target_batch, dtype=np.float64)
    log_probs = log_softmax(_logits(state.config, state.weights, state.biases, x), axis=1)
    if log_probs.shape != target.shape:
        raise DimensionMismatchError(f"target shape {target.shape} does not match output {log_probs.shape}")
    return -np.sum(target * log_probs, axis=1)


# ============================================================================
# BACKPROPAGATION AND OPTIMIZER SECTION
# ============================================================================


def compute_gradients(state: NetState, x_batch, target_batch, per_sample_weights):
    """
    Exact gradients of sum_i w_i * l_i with respect to every parameter

    Returns:
        tuple: (loss, weight_grads, bias_grads)
    """
    config = state.config
    x = _check_input(config, x_batch)
    target = np.asarray(target_batch, dtype=np.float64)
    w = np.asarray(per_sample_weights, dtype=np.float64)
    if w.shape != (len(x),):
        raise DimensionMismatchError(f"expected {len(x)} per-sample weights, got shape {w.shape}")
    if np.any(w < 0.0):
        raise DimensionMismatchError("per-sample weights must be non-negative")

    cache = _ForwardCache()
    logits = _logits(config, state.weights, state.biases, x, cache)
    if target.shape != logits.shape:
        raise DimensionMismatchError(f"target shape {target.shape} does not match output {logits.shape}")
    log_probs = log_softmax(logits, axis=1)
    losses = -np.sum(target * log_probs, axis=1)
    loss = float(np.dot(w, losses))

    # d/dz of -sum_j t_j log softmax(z)_j = (sum_j t_j) softmax(z) - t
    probs = np.exp(log_probs)
    delta = w[:, None] * (target.sum(axis=1, keepdims=True) * probs - target)

    n_layers = len(state.weights)
    weight_grads = [None] * n_layers
    bias_grads = [None] * n_layers
    for i in reversed(range(n_layers)):
        weight_grads[i] = cache.inputs[i].T @ delta
        bias_grads[i] = delta.sum(axis=0)
        if i > 0:
            z = cache.pre_activations[i - 1]
            a = cache.inputs[i]
            delta = (delta @ state.weights[i].T) * _activation_grad(config.activation, z, a)
    return loss, weight_grads, bias_grads


def backward_and_step(state: NetState, x_batch, target_batch, per_sample_weights, learn_rate: float):
    """
    One Adam step on the weighted loss sum_i w_i * l_i, then an EMA update

    Weights that sum to one make the objective a weighted mean of the
    per-sample cross-entropies.

    Args:
        state: Current network state (not modified)
        x_batch: (N, input_dim) inputs
        target_batch: (N, C) target distributions
        per_sample_weights: (N,) non-negative weights
        learn_rate: Adam step size

    Returns:
        tuple: (new NetState, loss before the step)

    Raises:
        NonFiniteGradientError: if any gradient entry is NaN or infinite
    """
    loss, weight_grads, bias_grads = compute_gradients(state, x_batch, target_batch, per_sample_weights)
    grads = weight_grads + bias_grads
    if not all(np.all(np.isfinite(g)) for g in grads) or not np.isfinite(loss):
        raise NonFiniteGradientError(f"non-finite gradient at step {state.step + 1} (loss={loss})")

    step = state.step + 1
    bias1 = 1.0 - ADAM_BETA1**step
    bias2 = 1.0 - ADAM_BETA2**step

    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(state.params, grads, state.adam_m, state.adam_v):
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        new_params.append(p - learn_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPSILON))
        new_m.append(m)
        new_v.append(v)

    decay = state.config.ema_decay
    new_ema = [decay * e + (1.0 - decay) * p for e, p in zip(state.ema_params, new_params)]

    n_layers = len(state.weights)
    updated = replace(
        state,
        weights=new_params[:n_layers],
        biases=new_params[n_layers:],
        adam_m=new_m,
        adam_v=new_v,
        ema_weights=new_ema[:n_layers],
        ema_biases=new_ema[n_layers:],
        step=step,
    )
    return updated, loss


# ============================================================================
# CHECKPOINT SECTION
# ============================================================================


def save_checkpoint(state: NetState, path) -> Path:
    """
    Write parameters to a flat binary file

    Layout: magic 'MXCF', uint32 version, uint32 activation code,
    uint32 layer count, uint32 layer sizes, float64 EMA decay, then
    little-endian float64 live parameters (W1, b1, W2, b2, ...) followed by
    the EMA parameters in the same order.
    """
    path = Path(path)
    config = state.config
    sizes = config.layer_sizes
    header = CHECKPOINT_MAGIC + struct.pack(
        f"<III{len(sizes)}Id",
        CHECKPOINT_VERSION,
        _ACTIVATION_CODES[config.activation],
        len(sizes),
        *sizes,
        config.ema_decay,
    )

    def layer_order(weights, biases):
        for w, b in zip(weights, biases):
            yield w
            yield b

    payload = b"".join(
        np.ascontiguousarray(arr, dtype="<f8").tobytes()
        for arr in [*layer_order(state.weights, state.biases), *layer_order(state.ema_weights, state.ema_biases)]
    )
    path.write_bytes(header + payload)
    logger.info(f"💾 Checkpoint written to {path} ({len(header) + len(payload)} bytes)")
    return path


def load_checkpoint(path, seed: int = 0) -> NetState:
    """Read a checkpoint written by save_checkpoint; Adam moments restart at zero"""
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path} is not a checkpoint (bad magic {data[:4]!r})")

    try:
        offset = 4
        version, activation_code, n_sizes = struct.unpack_from("<III", data, offset)
        offset += 12
        if version != CHECKPOINT_VERSION:
            raise CheckpointFormatError(f"unsupported checkpoint version {version}")
        sizes = struct.unpack_from(f"<{n_sizes}I", data, offset)
        offset += 4 * n_sizes
        (ema_decay,) = struct.unpack_from("<d", data, offset)
        offset += 8
    except struct.error as e:
        raise CheckpointFormatError(f"truncated checkpoint header in {path}: {e}") from e

    codes = {code: act for act, code in _ACTIVATION_CODES.items()}
    if activation_code not in codes:
        raise CheckpointFormatError(f"unknown activation code {activation_code}")
    config = NetConfig(sizes, codes[activation_code], seed, ema_decay)

    values = np.frombuffer(data, dtype="<f8", offset=offset)
    shapes = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        shapes.extend([(fan_in, fan_out), (fan_out,)])
    expected = 2 * sum(int(np.prod(s)) for s in shapes)
    if values.size != expected:
        raise CheckpointFormatError(f"expected {expected} parameters in {path}, found {values.size}")

    arrays, cursor = [], 0
    for _ in range(2):
        for shape in shapes:
            count = int(np.prod(shape))
            arrays.append(values[cursor:cursor + count].astype(np.float64).reshape(shape))
            cursor += count
    live, ema = arrays[: len(shapes)], arrays[len(shapes):]

    weights, biases = live[0::2], live[1::2]
    params = weights + biases
    return NetState(
        config=config,
        weights=weights,
        biases=biases,
        adam_m=[np.zeros_like(p) for p in params],
        adam_v=[np.zeros_like(p) for p in params],
        ema_weights=ema[0::2],
        ema_biases=ema[1::2],
    )
