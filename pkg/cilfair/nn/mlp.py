# 重みは (fan_out, fan_in) 形式: z = a @ W.T + b
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import ContractViolation, NumericalError, ParameterError, RejectedInputError


@dataclass(frozen=True)
class DropoutSpec:
    rate: float
    rng_seed: int

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ParameterError(f"dropout rate must be in [0, 1), got {self.rate}")


@dataclass
class Mlp:
    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ParameterError("layer_sizes needs at least an input and an output size")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ParameterError("one weight matrix and one bias vector per layer are required")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[l + 1], self.layer_sizes[l])
            if w.shape != expected:
                raise ParameterError(f"weights[{l}] has shape {w.shape}, expected {expected}")
            if b.shape != (self.layer_sizes[l + 1],):
                raise ParameterError(f"biases[{l}] has shape {b.shape}, expected ({self.layer_sizes[l + 1]},)")

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], seed: int) -> 'Mlp':
        """Glorot-uniform weights from a seeded generator, zero biases."""
        if any(int(s) < 1 for s in layer_sizes):
            raise ParameterError(f"layer sizes must be positive, got {list(layer_sizes)}")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(tuple(layer_sizes), weights, biases)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def hidden_sizes(self) -> Tuple[int, ...]:
        return self.layer_sizes[1:-1]

    def copy(self) -> 'Mlp':
        return Mlp(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def logits(self, batch: np.ndarray) -> np.ndarray:
        return forward(self, batch)[0]

    def predict(self, batch: np.ndarray) -> np.ndarray:
        # 同点は最小のクラス番号（np.argmax は最初の最大値を返す）
        return np.argmax(self.logits(batch), axis=1)

    def same_weights(self, other: 'Mlp') -> bool:
        return (self.layer_sizes == other.layer_sizes
                and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
                and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases)))


@dataclass(frozen=True)
class Gradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def scaled(self, factor: float) -> 'Gradients':
        return Gradients([g * factor for g in self.weights], [g * factor for g in self.biases])

    def __add__(self, other: 'Gradients') -> 'Gradients':
        return Gradients([a + b for a, b in zip(self.weights, other.weights)],
                         [a + b for a, b in zip(self.biases, other.biases)])


@dataclass(frozen=True)
class ForwardCache:
    layer_sizes: Tuple[int, ...]
    inputs: np.ndarray
    pre_activations: List[np.ndarray]
    # ReLU 後、dropout 前の隠れ層出力
    hidden_activations: List[np.ndarray]
    # inputs fed to each layer (the batch, then masked hidden outputs)
    layer_inputs: List[np.ndarray]
    masks: List[Optional[np.ndarray]]

    @property
    def batch_size(self) -> int:
        return self.inputs.shape[0]


def _as_batch(batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise RejectedInputError(f"batch must be 2-dimensional, got shape {batch.shape}")
    return batch


def dropout_masks(hidden_sizes: Sequence[int], batch_size: int, dropout: DropoutSpec) -> List[np.ndarray]:
    """Inverted-dropout masks: kept units are scaled by 1/(1-rate)."""
    rng = np.random.default_rng(dropout.rng_seed)
    scale = 1.0 / (1.0 - dropout.rate)
    masks = []
    for size in hidden_sizes:
        keep = rng.random((batch_size, size)) >= dropout.rate
        masks.append(keep * scale)
    return masks


def forward(net: Mlp, batch: np.ndarray, dropout: Optional[DropoutSpec] = None) -> Tuple[np.ndarray, ForwardCache]:
    batch = _as_batch(batch)
    if batch.shape[1] != net.input_dim:
        raise RejectedInputError(f"batch has {batch.shape[1]} features, network expects {net.input_dim}")

    n_layers = len(net.weights)
    masks: List[Optional[np.ndarray]] = [None] * (n_layers - 1)
    if dropout is not None:
        masks = list(dropout_masks(net.hidden_sizes, batch.shape[0], dropout))

    pre_activations, hidden, layer_inputs = [], [], []
    a = batch
    for l in range(n_layers):
        layer_inputs.append(a)
        z = a @ net.weights[l].T + net.biases[l]
        pre_activations.append(z)
        if l < n_layers - 1:
            h = np.maximum(z, 0.0)
            hidden.append(h)
            a = h if masks[l] is None else h * masks[l]
        else:
            a = z

    if not np.all(np.isfinite(a)):
        raise NumericalError("forward pass produced non-finite logits")
    cache = ForwardCache(net.layer_sizes, batch, pre_activations, hidden, layer_inputs, masks)
    return a, cache


def backward(net: Mlp, cache: ForwardCache, grad_logits: np.ndarray) -> Gradients:
    if cache.layer_sizes != net.layer_sizes or len(cache.pre_activations) != len(net.weights):
        raise ContractViolation(
            f"cache was produced for layer sizes {cache.layer_sizes}, network has {net.layer_sizes}")
    grad_logits = np.asarray(grad_logits, dtype=np.float64)
    if grad_logits.shape != (cache.batch_size, net.num_classes):
        raise ContractViolation(
            f"grad_logits has shape {grad_logits.shape}, expected {(cache.batch_size, net.num_classes)}")

    n_layers = len(net.weights)
    grad_w: List[np.ndarray] = [np.empty(0)] * n_layers
    grad_b: List[np.ndarray] = [np.empty(0)] * n_layers
    delta = grad_logits
    for l in range(n_layers - 1, -1, -1):
        grad_w[l] = delta.T @ cache.layer_inputs[l]
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            upstream = delta @ net.weights[l]
            if cache.masks[l - 1] is not None:
                upstream = upstream * cache.masks[l - 1]
            delta = upstream * (cache.pre_activations[l - 1] > 0.0)
    return Gradients(grad_w, grad_b)


def sgd_step(net: Mlp, grads: Gradients, learning_rate: float) -> Mlp:
    if learning_rate < 0:
        raise ParameterError(f"learning rate must be non-negative, got {learning_rate}")
    for l, (w, g) in enumerate(zip(net.weights, grads.weights)):
        if w.shape != g.shape or net.biases[l].shape != grads.biases[l].shape:
            raise RejectedInputError(f"gradient shapes do not match layer {l}")
    weights = [w - learning_rate * g for w, g in zip(net.weights, grads.weights)]
    biases = [b - learning_rate * g for b, g in zip(net.biases, grads.biases)]
    return Mlp(net.layer_sizes, weights, biases)


def expand_output_layer(net: Mlp, new_total_classes: int, rng_seed: int) -> Mlp:
    """Grow the output layer; old rows and biases are kept bit-exactly."""
    old = net.num_classes
    if new_total_classes <= old:
        raise ParameterError(f"output layer can only grow: {old} -> {new_total_classes}")
    fan_in = net.layer_sizes[-2]
    bound = np.sqrt(6.0 / (fan_in + new_total_classes))
    rng = np.random.default_rng(rng_seed)
    new_rows = rng.uniform(-bound, bound, size=(new_total_classes - old, fan_in))

    weights = [w.copy() for w in net.weights]
    biases = [b.copy() for b in net.biases]
    weights[-1] = np.vstack([net.weights[-1], new_rows])
    biases[-1] = np.concatenate([net.biases[-1], np.zeros(new_total_classes - old)])
    return Mlp(net.layer_sizes[:-1] + (new_total_classes,), weights, biases)
