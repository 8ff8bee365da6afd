from typing import Callable, Optional, Tuple

import numpy as np

from ..data.dataset import LabeledDataset
from ..nn.losses import cross_entropy
from ..nn.mlp import Gradients, Mlp, backward, forward, sgd_step
from ..nn.optim import iterate_minibatches, learning_rate_at
from ..utils import Stream, TrainConfig, derive_seed, setup_logger
from ..utils.errors import ParameterError, RejectedInputError

logger = setup_logger(__name__)

# (net, batch indices, epoch, batch number) -> (loss, gradients)
StepFunction = Callable[[Mlp, np.ndarray, int, int], Tuple[float, Gradients]]


def check_labels(ds: LabeledDataset, num_classes: int, what: str = "dataset") -> None:
    if len(ds) and (ds.labels.min() < 0 or ds.labels.max() >= num_classes):
        raise RejectedInputError(f"{what} labels must lie in [0, {num_classes})")


def run_epochs(net: Mlp, n: int, epochs: int, config: TrainConfig, shuffle_seed: int,
               step_fn: StepFunction, name: str) -> Mlp:
    """Minibatch SGD with a step-decay schedule and one seeded permutation per epoch."""
    rng = np.random.default_rng(shuffle_seed)
    for epoch in range(epochs):
        lr = learning_rate_at(epoch, epochs, config.learning_rate,
                              config.lr_decay_milestones, config.lr_decay_factor)
        losses = []
        for batch_no, idx in enumerate(iterate_minibatches(n, config.batch_size, rng)):
            loss, grads = step_fn(net, idx, epoch, batch_no)
            net = sgd_step(net, grads, lr)
            losses.append(loss)
        if losses:
            logger.debug(f"[{name}] epoch {epoch + 1}/{epochs} lr={lr:.4g} loss={np.mean(losses):.6f}")
    return net


class BaseTrainingPhase:
    def __init__(self, config: TrainConfig):
        self.config = config

    def process(self, ds: LabeledDataset, seed: Optional[int] = None,
                num_classes: Optional[int] = None) -> Mlp:
        if len(ds) == 0:
            raise ParameterError("base training needs a non-empty dataset")
        seed = self.config.seed if seed is None else seed
        num_classes = len(ds.class_set) if num_classes is None else num_classes
        check_labels(ds, num_classes)

        layer_sizes = (ds.feature_dim,) + tuple(self.config.hidden_sizes) + (num_classes,)
        net = Mlp.initialize(layer_sizes, derive_seed(seed, Stream.INIT))
        logger.info(f"Training base model {layer_sizes} on {len(ds)} samples "
                    f"for {self.config.epochs_base} epochs")

        features, labels = ds.features, ds.labels
        ce_temperature = self.config.ce_temperature

        def step(current: Mlp, idx: np.ndarray, epoch: int, batch_no: int):
            logits, cache = forward(current, features[idx])
            loss, grad = cross_entropy(logits, labels[idx], ce_temperature)
            return loss, backward(current, cache, grad)

        return run_epochs(net, len(ds), self.config.epochs_base, self.config,
                          derive_seed(seed, Stream.SHUFFLE_BASE), step, "base")


def train_base(ds: LabeledDataset, cfg: TrainConfig, seed: Optional[int] = None) -> Mlp:
    return BaseTrainingPhase(cfg).process(ds, seed)
