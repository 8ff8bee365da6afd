from .mlp import (DropoutSpec, ForwardCache, Gradients, Mlp, backward, expand_output_layer,
                  forward, sgd_step)
from .losses import (balanced_distillation_loss, cross_entropy, distillation_loss, softmax)
from .optim import iterate_minibatches, learning_rate_at
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    'DropoutSpec', 'ForwardCache', 'Gradients', 'Mlp', 'backward', 'expand_output_layer',
    'forward', 'sgd_step', 'balanced_distillation_loss', 'cross_entropy', 'distillation_loss',
    'softmax', 'iterate_minibatches', 'learning_rate_at', 'load_checkpoint', 'save_checkpoint',
]
