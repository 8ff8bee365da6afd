import math
from typing import Iterator, Sequence

import numpy as np


def learning_rate_at(epoch: int, total_epochs: int, initial: float,
                     milestones: Sequence[float], factor: float) -> float:
    # 1エポック目は常に初期学習率
    passed = sum(1 for m in milestones if epoch >= max(1, math.floor(m * total_epochs)))
    return initial * factor ** passed


def iterate_minibatches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    if n == 0:
        return
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]
