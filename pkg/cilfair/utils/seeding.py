# 乱数ストリームはマスターシードとカウンタ列から導出し、互いにずれない
from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    INIT = 1
    EXPAND = 2
    SHUFFLE_BASE = 3
    SHUFFLE_CIL = 4
    SHUFFLE_DROPOUT = 5
    SHUFFLE_ORDINARY = 6
    DROPOUT_MASK = 7
    EXEMPLAR = 8
    RANDOM_SELECTION = 9
    PROBE = 10


def derive_seed(master: int, *counters: int) -> int:
    entropy = [int(master) & 0xFFFFFFFFFFFFFFFF] + [int(c) & 0xFFFFFFFF for c in counters]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    # seed + k が有効なシードに収まるよう 63 ビット
    return (int(state[0]) << 31) ^ int(state[1])


def make_rng(master: int, *counters: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *counters))
