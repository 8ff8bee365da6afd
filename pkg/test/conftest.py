import os

# no rotating file log during tests; must be set before cilfair modules create their loggers
os.environ.setdefault("CILFAIR_LOG_DIR", "")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from cilfair.data import split_train_test, synth_generate  # noqa: E402
from cilfair.nn import Mlp  # noqa: E402
from cilfair.utils import TrainConfig  # noqa: E402

INPUT_DIR = os.path.join(os.path.dirname(__file__), "input")


@pytest.fixture
def input_dir():
    return INPUT_DIR


@pytest.fixture
def small_cfg():
    return TrainConfig(
        hidden_sizes=(12, 8),
        epochs_base=5,
        epochs_cil=4,
        epochs_dropout_phase=3,
        epochs_ordinary_phase=3,
        batch_size=16,
        learning_rate=0.05,
        max_resample_attempts=3,
        seed=3,
    )


@pytest.fixture
def blobs():
    """6 well-separated classes, 40 samples each, 5 features."""
    return synth_generate(classes=6, per_class=40, feature_dim=5, cluster_spread=0.5, seed=11)


@pytest.fixture
def blob_split(blobs):
    return split_train_test(blobs, test_per_class=10, seed=2)


@pytest.fixture
def net():
    return Mlp.initialize((5, 7, 6, 4), seed=42)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
