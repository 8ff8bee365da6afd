"""Controlled corruptions used by the root-cause probes."""
import math
from typing import Mapping

import numpy as np

from ..utils.errors import ParameterError
from .dataset import LabeledDataset


def masked_count(mask_ratio: float, feature_dim: int) -> int:
    """Number of coordinates zeroed per sample: alpha * dim rounded half up."""
    return int(math.floor(mask_ratio * feature_dim + 0.5))


def mask_features(ds: LabeledDataset, mask_ratio: float, seed: int) -> LabeledDataset:
    """Zero an independent random subset of coordinates in every sample."""
    if not 0.0 <= mask_ratio <= 1.0:
        raise ParameterError(f"mask ratio must be in [0, 1], got {mask_ratio}")
    k = masked_count(mask_ratio, ds.feature_dim)
    if k == 0 or len(ds) == 0:
        return ds
    rng = np.random.default_rng(seed)
    # 行ごとに独立なランダム順列
    masked = np.argsort(rng.random((len(ds), ds.feature_dim)), axis=1)[:, :k]
    features = ds.features.copy()
    np.put_along_axis(features, masked, 0.0, axis=1)
    return ds.with_features(features)


def imbalance_subsample(ds: LabeledDataset, per_class_counts: Mapping[int, int], seed: int) -> LabeledDataset:
    """Keep exactly the requested number of samples per class; a count of 0 drops the class."""
    rng = np.random.default_rng(seed)
    keep = []
    class_set = []
    for c in ds.class_set:
        members = ds.indices_of_class(c)
        count = int(per_class_counts.get(c, len(members)))
        if count < 0 or count > len(members):
            raise ParameterError(f"class {c}: requested {count} samples, {len(members)} available")
        if count == 0:
            continue
        class_set.append(c)
        keep.extend(rng.choice(members, size=count, replace=False).tolist())
    for c in per_class_counts:
        if c not in ds.class_set:
            raise ParameterError(f"class {c} is not part of the dataset")
    return ds.subset(np.sort(np.asarray(keep, dtype=np.int64)), class_set=class_set)
