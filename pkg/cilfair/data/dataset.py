from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import ParameterError, RejectedInputError


@dataclass(frozen=True)
class Sample:
    id: int
    features: np.ndarray
    label: int


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    class_set: Tuple[int, ...]
    feature_dim: int

    def __post_init__(self):
        ids = np.array(self.ids, dtype=np.int64).reshape(-1)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        features = np.array(self.features, dtype=np.float64).reshape(len(ids), int(self.feature_dim))
        if labels.shape != ids.shape:
            raise RejectedInputError("ids and labels must have the same length")
        if len(np.unique(ids)) != len(ids):
            raise RejectedInputError("sample ids must be unique")
        class_set = tuple(int(c) for c in self.class_set)
        if len(set(class_set)) != len(class_set):
            raise RejectedInputError("class_set contains duplicates")
        unknown = set(np.unique(labels).tolist()) - set(class_set)
        if unknown:
            raise RejectedInputError(f"labels {sorted(unknown)} are not in the class set")
        object.__setattr__(self, 'ids', _frozen(ids))
        object.__setattr__(self, 'labels', _frozen(labels))
        object.__setattr__(self, 'features', _frozen(features))
        object.__setattr__(self, 'class_set', class_set)
        object.__setattr__(self, 'feature_dim', int(self.feature_dim))

    @classmethod
    def from_samples(cls, samples: Iterable[Sample], feature_dim: int,
                     class_set: Optional[Sequence[int]] = None) -> 'LabeledDataset':
        samples = list(samples)
        ids = [s.id for s in samples]
        labels = [s.label for s in samples]
        features = np.array([np.asarray(s.features, dtype=np.float64) for s in samples]).reshape(len(samples), feature_dim)
        if class_set is None:
            class_set = sorted(set(labels))
        return cls(np.array(ids, dtype=np.int64), features, np.array(labels, dtype=np.int64),
                   tuple(class_set), feature_dim)

    @classmethod
    def empty(cls, feature_dim: int, class_set: Sequence[int] = ()) -> 'LabeledDataset':
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, feature_dim)), np.zeros(0, dtype=np.int64),
                   tuple(class_set), feature_dim)

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def samples(self) -> List[Sample]:
        return [Sample(int(i), self.features[k], int(self.labels[k])) for k, i in enumerate(self.ids)]

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    @property
    def present_classes(self) -> Tuple[int, ...]:
        """Classes of ``class_set`` that have at least one sample, in class-set order."""
        present = set(np.unique(self.labels).tolist())
        return tuple(c for c in self.class_set if c in present)

    def class_counts(self) -> Dict[int, int]:
        return {c: int(np.count_nonzero(self.labels == c)) for c in self.class_set}

    def indices_of_class(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    def subset(self, indices: Sequence[int], class_set: Optional[Sequence[int]] = None) -> 'LabeledDataset':
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.ids[idx], self.features[idx], self.labels[idx],
                              self.class_set if class_set is None else tuple(class_set), self.feature_dim)

    def select_ids(self, ids: Iterable[int]) -> 'LabeledDataset':
        """Rows whose id is in ``ids``, keeping this dataset's order."""
        wanted = np.fromiter((int(i) for i in ids), dtype=np.int64)
        return self.subset(np.flatnonzero(np.isin(self.ids, wanted)))

    def select_classes(self, classes: Sequence[int]) -> 'LabeledDataset':
        classes = tuple(int(c) for c in classes)
        return self.subset(np.flatnonzero(np.isin(self.labels, classes)), class_set=classes)

    def with_features(self, features: np.ndarray) -> 'LabeledDataset':
        return LabeledDataset(self.ids, features, self.labels, self.class_set, self.feature_dim)

    def relabel(self, mapping: Mapping[int, int]) -> 'LabeledDataset':
        labels = np.array([mapping[int(c)] for c in self.labels], dtype=np.int64)
        class_set = tuple(mapping[c] for c in self.class_set)
        return LabeledDataset(self.ids, self.features, labels, class_set, self.feature_dim)

    def concat(self, other: 'LabeledDataset') -> 'LabeledDataset':
        if other.feature_dim != self.feature_dim:
            raise RejectedInputError(f"feature dims differ: {self.feature_dim} vs {other.feature_dim}")
        class_set = self.class_set + tuple(c for c in other.class_set if c not in self.class_set)
        return LabeledDataset(np.concatenate([self.ids, other.ids]),
                              np.vstack([self.features, other.features]),
                              np.concatenate([self.labels, other.labels]),
                              class_set, self.feature_dim)

    def equals(self, other: 'LabeledDataset') -> bool:
        return (self.feature_dim == other.feature_dim and self.class_set == other.class_set
                and np.array_equal(self.ids, other.ids) and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.features, other.features))


@dataclass(frozen=True)
class IncrementalSchedule:
    steps: int
    classes_per_step: int
    order_seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.classes_per_step < 1:
            raise ParameterError("steps and classes_per_step must be at least 1")

    @property
    def scheduled_classes(self) -> int:
        return self.steps * self.classes_per_step

    def validate(self, total_classes: int) -> None:
        if self.scheduled_classes > total_classes:
            raise ParameterError(
                f"schedule needs {self.scheduled_classes} classes, dataset has {total_classes}")

    def class_order(self, class_set: Sequence[int]) -> List[int]:
        self.validate(len(class_set))
        perm = np.random.default_rng(self.order_seed).permutation(len(class_set))
        return [int(class_set[i]) for i in perm[:self.scheduled_classes]]

    def step_classes(self, class_set: Sequence[int]) -> List[Tuple[int, ...]]:
        order = self.class_order(class_set)
        k = self.classes_per_step
        return [tuple(order[s * k:(s + 1) * k]) for s in range(self.steps)]


@dataclass(frozen=True)
class ExemplarMemory:
    capacity: int
    dataset: LabeledDataset

    def __post_init__(self):
        if len(self.dataset) > self.capacity:
            raise ParameterError(f"memory holds {len(self.dataset)} samples, capacity is {self.capacity}")

    @property
    def samples(self) -> List[Sample]:
        return self.dataset.samples

    def __len__(self) -> int:
        return len(self.dataset)


def synth_generate(classes: int, per_class: int, feature_dim: int, cluster_spread: float,
                   seed: int, center_scale: float = 3.0) -> LabeledDataset:
    """Isotropic Gaussian blobs around seeded centers; ids run 0..N-1 in class order."""
    if classes < 1 or per_class < 1 or feature_dim < 1:
        raise ParameterError("classes, per_class and feature_dim must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((classes, feature_dim)) * center_scale
    noise = rng.standard_normal((classes, per_class, feature_dim))
    features = (centers[:, None, :] + cluster_spread * noise).reshape(classes * per_class, feature_dim)
    labels = np.repeat(np.arange(classes), per_class)
    return LabeledDataset(np.arange(classes * per_class), features, labels, tuple(range(classes)), feature_dim)


def split_train_test(ds: LabeledDataset, test_per_class: int, seed: int) -> Tuple[LabeledDataset, LabeledDataset]:
    """Hold out ``test_per_class`` random samples of every class."""
    rng = np.random.default_rng(seed)
    test_idx = []
    for c in ds.class_set:
        members = ds.indices_of_class(c)
        if test_per_class > len(members):
            raise ParameterError(f"class {c} has {len(members)} samples, cannot hold out {test_per_class}")
        test_idx.extend(rng.choice(members, size=test_per_class, replace=False).tolist())
    is_test = np.zeros(len(ds), dtype=bool)
    is_test[test_idx] = True
    return ds.subset(np.flatnonzero(~is_test)), ds.subset(np.flatnonzero(is_test))


def split_incremental(ds: LabeledDataset, sched: IncrementalSchedule, relabel: bool = False) -> List[LabeledDataset]:
    """One dataset per step; ``relabel`` renumbers classes 0..n-1 in schedule order."""
    sched.validate(len(ds.class_set))
    step_classes = sched.step_classes(ds.class_set)
    parts = [ds.select_classes(classes) for classes in step_classes]
    if relabel:
        mapping = {c: i for i, c in enumerate(c for classes in step_classes for c in classes)}
        parts = [part.relabel(mapping) for part in parts]
    return parts


def split_benchmark(train: LabeledDataset, test: LabeledDataset,
                    sched: IncrementalSchedule) -> Tuple[List[LabeledDataset], List[LabeledDataset]]:
    # テストデータも学習データと同じクラス順・同じ番号付けで分割する
    missing = set(train.class_set) ^ set(test.class_set)
    if missing:
        raise ParameterError(f"train and test class sets differ on {sorted(missing)}")
    aligned = test.select_classes(train.class_set)
    return split_incremental(train, sched, relabel=True), split_incremental(aligned, sched, relabel=True)


def allocate_per_class(capacity: int, available: Sequence[int]) -> List[int]:
    """Equal split of ``capacity``; the remainder and any surplus go to the first classes."""
    n = len(available)
    alloc = [0] * n
    remaining = min(capacity, sum(available))
    open_classes = [i for i in range(n) if available[i] > 0]
    while remaining > 0 and open_classes:
        share, extra = divmod(remaining, len(open_classes))
        still_open = []
        for rank, i in enumerate(open_classes):
            want = share + (1 if rank < extra else 0)
            take = min(want, available[i] - alloc[i])
            alloc[i] += take
            remaining -= take
            if alloc[i] < available[i]:
                still_open.append(i)
        open_classes = still_open
    return alloc


def random_exemplar_sample(ds: LabeledDataset, capacity: int, seed: int) -> ExemplarMemory:
    classes = ds.present_classes
    if capacity < len(classes):
        raise ParameterError(f"capacity {capacity} is smaller than the {len(classes)} classes to keep")
    rng = np.random.default_rng(seed)
    members = [ds.indices_of_class(c) for c in classes]
    alloc = allocate_per_class(capacity, [len(m) for m in members])
    chosen = []
    for idx, size in zip(members, alloc):
        chosen.extend(rng.choice(idx, size=size, replace=False).tolist())
    return ExemplarMemory(capacity, ds.subset(chosen, class_set=classes))
