from .dataset import (ExemplarMemory, IncrementalSchedule, LabeledDataset, Sample,
                      allocate_per_class, random_exemplar_sample, split_benchmark,
                      split_incremental, split_train_test, synth_generate)
from .corruption import imbalance_subsample, mask_features
from .csv_io import load_csv, save_csv

__all__ = [
    'ExemplarMemory', 'IncrementalSchedule', 'LabeledDataset', 'Sample', 'allocate_per_class',
    'random_exemplar_sample', 'split_benchmark', 'split_incremental', 'split_train_test', 'synth_generate',
    'imbalance_subsample', 'mask_features', 'load_csv', 'save_csv',
]
