"""CSV dataset files: header ``id,label,f0,...,f{d-1}``, one sample per line."""
import csv
import os
from typing import List

import numpy as np

from ..utils.errors import ParseError
from ..utils.logger import setup_logger
from .dataset import LabeledDataset

logger = setup_logger(__name__)


def _parse_header(row: List[str], path: str) -> int:
    if len(row) < 2 or row[0] != "id" or row[1] != "label":
        raise ParseError("header must start with 'id,label'", line=1, path=path)
    for k, name in enumerate(row[2:]):
        if name != f"f{k}":
            raise ParseError(f"expected column 'f{k}', found {name!r}", line=1, path=path)
    return len(row) - 2


def load_csv(path: str) -> LabeledDataset:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Dataset file not found: {path}")

    ids, labels, rows = [], [], []
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ParseError("file is empty", line=1, path=path)
        dim = _parse_header(header, path)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 2:
                raise ParseError(f"expected {dim + 2} columns, found {len(row)}", line=line_no, path=path)
            try:
                ids.append(int(row[0]))
                labels.append(int(row[1]))
            except ValueError:
                raise ParseError("id and label must be integers", line=line_no, path=path)
            try:
                values = [float(v) for v in row[2:]]
            except ValueError:
                raise ParseError("non-numeric feature value", line=line_no, path=path)
            if not all(np.isfinite(values)):
                raise ParseError("feature values must be finite", line=line_no, path=path)
            rows.append(values)

    if len(set(ids)) != len(ids):
        raise ParseError("duplicate sample id", path=path)
    features = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    ds = LabeledDataset(np.array(ids, dtype=np.int64), features, np.array(labels, dtype=np.int64),
                        tuple(sorted(set(labels))), dim)
    logger.debug(f"Loaded {len(ds)} samples with {dim} features from {path}")
    return ds


def save_csv(ds: LabeledDataset, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(["id", "label"] + [f"f{k}" for k in range(ds.feature_dim)])
        for i, label, features in zip(ds.ids, ds.labels, ds.features):
            # repr は float を正確に復元できる最短表現
            writer.writerow([int(i), int(label)] + [repr(float(v)) for v in features])
    logger.debug(f"Saved {len(ds)} samples to {path}")
