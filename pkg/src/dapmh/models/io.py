"""CSV ingestion for labelled datasets.

Expected layout: UTF-8, header row, one column named ``label`` holding 0/1,
every other column a numeric feature with ``.`` as the decimal separator.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import List, Tuple

import numpy as np

__all__ = ["load_labeled_csv"]


def load_labeled_csv(path) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """Read (features, labels, feature_names) from a labelled CSV file."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if "label" not in header:
            raise ValueError(f"{path}: no 'label' column in header {header}")
        label_col = header.index("label")
        feature_names = [h for i, h in enumerate(header) if i != label_col]
        xs: List[List[float]] = []
        ys: List[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric field ({exc})") from None
            label = values.pop(label_col)
            if label not in (0.0, 1.0):
                raise ValueError(f"{path}:{lineno}: label must be 0 or 1, got {label}")
            xs.append(values)
            ys.append(label)
    if not xs:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(xs), np.asarray(ys), feature_names
