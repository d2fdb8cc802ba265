from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fuzzydsr.schemas import FuzzifierModel
from fuzzydsr.services.features import FeatureDataset
from fuzzydsr.services.fuzzy_ops import as_fuzzy_array
from fuzzydsr.services.transactions import LABEL_COLUMN, DataError

logger = logging.getLogger(__name__)

PERCENTILES = (20, 40, 60, 80)
FUZZY_LEVELS = np.array([0.2, 0.4, 0.6, 0.8, 1.0])


class FuzzifierError(DataError):
    pass


@dataclass(frozen=True)
class FuzzyDataset:
    columns: tuple[str, ...]
    X: NDArray[np.float64]
    labels: NDArray[np.int8]
    binary_columns: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        matrix = as_fuzzy_array(self.X)
        if matrix.ndim != 2 or matrix.shape[1] != len(self.columns):
            raise DataError(f"Matrix shape {matrix.shape} does not match {len(self.columns)} columns")
        if matrix.shape[0] != len(self.labels):
            raise DataError(f"{matrix.shape[0]} rows but {len(self.labels)} labels")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise DataError("Labels must be 0 or 1")
        object.__setattr__(self, "X", matrix)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def frauds(self) -> int:
        return int(self.labels.sum())

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError as exc:
            raise DataError(f"Column '{name}' is not in the dataset") from exc

    def select(self, names: Sequence[str]) -> FuzzyDataset:
        indices = [self.column_index(name) for name in names]
        return FuzzyDataset(
            columns=tuple(names),
            X=self.X[:, indices],
            labels=self.labels,
            binary_columns=self.binary_columns & set(names),
        )

    def take(self, indices: NDArray[np.int64]) -> FuzzyDataset:
        return FuzzyDataset(
            columns=self.columns,
            X=self.X[indices],
            labels=self.labels[indices],
            binary_columns=self.binary_columns,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.X, columns=list(self.columns))
        frame[LABEL_COLUMN] = self.labels
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, binary_columns: Sequence[str] = ()) -> FuzzyDataset:
        if LABEL_COLUMN not in frame.columns:
            raise DataError(f"Fuzzy dataset frame needs a '{LABEL_COLUMN}' column")
        features = frame.drop(columns=[LABEL_COLUMN])
        return cls(
            columns=tuple(features.columns),
            X=features.to_numpy(dtype=np.float64),
            labels=frame[LABEL_COLUMN].to_numpy(dtype=np.int8),
            binary_columns=frozenset(binary_columns),
        )

    @classmethod
    def from_csv(cls, path: Path | str, binary_columns: Sequence[str] = ()) -> FuzzyDataset:
        path = Path(path)
        if not path.exists():
            raise DataError(f"Fuzzy dataset not found: {path}")
        return cls.from_frame(pd.read_csv(path), binary_columns)


def _is_binary(values: NDArray[np.float64]) -> bool:
    return set(np.unique(values).tolist()) == {0.0, 1.0}


def fit_fuzzifier(train: FeatureDataset) -> FuzzifierModel:
    """Learn 20/40/60/80 nearest-rank percentiles per non-binary column."""
    if train.n_rows == 0:
        raise FuzzifierError("Cannot fit a fuzzifier on an empty dataset")

    cutpoints: dict[str, list[float]] = {}
    binary: list[str] = []
    for column in train.columns:
        values = train.frame[column].to_numpy(dtype=np.float64)
        if column in train.binary_columns or _is_binary(values):
            binary.append(column)
            continue
        # inverted_cdf is the nearest-rank definition: the value at rank ceil(p * n / 100).
        cutpoints[column] = np.percentile(values, PERCENTILES, method="inverted_cdf").tolist()

    logger.info("fuzzifier_fitted columns=%s binary=%s", len(cutpoints), len(binary))
    return FuzzifierModel(
        percentiles=list(PERCENTILES),
        cutpoints=cutpoints,
        binary_columns=binary,
        columns=list(train.columns),
    )


def fuzzify_values(values: NDArray[np.float64], cutpoints: Sequence[float]) -> NDArray[np.float64]:
    # Number of cutpoints strictly below v: v <= p20 -> 0 -> 0.2, v > p80 -> 4 -> 1.0
    bins = np.searchsorted(np.asarray(cutpoints, dtype=np.float64), values, side="left")
    return FUZZY_LEVELS[bins]


def apply_fuzzifier(model: FuzzifierModel, ds: FeatureDataset) -> FuzzyDataset:
    binary = set(model.binary_columns)
    unknown = [c for c in ds.columns if c not in model.cutpoints and c not in binary]
    if unknown:
        raise FuzzifierError(f"Fuzzifier has no cutpoints for column(s): {', '.join(unknown)}")

    matrix = np.empty((ds.n_rows, len(ds.columns)), dtype=np.float64)
    for j, column in enumerate(ds.columns):
        values = ds.frame[column].to_numpy(dtype=np.float64)
        if column in binary:
            if values.size and not np.isin(values, (0.0, 1.0)).all():
                raise FuzzifierError(f"Binary column '{column}' holds values other than 0 and 1")
            matrix[:, j] = values
        else:
            matrix[:, j] = fuzzify_values(values, model.cutpoints[column])

    return FuzzyDataset(
        columns=ds.columns,
        X=matrix,
        labels=ds.labels.copy(),
        binary_columns=frozenset(c for c in ds.columns if c in binary),
    )
