from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Protocol, TypeVar

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from sklearn.model_selection import train_test_split

from fuzzydsr.services.transactions import LABEL_COLUMN, TRANSACTION_TYPES, DataError

logger = logging.getLogger(__name__)

BALANCE_COLUMNS = ("oldbalanceOrg", "newbalanceOrig", "oldbalanceDest", "newbalanceDest")
ROLLING_WINDOWS = (3, 7)
HOURS_PER_DAY = 24
DAYS_PER_MONTH = 31
DAYS_PER_WEEK = 7
WORKDAYS_PER_WEEK = 5

TYPE_COLUMNS = tuple(f"type_{name}" for name in TRANSACTION_TYPES)
ROLLING_COLUMNS = tuple(
    f"{stat}Dest{window}" for stat in ("avg", "max") for window in ROLLING_WINDOWS
)
FEATURE_COLUMNS: tuple[str, ...] = (
    "amount",
    "derived_newbalanceDest",
    "derived_oldbalanceOrig",
    "hour_of_day",
    "day",
    "month",
    "is_workday",
    *TYPE_COLUMNS,
    *ROLLING_COLUMNS,
)
BINARY_FEATURES = frozenset({"is_workday", *TYPE_COLUMNS})
# Constant over one month of data, so it never reaches the search library.
CONSTANT_FEATURES = frozenset({"month"})


class SplitError(DataError):
    pass


@dataclass(frozen=True)
class FeatureDataset:
    frame: pd.DataFrame
    labels: NDArray[np.int8]
    binary_columns: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if len(self.frame) != len(self.labels):
            raise DataError(f"{len(self.frame)} feature rows but {len(self.labels)} labels")
        leaked = [column for column in BALANCE_COLUMNS if column in self.frame.columns]
        if leaked:
            raise DataError(f"Raw balance columns must not be features: {', '.join(leaked)}")
        unknown = self.binary_columns - set(self.frame.columns)
        if unknown:
            raise DataError(f"Binary columns not in the frame: {sorted(unknown)}")

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(self.frame.columns)

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    @property
    def frauds(self) -> int:
        return int(self.labels.sum())

    def take(self, indices: NDArray[np.int64]) -> FeatureDataset:
        return FeatureDataset(
            frame=self.frame.iloc[indices].reset_index(drop=True),
            labels=self.labels[indices],
            binary_columns=self.binary_columns,
        )

    def to_frame(self) -> pd.DataFrame:
        out = self.frame.copy()
        out[LABEL_COLUMN] = self.labels
        return out


def default_terminals(columns: Sequence[str]) -> list[str]:
    return [column for column in columns if column not in CONSTANT_FEATURES]


def _workday_flags(day_index: NDArray[np.int64]) -> NDArray[np.float64]:
    """Mark the five busiest weekdays (by transaction count) as workdays."""
    weekday = day_index % DAYS_PER_WEEK
    counts = np.bincount(weekday, minlength=DAYS_PER_WEEK)
    ranked = sorted(range(DAYS_PER_WEEK), key=lambda d: (-counts[d], d))
    workdays = np.array(ranked[:WORKDAYS_PER_WEEK])
    return np.isin(weekday, workdays).astype(np.float64)


def _rolling_recipient_stats(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean and max of the amount over the last 3 and 7 transactions per recipient, current row included."""
    order = np.lexsort((np.arange(len(frame)), frame["step"].to_numpy()))
    ordered = frame.iloc[order]
    grouped = ordered.groupby("nameDest", sort=False)["amount"]

    stats = pd.DataFrame(index=frame.index)
    for window in ROLLING_WINDOWS:
        rolling = grouped.rolling(window, min_periods=1)
        stats[f"avgDest{window}"] = rolling.mean().reset_index(level=0, drop=True)
        stats[f"maxDest{window}"] = rolling.max().reset_index(level=0, drop=True)
    return stats.loc[:, list(ROLLING_COLUMNS)]


def engineer_features(rows: pd.DataFrame) -> FeatureDataset:
    if rows.empty:
        raise DataError("Cannot engineer features from an empty frame")
    frame = rows.reset_index(drop=True)
    step = frame["step"].to_numpy(dtype=np.int64)
    day_index = step // HOURS_PER_DAY

    features = pd.DataFrame(index=frame.index)
    features["amount"] = frame["amount"].astype(np.float64)
    features["derived_newbalanceDest"] = frame["oldbalanceDest"] + frame["amount"]
    features["derived_oldbalanceOrig"] = frame["newbalanceOrig"] + frame["amount"]
    features["hour_of_day"] = (step % HOURS_PER_DAY).astype(np.float64)
    features["day"] = (day_index % DAYS_PER_MONTH).astype(np.float64)
    features["month"] = (day_index // DAYS_PER_MONTH).astype(np.float64)
    features["is_workday"] = _workday_flags(day_index)
    for name, column in zip(TRANSACTION_TYPES, TYPE_COLUMNS, strict=True):
        features[column] = (frame["type"] == name).astype(np.float64)
    features = features.join(_rolling_recipient_stats(frame))

    labels = frame[LABEL_COLUMN].to_numpy(dtype=np.int8)
    logger.info("features_engineered rows=%s columns=%s", len(features), len(features.columns))
    return FeatureDataset(frame=features.loc[:, list(FEATURE_COLUMNS)], labels=labels, binary_columns=BINARY_FEATURES)


def add_gaussian_noise(ds: FeatureDataset, level: float = 0.05, seed: int = 0) -> FeatureDataset:
    """Add N(0, (level * column std)^2) to every non-binary column; labels and binary columns stay as they are."""
    if level < 0:
        raise DataError(f"Noise level must be non-negative, got {level}")
    noisy = ds.frame.copy()
    if level == 0:
        return FeatureDataset(frame=noisy, labels=ds.labels.copy(), binary_columns=ds.binary_columns)

    rng = np.random.default_rng(seed)
    for column in noisy.columns:
        if column in ds.binary_columns:
            continue
        values = noisy[column].to_numpy(dtype=np.float64)
        std = float(values.std())
        if std == 0.0:
            continue
        perturbed = values + rng.normal(0.0, level * std, size=values.shape)
        if values.min() >= 0.0:
            perturbed = np.maximum(perturbed, 0.0)
        noisy[column] = perturbed

    logger.info("noise_added level=%s seed=%s rows=%s", level, seed, len(noisy))
    return FeatureDataset(frame=noisy, labels=ds.labels.copy(), binary_columns=ds.binary_columns)


class _Splittable(Protocol):
    labels: NDArray[np.int8]

    def take(self, indices: NDArray[np.int64]): ...


D = TypeVar("D", bound=_Splittable)


def stratified_split(ds: D, ratio: float = 0.7, seed: int = 0) -> tuple[D, D]:
    """Stratified ``ratio`` split seeded by ``seed``; row order inside each part is preserved."""
    if not 0.0 < ratio < 1.0:
        raise SplitError(f"Split ratio must lie in (0, 1), got {ratio}")

    labels = np.asarray(ds.labels)
    for label in (0, 1):
        if not np.any(labels == label):
            raise SplitError(f"Stratified split needs both classes; class {label} is absent")
    try:
        train_idx, test_idx = train_test_split(
            np.arange(labels.size), train_size=ratio, stratify=labels, random_state=seed
        )
    except ValueError as exc:
        raise SplitError(f"Cannot split {labels.size} rows at ratio {ratio}: {exc}") from exc
    return ds.take(np.sort(train_idx)), ds.take(np.sort(test_idx))
