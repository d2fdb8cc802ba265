from __future__ import annotations

import logging
from collections.abc import Iterable
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

PAYSIM_COLUMNS: tuple[str, ...] = (
    "step",
    "type",
    "amount",
    "nameOrig",
    "oldbalanceOrg",
    "newbalanceOrig",
    "nameDest",
    "oldbalanceDest",
    "newbalanceDest",
    "isFlaggedFraud",
    "isFraud",
)
TRANSACTION_TYPES: tuple[str, ...] = ("CASH_IN", "CASH_OUT", "DEBIT", "PAYMENT", "TRANSFER")
MONEY_COLUMNS = ("amount", "oldbalanceOrg", "newbalanceOrig", "oldbalanceDest", "newbalanceDest")
FLAG_COLUMNS = ("isFlaggedFraud", "isFraud")
LABEL_COLUMN = "isFraud"

# Problems listed in an error message before it is cut short.
MAX_REPORTED_LINES = 10


class DataError(ValueError):
    pass


class SchemaError(DataError):
    pass


class RowValidationError(DataError):
    def __init__(self, message: str, lines: list[int]):
        super().__init__(message)
        self.lines = lines


class RawTransaction(BaseModel):
    step: int = Field(ge=1)
    type: Literal["CASH_IN", "CASH_OUT", "DEBIT", "PAYMENT", "TRANSFER"]
    amount: float = Field(ge=0.0)
    nameOrig: str
    oldbalanceOrg: float = Field(ge=0.0)
    newbalanceOrig: float = Field(ge=0.0)
    nameDest: str
    oldbalanceDest: float = Field(ge=0.0)
    newbalanceDest: float = Field(ge=0.0)
    isFlaggedFraud: Literal[0, 1] = 0
    isFraud: Literal[0, 1] = 0


def transactions_frame(rows: Iterable[RawTransaction]) -> pd.DataFrame:
    records = [row.model_dump() for row in rows]
    frame = pd.DataFrame.from_records(records, columns=list(PAYSIM_COLUMNS))
    return _coerce_types(frame)


def _coerce_types(frame: pd.DataFrame) -> pd.DataFrame:
    typed = frame.loc[:, list(PAYSIM_COLUMNS)].copy()
    typed["step"] = typed["step"].astype(np.int64)
    for column in MONEY_COLUMNS:
        typed[column] = typed[column].astype(np.float64)
    for column in FLAG_COLUMNS:
        typed[column] = typed[column].astype(np.int8)
    for column in ("type", "nameOrig", "nameDest"):
        typed[column] = typed[column].astype(str)
    return typed.reset_index(drop=True)


def _line_numbers(mask: pd.Series) -> list[int]:
    # Header is line 1, so row 0 sits on line 2.
    return [int(i) + 2 for i in np.flatnonzero(mask.to_numpy())]


def _describe(lines: list[int]) -> str:
    shown = ", ".join(str(line) for line in lines[:MAX_REPORTED_LINES])
    more = f" (+{len(lines) - MAX_REPORTED_LINES} more)" if len(lines) > MAX_REPORTED_LINES else ""
    return f"line(s) {shown}{more}"


def validate_transactions(raw: pd.DataFrame, *, source: str = "<frame>") -> pd.DataFrame:
    """Check a string-typed PaySim frame and return it with numeric dtypes."""
    raw = raw.rename(columns=lambda c: str(c).strip())
    missing = [column for column in PAYSIM_COLUMNS if column not in raw.columns]
    if missing:
        raise SchemaError(f"{source}: missing column(s): {', '.join(missing)}")

    frame = raw.loc[:, list(PAYSIM_COLUMNS)].reset_index(drop=True)
    problems: list[str] = []
    bad_lines: set[int] = set()

    numeric: dict[str, pd.Series] = {}
    for column in ("step", *MONEY_COLUMNS, *FLAG_COLUMNS):
        parsed = pd.to_numeric(frame[column].astype(str).str.strip(), errors="coerce")
        unparseable = parsed.isna()
        if unparseable.any():
            lines = _line_numbers(unparseable)
            bad_lines.update(lines)
            problems.append(f"unparseable {column} on {_describe(lines)}")
        numeric[column] = parsed

    step = numeric["step"]
    bad_step = step.notna() & ((step < 1) | (step % 1 != 0))
    if bad_step.any():
        lines = _line_numbers(bad_step)
        bad_lines.update(lines)
        problems.append(f"step must be a positive integer on {_describe(lines)}")

    for column in MONEY_COLUMNS:
        negative = numeric[column].notna() & (numeric[column] < 0)
        if negative.any():
            lines = _line_numbers(negative)
            bad_lines.update(lines)
            problems.append(f"negative {column} on {_describe(lines)}")

    for column in FLAG_COLUMNS:
        not_binary = numeric[column].notna() & ~numeric[column].isin([0, 1])
        if not_binary.any():
            lines = _line_numbers(not_binary)
            bad_lines.update(lines)
            problems.append(f"{column} must be 0 or 1 on {_describe(lines)}")

    types = frame["type"].astype(str).str.strip()
    unknown = ~types.isin(TRANSACTION_TYPES)
    if unknown.any():
        lines = _line_numbers(unknown)
        bad_lines.update(lines)
        first = types[unknown].iloc[0]
        problems.append(f"unknown transaction type '{first}' on {_describe(lines)}")

    if problems:
        raise RowValidationError(f"{source}: " + "; ".join(problems), sorted(bad_lines))

    typed = frame.copy()
    typed["type"] = types
    for column, values in numeric.items():
        typed[column] = values
    return _coerce_types(typed)


def load_paysim_csv(path: Path | str) -> pd.DataFrame:
    """Read a PaySim export; one validated row per transaction, in file order."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"Input file not found: {path}")
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: could not parse CSV: {exc}") from exc

    frame = validate_transactions(raw, source=str(path))
    logger.info(
        "paysim_loaded path=%s rows=%s frauds=%s",
        path,
        len(frame),
        int(frame[LABEL_COLUMN].sum()),
    )
    return frame


def write_paysim_csv(frame: pd.DataFrame) -> str:
    return frame.loc[:, list(PAYSIM_COLUMNS)].to_csv(index=False, lineterminator="\n")
