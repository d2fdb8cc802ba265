"""PaySim-shaped synthetic transactions for tests and demos.

About half of the transfers are large and land on a small pool of mule
accounts, the way PaySim fraud moves money; the other transfers are small
one-off payouts to fresh customer accounts. Payments go to merchants and
everything else to ordinary customers. Under the default planted rule only the
mule transfers are fraud, so ``type_TRANSFER`` alone does not explain the labels.
"""

from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from fuzzydsr.services.expression import ExprTree, evaluate_batch, parse, render
from fuzzydsr.services.features import engineer_features
from fuzzydsr.services.fuzzifier import apply_fuzzifier, fit_fuzzifier
from fuzzydsr.services.tokens import LibraryMode, build_library
from fuzzydsr.services.transactions import PAYSIM_COLUMNS, TRANSACTION_TYPES, DataError

logger = logging.getLogger(__name__)

# PaySim steps run from 1 to 743 within one 744-hour month.
LAST_STEP = 743
DEFAULT_FRAUD_RATE = 0.0013
DEFAULT_LABEL_NOISE = 0.02
DEFAULT_PLANTED_RULE = "not(implies_lk(type_TRANSFER, not(maxDest7)))"
RULE_CUTOFF = 0.5
FLAG_AMOUNT = 200_000.0

TYPE_SHARES = {"CASH_IN": 0.22, "CASH_OUT": 0.35, "DEBIT": 0.01, "PAYMENT": 0.34, "TRANSFER": 0.08}
AMOUNT_LOG_MEAN = {"CASH_IN": 11.0, "CASH_OUT": 11.2, "DEBIT": 8.5, "PAYMENT": 9.0, "TRANSFER": 13.5}
AMOUNT_LOG_SIGMA = {"CASH_IN": 1.0, "CASH_OUT": 1.0, "DEBIT": 0.8, "PAYMENT": 1.0, "TRANSFER": 0.6}
MULE_SHARE = 0.5
PAYOUT_LOG_MEAN = 7.5
PAYOUT_LOG_SIGMA = 0.5


def _draw_transactions(n: int, rng: np.random.Generator) -> pd.DataFrame:
    shares = np.array([TYPE_SHARES[t] for t in TRANSACTION_TYPES])
    types = rng.choice(np.array(TRANSACTION_TYPES), size=n, p=shares / shares.sum())
    steps = 1 + (np.arange(n, dtype=np.int64) * LAST_STEP) // n

    is_transfer = types == "TRANSFER"
    to_mule = is_transfer & (rng.random(n) < MULE_SHARE)
    payout = is_transfer & ~to_mule

    log_mean = np.where(payout, PAYOUT_LOG_MEAN, np.array([AMOUNT_LOG_MEAN[t] for t in types]))
    log_sigma = np.where(payout, PAYOUT_LOG_SIGMA, np.array([AMOUNT_LOG_SIGMA[t] for t in types]))
    amounts = np.round(np.exp(rng.normal(log_mean, log_sigma)), 2)

    customers = max(n // 8, 1)
    merchants = max(n // 4, 1)
    mules = max(n // 200, 1)
    is_payment = types == "PAYMENT"
    merchant_ids = rng.integers(0, merchants, size=n).astype(str)
    mule_ids = rng.integers(0, mules, size=n).astype(str)
    customer_ids = rng.integers(0, customers, size=n).astype(str)
    # Payout recipients are keyed by row, so each receives exactly one transaction.
    payout_ids = np.arange(n).astype(str)
    name_dest = np.select(
        [is_payment, to_mule, payout],
        [np.char.add("M", merchant_ids), np.char.add("C9", mule_ids), np.char.add("C8", payout_ids)],
        default=np.char.add("C1", customer_ids),
    )
    name_orig = np.char.add("C", rng.integers(10**8, 10**9, size=n).astype(str))

    old_org = np.round(np.exp(rng.normal(10.0, 1.5, size=n)), 2)
    new_org = np.where(types == "CASH_IN", old_org + amounts, np.maximum(old_org - amounts, 0.0))
    old_dest = np.where(is_payment, 0.0, np.round(np.exp(rng.normal(11.0, 1.5, size=n)), 2))
    new_dest = np.where(is_payment, 0.0, old_dest + amounts)

    return pd.DataFrame(
        {
            "step": steps,
            "type": types.astype(str),
            "amount": amounts,
            "nameOrig": name_orig.astype(str),
            "oldbalanceOrg": old_org,
            "newbalanceOrig": np.round(new_org, 2),
            "nameDest": name_dest.astype(str),
            "oldbalanceDest": old_dest,
            "newbalanceDest": np.round(new_dest, 2),
            "isFlaggedFraud": np.zeros(n, dtype=np.int8),
            "isFraud": np.zeros(n, dtype=np.int8),
        },
        columns=list(PAYSIM_COLUMNS),
    )


def planted_labels(frame: pd.DataFrame, rule: ExprTree | str) -> np.ndarray:
    """Label rows where the rule, evaluated on the fuzzified features, reaches the cutoff."""
    features = engineer_features(frame)
    fuzzy = apply_fuzzifier(fit_fuzzifier(features), features)
    lib = build_library(LibraryMode.COMBINED, fuzzy.columns)
    tree = parse(rule if isinstance(rule, str) else render(rule), lib)
    return (evaluate_batch(tree, fuzzy) >= RULE_CUTOFF).astype(np.int8)


def generate_synthetic(
    n: int,
    fraud_rate: float = DEFAULT_FRAUD_RATE,
    seed: int = 0,
    planted_rule: ExprTree | str | None = None,
    *,
    label_noise: float = DEFAULT_LABEL_NOISE,
) -> pd.DataFrame:
    if n <= 0:
        raise DataError(f"Synthetic size must be positive, got {n}")
    if not 0.0 < fraud_rate < 1.0:
        raise DataError(f"Fraud rate must lie in (0, 1), got {fraud_rate}")
    if not 0.0 <= label_noise < 1.0:
        raise DataError(f"Label noise must lie in [0, 1), got {label_noise}")

    rng = np.random.default_rng(seed)
    frame = _draw_transactions(n, rng)

    if planted_rule is None:
        labels = (rng.random(n) < fraud_rate).astype(np.int8)
    else:
        labels = planted_labels(frame, planted_rule)
        flips = int(round(label_noise * int(labels.sum())))
        if flips:
            flipped = rng.choice(n, size=flips, replace=False)
            labels[flipped] ^= 1

    frame["isFraud"] = labels
    frame["isFlaggedFraud"] = (
        (labels == 1) & (frame["type"].to_numpy() == "TRANSFER") & (frame["amount"].to_numpy() > FLAG_AMOUNT)
    ).astype(np.int8)

    realized = float(labels.mean())
    frame.attrs["fraud_rate"] = realized
    logger.info(
        "synthetic_generated rows=%s frauds=%s fraud_rate=%.5f planted=%s",
        n,
        int(labels.sum()),
        realized,
        planted_rule is not None,
    )
    return frame
