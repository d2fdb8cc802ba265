import numpy as np
import pandas as pd
import pytest

from fuzzydsr.services.metrics import confusion, metrics
from fuzzydsr.services.synthetic import DEFAULT_PLANTED_RULE, LAST_STEP, generate_synthetic, planted_labels
from fuzzydsr.services.transactions import PAYSIM_COLUMNS, DataError, validate_transactions


def test_random_labels_follow_the_fraud_rate():
    frame = generate_synthetic(10_000, seed=0)
    assert 8 <= int(frame["isFraud"].sum()) <= 20
    assert frame.attrs["fraud_rate"] == pytest.approx(frame["isFraud"].mean())


def test_output_matches_the_paysim_schema():
    frame = generate_synthetic(2_000, seed=1)
    assert list(frame.columns) == list(PAYSIM_COLUMNS)
    validated = validate_transactions(frame.astype(str))
    assert len(validated) == 2_000
    assert frame["step"].min() >= 1
    assert frame["step"].max() <= LAST_STEP


def test_generation_is_deterministic():
    first = generate_synthetic(1_000, seed=3, planted_rule=DEFAULT_PLANTED_RULE)
    second = generate_synthetic(1_000, seed=3, planted_rule=DEFAULT_PLANTED_RULE)
    pd.testing.assert_frame_equal(first, second)
    assert not first.equals(generate_synthetic(1_000, seed=4, planted_rule=DEFAULT_PLANTED_RULE))


def test_planted_rule_explains_the_labels(planted_frame):
    labels = planted_frame["isFraud"].to_numpy()
    assert labels.sum() > 0
    scores = metrics(confusion(planted_labels(planted_frame, DEFAULT_PLANTED_RULE), labels))
    assert scores.f1 >= 0.98


def test_planted_labels_need_more_than_the_transfer_type(planted_frame):
    rule = planted_labels(planted_frame, DEFAULT_PLANTED_RULE)
    transfers = (planted_frame["type"] == "TRANSFER").to_numpy()
    assert rule[~transfers].sum() == 0
    # Mule transfers are fraud, one-off payouts are not.
    assert 0.3 <= rule[transfers].mean() <= 0.7
    payouts = planted_frame["nameDest"].str.startswith("C8").to_numpy()
    assert payouts.any()
    assert rule[payouts].sum() == 0


def test_flagged_rows_are_large_fraudulent_transfers(planted_frame):
    flagged = planted_frame[planted_frame["isFlaggedFraud"] == 1]
    assert (flagged["type"] == "TRANSFER").all()
    assert (flagged["isFraud"] == 1).all()


@pytest.mark.parametrize(
    ("kwargs", "match"),
    [
        ({"n": 0}, "positive"),
        ({"n": 10, "fraud_rate": 0.0}, "Fraud rate"),
        ({"n": 10, "label_noise": 1.0}, "Label noise"),
    ],
)
def test_bad_arguments_are_rejected(kwargs, match):
    with pytest.raises(DataError, match=match):
        generate_synthetic(**kwargs)


def test_zero_label_noise_reproduces_the_rule_exactly():
    frame = generate_synthetic(1_500, seed=2, planted_rule=DEFAULT_PLANTED_RULE, label_noise=0.0)
    np.testing.assert_array_equal(frame["isFraud"].to_numpy(), planted_labels(frame, DEFAULT_PLANTED_RULE))
