from pathlib import Path

import numpy as np
import pytest

from fuzzydsr.services.artifacts import LocalArtifactStore
from fuzzydsr.services.features import add_gaussian_noise, engineer_features, stratified_split
from fuzzydsr.services.fuzzifier import FuzzyDataset, apply_fuzzifier, fit_fuzzifier
from fuzzydsr.services.fuzzy_ops import Semantics
from fuzzydsr.services.synthetic import DEFAULT_PLANTED_RULE, generate_synthetic
from fuzzydsr.services.tokens import LibraryMode, build_library
from fuzzydsr.services.transactions import RawTransaction, transactions_frame


@pytest.fixture
def lk_library():
    return build_library(LibraryMode.SINGLE, ["NBD", "OBD"], Semantics.LUKASIEWICZ)


@pytest.fixture
def tiny_library():
    # Five tokens: and_lk, or_lk, implies_lk, not, x0.
    return build_library(LibraryMode.SINGLE, ["x0"], Semantics.LUKASIEWICZ)


@pytest.fixture
def combined_library():
    return build_library(LibraryMode.COMBINED, ["NBD", "OBD"])


@pytest.fixture
def store(tmp_path: Path) -> LocalArtifactStore:
    return LocalArtifactStore(tmp_path / "artifacts")


@pytest.fixture
def small_fuzzy() -> FuzzyDataset:
    X = np.array(
        [
            [0.2, 1.0, 0.0],
            [0.8, 0.4, 1.0],
            [1.0, 0.6, 1.0],
            [0.4, 0.2, 0.0],
            [0.6, 0.8, 1.0],
            [0.2, 0.2, 0.0],
        ]
    )
    labels = np.array([0, 1, 1, 0, 1, 0], dtype=np.int8)
    return FuzzyDataset(columns=("x0", "x1", "flag"), X=X, labels=labels, binary_columns=frozenset({"flag"}))


def make_transaction(**overrides) -> RawTransaction:
    values = {
        "step": 1,
        "type": "PAYMENT",
        "amount": 100.0,
        "nameOrig": "C100",
        "oldbalanceOrg": 1000.0,
        "newbalanceOrig": 900.0,
        "nameDest": "M1",
        "oldbalanceDest": 0.0,
        "newbalanceDest": 0.0,
        "isFlaggedFraud": 0,
        "isFraud": 0,
    }
    values.update(overrides)
    return RawTransaction(**values)


@pytest.fixture
def transaction_factory():
    return make_transaction


@pytest.fixture
def transaction_rows():
    rows = [
        make_transaction(step=1, amount=10.0, nameDest="C7", type="TRANSFER", oldbalanceDest=50.0, newbalanceDest=60.0),
        make_transaction(step=2, amount=20.0, nameDest="C7", type="TRANSFER", isFraud=1),
        make_transaction(step=3, amount=30.0, nameDest="C7", type="CASH_OUT"),
        make_transaction(step=30, amount=5.0, nameDest="M2"),
    ]
    return transactions_frame(rows)


@pytest.fixture(scope="session")
def planted_frame():
    return generate_synthetic(10_000, seed=7, planted_rule=DEFAULT_PLANTED_RULE)


@pytest.fixture(scope="session")
def planted_splits(planted_frame):
    features = engineer_features(planted_frame)
    train_raw, test_raw = stratified_split(features, 0.7, seed=0)
    train_noisy = add_gaussian_noise(train_raw, 0.05, seed=0)
    model = fit_fuzzifier(train_noisy)
    return apply_fuzzifier(model, train_noisy), apply_fuzzifier(model, test_raw)
