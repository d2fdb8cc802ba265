import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzydsr.services.constraints import (
    ConstraintConfig,
    ConstraintError,
    enforce_root_implication,
    mask_for_state,
    valid_token_mask,
)
from fuzzydsr.services.expression import is_complete, tree_from_traversal
from fuzzydsr.services.fuzzy_ops import Semantics
from fuzzydsr.services.tokens import Library, LibraryError, LibraryMode, Token, TokenKind, build_library

COMBINED_LIB = build_library(LibraryMode.COMBINED, ["A", "B", "C"])


def ids(lib, *names):
    return tuple(lib.by_name(name).id for name in names)


def allowed(lib, mask):
    return {lib[i].name for i in np.flatnonzero(mask)}


def test_short_budget_admits_only_unary_and_leaves(lk_library):
    mask = valid_token_mask((), lk_library, ConstraintConfig(max_length=2, min_length=1))
    assert allowed(lk_library, mask) == {"not", "NBD", "OBD"}


def test_exhausted_budget_forces_terminals(lk_library):
    cfg = ConstraintConfig(max_length=5, min_length=1)
    prefix = ids(lk_library, "and_lk", "and_lk")  # three open slots, five tokens max
    assert allowed(lk_library, valid_token_mask(prefix, lk_library, cfg)) == {"NBD", "OBD"}


def test_unconstrained_start_allows_everything(lk_library):
    mask = valid_token_mask((), lk_library, ConstraintConfig(max_length=32, min_length=1))
    assert mask.all()


def test_min_length_masks_terminals_while_operators_fit(lk_library):
    cfg = ConstraintConfig(max_length=32, min_length=4)
    assert allowed(lk_library, valid_token_mask((), lk_library, cfg)) == {"and_lk", "or_lk", "implies_lk", "not"}
    # length 2 + open 2 reaches the minimum, so terminals come back
    prefix = ids(lk_library, "not", "and_lk")
    assert valid_token_mask(prefix, lk_library, cfg).all()


def test_constrained_mode_puts_implication_first_and_nowhere_else(lk_library):
    cfg = ConstraintConfig(max_length=32, min_length=1, root_implication=True)
    assert allowed(lk_library, mask_for_state(0, 1, lk_library, cfg)) == {"implies_lk"}
    later = mask_for_state(1, 2, lk_library, cfg)
    assert "implies_lk" not in allowed(lk_library, later)
    assert "and_lk" in allowed(lk_library, later)


def test_complete_traversal_has_no_admissible_token(lk_library):
    mask = valid_token_mask(ids(lk_library, "NBD"), lk_library, ConstraintConfig())
    assert not mask.any()


def test_config_validation():
    with pytest.raises(ConstraintError):
        ConstraintConfig(max_length=0)
    with pytest.raises(ConstraintError):
        ConstraintConfig(max_length=4, min_length=5)
    with pytest.raises(ConstraintError):
        ConstraintConfig(max_length=2, min_length=1, root_implication=True)


@settings(max_examples=200)
@given(
    seed=st.integers(0, 10_000),
    max_length=st.integers(3, 20),
    min_length=st.integers(1, 6),
    constrained=st.booleans(),
)
def test_mask_respecting_walk_always_terminates_complete(seed, max_length, min_length, constrained):
    cfg = ConstraintConfig(max_length=max_length, min_length=min(min_length, max_length), root_implication=constrained)
    rng = np.random.default_rng(seed)
    prefix: list[int] = []
    while True:
        mask = valid_token_mask(prefix, COMBINED_LIB, cfg)
        if not mask.any():
            break
        prefix.append(int(rng.choice(np.flatnonzero(mask))))
    assert is_complete(prefix, COMBINED_LIB)
    assert len(prefix) <= max_length
    if constrained:
        assert COMBINED_LIB[prefix[0]].kind is TokenKind.SIMPL
        assert not any(COMBINED_LIB[t].kind is TokenKind.SIMPL for t in prefix[1:])


def test_root_repair_leaves_rooted_traversals_alone(lk_library):
    rng = np.random.default_rng(0)
    traversal = ids(lk_library, "implies_lk", "NBD", "OBD")
    assert enforce_root_implication(traversal, lk_library, rng) == traversal


def test_root_repair_inserts_and_completes(lk_library):
    rng = np.random.default_rng(0)
    repaired = enforce_root_implication(ids(lk_library, "not", "NBD"), lk_library, rng)
    assert repaired[:3] == ids(lk_library, "implies_lk", "not", "NBD")
    assert len(repaired) == 4
    assert lk_library[repaired[3]].kind is TokenKind.TERMINAL


def test_root_repair_swaps_existing_implication(lk_library):
    rng = np.random.default_rng(0)
    traversal = ids(lk_library, "and_lk", "NBD", "implies_lk", "NBD", "OBD")
    repaired = enforce_root_implication(traversal, lk_library, rng)
    assert repaired == ids(lk_library, "implies_lk", "NBD", "and_lk", "NBD", "OBD")


def test_root_repair_swaps_below_a_negation_root(lk_library):
    rng = np.random.default_rng(0)
    traversal = ids(lk_library, "not", "implies_lk", "NBD", "OBD")
    repaired = enforce_root_implication(traversal, lk_library, rng)
    assert repaired == ids(lk_library, "implies_lk", "not", "NBD", "OBD")
    assert is_complete(repaired, lk_library)


def test_root_repair_needs_an_implication_token():
    lib = Library(
        tokens=(Token(0, TokenKind.NEG, "not", 1), Token(1, TokenKind.TERMINAL, "f", 0, feature_index=0)),
        mode=LibraryMode.SINGLE,
        feature_names=("f",),
        semantics=Semantics.LUKASIEWICZ,
    )
    with pytest.raises(LibraryError):
        enforce_root_implication((0, 1), lib, np.random.default_rng(0))


@settings(max_examples=200)
@given(seed=st.integers(0, 10_000))
def test_root_repair_fuzz(seed):
    rng = np.random.default_rng(seed)
    cfg = ConstraintConfig(max_length=16, min_length=1)
    prefix: list[int] = []
    while (mask := valid_token_mask(prefix, COMBINED_LIB, cfg)).any():
        prefix.append(int(rng.choice(np.flatnonzero(mask))))
    repaired = enforce_root_implication(prefix, COMBINED_LIB, rng)
    assert is_complete(repaired, COMBINED_LIB)
    assert COMBINED_LIB[repaired[0]].kind is TokenKind.SIMPL
    tree_from_traversal(repaired, COMBINED_LIB)
