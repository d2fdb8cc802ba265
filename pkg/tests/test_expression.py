import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzydsr.services.expression import (
    DanglingTokens,
    ExpressionParseError,
    FeatureIndexError,
    IncompleteTraversal,
    complexity,
    evaluate,
    evaluate_batch,
    is_complete,
    open_slots,
    parse,
    pretty,
    render,
    traversal_from_tree,
    tree_from_traversal,
)
from fuzzydsr.services.fuzzy_ops import Semantics
from fuzzydsr.services.tokens import LibraryError, LibraryMode, TokenKind, build_library

PRODUCT_LIB = build_library(LibraryMode.SINGLE, ["NBD", "OBD"], Semantics.PRODUCT)
COMBINED_LIB = build_library(LibraryMode.COMBINED, ["a", "b", "c"])
NESTED_RULE = "and_pr(NBD, and_pr(not(or_pr(OBD, OBD)), or_pr(OBD, OBD)))"


def ids(lib, *names):
    return tuple(lib.by_name(name).id for name in names)


def test_single_library_layout(lk_library):
    assert [t.name for t in lk_library.tokens] == ["and_lk", "or_lk", "implies_lk", "not", "NBD", "OBD"]
    assert lk_library.arities.tolist() == [2, 2, 2, 1, 0, 0]
    assert lk_library.by_name("implies_lk").complexity_weight == 2


def test_combined_library_has_nine_binary_operators_plus_negation():
    lib = build_library(LibraryMode.COMBINED, ["NBD"])
    assert len(lib) == 11
    assert sum(t.arity == 2 for t in lib.tokens) == 9
    assert [t.name for t in lib.tokens[:3]] == ["and_gd", "or_gd", "implies_gd"]
    assert lib.tokens[-1].kind is TokenKind.TERMINAL


@pytest.mark.parametrize(
    ("kwargs", "match"),
    [
        ({"mode": LibraryMode.SINGLE, "feature_names": [], "semantics": Semantics.GOEDEL}, "at least one feature"),
        ({"mode": LibraryMode.SINGLE, "feature_names": ["x"]}, "need a semantics"),
        ({"mode": LibraryMode.SINGLE, "feature_names": ["x-y"], "semantics": Semantics.GOEDEL}, "must match"),
        ({"mode": LibraryMode.SINGLE, "feature_names": ["not"], "semantics": Semantics.GOEDEL}, "collides"),
        ({"mode": LibraryMode.SINGLE, "feature_names": ["x", "x"], "semantics": Semantics.GOEDEL}, "unique"),
    ],
)
def test_build_library_rejects_bad_input(kwargs, match):
    with pytest.raises(LibraryError, match=match):
        build_library(**kwargs)


def test_constants_are_opt_in_leaves():
    lib = build_library(LibraryMode.SINGLE, ["x"], Semantics.LUKASIEWICZ, constants=[0.5])
    const = lib.tokens[-1]
    assert const.kind is TokenKind.CONSTANT and const.name == "const_0_5"
    tree = parse("and_lk(x, const_0_5)", lib)
    assert evaluate(tree, [1.0]) == pytest.approx(0.5)
    assert complexity(tree) == 3


def test_small_trees_from_traversals(lk_library):
    tree = tree_from_traversal(ids(lk_library, "not", "NBD"), lk_library)
    assert render(tree) == "not(NBD)"

    tree = tree_from_traversal(ids(lk_library, "and_lk", "NBD", "not", "OBD"), lk_library)
    assert render(tree) == "and_lk(NBD, not(OBD))"
    assert pretty(tree) == "(NBD ⊗_lk ¬OBD)"


def test_incomplete_and_dangling_traversals(lk_library):
    with pytest.raises(IncompleteTraversal):
        tree_from_traversal(ids(lk_library, "and_lk", "NBD"), lk_library)
    with pytest.raises(DanglingTokens):
        tree_from_traversal(ids(lk_library, "NBD", "OBD"), lk_library)
    assert open_slots((), lk_library) == 1
    assert open_slots(ids(lk_library, "and_lk", "NBD"), lk_library) == 1
    assert is_complete(ids(lk_library, "not", "NBD"), lk_library)
    assert not is_complete(ids(lk_library, "NBD", "OBD"), lk_library)


def test_evaluate_examples(lk_library):
    tree = parse("and_lk(NBD, OBD)", lk_library)
    assert evaluate(tree, [0.6, 0.7]) == pytest.approx(0.3)
    assert evaluate(parse("not(NBD)", lk_library), [0.0, 0.5]) == 1.0


def test_product_expression_with_nested_negation_and_its_complexity():
    tree = parse(NESTED_RULE, PRODUCT_LIB)
    assert evaluate(tree, [1.0, 0.5]) == pytest.approx(0.1875, abs=1e-12)
    assert complexity(tree) == 10
    rows = np.array([[1.0, 0.5], [0.4, 0.8]])
    np.testing.assert_array_equal(evaluate_batch(tree, rows), [evaluate(tree, row) for row in rows])


def test_complexity_weights(lk_library):
    assert complexity(parse("NBD", lk_library)) == 1
    assert complexity(parse("implies_lk(NBD, OBD)", lk_library)) == 4


def test_evaluate_batch_projection_and_empty(lk_library, small_fuzzy):
    tree = parse("NBD", lk_library)
    rows = np.array([[0.2, 0.4], [0.6, 0.8], [1.0, 0.0]])
    np.testing.assert_array_equal(evaluate_batch(tree, rows), [0.2, 0.6, 1.0])
    assert evaluate_batch(tree, np.empty((0, 2))).shape == (0,)
    assert evaluate_batch(tree, small_fuzzy).shape == (small_fuzzy.n_rows,)


def test_feature_index_out_of_bounds(lk_library):
    tree = parse("OBD", lk_library)
    with pytest.raises(FeatureIndexError):
        evaluate(tree, [0.5])
    with pytest.raises(FeatureIndexError):
        evaluate_batch(tree, np.zeros((3, 1)))


def test_render_format():
    lib = build_library(LibraryMode.SINGLE, ["A", "B"], Semantics.PRODUCT)
    tree = tree_from_traversal(ids(lib, "implies_pr", "A", "B"), lib)
    assert render(tree) == "implies_pr(A, B)"
    assert str(tree) == "implies_pr(A, B)"


@pytest.mark.parametrize(
    ("text", "match"),
    [
        ("and_lk(NBD)", "takes 2 argument"),
        ("and_lk(NBD, XYZ)", "Unknown name 'XYZ'"),
        ("and_lk(NBD, OBD", r"Expected '\)'"),
        ("NBD OBD", "Trailing"),
        ("not[NBD]", "Unexpected character"),
        ("", "Expected a name"),
    ],
)
def test_parse_errors(lk_library, text, match):
    with pytest.raises(ExpressionParseError, match=match):
        parse(text, lk_library)


@st.composite
def complete_traversals(draw, lib=COMBINED_LIB, max_length=24):
    tokens: list[int] = []
    open_count = 1
    leaves = [t.id for t in lib.tokens if t.arity == 0]
    while open_count:
        # Leaves only once the remaining budget is used up by open slots.
        if len(tokens) + open_count + 2 > max_length:
            token = draw(st.sampled_from(leaves))
        else:
            token = draw(st.integers(0, len(lib) - 1))
        tokens.append(token)
        open_count += lib[token].arity - 1
    return tuple(tokens)


@settings(max_examples=200)
@given(traversal=complete_traversals())
def test_traversal_tree_and_text_round_trip(traversal):
    tree = tree_from_traversal(traversal, COMBINED_LIB)
    assert traversal_from_tree(tree) == traversal
    assert parse(render(tree), COMBINED_LIB) == tree
    assert complexity(tree) == len(traversal) + sum(
        1 for token_id in traversal if COMBINED_LIB[token_id].kind is TokenKind.SIMPL
    )


@settings(max_examples=100)
@given(
    traversal=complete_traversals(),
    rows=st.lists(
        st.lists(st.sampled_from([0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 0.33]), min_size=3, max_size=3),
        min_size=1,
        max_size=6,
    ),
)
def test_batch_evaluation_matches_row_evaluation(traversal, rows):
    tree = tree_from_traversal(traversal, COMBINED_LIB)
    matrix = np.array(rows)
    batch = evaluate_batch(tree, matrix)
    assert ((batch >= 0.0) & (batch <= 1.0)).all()
    np.testing.assert_allclose(batch, [evaluate(tree, row) for row in matrix], atol=1e-12, rtol=0)
