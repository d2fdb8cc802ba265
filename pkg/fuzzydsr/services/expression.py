from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray

from fuzzydsr.services.fuzzy_ops import neg, s_implication, tconorm, tnorm
from fuzzydsr.services.tokens import Library, LibraryError, Token, TokenKind

if TYPE_CHECKING:
    from fuzzydsr.services.fuzzifier import FuzzyDataset

Traversal = tuple[int, ...]


class ExpressionError(ValueError):
    pass


class IncompleteTraversal(ExpressionError):
    pass


class DanglingTokens(ExpressionError):
    pass


class FeatureIndexError(ExpressionError, IndexError):
    pass


class ExpressionParseError(ExpressionError):
    pass


@dataclass(frozen=True)
class ExprNode:
    token: Token
    children: tuple[ExprNode, ...] = ()


@dataclass(frozen=True)
class ExprTree:
    root: ExprNode

    def nodes(self) -> list[ExprNode]:
        ordered: list[ExprNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            ordered.append(node)
            stack.extend(reversed(node.children))
        return ordered

    def __str__(self) -> str:
        return render(self)


def open_slots(traversal: Sequence[int], lib: Library) -> int:
    """Slots still waiting for a subtree; 1 for the empty traversal, 0 once complete."""
    count = 1
    for token_id in traversal:
        count += lib[token_id].arity - 1
    return count


def is_complete(traversal: Sequence[int], lib: Library) -> bool:
    count = 1
    for position, token_id in enumerate(traversal):
        count += lib[token_id].arity - 1
        if count == 0:
            return position == len(traversal) - 1
    return False


def tree_from_traversal(traversal: Sequence[int], lib: Library) -> ExprTree:
    count = 1
    for position, token_id in enumerate(traversal):
        if not 0 <= token_id < len(lib):
            raise LibraryError(f"Token id {token_id} is outside the library")
        count += lib[token_id].arity - 1
        if count == 0 and position != len(traversal) - 1:
            raise DanglingTokens(
                f"Traversal closes at index {position} but has {len(traversal) - position - 1} more tokens"
            )
    if count != 0:
        raise IncompleteTraversal(f"Traversal leaves {count} open slot(s)")

    cursor = 0

    def build() -> ExprNode:
        nonlocal cursor
        token = lib[traversal[cursor]]
        cursor += 1
        children = tuple(build() for _ in range(token.arity))
        return ExprNode(token=token, children=children)

    return ExprTree(root=build())


def traversal_from_tree(tree: ExprTree) -> Traversal:
    return tuple(node.token.id for node in tree.nodes())


def _apply(token: Token, args: list) -> float | NDArray[np.float64]:
    kind = token.kind
    if kind is TokenKind.NEG:
        return neg(args[0])
    if kind is TokenKind.TNORM:
        return tnorm(token.semantics, args[0], args[1])
    if kind is TokenKind.TCONORM:
        return tconorm(token.semantics, args[0], args[1])
    if kind is TokenKind.SIMPL:
        return s_implication(token.semantics, args[0], args[1])
    raise ExpressionError(f"Token '{token.name}' is not an operator")


def evaluate(tree: ExprTree, row: ArrayLike) -> float:
    values = np.asarray(row, dtype=np.float64)

    def visit(node: ExprNode) -> float:
        token = node.token
        if token.kind is TokenKind.TERMINAL:
            if token.feature_index >= values.shape[0]:
                raise FeatureIndexError(
                    f"Feature '{token.name}' (index {token.feature_index}) is outside a row of {values.shape[0]}"
                )
            return float(values[token.feature_index])
        if token.kind is TokenKind.CONSTANT:
            return token.value
        return _apply(token, [visit(child) for child in node.children])

    return visit(tree.root)


def evaluate_batch(tree: ExprTree, data: FuzzyDataset | ArrayLike) -> NDArray[np.float64]:
    """Columnar evaluation; elementwise identical to :func:`evaluate` on each row."""
    matrix = data.X if hasattr(data, "X") else np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2:
        raise ExpressionError("Batch evaluation needs a 2-D matrix")
    n_rows, n_cols = matrix.shape

    def visit(node: ExprNode) -> NDArray[np.float64]:
        token = node.token
        if token.kind is TokenKind.TERMINAL:
            if token.feature_index >= n_cols:
                raise FeatureIndexError(
                    f"Feature '{token.name}' (index {token.feature_index}) is outside a matrix of {n_cols} columns"
                )
            return matrix[:, token.feature_index]
        if token.kind is TokenKind.CONSTANT:
            return np.full(n_rows, token.value, dtype=np.float64)
        return np.asarray(_apply(token, [visit(child) for child in node.children]), dtype=np.float64)

    return np.array(visit(tree.root), dtype=np.float64, copy=True)


def complexity(tree: ExprTree) -> int:
    return sum(node.token.complexity_weight for node in tree.nodes())


def render(tree: ExprTree) -> str:
    def visit(node: ExprNode) -> str:
        if not node.children:
            return node.token.name
        return f"{node.token.name}({', '.join(visit(child) for child in node.children)})"

    return visit(tree.root)


_PRETTY_SYMBOLS = {
    TokenKind.TNORM: "⊗",
    TokenKind.TCONORM: "⊕",
    TokenKind.SIMPL: "→",
}


def pretty(tree: ExprTree) -> str:
    """Infix rendering with Unicode connectives, e.g. ``(NBD ⊗_lk ¬OBD)``."""

    def visit(node: ExprNode) -> str:
        token = node.token
        if not node.children:
            return token.name
        if token.kind is TokenKind.NEG:
            return f"¬{visit(node.children[0])}"
        left, right = (visit(child) for child in node.children)
        return f"({left} {_PRETTY_SYMBOLS[token.kind]}_{token.semantics.value} {right})"

    return visit(tree.root)


_LEXEME = re.compile(r"\s*(?:(?P<name>[A-Za-z0-9_]+)|(?P<punct>[(),]))")


def _lex(text: str) -> list[tuple[str, int]]:
    lexemes: list[tuple[str, int]] = []
    position = 0
    while position < len(text):
        if text[position:].strip() == "":
            break
        match = _LEXEME.match(text, position)
        if match is None:
            raise ExpressionParseError(f"Unexpected character {text[position]!r} at offset {position}")
        value = match.group("name") or match.group("punct")
        lexemes.append((value, match.start(match.lastgroup)))
        position = match.end()
    return lexemes


def parse(text: str, lib: Library) -> ExprTree:
    """Parse the prefix grammar emitted by :func:`render` back into a tree over ``lib``."""
    lexemes = _lex(text)
    cursor = 0

    def peek() -> tuple[str, int] | None:
        return lexemes[cursor] if cursor < len(lexemes) else None

    def expect(symbol: str) -> None:
        nonlocal cursor
        current = peek()
        if current is None or current[0] != symbol:
            where = current[1] if current else len(text)
            raise ExpressionParseError(f"Expected '{symbol}' at offset {where}")
        cursor += 1

    def expr() -> ExprNode:
        nonlocal cursor
        current = peek()
        if current is None or current[0] in "(),":
            where = current[1] if current else len(text)
            raise ExpressionParseError(f"Expected a name at offset {where}")
        name, offset = current
        cursor += 1
        try:
            token = lib.by_name(name)
        except LibraryError as exc:
            raise ExpressionParseError(f"Unknown name '{name}' at offset {offset}") from exc

        if token.arity == 0:
            return ExprNode(token=token)

        expect("(")
        children = [expr()]
        while peek() is not None and peek()[0] == ",":
            cursor += 1
            children.append(expr())
        expect(")")
        if len(children) != token.arity:
            raise ExpressionParseError(
                f"'{name}' at offset {offset} takes {token.arity} argument(s), got {len(children)}"
            )
        return ExprNode(token=token, children=tuple(children))

    root = expr()
    if cursor != len(lexemes):
        raise ExpressionParseError(f"Trailing input at offset {lexemes[cursor][1]}")
    return ExprTree(root=root)
