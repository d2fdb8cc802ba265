from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray

from fuzzydsr.services.fuzzy_ops import SEMANTICS_ORDER, Semantics


class LibraryError(ValueError):
    pass


class TokenKind(StrEnum):
    TNORM = "and"
    TCONORM = "or"
    SIMPL = "implies"
    NEG = "not"
    TERMINAL = "terminal"
    CONSTANT = "constant"


class LibraryMode(StrEnum):
    SINGLE = "single"
    COMBINED = "combined"


BINARY_KINDS = (TokenKind.TNORM, TokenKind.TCONORM, TokenKind.SIMPL)

# Implication weighs double; everything else counts once.
COMPLEXITY_WEIGHTS: dict[TokenKind, int] = {
    TokenKind.TNORM: 1,
    TokenKind.TCONORM: 1,
    TokenKind.SIMPL: 2,
    TokenKind.NEG: 1,
    TokenKind.TERMINAL: 1,
    TokenKind.CONSTANT: 1,
}

FEATURE_NAME_PATTERN = re.compile(r"^[A-Za-z0-9_]+$")
NEG_NAME = "not"


@dataclass(frozen=True)
class Token:
    id: int
    kind: TokenKind
    name: str
    arity: int
    semantics: Semantics | None = None
    feature_index: int | None = None
    value: float | None = None

    @property
    def complexity_weight(self) -> int:
        return COMPLEXITY_WEIGHTS[self.kind]


@dataclass(frozen=True)
class Library:
    tokens: tuple[Token, ...]
    mode: LibraryMode
    feature_names: tuple[str, ...]
    semantics: Semantics | None = None
    _by_name: dict[str, Token] = field(init=False, repr=False, compare=False)
    arities: NDArray[np.int64] = field(init=False, repr=False, compare=False)
    leaf_mask: NDArray[np.bool_] = field(init=False, repr=False, compare=False)
    simpl_mask: NDArray[np.bool_] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_name", {token.name: token for token in self.tokens})
        arities = np.array([token.arity for token in self.tokens], dtype=np.int64)
        object.__setattr__(self, "arities", arities)
        object.__setattr__(self, "leaf_mask", arities == 0)
        object.__setattr__(
            self, "simpl_mask", np.array([t.kind is TokenKind.SIMPL for t in self.tokens], dtype=bool)
        )

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, token_id: int) -> Token:
        return self.tokens[token_id]

    def by_name(self, name: str) -> Token:
        try:
            return self._by_name[name]
        except KeyError as exc:
            raise LibraryError(f"Token '{name}' is not in the library") from exc

    def has(self, name: str) -> bool:
        return name in self._by_name

    @property
    def terminal_ids(self) -> list[int]:
        return [t.id for t in self.tokens if t.kind is TokenKind.TERMINAL]

    @property
    def simpl_ids(self) -> list[int]:
        return [t.id for t in self.tokens if t.kind is TokenKind.SIMPL]


def operator_name(kind: TokenKind, semantics: Semantics | None) -> str:
    if kind is TokenKind.NEG:
        return NEG_NAME
    if semantics is None:
        raise LibraryError(f"Operator '{kind.value}' needs a semantics")
    return f"{kind.value}_{semantics.value}"


def constant_name(value: float) -> str:
    return "const_" + f"{value:g}".replace(".", "_").replace("-", "m")


def build_library(
    mode: LibraryMode,
    feature_names: Sequence[str],
    semantics: Semantics | None = None,
    *,
    constants: Sequence[float] = (),
) -> Library:
    """Build the ordered token alphabet: binary operators, negation, terminals, then constants."""
    names = tuple(feature_names)
    if not names:
        raise LibraryError("A library needs at least one feature")
    if mode is LibraryMode.SINGLE and semantics is None:
        raise LibraryError("Single-semantics libraries need a semantics")
    if mode is LibraryMode.COMBINED and semantics is not None:
        raise LibraryError("Combined libraries span every semantics; do not pass one")

    reserved = {NEG_NAME} | {f"{k.value}_{s.value}" for k in BINARY_KINDS for s in SEMANTICS_ORDER}
    for name in names:
        if not FEATURE_NAME_PATTERN.match(name):
            raise LibraryError(f"Feature name '{name}' must match [A-Za-z0-9_]+")
        if name in reserved:
            raise LibraryError(f"Feature name '{name}' collides with an operator name")
    if len(set(names)) != len(names):
        raise LibraryError("Feature names must be unique")

    semantics_list = SEMANTICS_ORDER if mode is LibraryMode.COMBINED else (semantics,)
    specs: list[dict] = []
    for sem in semantics_list:
        for kind in BINARY_KINDS:
            specs.append({"kind": kind, "name": operator_name(kind, sem), "arity": 2, "semantics": sem})
    specs.append({"kind": TokenKind.NEG, "name": NEG_NAME, "arity": 1})
    for index, name in enumerate(names):
        specs.append({"kind": TokenKind.TERMINAL, "name": name, "arity": 0, "feature_index": index})
    for value in constants:
        if not 0.0 <= value <= 1.0:
            raise LibraryError(f"Constant {value} is outside [0, 1]")
        specs.append({"kind": TokenKind.CONSTANT, "name": constant_name(value), "arity": 0, "value": float(value)})

    tokens = tuple(Token(id=i, **spec) for i, spec in enumerate(specs))
    return Library(tokens=tokens, mode=mode, feature_names=names, semantics=semantics)
