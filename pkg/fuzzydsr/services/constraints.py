from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray

from fuzzydsr.services.expression import Traversal, is_complete, open_slots
from fuzzydsr.services.tokens import Library, LibraryError

logger = logging.getLogger(__name__)


class ConstraintError(ValueError):
    pass


class SearchMode(StrEnum):
    UNCONSTRAINED = "unconstrained"
    CONSTRAINED = "constrained"


@dataclass(frozen=True)
class ConstraintConfig:
    max_length: int = 32
    min_length: int = 4
    # Constrained mode: implication at the root and nowhere else.
    root_implication: bool = False

    def __post_init__(self) -> None:
        if self.max_length < 1:
            raise ConstraintError("max_length must be at least 1")
        if self.min_length < 1 or self.min_length > self.max_length:
            raise ConstraintError("min_length must lie in [1, max_length]")
        if self.root_implication and self.max_length < 3:
            raise ConstraintError("A root implication needs max_length >= 3")


def mask_for_state(length: int, open_count: int, lib: Library, cfg: ConstraintConfig) -> NDArray[np.bool_]:
    """Admissible next tokens given the prefix length and its number of open slots."""
    if open_count <= 0:
        return np.zeros(len(lib), dtype=bool)

    # Each open slot still needs one leaf, so the shortest completion is length + open + arity.
    mask = length + open_count + lib.arities <= cfg.max_length

    if cfg.root_implication:
        if length == 0:
            mask &= lib.simpl_mask
        else:
            mask &= ~lib.simpl_mask

    if length + open_count < cfg.min_length:
        operators = mask & ~lib.leaf_mask
        if operators.any():
            mask = operators

    return mask


def valid_token_mask(partial: Sequence[int], lib: Library, cfg: ConstraintConfig) -> NDArray[np.bool_]:
    return mask_for_state(len(partial), open_slots(partial, lib), lib, cfg)


def enforce_root_implication(traversal: Sequence[int], lib: Library, rng: np.random.Generator) -> Traversal:
    """Put an implication at the root by swap or insertion, then repair the arity count.

    Open slots left after the edit are filled with terminals drawn uniformly from
    ``rng``; a traversal that closes early is cut after the closing token.
    """
    simpl_ids = lib.simpl_ids
    if not simpl_ids:
        raise LibraryError("The library has no implication token")

    tokens = list(traversal)
    if tokens and tokens[0] in simpl_ids:
        return tuple(tokens)

    first = next((i for i, token_id in enumerate(tokens) if token_id in simpl_ids), None)
    if first is not None:
        tokens[0], tokens[first] = tokens[first], tokens[0]
    else:
        chosen = simpl_ids[0] if len(simpl_ids) == 1 else int(rng.choice(simpl_ids))
        tokens.insert(0, chosen)

    count = 1
    for position, token_id in enumerate(tokens):
        count += lib[token_id].arity - 1
        if count == 0:
            if position != len(tokens) - 1:
                logger.debug("root_repair_truncate dropped=%s", len(tokens) - position - 1)
            tokens = tokens[: position + 1]
            break

    if count > 0:
        terminals = lib.terminal_ids
        tokens.extend(int(rng.choice(terminals)) for _ in range(count))

    repaired = tuple(tokens)
    if not is_complete(repaired, lib):
        raise ConstraintError(f"Root repair produced an incomplete traversal {repaired}")
    return repaired
