"""Strong negation, T-norms, T-conorms and implications for the three classical semantics.

Every operator accepts python floats or numpy arrays and returns the same
shape: a float for scalar inputs, a float64 array otherwise. The scalar and
columnar paths share the same numpy ufuncs, so a row evaluated alone and the
same row evaluated inside a column agree bit for bit.
"""

from __future__ import annotations

import math
from enum import StrEnum

import numpy as np
from numpy.typing import ArrayLike, NDArray

Fuzzy = float | NDArray[np.float64]


class FuzzyValueError(ValueError):
    pass


class Semantics(StrEnum):
    GOEDEL = "gd"
    PRODUCT = "pr"
    LUKASIEWICZ = "lk"


# Canonical order used by the token library.
SEMANTICS_ORDER: tuple[Semantics, ...] = (Semantics.GOEDEL, Semantics.PRODUCT, Semantics.LUKASIEWICZ)


class FuzzyValue(float):
    """A membership degree in [0, 1]. Out-of-range or NaN input is rejected, never clamped."""

    def __new__(cls, value: float) -> FuzzyValue:
        number = float(value)
        if math.isnan(number) or number < 0.0 or number > 1.0:
            raise FuzzyValueError(f"Fuzzy value must lie in [0, 1], got {value!r}")
        return super().__new__(cls, number)


def as_fuzzy_array(values: ArrayLike) -> NDArray[np.float64]:
    array = np.asarray(values, dtype=np.float64)
    if array.size and (np.isnan(array).any() or array.min() < 0.0 or array.max() > 1.0):
        raise FuzzyValueError("Fuzzy arrays must only hold values in [0, 1]")
    return array


def _out(value: ArrayLike) -> Fuzzy:
    array = np.asarray(value, dtype=np.float64)
    if array.ndim == 0:
        return float(array)
    return array


def neg(a: Fuzzy) -> Fuzzy:
    return _out(np.subtract(1.0, a))


def tnorm(s: Semantics, a: Fuzzy, b: Fuzzy) -> Fuzzy:
    if s is Semantics.GOEDEL:
        return _out(np.minimum(a, b))
    if s is Semantics.PRODUCT:
        return _out(np.multiply(a, b))
    return _out(np.maximum(np.add(a, b) - 1.0, 0.0))


def tconorm(s: Semantics, a: Fuzzy, b: Fuzzy) -> Fuzzy:
    if s is Semantics.GOEDEL:
        return _out(np.maximum(a, b))
    if s is Semantics.PRODUCT:
        return _out(np.add(a, b) - np.multiply(a, b))
    return _out(np.minimum(np.add(a, b), 1.0))


def s_implication(s: Semantics, a: Fuzzy, c: Fuzzy) -> Fuzzy:
    """S(N(a), c) written out per semantics; must agree with ``tconorm(s, neg(a), c)``."""
    not_a = np.subtract(1.0, a)
    if s is Semantics.GOEDEL:
        return _out(np.maximum(not_a, c))
    if s is Semantics.PRODUCT:
        return _out(not_a + c - np.multiply(not_a, c))
    return _out(np.minimum(not_a + c, 1.0))


def r_implication(s: Semantics, a: Fuzzy, c: Fuzzy) -> Fuzzy:
    """Residuated implication. Kept for operator completeness; the search library never uses it."""
    a_arr = np.asarray(a, dtype=np.float64)
    c_arr = np.asarray(c, dtype=np.float64)
    if s is Semantics.LUKASIEWICZ:
        return _out(np.minimum(1.0 - a_arr + c_arr, 1.0))

    a_arr, c_arr = np.broadcast_arrays(a_arr, c_arr)
    holds = a_arr <= c_arr
    if s is Semantics.GOEDEL:
        return _out(np.where(holds, 1.0, c_arr))

    # a > c >= 0 on the division branch, so a > 0 there.
    ratio = np.divide(c_arr, a_arr, out=np.ones_like(a_arr), where=~holds)
    return _out(np.where(holds, 1.0, ratio))
