"""Syntactic structure counts and their train-time standardization.

Five integer counts describe the surface structure of a statement:
total characters, uppercase letters, decimal digits, punctuation marks,
and "unknown" characters (anything that is not a letter, digit,
punctuation, or whitespace).  Counts are taken on the raw statement text,
before any cleaning, because cleaning destroys exactly the casing and
punctuation signal these features carry.

This module also owns the punctuation-class definition shared with
:mod:`mpsc.textprep` so both sides agree on what gets stripped/counted.
"""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

N_FEATURES = 5

# The 32 ASCII marks plus the Unicode P* general categories.  Symbols
# (S* categories, e.g. currency signs) are deliberately excluded: they
# fall into the "unknown" bucket.
_ASCII_PUNCT = frozenset(string.punctuation)
_PUNCT_CATEGORIES = frozenset({"Pc", "Pd", "Ps", "Pe", "Pi", "Pf", "Po"})


class EmptyFit(ValueError):
    """Scaler fit was attempted on an empty sample."""


@lru_cache(maxsize=None)
def is_punctuation(ch: str) -> bool:
    """True for the 32 ASCII punctuation marks and Unicode P* categories."""
    return ch in _ASCII_PUNCT or unicodedata.category(ch) in _PUNCT_CATEGORIES


@dataclass(frozen=True)
class SyntacticVector:
    """The five structure counts for one text."""

    total_chars: int
    uppercase: int
    digits: int
    punctuation: int
    unknown: int

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.total_chars, self.uppercase, self.digits, self.punctuation, self.unknown],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class ScalerParams:
    """Per-dimension mean/std fitted on training data; immutable after fit."""

    mean: tuple[float, ...]
    std: tuple[float, ...]
    fitted_on: int

    def __post_init__(self) -> None:
        if len(self.mean) != N_FEATURES or len(self.std) != N_FEATURES:
            raise ValueError("scaler params must have %d dimensions" % N_FEATURES)
        if any(s <= 0 for s in self.std):
            raise ValueError("scaler std must be strictly positive")

    def transform(self, counts: np.ndarray) -> np.ndarray:
        """Standardize an (n, 5) or (5,) array of counts."""
        arr = np.asarray(counts, dtype=np.float64)
        return (arr - np.array(self.mean)) / np.array(self.std)

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std), "fitted_on": self.fitted_on}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(mean=tuple(d["mean"]), std=tuple(d["std"]), fitted_on=int(d["fitted_on"]))


def count_features(text: str) -> SyntacticVector:
    """Count the five structure features of ``text``.

    Characters are classified by Unicode properties: uppercase letters
    (cased letters with the uppercase property), decimal digits (Nd),
    punctuation (see :func:`is_punctuation`), and unknown (not a letter,
    digit, punctuation mark, or whitespace).  Whitespace and lowercase
    letters contribute to ``total_chars`` only.
    """
    upper = digits = punct = unknown = 0
    for ch in text:
        if ch.isalpha():
            if ch.isupper():
                upper += 1
        elif ch.isdecimal():
            digits += 1
        elif is_punctuation(ch):
            punct += 1
        elif not ch.isspace():
            unknown += 1
    return SyntacticVector(len(text), upper, digits, punct, unknown)


def fit_scaler(vectors: Sequence[SyntacticVector] | Iterable[SyntacticVector]) -> ScalerParams:
    """Fit mean/population-std over a non-empty sample of count vectors.

    Degenerate (constant) dimensions get their std clamped to 1 so that
    scaling maps them to exactly zero instead of dividing by zero.
    """
    rows = [v.as_array() for v in vectors]
    if not rows:
        raise EmptyFit("cannot fit a scaler on an empty sample")
    data = np.stack(rows)
    mean = data.mean(axis=0)
    std = data.std(axis=0)  # population std (ddof=0)
    std = np.where(std < 1e-12, 1.0, std)
    return ScalerParams(mean=tuple(mean.tolist()), std=tuple(std.tolist()), fitted_on=len(rows))


def scale(v: SyntacticVector, params: ScalerParams) -> np.ndarray:
    """Standardize one count vector: (value - mean) / std per dimension."""
    return params.transform(v.as_array())


def inverse_scale(scaled: np.ndarray, params: ScalerParams) -> np.ndarray:
    """Affine inverse of :func:`scale`."""
    return np.asarray(scaled, dtype=np.float64) * np.array(params.std) + np.array(params.mean)
