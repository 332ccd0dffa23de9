"""Lexical feature extraction: clean, tokenize, filter, lemmatize, embed.

The lexical pipeline turns a raw statement into a fixed-shape padded
sequence of token vectors::

    clean -> tokenize -> remove_stopwords -> lemmatize -> embed

Cleaning lowercases, strips punctuation (same class as
:func:`mpsc.synfeat.is_punctuation`), and collapses whitespace.
Embedding providers are pluggable; a deterministic hash-seeded provider
is bundled so the pipeline runs without external embedding tables, and
tables in the documented text format can be loaded from disk.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .synfeat import is_punctuation

# A token sequence is a plain list of lowercase, punctuation-free tokens.
TokenSequence = list[str]

DEFAULT_MAX_LEN = 128

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_VOWELS = frozenset("aeiou")


def clean(text: str) -> str:
    """Lowercase, strip punctuation, and collapse whitespace.

    Idempotent: cleaning an already-clean string is a no-op.
    """
    lowered = text.lower()
    stripped = "".join(ch for ch in lowered if not is_punctuation(ch))
    return " ".join(stripped.split())


def tokenize(cleaned: str) -> TokenSequence:
    """Split cleaned text on whitespace."""
    return cleaned.split()


def remove_stopwords(seq: Sequence[str], stoplist: frozenset[str] | set[str]) -> TokenSequence:
    """Order-preserving removal of stoplist tokens."""
    return [tok for tok in seq if tok not in stoplist]


def lemmatize(seq: Sequence[str], lemmatizer: Callable[[str], str]) -> TokenSequence:
    """Map every token through ``lemmatizer``; length is preserved."""
    return [lemmatizer(tok) for tok in seq]


def default_stoplist() -> frozenset[str]:
    """The bundled English stopword list (one lowercase token per line)."""
    text = resources.files("mpsc").joinpath("data/stopwords_en.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def load_stoplist(path: str | Path) -> frozenset[str]:
    """Load a stopword file: one lowercase token per line."""
    lines = Path(path).read_text("utf-8").splitlines()
    return frozenset(line.strip() for line in lines if line.strip())


# ---------------------------------------------------------------------------
# Lemmatizers
# ---------------------------------------------------------------------------

class RuleLemmatizer:
    """Deterministic suffix stripper used when no lemma dictionary is available.

    Handles plural -s/-es/-ies and the -ing/-ed verb forms with consonant
    undoubling and final-e restoration.  It ignores part of speech and is
    intentionally approximate; unknown shapes pass through unchanged.
    """

    _SIBILANT_ES = ("sses", "xes", "zes", "ches", "shes")

    def __call__(self, token: str) -> str:
        if len(token) <= 3 or not token.isalpha():
            return token
        if token.endswith("ies") and len(token) > 4:
            return token[:-3] + "y"
        if token.endswith("es"):
            if token.endswith(self._SIBILANT_ES):
                return token[:-2]
            return token[:-1]
        if token.endswith("s") and not token.endswith(("ss", "us", "is")):
            return token[:-1]
        if token.endswith("ing") and len(token) > 4:
            stem = token[:-3]
            return self._restore(stem) if _VOWELS & set(stem) else token
        if token.endswith("ed") and len(token) > 4:
            stem = token[:-2]
            return self._restore(stem) if _VOWELS & set(stem) else token
        return token

    @staticmethod
    def _restore(stem: str) -> str:
        if len(stem) < 2:
            return stem
        last, prev = stem[-1], stem[-2]
        if last == prev and last not in _VOWELS and last not in "lszf":
            return stem[:-1]  # running -> runn -> run
        if len(stem) >= 3 and last not in _VOWELS and last not in "wxy":
            if prev in _VOWELS and stem[-3] not in _VOWELS:
                return stem + "e"  # making -> mak -> make
        if last in "cv":
            return stem + "e"  # dancing -> danc -> dance
        return stem


class DictionaryLemmatizer:
    """Lemmatizer backed by an explicit token -> lemma mapping.

    Use for lexicon dumps (e.g. a semantic-database export in
    ``token<TAB>lemma`` lines).  Unknown tokens map to themselves.
    """

    def __init__(self, mapping: Mapping[str, str]):
        self.mapping = dict(mapping)

    def __call__(self, token: str) -> str:
        return self.mapping.get(token, token)

    @classmethod
    def from_file(cls, path: str | Path) -> "DictionaryLemmatizer":
        mapping = {}
        for line in Path(path).read_text("utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            token, _, lemma = line.partition("\t")
            if token and lemma:
                mapping[token] = lemma
        return cls(mapping)


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------

def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash; the stable basis for OOV bucketing."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def oov_bucket(token: str, buckets: int) -> int:
    """Deterministic bucket index for an out-of-vocabulary token."""
    return fnv1a64(token.encode("utf-8")) % buckets


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _hash_vector(key: int, dimension: int) -> np.ndarray:
    # Derives values in [-0.5, 0.5) purely from integer hashing so vectors
    # are identical across platforms and process restarts.
    vals = np.empty(dimension, dtype=np.float64)
    for j in range(dimension):
        vals[j] = _splitmix64((key + j + 1) & _MASK64) / 2.0**64 - 0.5
    return vals


class HashEmbeddingProvider:
    """Deterministic hash-seeded token vectors; the bundled test provider.

    With an explicit vocabulary, in-vocabulary tokens get per-token
    vectors and everything else falls into one of ``oov_buckets`` fixed
    bucket vectors.  With ``vocab=None`` the vocabulary is open and every
    token hashes to its own vector.
    """

    def __init__(
        self,
        dimension: int = 32,
        oov_buckets: int = 1,
        vocab: Optional[Iterable[str]] = None,
        seed: int = 0,
    ):
        if dimension < 1 or oov_buckets < 1:
            raise ValueError("dimension and oov_buckets must be positive")
        self.name = f"hash{dimension}"
        self.dimension = dimension
        self.oov_buckets = oov_buckets
        self.seed = seed
        self.vocab = frozenset(vocab) if vocab is not None else None
        self._salt = _splitmix64(seed & _MASK64)
        self._bucket_vectors = np.stack(
            [self._vector_for(f"\x00bucket:{i}") for i in range(oov_buckets)]
        )
        self._cache: dict[str, np.ndarray] = {}

    def _vector_for(self, token: str) -> np.ndarray:
        return _hash_vector(fnv1a64(token.encode("utf-8")) ^ self._salt, self.dimension)

    def lookup(self, token: str) -> np.ndarray:
        if self.vocab is not None and token not in self.vocab:
            return self._bucket_vectors[oov_bucket(token, self.oov_buckets)]
        vec = self._cache.get(token)
        if vec is None:
            vec = self._vector_for(token)
            self._cache[token] = vec
        return vec


class TableEmbeddingProvider:
    """Embedding table loaded from the documented text format.

    File layout: a header line ``dimension vocab_size oov_buckets``,
    then one ``token v1 ... vd`` line per vocabulary entry, then
    ``oov_buckets`` lines of bucket vectors (values only).
    """

    def __init__(self, name: str, table: dict[str, np.ndarray], bucket_vectors: np.ndarray):
        if not len(bucket_vectors):
            raise ValueError("at least one OOV bucket vector is required")
        self.name = name
        self.dimension = int(bucket_vectors.shape[1])
        self.oov_buckets = int(bucket_vectors.shape[0])
        self._table = table
        self._bucket_vectors = bucket_vectors

    @property
    def vocab_size(self) -> int:
        return len(self._table)

    def lookup(self, token: str) -> np.ndarray:
        vec = self._table.get(token)
        if vec is None:
            return self._bucket_vectors[oov_bucket(token, self.oov_buckets)]
        return vec

    @classmethod
    def from_file(cls, path: str | Path) -> "TableEmbeddingProvider":
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 3:
                raise ValueError(f"{path}: malformed embedding header")
            dimension, vocab_size, oov_buckets = (int(x) for x in header)
            table = {}
            for i in range(vocab_size):
                parts = fh.readline().split()
                if len(parts) != dimension + 1:
                    raise ValueError(f"{path}: vocab line {i + 1} has wrong field count")
                table[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            buckets = np.empty((oov_buckets, dimension), dtype=np.float64)
            for i in range(oov_buckets):
                parts = fh.readline().split()
                if len(parts) != dimension:
                    raise ValueError(f"{path}: bucket line {i + 1} has wrong field count")
                buckets[i] = [float(x) for x in parts]
        return cls(name=path.stem, table=table, bucket_vectors=buckets)


def write_embedding_file(
    path: str | Path,
    table: Mapping[str, np.ndarray],
    bucket_vectors: np.ndarray,
) -> None:
    """Write an embedding table in the format read by ``TableEmbeddingProvider``."""
    bucket_vectors = np.atleast_2d(np.asarray(bucket_vectors, dtype=np.float64))
    dimension = bucket_vectors.shape[1]
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{dimension} {len(table)} {bucket_vectors.shape[0]}\n")
        for token, vec in table.items():
            fh.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")
        for row in bucket_vectors:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Embedded sequences
# ---------------------------------------------------------------------------

@dataclass
class EmbeddedSequence:
    """A padded/masked matrix of token vectors.

    ``vectors`` is always ``max_len x dimension``; rows with
    ``mask == False`` are all-zero padding.
    """

    vectors: np.ndarray
    mask: np.ndarray
    true_length: int


def embed(seq: Sequence[str], provider, max_len: int) -> EmbeddedSequence:
    """Embed the first ``min(len(seq), max_len)`` tokens; pad the rest with zeros."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    vectors = np.zeros((max_len, provider.dimension), dtype=np.float64)
    mask = np.zeros(max_len, dtype=bool)
    true_length = min(len(seq), max_len)
    for i in range(true_length):
        vectors[i] = provider.lookup(seq[i])
        mask[i] = True
    return EmbeddedSequence(vectors=vectors, mask=mask, true_length=true_length)


def lexical_features(
    text: str,
    provider,
    stoplist: frozenset[str] | set[str],
    lemmatizer: Callable[[str], str],
    max_len: int = DEFAULT_MAX_LEN,
) -> EmbeddedSequence:
    """Full lexical pipeline: clean, tokenize, filter, lemmatize, embed."""
    tokens = lemmatize(remove_stopwords(tokenize(clean(text)), stoplist), lemmatizer)
    return embed(tokens, provider, max_len)


def pipeline_tokens(
    text: str,
    stoplist: frozenset[str] | set[str],
    lemmatizer: Callable[[str], str],
) -> TokenSequence:
    """The token stream :func:`lexical_features` would embed (pre-embedding)."""
    return lemmatize(remove_stopwords(tokenize(clean(text)), stoplist), lemmatizer)
