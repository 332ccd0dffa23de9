"""Featurizer bundle: everything a model needs to turn text into inputs.

A checkpoint is only reusable if the exact featurization travels with
it, so the bundle round-trips through a JSON-able config stored in the
checkpoint's extra header section.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import textprep
from .textprep import (
    DEFAULT_MAX_LEN,
    DictionaryLemmatizer,
    EmbeddedSequence,
    HashEmbeddingProvider,
    RuleLemmatizer,
    TableEmbeddingProvider,
)


class HashTextEncoder:
    """Deterministic stand-in for an external sentence-encoder service.

    Pools hash-derived token vectors by averaging; real transformer
    providers plug in behind the same ``dimension``/``encode`` surface.
    """

    kind = "hash-encoder"

    def __init__(self, dimension: int = 64, seed: int = 0):
        self.dimension = dimension
        self.seed = seed
        self._provider = HashEmbeddingProvider(dimension=dimension, seed=seed)

    def encode(self, text: str) -> np.ndarray:
        tokens = textprep.tokenize(textprep.clean(text))
        if not tokens:
            return np.zeros(self.dimension)
        return np.mean([self._provider.lookup(t) for t in tokens], axis=0)


@dataclass
class FeaturePipeline:
    """Shared featurization for training, evaluation, and prediction."""

    provider: Optional[object] = None
    stoplist: frozenset[str] = field(default_factory=frozenset)
    lemmatizer: Callable[[str], str] = field(default_factory=RuleLemmatizer)
    max_len: int = DEFAULT_MAX_LEN
    encoder: Optional[HashTextEncoder] = None

    def tokens(self, text: str) -> list[str]:
        return textprep.pipeline_tokens(text, self.stoplist, self.lemmatizer)

    def embed_text(self, text: str) -> EmbeddedSequence:
        if self.provider is None:
            raise ValueError("pipeline has no embedding provider")
        return textprep.lexical_features(
            text, self.provider, self.stoplist, self.lemmatizer, self.max_len
        )

    def encode_text(self, text: str) -> np.ndarray:
        if self.encoder is None:
            raise ValueError("pipeline has no text encoder")
        return self.encoder.encode(text)

    # -- config round-trip (stored in checkpoint extras) ------------------

    def to_config(self) -> dict:
        return {
            "stoplist": sorted(self.stoplist),
            "lemmatizer": _lemmatizer_config(self.lemmatizer),
            "max_len": self.max_len,
            "provider": _provider_config(self.provider),
            "encoder": _encoder_config(self.encoder),
        }

    @classmethod
    def from_config(cls, config: dict) -> "FeaturePipeline":
        return cls(
            provider=_provider_from_config(config.get("provider")),
            stoplist=frozenset(config.get("stoplist", ())),
            lemmatizer=_lemmatizer_from_config(config.get("lemmatizer", {"kind": "rule"})),
            max_len=int(config.get("max_len", DEFAULT_MAX_LEN)),
            encoder=_encoder_from_config(config.get("encoder")),
        )


def build_vocabulary(texts: Iterable[str], pipeline: FeaturePipeline,
                     drop_numeric: bool = False) -> frozenset[str]:
    """Collect the post-pipeline token vocabulary of a text collection.

    ``drop_numeric`` leaves purely numeric tokens out of the vocabulary
    so they fall into the OOV buckets, mirroring word-embedding tables
    that carry no arbitrary numbers.
    """
    vocab: set[str] = set()
    for text in texts:
        for token in pipeline.tokens(text):
            if drop_numeric and token.isdigit():
                continue
            vocab.add(token)
    return frozenset(vocab)


def _provider_config(provider) -> Optional[dict]:
    if provider is None:
        return None
    if isinstance(provider, HashEmbeddingProvider):
        return {
            "kind": "hash",
            "dimension": provider.dimension,
            "oov_buckets": provider.oov_buckets,
            "seed": provider.seed,
            "vocab": sorted(provider.vocab) if provider.vocab is not None else None,
        }
    if isinstance(provider, TableEmbeddingProvider):
        path = getattr(provider, "path", None)
        if path is None:
            raise ValueError("table provider needs a source path to be serializable")
        return {"kind": "table", "path": str(path)}
    raise ValueError(f"cannot serialize provider {type(provider).__name__}")


def _provider_from_config(config: Optional[dict]):
    if config is None:
        return None
    if config["kind"] == "hash":
        vocab = config.get("vocab")
        return HashEmbeddingProvider(
            dimension=int(config["dimension"]),
            oov_buckets=int(config["oov_buckets"]),
            vocab=vocab,
            seed=int(config["seed"]),
        )
    if config["kind"] == "table":
        provider = TableEmbeddingProvider.from_file(config["path"])
        provider.path = config["path"]
        return provider
    raise ValueError(f"unknown provider kind {config['kind']!r}")


def _lemmatizer_config(lemmatizer) -> dict:
    if isinstance(lemmatizer, RuleLemmatizer):
        return {"kind": "rule"}
    if isinstance(lemmatizer, DictionaryLemmatizer):
        return {"kind": "dictionary", "mapping": dict(lemmatizer.mapping)}
    return {"kind": "identity"}


def _lemmatizer_from_config(config: dict) -> Callable[[str], str]:
    kind = config.get("kind", "rule")
    if kind == "rule":
        return RuleLemmatizer()
    if kind == "dictionary":
        return DictionaryLemmatizer(config.get("mapping", {}))
    if kind == "identity":
        return lambda token: token
    raise ValueError(f"unknown lemmatizer kind {kind!r}")


def _encoder_config(encoder) -> Optional[dict]:
    if encoder is None:
        return None
    return {"kind": "hash-encoder", "dimension": encoder.dimension, "seed": encoder.seed}


def _encoder_from_config(config: Optional[dict]) -> Optional[HashTextEncoder]:
    if config is None:
        return None
    if config["kind"] == "hash-encoder":
        return HashTextEncoder(dimension=int(config["dimension"]), seed=int(config["seed"]))
    raise ValueError(f"unknown encoder kind {config['kind']!r}")
