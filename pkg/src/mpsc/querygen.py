"""News-search query construction from a statement.

Two unsupervised extractors feed the query: a graph-based sentence
ranker (power iteration over a token-overlap similarity graph) and a
statistical keyword ranker built from per-term surface features where a
*smaller* score means a more relevant term.  Keywords are preferred;
summary tokens fill in when too few keywords are found.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional, Sequence
from urllib.parse import quote

import numpy as np

from . import textprep

DAMPING = 0.85
EPSILON = 1e-6
MAX_ITERATIONS = 100
COOCCURRENCE_WINDOW = 1  # tokens on each side
NEAR_DUPLICATE_SIMILARITY = 0.8
DEFAULT_MAX_TERMS = 8

_TOKEN_RE = re.compile(r"\w+(?:['’-]\w+)*")
_OPENERS = "\"'“‘([{"


class EmptyQuery(ValueError):
    """The statement yielded no usable query terms."""


class QueryOrigin(str, Enum):
    KEYWORDS = "keywords"
    SUMMARY = "summary"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class SearchQuery:
    terms: tuple[str, ...]
    raw: str
    origin: QueryOrigin

    def encoded(self) -> str:
        return quote(self.raw)


@dataclass(frozen=True)
class TermStats:
    frequency: int
    casing_count: int
    first_position: int
    sentence_spread: int


@dataclass(frozen=True)
class KeywordCandidate:
    ngram: tuple[str, ...]
    score: float
    term_stats: tuple[TermStats, ...]

    @property
    def phrase(self) -> str:
        return " ".join(self.ngram)


@dataclass
class SentenceGraph:
    sentences: list[str]
    similarity: np.ndarray
    scores: np.ndarray


def _abbreviations() -> frozenset[str]:
    text = resources.files("mpsc").joinpath("data/abbreviations_en.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


_ABBREVIATIONS = _abbreviations()


def split_sentences(text: str) -> list[str]:
    """Split on '.', '!', '?' followed by whitespace or end of text.

    A period closing a known abbreviation (bundled list) does not split.
    """
    boundaries = []
    for i, ch in enumerate(text):
        if ch not in ".!?":
            continue
        if i + 1 < len(text) and not text[i + 1].isspace():
            continue
        if ch == ".":
            start = i
            while start > 0 and not text[start - 1].isspace():
                start -= 1
            chunk = text[start:i + 1].lstrip(_OPENERS).lower()
            if chunk in _ABBREVIATIONS:
                continue
        boundaries.append(i + 1)
    sentences = []
    start = 0
    for end in boundaries:
        piece = text[start:end].strip()
        if piece:
            sentences.append(piece)
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _sentence_tokens(sentence: str) -> list[str]:
    return textprep.tokenize(textprep.clean(sentence))


def rank_sentences(sentences: Sequence[str]) -> SentenceGraph:
    """Build the similarity graph and run damped power iteration.

    Edge weight between two sentences is the count of shared normalized
    tokens over ``log(len_i) + log(len_j)``.  Scores start uniform at 1
    and their sum stays ``n`` because the transition matrix is
    row-stochastic (empty rows fall back to a uniform jump).
    """
    n = len(sentences)
    token_lists = [_sentence_tokens(s) for s in sentences]
    token_sets = [set(toks) for toks in token_lists]
    similarity = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            shared = len(token_sets[i] & token_sets[j])
            if not shared:
                continue
            denom = math.log(len(token_lists[i])) + math.log(len(token_lists[j]))
            if denom <= 0:
                continue
            similarity[i, j] = similarity[j, i] = shared / denom

    row_sums = similarity.sum(axis=1)
    transition = np.full((n, n), 1.0 / n, dtype=np.float64)
    nonzero = row_sums > 0
    transition[nonzero] = similarity[nonzero] / row_sums[nonzero, None]

    scores = np.ones(n, dtype=np.float64)
    for _ in range(MAX_ITERATIONS):
        updated = (1.0 - DAMPING) + DAMPING * (transition.T @ scores)
        delta = np.max(np.abs(updated - scores))
        scores = updated
        if delta < EPSILON:
            break
    return SentenceGraph(sentences=list(sentences), similarity=similarity, scores=scores)


def summarize(text: str, ratio: float) -> list[str]:
    """Return the ``ceil(ratio * n)`` best-ranked sentences in document order."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must be in (0, 1]")
    sentences = split_sentences(text)
    n = len(sentences)
    if n <= 1:
        return sentences
    keep = min(n, max(1, math.ceil(ratio * n)))
    graph = rank_sentences(sentences)
    ranked = sorted(range(n), key=lambda i: (-graph.scores[i], i))
    chosen = sorted(ranked[:keep])
    return [sentences[i] for i in chosen]


def _levenshtein(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _edit_similarity(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - _levenshtein(a, b) / longest


class _TermInfo:
    __slots__ = ("tf", "upper", "acronym", "first_pos", "sentences",
                 "left_total", "right_total", "left_seen", "right_seen")

    def __init__(self, first_pos: int):
        self.tf = 0
        self.upper = 0
        self.acronym = 0
        self.first_pos = first_pos
        self.sentences: set[int] = set()
        self.left_total = 0
        self.right_total = 0
        self.left_seen: set[str] = set()
        self.right_seen: set[str] = set()


def extract_keywords(
    text: str,
    k: int,
    max_ngram: int = 3,
    stoplist: Optional[frozenset[str]] = None,
) -> list[KeywordCandidate]:
    """Rank 1..max_ngram-token candidates by the statistical term score.

    Term score combines casing ratio, normalized first position,
    normalized frequency, neighbor dispersion, and sentence spread;
    candidate score is ``prod(member) / (tf * (1 + sum(member)))``.
    Candidates never cross sentence boundaries or start/end on a
    stopword, and near-duplicates (edit similarity > 0.8) collapse onto
    the better-scored survivor.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 1 <= max_ngram <= 3:
        raise ValueError("max_ngram must be between 1 and 3")
    if stoplist is None:
        stoplist = textprep.default_stoplist()

    sentences = split_sentences(text)
    sentence_tokens = [_TOKEN_RE.findall(s) for s in sentences]
    n_sentences = len(sentences)

    terms: dict[str, _TermInfo] = {}
    position = 0
    for s_idx, tokens in enumerate(sentence_tokens):
        lowered = [t.lower() for t in tokens]
        for t_idx, token in enumerate(tokens):
            term = lowered[t_idx]
            info = terms.get(term)
            if info is None:
                info = _TermInfo(first_pos=position)
                terms[term] = info
            info.tf += 1
            if token[0].isupper():
                if len(token) > 1 and token.isupper():
                    info.acronym += 1
                else:
                    info.upper += 1
            info.sentences.add(s_idx)
            if t_idx > 0:
                info.left_total += 1
                info.left_seen.add(lowered[t_idx - 1])
            if t_idx + 1 < len(tokens):
                info.right_total += 1
                info.right_seen.add(lowered[t_idx + 1])
            position += 1
    total_tokens = position
    if not terms:
        return []

    tfs = np.array([info.tf for info in terms.values()], dtype=np.float64)
    mean_tf = float(tfs.mean())
    std_tf = float(tfs.std())
    max_tf = float(tfs.max())

    scores: dict[str, float] = {}
    for term, info in terms.items():
        w_case = max(info.upper, info.acronym) / (1.0 + math.log(info.tf))
        w_pos = math.log(3.0 + info.first_pos / max(1, total_tokens))
        w_freq = info.tf / (mean_tf + std_tf) if (mean_tf + std_tf) > 0 else info.tf
        dl = len(info.left_seen) / info.left_total if info.left_total else 0.0
        dr = len(info.right_seen) / info.right_total if info.right_total else 0.0
        w_rel = 1.0 + (dl + dr) * (info.tf / max_tf)
        w_spread = len(info.sentences) / max(1, n_sentences)
        scores[term] = (w_rel * w_pos) / (w_case + w_freq / w_rel + w_spread / w_rel)

    # Candidate n-grams: contiguous within a sentence, no stopword at
    # either boundary.
    candidates: dict[tuple[str, ...], dict] = {}
    position = 0
    for tokens in sentence_tokens:
        lowered = [t.lower() for t in tokens]
        for start in range(len(tokens)):
            for length in range(1, max_ngram + 1):
                end = start + length
                if end > len(tokens):
                    break
                gram = tuple(lowered[start:end])
                if gram[0] in stoplist or gram[-1] in stoplist:
                    continue
                entry = candidates.get(gram)
                if entry is None:
                    candidates[gram] = {"tf": 1, "first_pos": position + start}
                else:
                    entry["tf"] += 1
        position += len(tokens)

    ranked: list[KeywordCandidate] = []
    for gram, entry in candidates.items():
        member_scores = [scores[t] for t in gram]
        score = math.prod(member_scores) / (entry["tf"] * (1.0 + sum(member_scores)))
        stats = tuple(
            TermStats(
                frequency=terms[t].tf,
                casing_count=max(terms[t].upper, terms[t].acronym),
                first_position=terms[t].first_pos,
                sentence_spread=len(terms[t].sentences),
            )
            for t in gram
        )
        ranked.append(KeywordCandidate(ngram=gram, score=score, term_stats=stats))
    order = {gram: entry["first_pos"] for gram, entry in candidates.items()}
    ranked.sort(key=lambda c: (c.score, order[c.ngram]))

    kept: list[KeywordCandidate] = []
    for cand in ranked:
        phrase = cand.phrase
        if any(_edit_similarity(phrase, other.phrase) > NEAR_DUPLICATE_SIMILARITY
               for other in kept):
            continue
        kept.append(cand)
        if len(kept) == k:
            break
    return kept


def build_query(
    statement: str,
    max_terms: int = DEFAULT_MAX_TERMS,
    stoplist: Optional[frozenset[str]] = None,
) -> SearchQuery:
    """Build a whitespace-free term list from keywords, falling back to
    summary tokens when fewer than two keywords are found."""
    if max_terms < 1:
        raise ValueError("max_terms must be >= 1")
    if stoplist is None:
        stoplist = textprep.default_stoplist()

    keywords = extract_keywords(statement, max_terms, 3, stoplist=stoplist)
    terms: list[str] = []
    seen: set[str] = set()

    def add(token: str) -> None:
        lower = token.lower()
        if token and lower not in seen and len(terms) < max_terms:
            seen.add(lower)
            terms.append(lower)

    for keyword in keywords:
        for token in keyword.ngram:
            add(token)

    if len(keywords) >= 2:
        origin = QueryOrigin.KEYWORDS
    else:
        for sentence in summarize(statement, 0.5) if statement.strip() else []:
            for token in textprep.remove_stopwords(_sentence_tokens(sentence), stoplist):
                add(token)
        origin = QueryOrigin.HYBRID if keywords else QueryOrigin.SUMMARY

    if not terms:
        raise EmptyQuery("statement produced no query terms")
    return SearchQuery(terms=tuple(terms), raw=" ".join(terms), origin=origin)
