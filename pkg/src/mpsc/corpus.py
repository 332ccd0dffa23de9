"""Dataset ingestion: parse the four source formats, unify labels, merge,
stratify-split, and report class word frequencies.

Each source ships records in its own layout (see the parse options), but
all reduce to a text plus a binary credibility label.  SUSPICIOUS is the
positive class throughout the project.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import textprep


class Source(str, Enum):
    ISOT = "isot"
    LIAR = "liar"
    FAKENEWSNET = "fakenewsnet"
    FNID = "fnid"


class Label(IntEnum):
    CREDIBLE = 0
    SUSPICIOUS = 1


class MalformedRow(ValueError):
    """A data row does not match the source's declared layout."""

    def __init__(self, row_index: int, reason: str):
        super().__init__(f"row {row_index}: {reason}")
        self.row_index = row_index
        self.reason = reason


class UnsupportedSource(ValueError):
    """The source identifier is not one of the four known datasets."""


class UnknownLabel(ValueError):
    """A raw label is not legal for its source."""

    def __init__(self, source: "Source", raw_label: str):
        super().__init__(f"unknown label {raw_label!r} for source {source.value}")
        self.source = source
        self.raw_label = raw_label


class InsufficientClassSamples(ValueError):
    """A (source, label) stratum is too small to populate every non-empty split."""

    def __init__(self, source: "Source", label: "Label", size: int, needed: int):
        super().__init__(
            f"stratum ({source.value}, {label.name}) has {size} records, "
            f"needs at least {needed}"
        )
        self.source = source
        self.label = label
        self.size = size


@dataclass
class RawRecord:
    source_id: Source
    text: str
    raw_label: str
    extra_fields: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class LabeledStatement:
    text: str
    label: Label
    source_id: Source


@dataclass
class ParseOptions:
    """Configurable field layout for the source files.

    Field indices for the LIAR-style tab layout are 1-based (index 2 is
    the label, index 3 the statement in the stock files).  ``isot_label``
    must be set to ``"true"`` or ``"fake"`` depending on which of the two
    ISOT files the stream came from.
    """

    isot_label: Optional[str] = None
    liar_label_field: int = 2
    liar_statement_field: int = 3
    liar_expected_fields: Optional[int] = 14
    fnn_text_column: str = "title"
    fnn_label_column: str = "real"
    fnid_layout: str = "liar"  # or "fakenewsnet"
    fnid_label_field: int = 2
    fnid_statement_field: int = 3
    fnid_expected_fields: Optional[int] = None


@dataclass
class ParseResult:
    records: list[RawRecord]
    dropped_empty: int


@dataclass
class MergeResult:
    statements: list[LabeledStatement]
    duplicates_removed: int


@dataclass(frozen=True)
class DataSplits:
    train: list[LabeledStatement]
    validation: list[LabeledStatement]
    evaluation: list[LabeledStatement]
    seed: int
    ratios: tuple[float, float, float]

    def counts(self) -> dict[str, int]:
        return {
            "train": len(self.train),
            "validation": len(self.validation),
            "evaluation": len(self.evaluation),
        }


@dataclass(frozen=True)
class FrequencyTable:
    class_label: Label
    entries: list[tuple[str, int]]


# Label conversion tables.  Only "true" and "mostly-true" of the six-way
# scheme count as credible; the other four classes are mostly false.
_SIX_CLASS = {
    "true": Label.CREDIBLE,
    "mostly-true": Label.CREDIBLE,
    "half-true": Label.SUSPICIOUS,
    "barely-true": Label.SUSPICIOUS,
    "false": Label.SUSPICIOUS,
    "pants-fire": Label.SUSPICIOUS,
}
_ISOT = {"true": Label.CREDIBLE, "fake": Label.SUSPICIOUS}
_FNN = {
    "real": Label.CREDIBLE,
    "1": Label.CREDIBLE,
    "fake": Label.SUSPICIOUS,
    "0": Label.SUSPICIOUS,
}
# FNID ships in either layout, so it accepts both label vocabularies.
_FNID = {**_SIX_CLASS, **_FNN}

LABEL_TABLES: dict[Source, dict[str, Label]] = {
    Source.ISOT: _ISOT,
    Source.LIAR: _SIX_CLASS,
    Source.FAKENEWSNET: _FNN,
    Source.FNID: _FNID,
}


def normalize_label(source_id: Source, raw_label: str) -> Label:
    """Map a source-specific label string onto the binary scheme."""
    try:
        table = LABEL_TABLES[Source(source_id)]
    except (KeyError, ValueError):
        raise UnsupportedSource(f"unknown source {source_id!r}") from None
    label = table.get(raw_label.strip().lower())
    if label is None:
        raise UnknownLabel(Source(source_id), raw_label)
    return label


def _decode(stream: bytes | str) -> str:
    if isinstance(stream, bytes):
        return stream.decode("utf-8")
    return stream


def parse_source(
    source_id: Source,
    stream: bytes | str,
    options: Optional[ParseOptions] = None,
) -> ParseResult:
    """Parse one source file into raw records.

    Rows with empty text are dropped and counted; rows with the wrong
    field count raise :class:`MalformedRow` (index counted over data
    rows, starting at 0).
    """
    options = options or ParseOptions()
    source_id = Source(source_id)
    text = _decode(stream)
    if source_id is Source.ISOT:
        return _parse_isot(text, options)
    if source_id is Source.LIAR:
        return _parse_tab_layout(
            Source.LIAR, text,
            options.liar_label_field, options.liar_statement_field,
            options.liar_expected_fields,
        )
    if source_id is Source.FAKENEWSNET:
        return _parse_fnn(Source.FAKENEWSNET, text, options)
    if source_id is Source.FNID:
        if options.fnid_layout == "fakenewsnet":
            return _parse_fnn(Source.FNID, text, options)
        return _parse_tab_layout(
            Source.FNID, text,
            options.fnid_label_field, options.fnid_statement_field,
            options.fnid_expected_fields,
        )
    raise UnsupportedSource(f"unknown source {source_id!r}")


def _parse_isot(text: str, options: ParseOptions) -> ParseResult:
    if options.isot_label not in ("true", "fake"):
        raise ValueError("ISOT parsing requires isot_label='true' or 'fake'")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    expected = ["title", "text", "subject", "date"]
    if header is None or [h.strip().lower() for h in header] != expected:
        raise MalformedRow(0, f"expected ISOT header {','.join(expected)}")
    records: list[RawRecord] = []
    dropped = 0
    for i, row in enumerate(reader):
        if not row:
            continue
        if len(row) != 4:
            raise MalformedRow(i, f"expected 4 fields, got {len(row)}")
        title, body, subject, date = (f.strip() for f in row)
        combined = f"{title}. {body}" if title and body else (title or body)
        if not combined:
            dropped += 1
            continue
        records.append(RawRecord(
            source_id=Source.ISOT,
            text=combined,
            raw_label=options.isot_label,
            extra_fields={"subject": subject, "date": date},
        ))
    return ParseResult(records, dropped)


def _parse_tab_layout(
    source: Source,
    text: str,
    label_field: int,
    statement_field: int,
    expected_fields: Optional[int],
) -> ParseResult:
    label_idx = label_field - 1
    stmt_idx = statement_field - 1
    min_fields = max(label_idx, stmt_idx) + 1
    reader = csv.reader(io.StringIO(text), delimiter="\t", quoting=csv.QUOTE_NONE)
    records: list[RawRecord] = []
    dropped = 0
    for i, row in enumerate(reader):
        if not row:
            continue
        if expected_fields is not None and len(row) != expected_fields:
            raise MalformedRow(i, f"expected {expected_fields} fields, got {len(row)}")
        if len(row) < min_fields:
            raise MalformedRow(i, f"expected at least {min_fields} fields, got {len(row)}")
        statement = row[stmt_idx].strip()
        if not statement:
            dropped += 1
            continue
        extra = {
            f"field_{j + 1}": value
            for j, value in enumerate(row)
            if j not in (label_idx, stmt_idx)
        }
        records.append(RawRecord(
            source_id=source,
            text=statement,
            raw_label=row[label_idx].strip(),
            extra_fields=extra,
        ))
    return ParseResult(records, dropped)


def _parse_fnn(source: Source, text: str, options: ParseOptions) -> ParseResult:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise MalformedRow(0, "missing header row")
    names = [h.strip() for h in header]
    try:
        text_idx = names.index(options.fnn_text_column)
        label_idx = names.index(options.fnn_label_column)
    except ValueError:
        raise MalformedRow(
            0,
            f"header lacks columns {options.fnn_text_column!r}/{options.fnn_label_column!r}",
        ) from None
    records: list[RawRecord] = []
    dropped = 0
    for i, row in enumerate(reader):
        if not row:
            continue
        if len(row) != len(names):
            raise MalformedRow(i, f"expected {len(names)} fields, got {len(row)}")
        statement = row[text_idx].strip()
        if not statement:
            dropped += 1
            continue
        extra = {
            names[j]: value
            for j, value in enumerate(row)
            if j not in (text_idx, label_idx)
        }
        records.append(RawRecord(
            source_id=source,
            text=statement,
            raw_label=row[label_idx].strip(),
            extra_fields=extra,
        ))
    return ParseResult(records, dropped)


def merge(collections: Sequence[tuple[Source, Sequence[RawRecord]]]) -> MergeResult:
    """Convert and merge parsed sources into one labeled corpus.

    Output preserves input order.  Exact (text, label) duplicates within
    one source are removed and counted; cross-source duplicates are kept.
    """
    statements: list[LabeledStatement] = []
    duplicates = 0
    for source_id, records in collections:
        source_id = Source(source_id)
        seen: set[tuple[str, Label]] = set()
        for record in records:
            label = normalize_label(source_id, record.raw_label)
            key = (record.text, label)
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
            statements.append(LabeledStatement(record.text, label, source_id))
    return MergeResult(statements, duplicates)


def _largest_remainder(size: int, ratios: Sequence[float]) -> list[int]:
    targets = [size * r for r in ratios]
    base = [math.floor(t) for t in targets]
    leftover = size - sum(base)
    order = sorted(range(len(ratios)), key=lambda i: (-(targets[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def stratified_split(
    corpus: Sequence[LabeledStatement],
    ratios: Sequence[float],
    seed: int,
) -> DataSplits:
    """Random split preserving per-(source, label) proportions.

    Allocation within each stratum uses the largest-remainder method, so
    every stratum's per-split count is within 1 of the exact
    ``ratio * stratum_size`` target.  Identical inputs and seed give an
    identical split.
    """
    if len(ratios) != 3:
        raise ValueError("exactly three split ratios are required")
    if any(r < 0 for r in ratios):
        raise ValueError("split ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)!r}")
    if not corpus:
        raise ValueError("cannot split an empty corpus")

    strata: dict[tuple[str, int], list[int]] = {}
    for i, stmt in enumerate(corpus):
        strata.setdefault((stmt.source_id.value, int(stmt.label)), []).append(i)

    nonzero = sum(1 for r in ratios if r > 0)
    rng = np.random.default_rng(seed)
    picks: list[list[int]] = [[], [], []]
    for key in sorted(strata):
        indices = strata[key]
        if len(indices) < nonzero:
            source, label = key
            raise InsufficientClassSamples(Source(source), Label(label), len(indices), nonzero)
        counts = _largest_remainder(len(indices), ratios)
        shuffled = [indices[j] for j in rng.permutation(len(indices))]
        start = 0
        for split_idx, n in enumerate(counts):
            picks[split_idx].extend(shuffled[start:start + n])
            start += n

    train, validation, evaluation = (
        [corpus[i] for i in sorted(chunk)] for chunk in picks
    )
    return DataSplits(
        train=train,
        validation=validation,
        evaluation=evaluation,
        seed=seed,
        ratios=(float(ratios[0]), float(ratios[1]), float(ratios[2])),
    )


def class_frequency(
    statements: Iterable[LabeledStatement],
    class_label: Label,
    top_n: int,
    stoplist: Optional[frozenset[str]] = None,
) -> FrequencyTable:
    """Top tokens by count for one class, on cleaned stopword-filtered text."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    if stoplist is None:
        stoplist = textprep.default_stoplist()
    counts: Counter[str] = Counter()
    for stmt in statements:
        if stmt.label != class_label:
            continue
        tokens = textprep.remove_stopwords(textprep.tokenize(textprep.clean(stmt.text)), stoplist)
        counts.update(tokens)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return FrequencyTable(class_label=Label(class_label), entries=ranked[:top_n])


# ---------------------------------------------------------------------------
# Corpus file I/O (JSONL records plus a small split manifest)
# ---------------------------------------------------------------------------

def write_corpus(statements: Iterable[LabeledStatement], path: str | Path) -> None:
    """One JSON object per line: {"text", "label", "source"}."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for stmt in statements:
            fh.write(json.dumps(
                {"text": stmt.text, "label": int(stmt.label), "source": stmt.source_id.value},
                ensure_ascii=False,
            ))
            fh.write("\n")


def read_corpus(path: str | Path) -> list[LabeledStatement]:
    statements = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            statements.append(LabeledStatement(
                text=obj["text"],
                label=Label(int(obj["label"])),
                source_id=Source(obj["source"]),
            ))
    return statements


def write_split_manifest(splits: DataSplits, path: str | Path) -> None:
    manifest = {"seed": splits.seed, "ratios": list(splits.ratios), "counts": splits.counts()}
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def read_split_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text("utf-8"))
