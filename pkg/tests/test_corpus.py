import json
from collections import Counter

import pytest

from mpsc.corpus import (
    DataSplits,
    InsufficientClassSamples,
    Label,
    LabeledStatement,
    MalformedRow,
    ParseOptions,
    RawRecord,
    Source,
    UnknownLabel,
    UnsupportedSource,
    class_frequency,
    merge,
    normalize_label,
    parse_source,
    read_corpus,
    read_split_manifest,
    stratified_split,
    write_corpus,
    write_split_manifest,
)

ISOT_SAMPLE = (
    "title,text,subject,date\n"
    'Budget approved,"The council, meeting Tuesday, approved it.",politics,"May 1, 2017"\n'
    "Empty body,,politics,2017\n"
    ",,politics,2017\n"
)

LIAR_ROW = (
    "1.json\thalf-true\tSome statement here.\tsubject\tspeaker\tjob\tstate\tparty"
    "\t0\t1\t2\t3\t4\tcontext\n"
)


class TestParseIsot:
    def test_title_joined_with_body(self):
        result = parse_source(Source.ISOT, ISOT_SAMPLE.encode(),
                              ParseOptions(isot_label="fake"))
        assert result.records[0].text == "Budget approved. The council, meeting Tuesday, approved it."
        assert result.records[0].raw_label == "fake"
        assert result.records[0].extra_fields == {"subject": "politics", "date": "May 1, 2017"}

    def test_title_only_row_kept_and_empty_dropped(self):
        result = parse_source(Source.ISOT, ISOT_SAMPLE.encode(),
                              ParseOptions(isot_label="true"))
        assert [r.text for r in result.records] == [
            "Budget approved. The council, meeting Tuesday, approved it.",
            "Empty body",
        ]
        assert result.dropped_empty == 1

    def test_wrong_field_count(self):
        stream = "title,text,subject,date\na,b,c\n"
        with pytest.raises(MalformedRow) as err:
            parse_source(Source.ISOT, stream, ParseOptions(isot_label="true"))
        assert err.value.row_index == 0

    def test_missing_header(self):
        with pytest.raises(MalformedRow):
            parse_source(Source.ISOT, "a,b,c,d\n", ParseOptions(isot_label="true"))

    def test_requires_variant_label(self):
        with pytest.raises(ValueError):
            parse_source(Source.ISOT, ISOT_SAMPLE)


class TestParseLiar:
    def test_field_extraction(self):
        result = parse_source(Source.LIAR, LIAR_ROW.encode())
        record = result.records[0]
        assert record.raw_label == "half-true"
        assert record.text == "Some statement here."
        assert record.extra_fields["field_1"] == "1.json"

    def test_wrong_field_count(self):
        with pytest.raises(MalformedRow) as err:
            parse_source(Source.LIAR, "a\tb\tc\n")
        assert "expected 14 fields" in str(err.value)

    def test_configurable_field_count_disabled(self):
        options = ParseOptions(liar_expected_fields=None)
        result = parse_source(Source.LIAR, "id\ttrue\tA claim.\textra\n", options)
        assert result.records[0].text == "A claim."

    def test_empty_statement_dropped(self):
        row = "1.json\ttrue\t\ts\tsp\tj\tst\tp\t0\t0\t0\t0\t0\tc\n"
        result = parse_source(Source.LIAR, row, ParseOptions())
        assert result.records == [] and result.dropped_empty == 1


class TestParseFakeNewsNet:
    SAMPLE = 'id,title,news_url,real\n1,"A title, with comma",url,1\n2,Other title,url,0\n'

    def test_columns(self):
        result = parse_source(Source.FAKENEWSNET, self.SAMPLE)
        assert result.records[0].text == "A title, with comma"
        assert result.records[0].raw_label == "1"
        assert result.records[1].raw_label == "0"

    def test_missing_column(self):
        with pytest.raises(MalformedRow):
            parse_source(Source.FAKENEWSNET, "id,headline\n1,x\n")

    def test_configurable_columns(self):
        options = ParseOptions(fnn_text_column="headline", fnn_label_column="verdict")
        result = parse_source(Source.FAKENEWSNET, "headline,verdict\nSome text,real\n", options)
        assert result.records[0].text == "Some text"
        assert result.records[0].raw_label == "real"


class TestParseFnid:
    def test_liar_layout_default(self):
        result = parse_source(Source.FNID, "id\tfalse\tA thing happened.\t2020\n")
        assert result.records[0].raw_label == "false"
        assert result.records[0].text == "A thing happened."

    def test_fakenewsnet_layout(self):
        options = ParseOptions(fnid_layout="fakenewsnet")
        result = parse_source(Source.FNID, "id,title,real\n1,Claim text,0\n", options)
        assert result.records[0].text == "Claim text"
        assert result.records[0].raw_label == "0"


class TestNormalizeLabel:
    LIAR_TABLE = {
        "true": Label.CREDIBLE,
        "mostly-true": Label.CREDIBLE,
        "half-true": Label.SUSPICIOUS,
        "barely-true": Label.SUSPICIOUS,
        "false": Label.SUSPICIOUS,
        "pants-fire": Label.SUSPICIOUS,
    }

    def test_full_liar_table(self):
        for raw, expected in self.LIAR_TABLE.items():
            assert normalize_label(Source.LIAR, raw) is expected

    def test_exactly_two_liar_classes_credible(self):
        credible = [raw for raw in self.LIAR_TABLE
                    if normalize_label(Source.LIAR, raw) is Label.CREDIBLE]
        assert sorted(credible) == ["mostly-true", "true"]

    def test_case_insensitive(self):
        assert normalize_label(Source.LIAR, "Mostly-True") is Label.CREDIBLE
        assert normalize_label(Source.ISOT, "FAKE") is Label.SUSPICIOUS

    def test_isot_and_fakenewsnet(self):
        assert normalize_label(Source.ISOT, "true") is Label.CREDIBLE
        assert normalize_label(Source.ISOT, "fake") is Label.SUSPICIOUS
        assert normalize_label(Source.FAKENEWSNET, "real") is Label.CREDIBLE
        assert normalize_label(Source.FAKENEWSNET, "1") is Label.CREDIBLE
        assert normalize_label(Source.FAKENEWSNET, "fake") is Label.SUSPICIOUS
        assert normalize_label(Source.FAKENEWSNET, "0") is Label.SUSPICIOUS

    def test_fnid_accepts_both_vocabularies(self):
        assert normalize_label(Source.FNID, "pants-fire") is Label.SUSPICIOUS
        assert normalize_label(Source.FNID, "real") is Label.CREDIBLE

    def test_unknown_label(self):
        with pytest.raises(UnknownLabel):
            normalize_label(Source.LIAR, "somewhat-true")

    def test_unknown_source(self):
        with pytest.raises(UnsupportedSource):
            normalize_label("tabloid", "true")


def _record(source, text, label):
    return RawRecord(source_id=source, text=text, raw_label=label)


class TestMerge:
    def test_counts_add_up(self):
        isot = [_record(Source.ISOT, f"article {i}", "true") for i in range(3)]
        liar = [_record(Source.LIAR, f"claim {i}", "false") for i in range(2)]
        merged = merge([(Source.ISOT, isot), (Source.LIAR, liar)])
        assert len(merged.statements) == 5
        assert merged.duplicates_removed == 0

    def test_order_stable(self):
        isot = [_record(Source.ISOT, "a", "true"), _record(Source.ISOT, "b", "fake")]
        merged = merge([(Source.ISOT, isot)])
        assert [s.text for s in merged.statements] == ["a", "b"]

    def test_within_source_dedup(self):
        records = [_record(Source.LIAR, "same claim", "false")] * 2
        merged = merge([(Source.LIAR, records)])
        assert len(merged.statements) == 1
        assert merged.duplicates_removed == 1

    def test_same_text_different_label_kept(self):
        records = [_record(Source.LIAR, "claim", "false"), _record(Source.LIAR, "claim", "true")]
        merged = merge([(Source.LIAR, records)])
        assert len(merged.statements) == 2

    def test_cross_source_duplicates_kept(self):
        merged = merge([
            (Source.LIAR, [_record(Source.LIAR, "claim", "false")]),
            (Source.FNID, [_record(Source.FNID, "claim", "false")]),
        ])
        assert len(merged.statements) == 2
        assert merged.duplicates_removed == 0

    def test_empty_input(self):
        assert merge([]).statements == []

    def test_propagates_unknown_label(self):
        with pytest.raises(UnknownLabel):
            merge([(Source.LIAR, [_record(Source.LIAR, "x", "bogus")])])


def _corpus(strata):
    """strata: iterable of (source, label, count)."""
    statements = []
    for source, label, count in strata:
        for i in range(count):
            statements.append(LabeledStatement(
                text=f"{source.value} {label.name} {i}", label=label, source_id=source,
            ))
    return statements


def _splits_as_json(splits: DataSplits) -> bytes:
    payload = {
        name: [(s.text, int(s.label), s.source_id.value) for s in getattr(splits, name)]
        for name in ("train", "validation", "evaluation")
    }
    return json.dumps(payload, sort_keys=True).encode()


class TestStratifiedSplit:
    def test_single_stratum_exact(self):
        corpus = _corpus([(Source.LIAR, Label.SUSPICIOUS, 100)])
        splits = stratified_split(corpus, (0.8, 0.1, 0.1), seed=1)
        assert splits.counts() == {"train": 80, "validation": 10, "evaluation": 10}

    def test_disjoint_and_exhaustive(self):
        corpus = _corpus([
            (Source.LIAR, Label.SUSPICIOUS, 37),
            (Source.LIAR, Label.CREDIBLE, 23),
            (Source.ISOT, Label.SUSPICIOUS, 11),
        ])
        splits = stratified_split(corpus, (0.6, 0.2, 0.2), seed=3)
        everything = splits.train + splits.validation + splits.evaluation
        assert len(everything) == len(corpus)
        assert Counter((s.text for s in everything)) == Counter(s.text for s in corpus)

    def test_per_stratum_bound(self):
        corpus = _corpus([
            (Source.LIAR, Label.SUSPICIOUS, 37),
            (Source.FNID, Label.CREDIBLE, 10),
            (Source.ISOT, Label.SUSPICIOUS, 401),
        ])
        ratios = (0.73, 0.17, 0.10)
        splits = stratified_split(corpus, ratios, seed=5)
        for source, label, count in [(Source.LIAR, Label.SUSPICIOUS, 37),
                                     (Source.FNID, Label.CREDIBLE, 10),
                                     (Source.ISOT, Label.SUSPICIOUS, 401)]:
            for ratio, part in zip(ratios, (splits.train, splits.validation, splits.evaluation)):
                got = sum(1 for s in part if s.source_id is source and s.label is label)
                assert abs(got - ratio * count) < 1.0

    def test_deterministic(self):
        corpus = _corpus([(Source.LIAR, Label.SUSPICIOUS, 50), (Source.LIAR, Label.CREDIBLE, 50)])
        a = stratified_split(corpus, (0.8, 0.1, 0.1), seed=9)
        b = stratified_split(corpus, (0.8, 0.1, 0.1), seed=9)
        assert _splits_as_json(a) == _splits_as_json(b)

    def test_seed_changes_assignment(self):
        corpus = _corpus([(Source.LIAR, Label.SUSPICIOUS, 200)])
        a = stratified_split(corpus, (0.5, 0.25, 0.25), seed=1)
        b = stratified_split(corpus, (0.5, 0.25, 0.25), seed=2)
        assert _splits_as_json(a) != _splits_as_json(b)

    def test_invariants_on_random_corpora(self):
        import numpy as np

        rng = np.random.default_rng(31)
        sources = list(Source)
        for trial in range(20):
            strata = []
            for source in sources[:int(rng.integers(1, 5))]:
                for label in (Label.CREDIBLE, Label.SUSPICIOUS):
                    count = int(rng.integers(3, 120))
                    strata.append((source, label, count))
            corpus = _corpus(strata)
            raw = rng.dirichlet([2.0, 1.0, 1.0])
            ratios = tuple(float(r) for r in raw / raw.sum())
            splits = stratified_split(corpus, ratios, seed=trial)
            parts = (splits.train, splits.validation, splits.evaluation)
            combined = [s.text for p in parts for s in p]
            assert Counter(combined) == Counter(s.text for s in corpus)
            assert len(set(combined)) == len(combined)  # pairwise disjoint
            for source, label, count in strata:
                for ratio, part in zip(ratios, parts):
                    got = sum(1 for s in part
                              if s.source_id is source and s.label is label)
                    assert abs(got - ratio * count) < 1.0

    def test_insufficient_stratum(self):
        corpus = _corpus([(Source.LIAR, Label.SUSPICIOUS, 2)])
        with pytest.raises(InsufficientClassSamples):
            stratified_split(corpus, (0.8, 0.1, 0.1), seed=1)

    def test_zero_ratio_split_allowed(self):
        corpus = _corpus([(Source.LIAR, Label.SUSPICIOUS, 2)])
        splits = stratified_split(corpus, (0.5, 0.5, 0.0), seed=1)
        assert splits.counts() == {"train": 1, "validation": 1, "evaluation": 0}

    def test_bad_ratios(self):
        corpus = _corpus([(Source.LIAR, Label.SUSPICIOUS, 10)])
        with pytest.raises(ValueError):
            stratified_split(corpus, (0.8, 0.1, 0.2), seed=1)
        with pytest.raises(ValueError):
            stratified_split(corpus, (0.8, 0.2), seed=1)
        with pytest.raises(ValueError):
            stratified_split([], (0.8, 0.1, 0.1), seed=1)


class TestClassFrequency:
    def test_hand_counted_toy(self):
        statements = [
            LabeledStatement("tax tax plan", Label.SUSPICIOUS, Source.LIAR),
            LabeledStatement("tax cut", Label.SUSPICIOUS, Source.LIAR),
        ]
        table = class_frequency(statements, Label.SUSPICIOUS, top_n=2,
                                stoplist=frozenset())
        assert table.entries == [("tax", 3), ("cut", 1)]

    def test_ties_broken_lexicographically(self):
        statements = [LabeledStatement("beta alpha", Label.CREDIBLE, Source.LIAR)]
        table = class_frequency(statements, Label.CREDIBLE, top_n=5, stoplist=frozenset())
        assert table.entries == [("alpha", 1), ("beta", 1)]

    def test_empty_class(self):
        statements = [LabeledStatement("text", Label.CREDIBLE, Source.LIAR)]
        assert class_frequency(statements, Label.SUSPICIOUS, 3, frozenset()).entries == []

    def test_top_n_larger_than_vocab(self):
        statements = [LabeledStatement("one two", Label.CREDIBLE, Source.LIAR)]
        table = class_frequency(statements, Label.CREDIBLE, top_n=10, stoplist=frozenset())
        assert len(table.entries) == 2

    def test_matches_brute_force_token_count(self):
        from mpsc import textprep

        statements = [
            LabeledStatement("The tax plan; the TAX cut!", Label.SUSPICIOUS, Source.LIAR),
            LabeledStatement("A plan for water, and roads.", Label.SUSPICIOUS, Source.ISOT),
            LabeledStatement("ignored credible text", Label.CREDIBLE, Source.ISOT),
        ]
        stoplist = textprep.default_stoplist()
        counts = Counter()
        for s in statements:
            if s.label is Label.SUSPICIOUS:
                toks = [t for t in textprep.tokenize(textprep.clean(s.text))
                        if t not in stoplist]
                counts.update(toks)
        table = class_frequency(statements, Label.SUSPICIOUS, top_n=100)
        assert dict(table.entries) == dict(counts)

    def test_rejects_bad_top_n(self):
        with pytest.raises(ValueError):
            class_frequency([], Label.CREDIBLE, 0)


class TestCorpusIO:
    def test_jsonl_round_trip(self, tmp_path):
        statements = [
            LabeledStatement("first, with comma", Label.CREDIBLE, Source.ISOT),
            LabeledStatement("unicode é世", Label.SUSPICIOUS, Source.FNID),
        ]
        path = tmp_path / "corpus.jsonl"
        write_corpus(statements, path)
        lines = path.read_text("utf-8").splitlines()
        assert json.loads(lines[0]) == {"text": "first, with comma", "label": 0, "source": "isot"}
        assert read_corpus(path) == statements

    def test_split_manifest_round_trip(self, tmp_path):
        corpus = _corpus([(Source.LIAR, Label.SUSPICIOUS, 10)])
        splits = stratified_split(corpus, (0.8, 0.1, 0.1), seed=7)
        path = tmp_path / "splits.json"
        write_split_manifest(splits, path)
        manifest = read_split_manifest(path)
        assert manifest["seed"] == 7
        assert manifest["counts"] == splits.counts()
        assert manifest["ratios"] == [0.8, 0.1, 0.1]
