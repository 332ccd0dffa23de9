"""Command-line surface: ingest, train, eval, check, freq.

Every option can also come from a config file (flat TOML-style
``key = value`` lines, optionally under a ``[command]`` section);
explicit flags win over the config file, which wins over built-in
defaults.  Exit codes are stable: 0 success, 1 runtime or I/O failure,
2 input-format errors.  A run manifest (JSON) records the artifacts of
file-producing commands and is written even when the command fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import evaluate as ev
from . import newsclient
from .corpus import (
    Label,
    MalformedRow,
    ParseOptions,
    Source,
    UnknownLabel,
    UnsupportedSource,
    class_frequency,
    merge,
    parse_source,
    read_corpus,
    read_split_manifest,
    stratified_split,
    write_corpus,
    write_split_manifest,
)
from .features import FeaturePipeline, HashTextEncoder, build_vocabulary
from .neural import (
    CorruptChecksum,
    FormatVersionMismatch,
    ModelConfig,
    NonFiniteLoss,
    ShapeMismatch,
    TrainConfig,
    default_batch_size,
    load_checkpoint_with_extra,
    predict,
    save_checkpoint,
    train,
)
from .querygen import EmptyQuery, build_query
from .textprep import (
    DEFAULT_MAX_LEN,
    HashEmbeddingProvider,
    TableEmbeddingProvider,
    default_stoplist,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_FORMAT = 2

DEFAULT_ENDPOINT = "https://newsapi.org/v2"

DEFAULTS: dict[str, dict] = {
    "ingest": {
        "ratios": "0.8,0.1,0.1",
        "seed": 0,
        "fnid_layout": "liar",
        "fnid_label_field": 2,
        "fnid_statement_field": 3,
        "liar_label_field": 2,
        "liar_statement_field": 3,
        "liar_expected_fields": 14,
        "fnn_text_column": "title",
        "fnn_label_column": "real",
    },
    "train": {
        "model": "lstm",
        "syntactic": "on",
        "layer_sizes": "256,128",
        "head_size": 0,
        "dropout": 0.2,
        "max_len": DEFAULT_MAX_LEN,
        "embed_dim": 32,
        "oov_buckets": 1,
        "encoder_dim": 64,
        "lr": 0.001,
        "max_epochs": 50,
        "patience": 3,
        "min_delta": 1e-4,
        "seed": 0,
    },
    "eval": {
        "seed": 0,
        "lr": 0.001,
        "max_epochs": 50,
        "report_out": "eval_report.json",
    },
    "check": {
        "policy": "statement",
        "news_mode": "fixture",
        "max_terms": 8,
        "token_budget": 256,
        "page_size": 10,
        "api_key_env": newsclient.DEFAULT_API_KEY_ENV,
        "endpoint": DEFAULT_ENDPOINT,
        "ttl": newsclient.DEFAULT_CACHE_TTL,
        "seed": 0,
    },
    "freq": {
        "top": 50,
        "seed": 0,
    },
}


class CliError(Exception):
    """Command failure with a specific exit code."""

    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


# ---------------------------------------------------------------------------
# Config file (flat TOML-style key/value subset)
# ---------------------------------------------------------------------------

def _parse_scalar(raw: str):
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    lowered = raw.lower()
    if lowered == "true":
        return True
    if lowered == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines with optional ``[section]`` headers.

    Values may be quoted strings, integers, floats, or true/false; lines
    starting with ``#`` are comments.
    """
    data: dict = {}
    section = data
    for lineno, raw_line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = data.setdefault(line[1:-1].strip(), {})
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliError(EXIT_FORMAT, f"{path}:{lineno}: expected key = value")
        section[key.strip()] = _parse_scalar(value.strip())
    return data


def _apply_config(args: argparse.Namespace, command: str) -> None:
    """Fill unset options from the config file, then from DEFAULTS."""
    config = parse_config_file(args.config) if args.config else {}
    flat = {k: v for k, v in config.items() if not isinstance(v, dict)}
    section = {**flat, **config.get(command, {})}
    lookup = {}
    for key, value in section.items():
        lookup[key.replace("-", "_")] = value
    for dest, value in vars(args).items():
        if value is not None:
            continue
        if dest in lookup:
            setattr(args, dest, lookup[dest])
        elif dest in DEFAULTS.get(command, {}):
            setattr(args, dest, DEFAULTS[command][dest])


def _parse_ratios(raw) -> tuple[float, float, float]:
    try:
        parts = [float(x) for x in str(raw).split(",")]
    except ValueError:
        raise CliError(EXIT_FORMAT, f"bad ratios {raw!r}; expected three comma-separated reals")
    if len(parts) != 3:
        raise CliError(EXIT_FORMAT, f"bad ratios {raw!r}; expected three comma-separated reals")
    return parts[0], parts[1], parts[2]


def _parse_layer_sizes(raw) -> tuple[int, int]:
    try:
        parts = [int(x) for x in str(raw).split(",")]
    except ValueError:
        parts = []
    if len(parts) != 2:
        raise CliError(EXIT_FORMAT, f"bad layer sizes {raw!r}; expected e.g. 256,128")
    return parts[0], parts[1]


def _require_files(*paths) -> None:
    for p in paths:
        if p and not Path(p).exists():
            raise CliError(EXIT_RUNTIME, f"missing input file: {p}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> dict:
    inputs: list[tuple[Source, str, Optional[str]]] = []
    if args.isot_true:
        inputs.append((Source.ISOT, args.isot_true, "true"))
    if args.isot_fake:
        inputs.append((Source.ISOT, args.isot_fake, "fake"))
    for path in args.liar or []:
        inputs.append((Source.LIAR, path, None))
    for path in args.fakenewsnet or []:
        inputs.append((Source.FAKENEWSNET, path, None))
    for path in args.fnid or []:
        inputs.append((Source.FNID, path, None))
    if not inputs:
        raise CliError(EXIT_FORMAT, "at least one dataset input is required")
    _require_files(*(path for _, path, _ in inputs))

    expected = args.liar_expected_fields
    options = ParseOptions(
        liar_label_field=int(args.liar_label_field),
        liar_statement_field=int(args.liar_statement_field),
        liar_expected_fields=None if str(expected).lower() in ("none", "") else int(expected),
        fnn_text_column=args.fnn_text_column,
        fnn_label_column=args.fnn_label_column,
        fnid_layout=args.fnid_layout,
        fnid_label_field=int(args.fnid_label_field),
        fnid_statement_field=int(args.fnid_statement_field),
    )
    collections = []
    dropped = 0
    for source, path, isot_label in inputs:
        options.isot_label = isot_label
        result = parse_source(source, Path(path).read_bytes(), options)
        print(f"{source.value}: {len(result.records)} records "
              f"({result.dropped_empty} empty dropped) from {path}", file=sys.stderr)
        dropped += result.dropped_empty
        collections.append((source, result.records))

    merged = merge(collections)
    ratios = _parse_ratios(args.ratios)
    splits = stratified_split(merged.statements, ratios, int(args.seed))

    splits_out = args.splits_out or str(Path(args.out).with_suffix("")) + ".splits.json"
    write_corpus(merged.statements, args.out)
    write_split_manifest(splits, splits_out)
    print(f"merged corpus: {len(merged.statements)} statements "
          f"({merged.duplicates_removed} duplicates removed, {dropped} empty dropped)",
          file=sys.stderr)
    print(f"splits: {splits.counts()}", file=sys.stderr)
    return {"corpus": args.out, "splits": splits_out}


def _load_splits(corpus_path, splits_path):
    if not splits_path:
        splits_path = str(Path(corpus_path).with_suffix("")) + ".splits.json"
    _require_files(corpus_path, splits_path)
    corpus = read_corpus(corpus_path)
    manifest = read_split_manifest(splits_path)
    ratios = tuple(manifest["ratios"])
    return stratified_split(corpus, ratios, int(manifest["seed"]))


def _model_display_name(config: ModelConfig) -> str:
    if config.branch_type == "syntactic":
        return "Syntactic"
    base = {"lstm": "LSTM", "gru": "GRU", "encoder": "Encoder"}[config.branch_type]
    return f"{base} + Syntactic" if config.use_syntactic else base


def cmd_train(args) -> dict:
    splits = _load_splits(args.corpus, args.splits)
    use_syntactic = str(args.syntactic).lower() in ("on", "true", "1", "yes")
    seed = int(args.seed)

    pipeline = FeaturePipeline(
        stoplist=default_stoplist(),
        max_len=int(args.max_len),
    )
    if args.model in ("lstm", "gru"):
        if args.embedding:
            _require_files(args.embedding)
            provider = TableEmbeddingProvider.from_file(args.embedding)
            provider.path = args.embedding
        else:
            vocab = build_vocabulary((s.text for s in splits.train), pipeline)
            provider = HashEmbeddingProvider(
                dimension=int(args.embed_dim),
                oov_buckets=int(args.oov_buckets),
                vocab=vocab,
                seed=seed,
            )
        pipeline.provider = provider
        input_dimension = provider.dimension
        max_len = int(args.max_len)
    else:
        pipeline.encoder = HashTextEncoder(dimension=int(args.encoder_dim), seed=seed)
        input_dimension = pipeline.encoder.dimension
        max_len = 0

    mconfig = ModelConfig(
        branch_type=args.model,
        input_dimension=input_dimension,
        max_len=max_len,
        layer_sizes=_parse_layer_sizes(args.layer_sizes),
        head_size=int(args.head_size),
        dropout=float(args.dropout),
        use_syntactic=use_syntactic,
    )
    batch_size = int(args.batch_size) if args.batch_size else default_batch_size(args.model)
    tconfig = TrainConfig(
        learning_rate=float(args.lr),
        batch_size=batch_size,
        max_epochs=int(args.max_epochs),
        patience=int(args.patience),
        min_delta=float(args.min_delta),
        seed=seed,
    )
    log.debug("training %s (batch_size=%d)", _model_display_name(mconfig), batch_size)
    params, history = train(splits, mconfig, tconfig, pipeline)

    extra = {
        "featurizers": pipeline.to_config(),
        "training": {"seed": seed, "batch_size": batch_size, "epochs_run": len(history)},
    }
    save_checkpoint(params, args.out, extra=extra)
    history_out = args.history_out or args.out + ".history.json"
    Path(history_out).write_text(
        json.dumps([h.to_dict() for h in history], indent=2) + "\n", encoding="utf-8"
    )
    best = min(history, key=lambda h: h.validation_loss)
    print(f"trained {_model_display_name(mconfig)}: {len(history)} epochs, "
          f"best validation loss {best.validation_loss:.4f} (epoch {best.epoch})",
          file=sys.stderr)
    return {"checkpoint": args.out, "history": history_out}


def _evaluate_checkpoint(ckpt_path, statements) -> ev.MetricsReport:
    params, extra = load_checkpoint_with_extra(ckpt_path)
    featurizer_config = extra.get("featurizers")
    if featurizer_config is None:
        raise CliError(EXIT_RUNTIME, f"{ckpt_path}: checkpoint lacks featurizer config")
    pipeline = FeaturePipeline.from_config(featurizer_config)
    predictions = [predict(s.text, None, params, pipeline) for s in statements]
    cm = ev.confusion(predictions, [s.label for s in statements])
    return ev.metrics(cm, model_name=_model_display_name(params.config))


def cmd_eval(args) -> dict:
    splits = _load_splits(args.corpus, args.splits)
    statements = splits.evaluation
    if not statements:
        raise CliError(EXIT_RUNTIME, "evaluation split is empty")
    checkpoints = args.ckpt or []
    if not checkpoints and not args.baseline:
        raise CliError(EXIT_FORMAT, "provide at least one --ckpt or --baseline syntactic")
    _require_files(*checkpoints)

    reports = []
    for ckpt in checkpoints:
        reports.append(_evaluate_checkpoint(ckpt, statements))
    if args.baseline == "syntactic":
        mconfig = ModelConfig(branch_type="syntactic", use_syntactic=True)
        tconfig = TrainConfig(
            learning_rate=float(args.lr),
            batch_size=64,
            max_epochs=int(args.max_epochs),
            seed=int(args.seed),
        )
        params, _ = train(splits, mconfig, tconfig, FeaturePipeline())
        predictions = [predict(s.text, None, params, FeaturePipeline()) for s in statements]
        cm = ev.confusion(predictions, [s.label for s in statements])
        reports.append(ev.metrics(cm, model_name="Syntactic"))

    report = ev.comparison_report(reports)
    sys.stdout.write(report.text)
    Path(args.report_out).write_text(report.to_json(), encoding="utf-8")
    return {"report": args.report_out}


def cmd_check(args) -> dict:
    _require_files(args.model)
    params, extra = load_checkpoint_with_extra(args.model)
    featurizer_config = extra.get("featurizers")
    if featurizer_config is None:
        raise CliError(EXIT_RUNTIME, f"{args.model}: checkpoint lacks featurizer config")
    pipeline = FeaturePipeline.from_config(featurizer_config)

    statement = args.statement
    policy_used = args.policy
    warnings: list[str] = []
    query_terms: list[str] = []
    article_count = 0
    context = None

    if args.policy == "search":
        if args.news_mode == "fixture":
            if not args.fixtures:
                raise CliError(EXIT_FORMAT, "--news-mode fixture requires --fixtures")
            _require_files(args.fixtures)
        try:
            query = build_query(statement, int(args.max_terms))
            config = newsclient.NewsSourceConfig(
                mode=args.news_mode,
                endpoint=args.endpoint,
                api_key_env=args.api_key_env,
                sources=tuple(s for s in (args.sources or "").split(",") if s),
                page_size=int(args.page_size),
                fixture_path=args.fixtures,
                cache_dir=args.cache_dir,
            )
            if args.cache_dir:
                result = newsclient.cached(query, config, ttl=float(args.ttl))
            else:
                result = newsclient.search(query, config)
            query_terms = list(query.terms)
            article_count = len(result.articles)
            warnings.extend(result.source_errors)
            warnings.extend(result.warnings)
            context = newsclient.aggregate_content(result.articles, int(args.token_budget))
            context = context or None
        except EmptyQuery:
            warnings.append("statement produced an empty query; using statement policy")
            policy_used = "statement"
        except newsclient.AuthError as err:
            warnings.append(f"news auth failed ({err}); using statement policy")
            policy_used = "statement"
        except (newsclient.TransportError, newsclient.RateLimited, OSError) as err:
            warnings.append(f"news search failed ({err}); using statement policy")
            policy_used = "statement"

    prediction = predict(statement, context, params, pipeline)
    output = {
        "statement": statement,
        "policy": policy_used,
        **prediction.to_dict(),
        "query_terms": query_terms,
        "article_count": article_count,
        "warnings": warnings,
    }
    sys.stdout.write(json.dumps(output, ensure_ascii=False) + "\n")
    for line in warnings:
        log.warning("%s", line)
    return {}


def cmd_freq(args) -> dict:
    _require_files(args.corpus)
    corpus = read_corpus(args.corpus)
    top = int(args.top)
    tables = {
        label.name.lower(): class_frequency(corpus, label, top)
        for label in (Label.CREDIBLE, Label.SUSPICIOUS)
    }
    for name, table in tables.items():
        sys.stdout.write(f"{name}\n")
        width = max([len(tok) for tok, _ in table.entries] + [5])
        for token, count in table.entries:
            sys.stdout.write(f"  {token.ljust(width)}  {count}\n")
    data = {name: [[tok, count] for tok, count in table.entries]
            for name, table in tables.items()}
    json_out = args.json_out or str(Path(args.corpus).with_suffix("")) + ".freq.json"
    Path(json_out).write_text(json.dumps(data, ensure_ascii=False, indent=2) + "\n",
                              encoding="utf-8")
    return {"frequencies": json_out}


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpsc",
        description="Multi-policy statement checker: corpus tools, training, and checking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="config file mirroring the flags")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--verbose", action="store_true")
        p.add_argument("--run-manifest", default=None,
                       help="where to write the run manifest JSON")

    p = sub.add_parser("ingest", help="parse, merge, and split the source datasets")
    common(p)
    p.add_argument("--isot-true")
    p.add_argument("--isot-fake")
    p.add_argument("--liar", action="append")
    p.add_argument("--fakenewsnet", action="append")
    p.add_argument("--fnid", action="append")
    p.add_argument("--fnid-layout", choices=("liar", "fakenewsnet"), default=None)
    p.add_argument("--fnid-label-field", type=int, default=None)
    p.add_argument("--fnid-statement-field", type=int, default=None)
    p.add_argument("--liar-label-field", type=int, default=None)
    p.add_argument("--liar-statement-field", type=int, default=None)
    p.add_argument("--liar-expected-fields", default=None,
                   help="exact field count, or 'none' to disable the check")
    p.add_argument("--fnn-text-column", default=None)
    p.add_argument("--fnn-label-column", default=None)
    p.add_argument("--ratios", default=None, help="train,validation,evaluation")
    p.add_argument("--out", required=True)
    p.add_argument("--splits-out", default=None)

    p = sub.add_parser("train", help="train one model variant")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--splits", help="split manifest (default: <corpus>.splits.json)")
    p.add_argument("--model", choices=("lstm", "gru", "encoder"), default=None)
    p.add_argument("--syntactic", choices=("on", "off"), default=None)
    p.add_argument("--layer-sizes", default=None)
    p.add_argument("--head-size", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--embedding", help="embedding table file (default: hashed vocabulary)")
    p.add_argument("--embed-dim", type=int, default=None)
    p.add_argument("--oov-buckets", type=int, default=None)
    p.add_argument("--encoder-dim", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None,
                   help="default: 32 for lstm, 64 otherwise")
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--min-delta", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--history-out", default=None)

    p = sub.add_parser("eval", help="compare checkpoints on the evaluation split")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--splits", help="split manifest (default: <corpus>.splits.json)")
    p.add_argument("--ckpt", action="append")
    p.add_argument("--baseline", choices=("syntactic",), default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--report-out", default=None)

    p = sub.add_parser("check", help="classify one statement")
    common(p)
    p.add_argument("statement")
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--policy", choices=("statement", "search"), default=None)
    p.add_argument("--news-mode", choices=("live", "fixture"), default=None)
    p.add_argument("--fixtures", help="fixture JSON for --news-mode fixture")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--api-key-env", default=None)
    p.add_argument("--sources", default=None, help="comma-separated source ids")
    p.add_argument("--page-size", type=int, default=None)
    p.add_argument("--max-terms", type=int, default=None)
    p.add_argument("--token-budget", type=int, default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--ttl", type=float, default=None)

    p = sub.add_parser("freq", help="per-class word frequency tables")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--top", type=int, default=None)
    p.add_argument("--json-out", default=None)

    return parser


_HANDLERS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "eval": cmd_eval,
    "check": cmd_check,
    "freq": cmd_freq,
}


def _default_manifest_path(args) -> Optional[str]:
    if args.run_manifest:
        return args.run_manifest
    primary = getattr(args, "out", None) or getattr(args, "report_out", None)
    return primary + ".run.json" if primary else None


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        _apply_config(args, args.command)
    except CliError as err:
        print(f"mpsc: {err}", file=sys.stderr)
        return err.exit_code

    record = {
        "command": args.command,
        "config": args.config,
        "seed": getattr(args, "seed", None),
        "started_at": datetime.now(timezone.utc).isoformat(),
        "artifacts": {},
        "error": None,
    }
    exit_code = EXIT_OK
    try:
        record["artifacts"] = _HANDLERS[args.command](args) or {}
    except CliError as err:
        record["error"] = str(err)
        exit_code = err.exit_code
    except (MalformedRow, UnknownLabel, UnsupportedSource) as err:
        record["error"] = f"{type(err).__name__}: {err}"
        exit_code = EXIT_FORMAT
    except (CorruptChecksum, FormatVersionMismatch, NonFiniteLoss, ShapeMismatch,
            ev.EmptyInput, ValueError, OSError) as err:
        record["error"] = f"{type(err).__name__}: {err}"
        exit_code = EXIT_RUNTIME
    record["finished_at"] = datetime.now(timezone.utc).isoformat()
    if record["error"]:
        print(f"mpsc: {record['error']}", file=sys.stderr)

    manifest_path = _default_manifest_path(args)
    if manifest_path:
        try:
            Path(manifest_path).write_text(json.dumps(record, indent=2) + "\n",
                                           encoding="utf-8")
        except OSError as err:  # manifest failure must not mask the real outcome
            log.warning("could not write run manifest %s: %s", manifest_path, err)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
