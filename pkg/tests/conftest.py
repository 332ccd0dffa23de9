from pathlib import Path

import pytest

from mpsc.cli import main

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def toy_artifacts(tmp_path_factory):
    """One small end-to-end ingest + train over the bundled toy datasets.

    Session-scoped so the CLI tests that need a checkpoint do not retrain.
    """
    workdir = tmp_path_factory.mktemp("toy_run")
    corpus = workdir / "corpus.jsonl"
    splits = workdir / "corpus.splits.json"
    ckpt = workdir / "model.ckpt"
    rc = main([
        "ingest",
        "--isot-true", str(DATA_DIR / "isot_true.csv"),
        "--isot-fake", str(DATA_DIR / "isot_fake.csv"),
        "--liar", str(DATA_DIR / "liar_train.tsv"),
        "--fakenewsnet", str(DATA_DIR / "fakenewsnet.csv"),
        "--fnid", str(DATA_DIR / "fnid_train.tsv"),
        "--ratios", "0.7,0.15,0.15",
        "--seed", "42",
        "--out", str(corpus),
    ])
    assert rc == 0, "toy ingest failed"
    rc = main([
        "train",
        "--corpus", str(corpus),
        "--splits", str(splits),
        "--model", "gru",
        "--syntactic", "on",
        "--layer-sizes", "12,8",
        "--embed-dim", "12",
        "--max-len", "24",
        "--lr", "0.01",
        "--batch-size", "8",
        "--max-epochs", "5",
        "--seed", "42",
        "--out", str(ckpt),
    ])
    assert rc == 0, "toy train failed"
    return {
        "dir": workdir,
        "corpus": corpus,
        "splits": splits,
        "checkpoint": ckpt,
        "history": Path(str(ckpt) + ".history.json"),
    }
