"""Training loop: Adam on binary cross-entropy with early stopping.

Each epoch shuffles the training set with the seeded generator, runs
train-mode batches (dropout on), then measures validation loss in
inference mode.  Training stops once validation loss has not improved
by more than ``min_delta`` for ``patience`` consecutive epochs, and the
weights from the best validation epoch are returned.  Everything is
deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..corpus import DataSplits, LabeledStatement
from ..synfeat import count_features, fit_scaler
from .network import ModelConfig, NetworkParams, backward_batch, forward_batch, init_params

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


class EmptySplit(ValueError):
    """Training requires non-empty train and validation splits."""


class NonFiniteLoss(RuntimeError):
    """Loss became NaN/inf; training aborted."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


def default_batch_size(branch_type: str) -> int:
    """32 for the LSTM variant, 64 for GRU and the encoder adapter."""
    return 32 if branch_type == "lstm" else 64


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 3
    min_delta: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs, and patience must be >= 1")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    validation_loss: float
    validation_accuracy: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "validation_loss": self.validation_loss,
            "validation_accuracy": self.validation_accuracy,
        }


def bce_from_logits(logits: np.ndarray, targets: np.ndarray) -> float:
    """Mean binary cross-entropy computed stably from logits."""
    per_sample = np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))
    return float(per_sample.mean())


class Adam:
    """Standard Adam with bias correction; state is per tensor name."""

    def __init__(self, learning_rate: float,
                 beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                 epsilon: float = ADAM_EPSILON):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name in sorted(grads):
            g = grads[name]
            if name not in self._m:
                self._m[name] = np.zeros_like(g)
                self._v[name] = np.zeros_like(g)
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            tensors[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


@dataclass
class _Featurized:
    lex: Optional[np.ndarray]
    mask: Optional[np.ndarray]
    enc: Optional[np.ndarray]
    syn: Optional[np.ndarray]
    labels: np.ndarray

    def take(self, idx: np.ndarray) -> "_Featurized":
        pick = lambda a: None if a is None else a[idx]
        return _Featurized(pick(self.lex), pick(self.mask), pick(self.enc),
                           pick(self.syn), self.labels[idx])

    def __len__(self) -> int:
        return len(self.labels)


def _featurize(statements: list[LabeledStatement], config: ModelConfig, featurizers,
               scaler) -> _Featurized:
    n = len(statements)
    lex = mask = enc = syn = None
    if config.branch_type in ("lstm", "gru"):
        lex = np.zeros((n, config.max_len, config.input_dimension))
        mask = np.zeros((n, config.max_len), dtype=bool)
        for i, stmt in enumerate(statements):
            seq = featurizers.embed_text(stmt.text)
            lex[i] = seq.vectors
            mask[i] = seq.mask
    elif config.branch_type == "encoder":
        enc = np.stack([featurizers.encode_text(stmt.text) for stmt in statements])
    if config.use_syntactic:
        counts = np.stack([count_features(stmt.text).as_array() for stmt in statements])
        syn = scaler.transform(counts)
    labels = np.array([float(stmt.label) for stmt in statements])
    return _Featurized(lex=lex, mask=mask, enc=enc, syn=syn, labels=labels)


def _evaluate_split(params: NetworkParams, data: _Featurized,
                    batch_size: int) -> tuple[float, float]:
    total_loss = 0.0
    correct = 0
    for start in range(0, len(data), batch_size):
        batch = data.take(np.arange(start, min(start + batch_size, len(data))))
        probs, cache = forward_batch(
            params, lex=batch.lex, mask=batch.mask, enc=batch.enc, syn=batch.syn
        )
        logits = cache["logits"]
        per = np.maximum(logits, 0.0) - logits * batch.labels + np.log1p(np.exp(-np.abs(logits)))
        total_loss += float(per.sum())
        correct += int(((probs >= 0.5) == (batch.labels >= 0.5)).sum())
    return total_loss / len(data), correct / len(data)


def train(
    splits: DataSplits,
    mconfig: ModelConfig,
    tconfig: TrainConfig,
    featurizers,
) -> tuple[NetworkParams, list[EpochStats]]:
    """Fit the model on splits.train, early-stopping on splits.validation.

    The syntactic scaler is fitted on the training split only and frozen
    into the returned parameters.  Training metrics in the history are
    averages over the train-mode batches of each epoch.
    """
    if not splits.train or not splits.validation:
        raise EmptySplit("train and validation splits must be non-empty")

    scaler = None
    if mconfig.use_syntactic:
        scaler = fit_scaler([count_features(s.text) for s in splits.train])
    train_data = _featurize(splits.train, mconfig, featurizers, scaler)
    val_data = _featurize(splits.validation, mconfig, featurizers, scaler)

    params = init_params(mconfig, tconfig.seed)
    params.scaler = scaler
    optimizer = Adam(tconfig.learning_rate)
    rng = np.random.default_rng(tconfig.seed)

    history: list[EpochStats] = []
    best_loss = np.inf
    best_tensors = {k: v.copy() for k, v in params.tensors.items()}
    epochs_without_improvement = 0

    n = len(train_data)
    for epoch in range(1, tconfig.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        epoch_correct = 0
        for batch_index, start in enumerate(range(0, n, tconfig.batch_size)):
            batch = train_data.take(order[start:start + tconfig.batch_size])
            probs, cache = forward_batch(
                params, lex=batch.lex, mask=batch.mask, enc=batch.enc, syn=batch.syn,
                train_mode=True, rng=rng,
            )
            loss = bce_from_logits(cache["logits"], batch.labels)
            if not np.isfinite(loss):
                raise NonFiniteLoss(epoch, batch_index)
            dlogits = (probs - batch.labels) / len(batch)
            grads = backward_batch(params, cache, dlogits)
            optimizer.step(params.tensors, grads)
            epoch_loss += loss * len(batch)
            epoch_correct += int(((probs >= 0.5) == (batch.labels >= 0.5)).sum())

        val_loss, val_accuracy = _evaluate_split(params, val_data, tconfig.batch_size)
        history.append(EpochStats(
            epoch=epoch,
            train_loss=epoch_loss / n,
            train_accuracy=epoch_correct / n,
            validation_loss=val_loss,
            validation_accuracy=val_accuracy,
        ))
        if best_loss - val_loss > tconfig.min_delta:
            best_loss = val_loss
            best_tensors = {k: v.copy() for k, v in params.tensors.items()}
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= tconfig.patience:
                break

    params.tensors = best_tensors
    return params, history
