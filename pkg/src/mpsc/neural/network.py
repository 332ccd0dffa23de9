"""The split classification network: recurrent (or encoder) branch over
lexical features, fused with standardized syntactic counts in a dense
head with a single logistic output unit.

The forward pass is mask-aware: at padded timesteps both recurrent
layers carry their state unchanged, so the branch output is always the
hidden state at the last real token (a zero vector for empty input) and
appending padding never changes the result.  Dropout is inverted
(activations scaled by 1/keep at train time), applied to the first
layer's outputs and to the head input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..corpus import Label
from ..synfeat import N_FEATURES, ScalerParams, count_features, scale
from ..textprep import EmbeddedSequence
from .cells import (
    CellParams,
    ShapeMismatch,
    gru_step,
    gru_step_backward,
    lstm_step,
    lstm_step_backward,
    sigmoid,
)

BRANCH_TYPES = ("lstm", "gru", "encoder", "syntactic")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of one model variant.

    ``branch_type`` selects the lexical branch: two stacked LSTM or GRU
    layers, an external text-encoder adapter (pooled vector in, no
    recurrent weights), or ``"syntactic"`` for the head-only baseline
    that sees scaled counts alone.
    """

    branch_type: str
    input_dimension: int = 0
    max_len: int = 0
    layer_sizes: tuple[int, int] = (256, 128)
    head_size: int = 0  # 0 resolves to the branch default (32, encoder: 128)
    dropout: float = 0.2
    use_syntactic: bool = True

    def __post_init__(self) -> None:
        if self.branch_type not in BRANCH_TYPES:
            raise ValueError(f"branch_type must be one of {BRANCH_TYPES}")
        if self.head_size == 0:
            default = 128 if self.branch_type == "encoder" else 32
            object.__setattr__(self, "head_size", default)
        object.__setattr__(self, "layer_sizes", tuple(self.layer_sizes))
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.head_size < 1:
            raise ValueError("head_size must be positive")
        if self.branch_type in ("lstm", "gru"):
            if len(self.layer_sizes) != 2 or any(s < 1 for s in self.layer_sizes):
                raise ValueError("recurrent branches need two positive layer sizes")
            if self.input_dimension < 1 or self.max_len < 1:
                raise ValueError("recurrent branches need input_dimension and max_len")
        elif self.branch_type == "encoder":
            if self.input_dimension < 1:
                raise ValueError("encoder branch needs the pooled vector dimension")
        elif not self.use_syntactic:
            raise ValueError("the syntactic baseline requires use_syntactic=True")

    @property
    def branch_dim(self) -> int:
        if self.branch_type in ("lstm", "gru"):
            return self.layer_sizes[1]
        if self.branch_type == "encoder":
            return self.input_dimension
        return 0

    @property
    def head_input_dim(self) -> int:
        return self.branch_dim + (N_FEATURES if self.use_syntactic else 0)

    def to_dict(self) -> dict:
        return {
            "branch_type": self.branch_type,
            "input_dimension": self.input_dimension,
            "max_len": self.max_len,
            "layer_sizes": list(self.layer_sizes),
            "head_size": self.head_size,
            "dropout": self.dropout,
            "use_syntactic": self.use_syntactic,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            branch_type=d["branch_type"],
            input_dimension=int(d["input_dimension"]),
            max_len=int(d["max_len"]),
            layer_sizes=tuple(d["layer_sizes"]),
            head_size=int(d["head_size"]),
            dropout=float(d["dropout"]),
            use_syntactic=bool(d["use_syntactic"]),
        )


def _tensor_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    if config.branch_type in ("lstm", "gru"):
        gates = 4 if config.branch_type == "lstm" else 3
        h1, h2 = config.layer_sizes
        shapes["rnn1.wx"] = (config.input_dimension, gates * h1)
        shapes["rnn1.wh"] = (h1, gates * h1)
        shapes["rnn1.b"] = (gates * h1,)
        shapes["rnn2.wx"] = (h1, gates * h2)
        shapes["rnn2.wh"] = (h2, gates * h2)
        shapes["rnn2.b"] = (gates * h2,)
    shapes["head.w"] = (config.head_input_dim, config.head_size)
    shapes["head.b"] = (config.head_size,)
    shapes["out.w"] = (config.head_size, 1)
    shapes["out.b"] = (1,)
    return shapes


@dataclass
class NetworkParams:
    """All weights of one model plus the fitted syntactic scaler."""

    config: ModelConfig
    tensors: dict[str, np.ndarray]
    scaler: Optional[ScalerParams] = None

    def validate(self) -> None:
        expected = _tensor_shapes(self.config)
        if set(expected) != set(self.tensors):
            raise ShapeMismatch(
                f"tensor names {sorted(self.tensors)} != expected {sorted(expected)}"
            )
        for name, shape in expected.items():
            if tuple(self.tensors[name].shape) != shape:
                raise ShapeMismatch(
                    f"{name}: shape {self.tensors[name].shape}, expected {shape}"
                )
            if not np.all(np.isfinite(self.tensors[name])):
                raise ValueError(f"{name}: non-finite values")

    def cell(self, layer: int) -> CellParams:
        return CellParams(
            wx=self.tensors[f"rnn{layer}.wx"],
            wh=self.tensors[f"rnn{layer}.wh"],
            b=self.tensors[f"rnn{layer}.b"],
        )

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            config=self.config,
            tensors={k: v.copy() for k, v in self.tensors.items()},
            scaler=self.scaler,
        )


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    limit = np.sqrt(6.0 / (shape[0] + shape[-1]))
    return rng.uniform(-limit, limit, size=shape)


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def init_params(config: ModelConfig, seed: int) -> NetworkParams:
    """Seeded initialization: Glorot-uniform input/head weights, orthogonal
    state-to-state blocks (one per gate), zero biases."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    if config.branch_type in ("lstm", "gru"):
        gates = 4 if config.branch_type == "lstm" else 3
        dims = [(config.input_dimension, config.layer_sizes[0]),
                (config.layer_sizes[0], config.layer_sizes[1])]
        for layer, (din, h) in enumerate(dims, start=1):
            tensors[f"rnn{layer}.wx"] = _glorot(rng, (din, gates * h))
            tensors[f"rnn{layer}.wh"] = np.concatenate(
                [_orthogonal(rng, h) for _ in range(gates)], axis=1
            )
            tensors[f"rnn{layer}.b"] = np.zeros(gates * h)
    tensors["head.w"] = _glorot(rng, (config.head_input_dim, config.head_size))
    tensors["head.b"] = np.zeros(config.head_size)
    tensors["out.w"] = _glorot(rng, (config.head_size, 1))
    tensors["out.b"] = np.zeros(1)
    params = NetworkParams(config=config, tensors=tensors)
    params.validate()
    return params


def _run_layer(cell_kind: str, params: CellParams, inputs: np.ndarray,
               mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, list]:
    """Run one recurrent layer over (B, T, D) inputs with state carrying.

    Returns (outputs (B, T, H), final state (B, H), per-step caches).
    """
    batch, steps, _ = inputs.shape
    hidden = params.hidden
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    outputs = np.empty((batch, steps, hidden))
    caches = []
    for t in range(steps):
        m = mask[:, t:t + 1].astype(np.float64)
        if cell_kind == "lstm":
            h_step, c_step, cache = lstm_step(inputs[:, t, :], h, c, params)
            c = m * c_step + (1.0 - m) * c
        else:
            h_step, cache = gru_step(inputs[:, t, :], h, params)
        h = m * h_step + (1.0 - m) * h
        outputs[:, t, :] = h
        caches.append((cache, m))
    return outputs, h, caches


def _backprop_layer(cell_kind: str, params: CellParams, caches: list,
                    d_outputs: Optional[np.ndarray], d_final: Optional[np.ndarray],
                    want_dx: bool) -> tuple[Optional[np.ndarray], dict[str, np.ndarray]]:
    """BPTT through one layer.

    ``d_outputs`` carries per-timestep gradients (layer-1, feeding
    layer-2 at every step); ``d_final`` a gradient on the final state
    (layer-2, feeding the head).  Either may be None.
    """
    steps = len(caches)
    batch, hidden = (d_final if d_final is not None else d_outputs[:, 0, :]).shape
    dwx = np.zeros_like(params.wx)
    dwh = np.zeros_like(params.wh)
    db = np.zeros_like(params.b)
    dh = d_final.copy() if d_final is not None else np.zeros((batch, hidden))
    dc = np.zeros((batch, hidden))
    dx_all = np.empty((batch, steps, params.input_dim)) if want_dx else None
    for t in reversed(range(steps)):
        cache, m = caches[t]
        if d_outputs is not None:
            dh = dh + d_outputs[:, t, :]
        dh_step = dh * m
        dh_carry = dh * (1.0 - m)
        if cell_kind == "lstm":
            dc_step = dc * m
            dc_carry = dc * (1.0 - m)
            dx, dh_prev, dc_prev, g_wx, g_wh, g_b = lstm_step_backward(
                dh_step, dc_step, cache, params
            )
            dc = dc_prev + dc_carry
        else:
            dx, dh_prev, g_wx, g_wh, g_b = gru_step_backward(dh_step, cache, params)
        dwx += g_wx
        dwh += g_wh
        db += g_b
        dh = dh_prev + dh_carry
        if want_dx:
            dx_all[:, t, :] = dx
    return dx_all, {"wx": dwx, "wh": dwh, "b": db}


def forward_batch(
    params: NetworkParams,
    lex: Optional[np.ndarray] = None,
    mask: Optional[np.ndarray] = None,
    enc: Optional[np.ndarray] = None,
    syn: Optional[np.ndarray] = None,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, dict]:
    """Batched forward pass; returns (probabilities, cache for backward).

    ``lex``/``mask`` feed recurrent branches, ``enc`` the encoder branch,
    and ``syn`` must be present exactly when the config uses syntactic
    features.  Dropout fires only with ``train_mode=True`` and a
    generator supplied.
    """
    config = params.config
    if config.use_syntactic != (syn is not None):
        raise ShapeMismatch("syntactic input must be present iff use_syntactic")
    if syn is not None and (syn.ndim != 2 or syn.shape[1] != N_FEATURES):
        raise ShapeMismatch(f"syntactic input shape {syn.shape}, expected (batch, {N_FEATURES})")

    cache: dict = {"config": config}
    drop = config.dropout if train_mode else 0.0
    if drop > 0 and rng is None:
        raise ValueError("train-mode dropout requires a random generator")

    if config.branch_type in ("lstm", "gru"):
        if lex is None or mask is None:
            raise ShapeMismatch("recurrent branch requires lex and mask inputs")
        if lex.ndim != 3 or lex.shape[2] != config.input_dimension:
            raise ShapeMismatch(
                f"lexical input shape {lex.shape}, expected (batch, steps,"
                f" {config.input_dimension})"
            )
        if mask.shape != lex.shape[:2]:
            raise ShapeMismatch("mask shape must match (batch, steps)")
        out1, _, caches1 = _run_layer(config.branch_type, params.cell(1), lex, mask)
        if drop > 0:
            keep = 1.0 - drop
            dmask1 = (rng.random(out1.shape) < keep) / keep
            out1_d = out1 * dmask1
            cache["dmask1"] = dmask1
        else:
            out1_d = out1
        _, branch_out, caches2 = _run_layer(config.branch_type, params.cell(2), out1_d, mask)
        cache.update(caches1=caches1, caches2=caches2)
    elif config.branch_type == "encoder":
        if enc is None or enc.ndim != 2 or enc.shape[1] != config.input_dimension:
            raise ShapeMismatch("encoder branch requires (batch, dimension) pooled vectors")
        branch_out = enc
    else:
        branch_out = np.zeros((syn.shape[0], 0))

    head_in = np.concatenate([branch_out, syn], axis=1) if syn is not None else branch_out
    if drop > 0:
        keep = 1.0 - drop
        dmask_h = (rng.random(head_in.shape) < keep) / keep
        head_in = head_in * dmask_h
        cache["dmask_h"] = dmask_h
    pre_act = head_in @ params.tensors["head.w"] + params.tensors["head.b"]
    hidden = np.maximum(pre_act, 0.0)
    logits = (hidden @ params.tensors["out.w"] + params.tensors["out.b"]).ravel()
    probs = sigmoid(logits)
    cache.update(head_in=head_in, pre_act=pre_act, hidden=hidden, logits=logits)
    return probs, cache


def backward_batch(params: NetworkParams, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every tensor, given dloss/dlogits."""
    config = cache["config"]
    grads: dict[str, np.ndarray] = {}
    dl = dlogits[:, None]
    grads["out.w"] = cache["hidden"].T @ dl
    grads["out.b"] = dl.sum(axis=0)
    dhidden = dl @ params.tensors["out.w"].T
    dpre = dhidden * (cache["pre_act"] > 0)
    grads["head.w"] = cache["head_in"].T @ dpre
    grads["head.b"] = dpre.sum(axis=0)
    dhead_in = dpre @ params.tensors["head.w"].T
    if "dmask_h" in cache:
        dhead_in = dhead_in * cache["dmask_h"]

    branch_dim = config.branch_dim
    if config.branch_type in ("lstm", "gru"):
        dbranch = dhead_in[:, :branch_dim]
        dout1_d, g2 = _backprop_layer(
            config.branch_type, params.cell(2), cache["caches2"],
            d_outputs=None, d_final=dbranch, want_dx=True,
        )
        if "dmask1" in cache:
            dout1_d = dout1_d * cache["dmask1"]
        _, g1 = _backprop_layer(
            config.branch_type, params.cell(1), cache["caches1"],
            d_outputs=dout1_d, d_final=None, want_dx=False,
        )
        for layer, g in ((1, g1), (2, g2)):
            grads[f"rnn{layer}.wx"] = g["wx"]
            grads[f"rnn{layer}.wh"] = g["wh"]
            grads[f"rnn{layer}.b"] = g["b"]
    return grads


def forward(
    seq: EmbeddedSequence,
    syn: Optional[np.ndarray],
    params: NetworkParams,
    train_mode: bool = False,
    seed: int = 0,
) -> float:
    """Single-statement forward pass for recurrent branches."""
    rng = np.random.default_rng(seed) if train_mode else None
    syn_arr = None if syn is None else np.asarray(syn, dtype=np.float64).reshape(1, -1)
    probs, _ = forward_batch(
        params,
        lex=seq.vectors[None, :, :],
        mask=seq.mask[None, :],
        syn=syn_arr,
        train_mode=train_mode,
        rng=rng,
    )
    return float(probs[0])


DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class Prediction:
    """A classified statement; ties at the threshold count as suspicious."""

    probability_suspicious: float
    verdict: Label
    threshold: float = DEFAULT_THRESHOLD

    @classmethod
    def from_probability(cls, p: float, threshold: float = DEFAULT_THRESHOLD) -> "Prediction":
        verdict = Label.SUSPICIOUS if p >= threshold else Label.CREDIBLE
        return cls(probability_suspicious=float(p), verdict=verdict, threshold=threshold)

    def to_dict(self) -> dict:
        return {
            "probability_suspicious": self.probability_suspicious,
            "verdict": self.verdict.name.lower(),
            "threshold": self.threshold,
        }


def predict(
    text: str,
    context: Optional[str],
    params: NetworkParams,
    featurizers,
    threshold: float = DEFAULT_THRESHOLD,
) -> Prediction:
    """Classify a statement, optionally augmented with aggregated article text.

    Context extends only the lexical input; syntactic counts always
    describe the statement alone.  Inference mode: no dropout, fully
    deterministic.
    """
    config = params.config
    lexical_text = f"{text} | {context}" if context else text
    syn = None
    if config.use_syntactic:
        if params.scaler is None:
            raise ValueError("checkpoint lacks the fitted syntactic scaler")
        syn = scale(count_features(text), params.scaler).reshape(1, -1)
    if config.branch_type in ("lstm", "gru"):
        seq = featurizers.embed_text(lexical_text)
        probs, _ = forward_batch(
            params, lex=seq.vectors[None, :, :], mask=seq.mask[None, :], syn=syn
        )
    elif config.branch_type == "encoder":
        enc = featurizers.encode_text(lexical_text).reshape(1, -1)
        probs, _ = forward_batch(params, enc=enc, syn=syn)
    else:
        probs, _ = forward_batch(params, syn=syn)
    return Prediction.from_probability(float(probs[0]), threshold=threshold)
