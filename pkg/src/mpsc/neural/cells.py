"""Recurrent cell math: gated steps and their exact backward passes.

Both cells operate on batches: inputs are ``(batch, input_dim)`` and
states ``(batch, hidden)``.  Gate weights are packed column-wise into
single matrices (LSTM order i, f, g, o; GRU order z, r, n) so one GEMM
covers all gates per step.  Every forward returns a cache consumed by
the matching backward, which is verified against central finite
differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeMismatch(ValueError):
    """Tensor shapes are inconsistent with the cell parameters."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class CellParams:
    """Packed gate weights of one recurrent layer.

    ``wx``: (input_dim, gates * hidden), ``wh``: (hidden, gates * hidden),
    ``b``: (gates * hidden,) where gates is 4 for LSTM and 3 for GRU.
    """

    wx: np.ndarray
    wh: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.wh.shape[0]

    @property
    def input_dim(self) -> int:
        return self.wx.shape[0]

    def check(self, gates: int) -> None:
        h = self.hidden
        if self.wx.shape[1] != gates * h or self.wh.shape != (h, gates * h):
            raise ShapeMismatch(
                f"gate weights inconsistent: wx {self.wx.shape}, wh {self.wh.shape}"
            )
        if self.b.shape != (gates * h,):
            raise ShapeMismatch(f"bias shape {self.b.shape}, expected ({gates * h},)")


def _check_step_shapes(x: np.ndarray, states: tuple[np.ndarray, ...], params: CellParams,
                       gates: int) -> None:
    params.check(gates)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ShapeMismatch(f"input shape {x.shape}, expected (batch, {params.input_dim})")
    for s in states:
        if s.shape != (x.shape[0], params.hidden):
            raise ShapeMismatch(f"state shape {s.shape}, expected ({x.shape[0]}, {params.hidden})")


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

def lstm_step(x: np.ndarray, h: np.ndarray, c: np.ndarray, params: CellParams):
    """One LSTM step; returns (h', c', cache)."""
    _check_step_shapes(x, (h, c), params, gates=4)
    n = params.hidden
    a = x @ params.wx + h @ params.wh + params.b
    i = sigmoid(a[:, :n])
    f = sigmoid(a[:, n:2 * n])
    g = np.tanh(a[:, 2 * n:3 * n])
    o = sigmoid(a[:, 3 * n:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    cache = (x, h, c, i, f, g, o, tc)
    return h_new, c_new, cache


def lstm_step_backward(dh: np.ndarray, dc: np.ndarray, cache, params: CellParams):
    """Backward through one LSTM step.

    Returns (dx, dh_prev, dc_prev, dwx, dwh, db) for the gradients of the
    incoming dh/dc with respect to inputs, previous state, and weights.
    """
    x, h, c, i, f, g, o, tc = cache
    do = dh * tc
    dc_total = dc + dh * o * (1.0 - tc * tc)
    df = dc_total * c
    di = dc_total * g
    dg = dc_total * i
    dc_prev = dc_total * f
    da = np.concatenate(
        [
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ],
        axis=1,
    )
    dwx = x.T @ da
    dwh = h.T @ da
    db = da.sum(axis=0)
    dx = da @ params.wx.T
    dh_prev = da @ params.wh.T
    return dx, dh_prev, dc_prev, dwx, dwh, db


def lstm_cell_step(x: np.ndarray, h: np.ndarray, c: np.ndarray, params: CellParams):
    """Public step: (h', c') without the backward cache."""
    h_new, c_new, _ = lstm_step(x, h, c, params)
    return h_new, c_new


# ---------------------------------------------------------------------------
# GRU
# ---------------------------------------------------------------------------

def gru_step(x: np.ndarray, h: np.ndarray, params: CellParams):
    """One GRU step; returns (h', cache).

    The candidate's recurrent term uses the reset-gated state, and the
    update gate weights the candidate: ``h' = (1 - z) * h + z * n``.
    """
    _check_step_shapes(x, (h,), params, gates=3)
    k = params.hidden
    ax = x @ params.wx + params.b
    ah = h @ params.wh[:, :2 * k]
    z = sigmoid(ax[:, :k] + ah[:, :k])
    r = sigmoid(ax[:, k:2 * k] + ah[:, k:])
    rh = r * h
    n = np.tanh(ax[:, 2 * k:] + rh @ params.wh[:, 2 * k:])
    h_new = (1.0 - z) * h + z * n
    cache = (x, h, z, r, rh, n)
    return h_new, cache


def gru_step_backward(dh: np.ndarray, cache, params: CellParams):
    """Backward through one GRU step: (dx, dh_prev, dwx, dwh, db)."""
    x, h, z, r, rh, n = cache
    k = params.hidden
    dz = dh * (n - h)
    dn = dh * z
    dh_prev = dh * (1.0 - z)

    dan = dn * (1.0 - n * n)
    drh = dan @ params.wh[:, 2 * k:].T
    dr = drh * h
    dh_prev = dh_prev + drh * r

    daz = dz * z * (1.0 - z)
    dar = dr * r * (1.0 - r)
    da = np.concatenate([daz, dar, dan], axis=1)

    dwx = x.T @ da
    db = da.sum(axis=0)
    dwh = np.empty_like(params.wh)
    dwh[:, :k] = h.T @ daz
    dwh[:, k:2 * k] = h.T @ dar
    dwh[:, 2 * k:] = rh.T @ dan
    dx = da @ params.wx.T
    dh_prev = dh_prev + daz @ params.wh[:, :k].T + dar @ params.wh[:, k:2 * k].T
    return dx, dh_prev, dwx, dwh, db


def gru_cell_step(x: np.ndarray, h: np.ndarray, params: CellParams) -> np.ndarray:
    """Public step: h' without the backward cache."""
    h_new, _ = gru_step(x, h, params)
    return h_new
