"""Two-layer LSTM regressor in NumPy with hand-written BPTT.

A window of ``m`` scalars is fed one value per time step through layer 1,
whose output sequence drives layer 2; the last hidden state of layer 2 goes
through a dense unit to give one prediction. Gate blocks are stored in the
order input, forget, output, candidate.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, HistoryTooShort, NonFiniteLoss
from .series import LagDataset

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CLIP_NORM = 5.0
MIN_IMPROVEMENT = 1e-6
TRAIN_DTYPE = np.float32

PARAM_NAMES = ("W1", "U1", "b1", "W2", "U2", "b2", "Wd", "bd")


@dataclass(frozen=True)
class LSTMConfig:
    m: int
    hidden1: int
    hidden2: int
    dropout: float = 0.0
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 150
    seed: int = 0
    patience: int = 20

    def __post_init__(self):
        for name in ("m", "hidden1", "hidden2", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


@dataclass
class LSTMModel:
    """Parameters (``W*`` input weights, ``U*`` recurrent weights) plus the config."""

    config: LSTMConfig
    params: dict

    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self) -> "LSTMModel":
        return LSTMModel(self.config, {k: v.copy() for k, v in self.params.items()})

    def to_json(self) -> str:
        record = {
            "config": asdict(self.config),
            "params": {
                k: {"shape": list(v.shape), "data": [float(x) for x in v.ravel()]}
                for k, v in self.params.items()
            },
        }
        return json.dumps(record)

    @classmethod
    def from_json(cls, text: str) -> "LSTMModel":
        record = json.loads(text)
        params = {
            k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
            for k, v in record["params"].items()
        }
        return cls(LSTMConfig(**record["config"]), params)

    def predict(self, windows) -> np.ndarray:
        X = np.atleast_2d(np.asarray(windows, dtype=np.float64))
        if X.shape[1] != self.config.m:
            raise DimensionMismatch(f"windows must have length {self.config.m}")
        yhat, _ = _forward(self.params, X, None, None)
        return yhat


@dataclass
class TrainReport:
    losses: list = field(default_factory=list)
    epochs_run: int = 0
    stopped_early: bool = False

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else math.nan


def init_model(config: LSTMConfig) -> LSTMModel:
    """Uniform(-k, k) weights with k = 1/sqrt(fan_in); forget-gate biases set to 1."""
    rng = np.random.default_rng(config.seed)
    h1, h2 = config.hidden1, config.hidden2

    def uni(fan_in, shape):
        k = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-k, k, size=shape)

    params = {
        "W1": uni(1 + h1, (1, 4 * h1)),
        "U1": uni(1 + h1, (h1, 4 * h1)),
        "b1": uni(1 + h1, (4 * h1,)),
        "W2": uni(h1 + h2, (h1, 4 * h2)),
        "U2": uni(h1 + h2, (h2, 4 * h2)),
        "b2": uni(h1 + h2, (4 * h2,)),
        "Wd": uni(h2, (h2,)),
        "bd": uni(h2, (1,)),
    }
    params["b1"][h1:2 * h1] = 1.0
    params["b2"][h2:2 * h2] = 1.0
    return LSTMModel(config, params)


def _gate_scale(h_size, dtype):
    """Per-column factor on the gate pre-activations: 0.5 on the sigmoid blocks.

    With sigmoid(a) = 0.5 + 0.5 tanh(a / 2), scaling the input, recurrent
    and bias columns lets one tanh call produce all four gates.
    """
    s = np.full(4 * h_size, 0.5, dtype=dtype)
    s[3 * h_size:] = 1.0
    return s


def _layer_forward(xproj, U, h_size):
    """Run one layer over pre-scaled input projections ``xproj`` (T, B, 4h).

    ``U`` must carry the same column scaling. ``xproj`` is overwritten with
    the gate activations and returned as ``G`` together with the hidden
    states ``H``, cell states ``C`` and ``tanh(C)``.
    """
    T, B, _ = xproj.shape
    dtype = xproj.dtype
    H = np.empty((T, B, h_size), dtype=dtype)
    C = np.empty_like(H)
    TC = np.empty_like(H)
    tmp = np.empty((B, h_size), dtype=dtype)
    hs, three = h_size, 3 * h_size
    for t in range(T):
        g = xproj[t]
        if t:
            g += H[t - 1] @ U
        np.tanh(g, out=g)
        sig = g[:, :three]
        sig *= 0.5
        sig += 0.5
        c = C[t]
        np.multiply(g[:, :hs], g[:, three:], out=c)
        if t:
            np.multiply(g[:, hs:2 * hs], C[t - 1], out=tmp)
            c += tmp
        np.tanh(c, out=TC[t])
        np.multiply(g[:, 2 * hs:three], TC[t], out=H[t])
    return H, C, TC, xproj


def _layer_backward(dH, H, C, TC, G, U, h_size):
    """BPTT through one layer. ``dH`` (T, B, h) holds gradients arriving at
    each output and is used as scratch.

    Returns (dA, dU) where dA (T, B, 4h) are gradients of the gate pre-activations.
    """
    T, B, _ = dH.shape
    hs, three = h_size, 3 * h_size
    dA = np.empty((T, B, 4 * hs), dtype=dH.dtype)
    UT = U.T
    dc = np.empty((B, hs), dtype=dH.dtype)
    sd = np.empty((B, three), dtype=dH.dtype)
    dc_next = None
    for t in range(T - 1, -1, -1):
        g = G[t]
        sig = g[:, :three]
        cand = g[:, three:]
        tc = TC[t]
        dh = dH[t]
        # sigmoid derivatives for i, f, o at once
        np.subtract(1.0, sig, out=sd)
        sd *= sig
        np.multiply(tc, tc, out=dc)
        np.subtract(1.0, dc, out=dc)
        dc *= g[:, 2 * hs:three]
        dc *= dh
        if dc_next is not None:
            dc += dc_next
        da = dA[t]
        np.multiply(dc, cand, out=da[:, :hs])
        if t:
            np.multiply(dc, C[t - 1], out=da[:, hs:2 * hs])
        else:
            da[:, hs:2 * hs] = 0.0
        np.multiply(dh, tc, out=da[:, 2 * hs:three])
        da[:, :three] *= sd
        dg = da[:, three:]
        np.multiply(cand, cand, out=dg)
        np.subtract(1.0, dg, out=dg)
        dg *= g[:, :hs]
        dg *= dc
        dc_next = dc * g[:, hs:2 * hs]
        if t:
            dH[t - 1] += da @ UT
    dU = H[:-1].reshape(-1, hs).T @ dA[1:].reshape(-1, 4 * hs)
    return dA, dU


def _forward(params, X, mask1, mask2):
    """Batch forward pass in the dtype of ``params``. Masks are
    inverted-dropout multipliers or None."""
    dtype = params["U1"].dtype
    X = np.asarray(X, dtype=dtype)
    B, m = X.shape
    h1 = params["U1"].shape[0]
    h2 = params["U2"].shape[0]
    s1 = _gate_scale(h1, dtype)
    s2 = _gate_scale(h2, dtype)
    xs = X.T[:, :, None]  # (m, B, 1)
    xproj1 = xs * (params["W1"][0] * s1) + params["b1"] * s1
    H1, C1, TC1, G1 = _layer_forward(xproj1, params["U1"] * s1, h1)
    H1d = H1 * mask1 if mask1 is not None else H1
    xproj2 = (H1d.reshape(m * B, h1) @ (params["W2"] * s2)).reshape(m, B, 4 * h2)
    xproj2 += params["b2"] * s2
    H2, C2, TC2, G2 = _layer_forward(xproj2, params["U2"] * s2, h2)
    last = H2[-1] * mask2 if mask2 is not None else H2[-1]
    yhat = last @ params["Wd"] + params["bd"][0]
    cache = (X, H1, C1, TC1, G1, H1d, H2, C2, TC2, G2, last, mask1, mask2)
    return yhat, cache


def _backward(params, cache, dyhat):
    X, H1, C1, TC1, G1, H1d, H2, C2, TC2, G2, last, mask1, mask2 = cache
    m, B, h1 = H1.shape
    h2 = H2.shape[2]
    grads = {"Wd": last.T @ dyhat, "bd": np.array([dyhat.sum()], dtype=dyhat.dtype)}
    dlast = dyhat[:, None] * params["Wd"][None, :]
    if mask2 is not None:
        dlast = dlast * mask2
    dH2 = np.zeros_like(H2)
    dH2[-1] = dlast
    dA2, grads["U2"] = _layer_backward(dH2, H2, C2, TC2, G2, params["U2"], h2)
    dA2f = dA2.reshape(m * B, 4 * h2)
    grads["W2"] = H1d.reshape(m * B, h1).T @ dA2f
    grads["b2"] = dA2f.sum(axis=0)
    dH1 = (dA2f @ params["W2"].T).reshape(m, B, h1)
    if mask1 is not None:
        dH1 *= mask1
    dA1, grads["U1"] = _layer_backward(dH1, H1, C1, TC1, G1, params["U1"], h1)
    grads["W1"] = np.einsum("tb,tbk->k", X.T, dA1)[None, :]
    grads["b1"] = dA1.sum(axis=(0, 1))
    return grads


def forward(model: LSTMModel, window, training: bool = False, rng=None) -> float:
    """Prediction for a single window; dropout is applied only when ``training``."""
    x = np.asarray(window, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != model.config.m:
        raise DimensionMismatch(f"window must have length {model.config.m}, got {x.shape[1]}")
    mask1 = mask2 = None
    if training and model.config.dropout > 0:
        mask1, mask2 = dropout_masks(model.config, 1, np.random.default_rng(rng))
    yhat, _ = _forward(model.params, x, mask1, mask2)
    return float(yhat[0])


def dropout_masks(config: LSTMConfig, batch: int, rng, dtype=np.float64):
    keep = 1.0 - config.dropout
    mask1 = ((rng.uniform(size=(batch, config.hidden1)) < keep) / keep).astype(dtype)
    mask2 = ((rng.uniform(size=(batch, config.hidden2)) < keep) / keep).astype(dtype)
    return mask1, mask2


def loss_and_grads(params, X, y, mask1=None, mask2=None):
    """Mean squared error over the batch and its exact gradient for every parameter."""
    dtype = params["U1"].dtype
    X = np.atleast_2d(np.asarray(X, dtype=dtype))
    y = np.asarray(y, dtype=dtype)
    if len(y) == 0:
        raise ValueError("empty batch")
    with np.errstate(over="ignore", invalid="ignore"):
        yhat, cache = _forward(params, X, mask1, mask2)
        err = yhat - y
        loss = float(np.mean(err * err))
    if not math.isfinite(loss):
        raise NonFiniteLoss("forward pass produced a non-finite loss")
    grads = _backward(params, cache, 2.0 * err / len(y))
    return loss, grads


def backward(model: LSTMModel, windows, targets, masks=None):
    """Return ``(loss, grads)`` for a batch; ``grads`` mirrors ``model.params``."""
    mask1, mask2 = masks if masks is not None else (None, None)
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    if windows.shape[1] != model.config.m:
        raise DimensionMismatch(f"windows must have length {model.config.m}")
    return loss_and_grads(model.params, windows, targets, mask1, mask2)


def train(config: LSTMConfig, dataset: LagDataset):
    """Mini-batch Adam with global-norm clipping and early stopping on the epoch loss.

    A batch size above the number of samples is clamped to it; the last
    partial batch of an epoch is kept. Raises :class:`NonFiniteLoss` when
    training diverges.
    """
    if dataset.m != config.m:
        raise DimensionMismatch(f"dataset lag {dataset.m} != config lag {config.m}")
    n = len(dataset)
    if n == 0:
        raise ValueError("empty dataset")
    model = init_model(config)
    report = TrainReport()
    if config.epochs == 0:
        return model, report

    rng = np.random.default_rng([config.seed, 1])
    batch = min(config.batch_size, n)
    # single precision roughly halves the cost of the elementwise gate math
    params = {k: v.astype(TRAIN_DTYPE) for k, v in model.params.items()}
    mom = {k: np.zeros_like(v) for k, v in params.items()}
    vel = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0
    best = math.inf
    stale = 0
    X = dataset.inputs.astype(TRAIN_DTYPE)
    y = dataset.targets.astype(TRAIN_DTYPE)
    use_dropout = config.dropout > 0

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            masks = dropout_masks(config, len(idx), rng, TRAIN_DTYPE) if use_dropout else (None, None)
            loss, grads = loss_and_grads(params, X[idx], y[idx], *masks)
            total += loss * len(idx)
            norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if not math.isfinite(norm):
                raise NonFiniteLoss("non-finite gradient")
            scale = CLIP_NORM / norm if norm > CLIP_NORM else 1.0
            step += 1
            lr_t = config.learning_rate * math.sqrt(1.0 - ADAM_BETA2**step) / (1.0 - ADAM_BETA1**step)
            for k in PARAM_NAMES:
                g = grads[k] * scale if scale != 1.0 else grads[k]
                mom[k] *= ADAM_BETA1
                mom[k] += (1.0 - ADAM_BETA1) * g
                vel[k] *= ADAM_BETA2
                vel[k] += (1.0 - ADAM_BETA2) * g * g
                params[k] -= lr_t * mom[k] / (np.sqrt(vel[k]) + ADAM_EPS)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise NonFiniteLoss(f"epoch {epoch}: non-finite training loss")
        report.losses.append(epoch_loss)
        report.epochs_run = epoch + 1
        if epoch_loss < best - MIN_IMPROVEMENT:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                report.stopped_early = True
                break
    if not all(np.all(np.isfinite(p)) for p in params.values()):
        raise NonFiniteLoss("parameters became non-finite")
    model.params = {k: v.astype(np.float64) for k, v in params.items()}
    log.debug("trained %s: %d epochs, final loss %.3g", config, report.epochs_run, report.final_loss)
    return model, report


def predict_recursive(model: LSTMModel, history, horizon: int) -> np.ndarray:
    """Iterated one-step forecasts; later windows reuse earlier forecasts.

    Any object with ``config.m`` and a batch ``predict(windows)`` method works.
    """
    m = model.config.m
    hist = np.asarray(history, dtype=np.float64)
    if len(hist) < m:
        raise HistoryTooShort(f"need at least {m} observations, got {len(hist)}")
    window = list(hist[len(hist) - m:])
    out = np.empty(horizon)
    for h in range(horizon):
        out[h] = model.predict(np.array(window)[None, :])[0]
        window = window[1:] + [out[h]]
    return out
