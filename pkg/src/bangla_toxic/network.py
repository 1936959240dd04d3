"""Embedding -> BiLSTM(64) -> BiLSTM(32) -> Dense(64, relu) -> Dense(1, sigmoid).

Forward and backward passes are written out by hand. Recurrent scans run
in :mod:`bangla_toxic.kernels`; everything else is batched numpy.

Gate blocks inside every LSTM weight matrix are ordered ``[i, f, o, g]``::

    z   = W x_t + U h_{t-1} + b
    i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)
"""

from __future__ import annotations

import copy
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ArgumentError, FormatError, LookupIndexError, ShapeError, StateError
from .tensor_core import DTYPE, SeededRng, relu, sigmoid, uniform_init


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    max_len: int = 80
    embed_dim: int = 200
    lstm1_units: int = 64
    lstm2_units: int = 32
    dense_units: int = 64
    output_units: int = 1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "vocab_size":
                if v < 0:
                    raise ArgumentError(f"vocab_size must be >= 0, got {v}")
            elif v <= 0:
                raise ArgumentError(f"{f.name} must be positive, got {v}")
        if self.output_units != 1:
            raise ArgumentError("only a single sigmoid output unit is supported")


@dataclass
class EmbeddingLayer:
    table: np.ndarray  # (vocab_size + 2, embed_dim); row 0 is the frozen pad row


@dataclass
class LstmDirectionParams:
    W: np.ndarray  # (4H, input_dim)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def hidden(self) -> int:
        return self.U.shape[1]


@dataclass
class BiLstmLayer:
    forward: LstmDirectionParams
    backward: LstmDirectionParams
    returns_sequences: bool

    @property
    def hidden(self) -> int:
        return self.forward.hidden


@dataclass
class DenseLayer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str  # "relu" | "sigmoid"


@dataclass
class ModelParams:
    config: ModelConfig
    embedding: EmbeddingLayer
    bilstm1: BiLstmLayer
    bilstm2: BiLstmLayer
    dense1: DenseLayer
    output: DenseLayer
    vocab_hash: str = ""
    meta: dict = field(default_factory=dict)

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """Every trainable array, in a fixed order, by reference."""
        out = [("embedding.table", self.embedding.table)]
        for lname in ("bilstm1", "bilstm2"):
            layer = getattr(self, lname)
            for dname in ("forward", "backward"):
                d = getattr(layer, dname)
                out += [(f"{lname}.{dname}.{k}", getattr(d, k)) for k in ("W", "U", "b")]
        for lname in ("dense1", "output"):
            layer = getattr(self, lname)
            out += [(f"{lname}.W", layer.W), (f"{lname}.b", layer.b)]
        return out

    def copy(self) -> "ModelParams":
        return copy.deepcopy(self)

    def zeros_like(self) -> "ModelParams":
        z = self.copy()
        for _, a in z.arrays():
            a[...] = 0.0
        return z

    def parameter_count(self) -> int:
        return sum(a.size for _, a in self.arrays())


def _direction(hidden: int, input_dim: int, rng: SeededRng) -> LstmDirectionParams:
    return LstmDirectionParams(
        W=uniform_init(4 * hidden, input_dim, 1.0 / np.sqrt(input_dim), rng),
        U=uniform_init(4 * hidden, hidden, 1.0 / np.sqrt(hidden), rng),
        b=np.zeros(4 * hidden, dtype=DTYPE),
    )


def init_params(config: ModelConfig, rng: SeededRng, embed_scale: float = 0.05) -> ModelParams:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, zero pad embedding row."""
    table = np.zeros((config.vocab_size + 2, config.embed_dim), dtype=DTYPE)
    table[1:] = uniform_init(config.vocab_size + 1, config.embed_dim, embed_scale, rng)
    h1, h2 = config.lstm1_units, config.lstm2_units
    bilstm1 = BiLstmLayer(_direction(h1, config.embed_dim, rng), _direction(h1, config.embed_dim, rng), True)
    bilstm2 = BiLstmLayer(_direction(h2, 2 * h1, rng), _direction(h2, 2 * h1, rng), False)
    dense1 = DenseLayer(
        uniform_init(config.dense_units, 2 * h2, 1.0 / np.sqrt(2 * h2), rng),
        np.zeros(config.dense_units, dtype=DTYPE),
        "relu",
    )
    output = DenseLayer(
        uniform_init(1, config.dense_units, 1.0 / np.sqrt(config.dense_units), rng),
        np.zeros(1, dtype=DTYPE),
        "sigmoid",
    )
    return ModelParams(config, EmbeddingLayer(table), bilstm1, bilstm2, dense1, output)


def default_parameter_count(vocab_size: int, cfg: ModelConfig | None = None) -> int:
    """Closed form: embedding + 2 BiLSTMs (2 directions x 4 gates) + 2 dense."""
    c = cfg or ModelConfig(vocab_size)
    e, h1, h2, d = c.embed_dim, c.lstm1_units, c.lstm2_units, c.dense_units
    lstm1 = 2 * 4 * h1 * (e + h1 + 1)
    lstm2 = 2 * 4 * h2 * (2 * h1 + h2 + 1)
    return (vocab_size + 2) * e + lstm1 + lstm2 + d * (2 * h2 + 1) + (d + 1)


# ---------------------------------------------------------------- embedding


def embed_forward(batch: np.ndarray, layer: EmbeddingLayer) -> np.ndarray:
    """``(B, T)`` indices -> ``(B, T, embed_dim)`` rows of the table."""
    batch = np.asarray(batch)
    if batch.ndim != 2:
        raise ShapeError(f"expected a (batch, time) index grid, got shape {batch.shape}")
    n_rows = layer.table.shape[0]
    if batch.size and (batch.min() < 0 or batch.max() >= n_rows):
        bad = batch[(batch < 0) | (batch >= n_rows)].flat[0]
        raise LookupIndexError(f"index {int(bad)} outside embedding table of {n_rows} rows")
    return layer.table[batch]


# ---------------------------------------------------------------- LSTM cell


def lstm_cell_forward(x_t, h_prev, c_prev, p: LstmDirectionParams):
    """One LSTM step on a ``(B, input_dim)`` batch. Returns ``(h, c, cache)``."""
    H = p.hidden
    if x_t.shape[-1] != p.W.shape[1] or h_prev.shape[-1] != H or c_prev.shape != h_prev.shape:
        raise ShapeError(
            f"cell shapes x={x_t.shape} h={h_prev.shape} c={c_prev.shape} "
            f"do not fit W={p.W.shape} U={p.U.shape}"
        )
    z = x_t @ p.W.T + h_prev @ p.U.T + p.b
    i, f, o = sigmoid(z[..., :H]), sigmoid(z[..., H : 2 * H]), sigmoid(z[..., 2 * H : 3 * H])
    g = np.tanh(z[..., 3 * H :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c, (x_t, h_prev, c_prev, z, i, f, o, g, c)


def lstm_cell_backward(dh, dc, cache, p: LstmDirectionParams):
    """Gradients for one step. Returns ``(dx, dh_prev, dc_prev, grads)``."""
    x_t, h_prev, c_prev, _, i, f, o, g, c = cache
    tc = np.tanh(c)
    dc = dc + dh * o * (1.0 - tc * tc)
    dz = np.concatenate(
        [dc * g * i * (1 - i), dc * c_prev * f * (1 - f), dh * tc * o * (1 - o), dc * i * (1 - g * g)],
        axis=-1,
    )
    grads = LstmDirectionParams(dz.T @ x_t, dz.T @ h_prev, dz.sum(axis=0))
    return dz @ p.W, dz @ p.U, dc * f, grads


# ---------------------------------------------------------------- BiLSTM


def _direction_forward(x_tm, p: LstmDirectionParams):
    T, B, D = x_tm.shape
    xp = (x_tm.reshape(T * B, D) @ p.W.T + p.b).reshape(T, B, -1)
    gates, c, h = kernels.lstm_scan_forward(np.ascontiguousarray(xp), np.ascontiguousarray(p.U))
    return h, (x_tm, gates, c, h)


def _direction_backward(dh, cache, p: LstmDirectionParams):
    x_tm, gates, c, h = cache
    T, B, D = x_tm.shape
    dxp, dU = kernels.lstm_scan_backward(np.ascontiguousarray(dh), gates, c, h, np.ascontiguousarray(p.U))
    flat = dxp.reshape(T * B, -1)
    grads = LstmDirectionParams(flat.T @ x_tm.reshape(T * B, D), dU, flat.sum(axis=0))
    dx = (flat @ p.W).reshape(T, B, D)
    return dx, grads


def bilstm_forward_tm(x_tm: np.ndarray, layer: BiLstmLayer):
    """Time-major core: ``(T, B, D)`` -> ``(T, B, 2H)`` or ``(B, 2H)``."""
    if x_tm.ndim != 3 or x_tm.shape[2] != layer.forward.W.shape[1]:
        raise ShapeError(f"BiLSTM input {x_tm.shape} does not match input_dim {layer.forward.W.shape[1]}")
    h_f, cache_f = _direction_forward(x_tm, layer.forward)
    h_r, cache_r = _direction_forward(np.ascontiguousarray(x_tm[::-1]), layer.backward)
    if layer.returns_sequences:
        out = np.concatenate([h_f, h_r[::-1]], axis=-1)
    else:
        out = np.concatenate([h_f[-1], h_r[-1]], axis=-1)
    return out, (cache_f, cache_r)


def bilstm_backward_tm(dout: np.ndarray, cache, layer: BiLstmLayer):
    cache_f, cache_r = cache
    x_tm = cache_f[0]
    T, B, _ = x_tm.shape
    H = layer.hidden
    if layer.returns_sequences:
        dh_f = dout[..., :H]
        dh_r = dout[::-1, :, H:]
    else:
        dh_f = np.zeros((T, B, H))
        dh_r = np.zeros((T, B, H))
        dh_f[-1] = dout[:, :H]
        dh_r[-1] = dout[:, H:]
    dx_f, g_f = _direction_backward(dh_f, cache_f, layer.forward)
    dx_r, g_r = _direction_backward(dh_r, cache_r, layer.backward)
    grads = BiLstmLayer(g_f, g_r, layer.returns_sequences)
    return dx_f + dx_r[::-1], grads


def bilstm_forward(seq_batch: np.ndarray, layer: BiLstmLayer):
    """Batch-major wrapper: ``(B, T, D)`` -> ``(B, T, 2H)`` or ``(B, 2H)``."""
    out, cache = bilstm_forward_tm(np.ascontiguousarray(np.swapaxes(seq_batch, 0, 1)), layer)
    if layer.returns_sequences:
        out = np.swapaxes(out, 0, 1)
    return out, cache


# ---------------------------------------------------------------- dense


def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    if x.shape[-1] != layer.W.shape[1]:
        raise ShapeError(f"dense input width {x.shape[-1]} != {layer.W.shape[1]}")
    z = x @ layer.W.T + layer.b
    if layer.activation == "relu":
        return relu(z)
    if layer.activation == "sigmoid":
        return sigmoid(z)
    raise ValueError(f"unknown activation {layer.activation!r}")


# ---------------------------------------------------------------- model


@dataclass
class ForwardCache:
    batch: np.ndarray
    lstm1: tuple
    lstm2: tuple
    x2: np.ndarray  # bilstm2 output (B, 2*H2)
    a1: np.ndarray  # dense1 activations (B, dense)
    probs: np.ndarray


def model_forward(batch: np.ndarray, params: ModelParams):
    """Return ``(probs, cache)``; probs has one entry per batch row."""
    emb = embed_forward(batch, params.embedding)
    x_tm = np.ascontiguousarray(np.swapaxes(emb, 0, 1))
    s1, c1 = bilstm_forward_tm(x_tm, params.bilstm1)
    s2, c2 = bilstm_forward_tm(s1, params.bilstm2)
    a1 = dense_forward(s2, params.dense1)
    probs = dense_forward(a1, params.output)[:, 0]
    return probs, ForwardCache(np.asarray(batch), c1, c2, s2, a1, probs)


def predict_proba(batch: np.ndarray, params: ModelParams, batch_size: int = 1024) -> np.ndarray:
    batch = np.asarray(batch)
    out = [model_forward(batch[s : s + batch_size], params)[0] for s in range(0, len(batch), batch_size)]
    return np.concatenate(out) if out else np.zeros(0)


def model_backward(batch, targets, params: ModelParams, cache: ForwardCache | None) -> ModelParams:
    """Exact gradient of mean binary cross-entropy wrt every parameter."""
    from .optim import bce_loss

    if cache is None:
        raise StateError("model_backward called without a forward cache")
    if cache.batch.shape != np.shape(batch) or not np.array_equal(cache.batch, batch):
        raise StateError("forward cache belongs to a different batch")
    probs = cache.probs
    _, dprobs = bce_loss(probs, targets)
    dz_out = (dprobs * probs * (1.0 - probs))[:, None]  # (B, 1)

    grads = params.zeros_like()
    grads.output.W[...] = dz_out.T @ cache.a1
    grads.output.b[...] = dz_out.sum(axis=0)
    da1 = dz_out @ params.output.W
    dz1 = da1 * (cache.a1 > 0)
    grads.dense1.W[...] = dz1.T @ cache.x2
    grads.dense1.b[...] = dz1.sum(axis=0)
    ds2 = dz1 @ params.dense1.W

    ds1, g2 = bilstm_backward_tm(ds2, cache.lstm2, params.bilstm2)
    demb, g1 = bilstm_backward_tm(ds1, cache.lstm1, params.bilstm1)
    for dst, src in ((grads.bilstm1, g1), (grads.bilstm2, g2)):
        for d in ("forward", "backward"):
            for k in ("W", "U", "b"):
                getattr(getattr(dst, d), k)[...] = getattr(getattr(src, d), k)

    table_grad = grads.embedding.table
    np.add.at(table_grad, cache.batch, np.swapaxes(demb, 0, 1))
    table_grad[0] = 0.0
    return grads


def predict(prob: float, threshold: float = 0.5) -> int:
    if not 0.0 <= prob <= 1.0:
        raise ArgumentError(f"probability {prob} outside [0, 1]")
    return int(prob >= threshold)


# ---------------------------------------------------------------- checkpoints

MAGIC = b"BTXCKPT\0"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<8sI7Iq32sI")


def save_params(params: ModelParams, path) -> None:
    """Little-endian binary checkpoint: header, config, vocab hash, matrices."""
    c = params.config
    vh = bytes.fromhex(params.vocab_hash) if params.vocab_hash else b"\0" * 32
    arrays = params.arrays()
    seed = int(params.meta.get("split_seed", -1))
    parts = [
        _HEADER.pack(
            MAGIC, CHECKPOINT_VERSION,
            c.vocab_size, c.max_len, c.embed_dim, c.lstm1_units, c.lstm2_units, c.dense_units, c.output_units,
            seed, vh, len(arrays),
        )
    ]
    for _, a in arrays:
        m = a.reshape(a.shape[0], -1)
        parts.append(struct.pack("<II", *m.shape))
        parts.append(np.ascontiguousarray(m, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_params(path) -> ModelParams:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated checkpoint header ({len(data)} bytes)")
    magic, version, *cfg, seed, vh, n_arrays = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: not a bangla-toxic checkpoint")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: checkpoint version {version}, this build reads version {CHECKPOINT_VERSION}")
    try:
        config = ModelConfig(*cfg)
    except ArgumentError as e:
        raise FormatError(f"{path}: bad config in header: {e}") from None
    params = init_params(config, SeededRng(0))
    targets = params.arrays()
    if n_arrays != len(targets):
        raise FormatError(f"{path}: expected {len(targets)} matrices, header says {n_arrays}")
    off = _HEADER.size
    for name, dst in targets:
        if off + 8 > len(data):
            raise FormatError(f"{path}: truncated before {name}")
        rows, cols = struct.unpack_from("<II", data, off)
        off += 8
        want = dst.reshape(dst.shape[0], -1).shape
        if (rows, cols) != want:
            raise FormatError(f"{path}: {name} has shape {(rows, cols)}, expected {want}")
        nbytes = rows * cols * 8
        if off + nbytes > len(data):
            raise FormatError(f"{path}: truncated inside {name}")
        dst[...] = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=off).reshape(dst.shape)
        off += nbytes
    if off != len(data):
        raise FormatError(f"{path}: {len(data) - off} trailing bytes")
    params.vocab_hash = "" if vh == b"\0" * 32 else vh.hex()
    if seed >= 0:
        params.meta["split_seed"] = seed
    return params
