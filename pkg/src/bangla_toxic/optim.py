"""Loss, optimizers, learning-rate schedule, training loop and k-fold CV."""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ArgumentError, ConfigError, NumericError, ShapeError, TrainingError
from .evaluation import evaluate, mean_sd
from .network import ModelConfig, ModelParams, init_params, model_backward, model_forward
from .tensor_core import SeededRng

CLAMP = 1e-12
OPTIMIZERS = ("adam", "sgd_momentum")


def bce_loss(probs, targets) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient wrt ``probs``.

    Probabilities are clamped to ``[1e-12, 1 - 1e-12]``; the gradient is the
    exact derivative at the clamped value.
    """
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise ShapeError(f"{p.size} probabilities vs {y.size} targets")
    n = p.size
    p = np.clip(p, CLAMP, 1.0 - CLAMP)
    loss = -np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    grad = (-(y / p) + (1.0 - y) / (1.0 - p)) / n
    return float(loss), grad


# ---------------------------------------------------------------- optimizers


@dataclass
class OptimizerState:
    kind: str
    slots: dict = field(default_factory=dict)  # name -> array or (m, v)
    step: int = 0


def _pairs(params: ModelParams, grads: ModelParams):
    for (name, p), (gname, g) in zip(params.arrays(), grads.arrays()):
        if p.shape != g.shape:
            raise ShapeError(f"{name}: parameter {p.shape} vs gradient {g.shape}")
        yield name, p, g


def _check_finite(params: ModelParams) -> None:
    for name, a in params.arrays():
        if not np.all(np.isfinite(a)):
            raise NumericError(f"optimizer produced non-finite values in {name}")


def sgd_momentum_step(params: ModelParams, grads: ModelParams, state: OptimizerState, lr: float, momentum: float = 0.9):
    """``v <- momentum * v + g``; ``theta <- theta - lr * v`` (in place)."""
    for name, p, g in _pairs(params, grads):
        v = state.slots.get(name)
        if v is None:
            v = state.slots[name] = np.zeros_like(p)
        v *= momentum
        v += g
        p -= lr * v
    state.step += 1
    _check_finite(params)
    return params, state


def adam_step(
    params: ModelParams,
    grads: ModelParams,
    state: OptimizerState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """Bias-corrected Adam update (in place)."""
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p, g in _pairs(params, grads):
        slot = state.slots.get(name)
        if slot is None:
            slot = state.slots[name] = (np.zeros_like(p), np.zeros_like(p))
        m, v = slot
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    _check_finite(params)
    return params, state


def lr_schedule(epoch: int, lr0: float, total_epochs: int) -> float:
    """Time-based decay with constant ``lr0 / total_epochs``."""
    if epoch < 0 or total_epochs < 1:
        raise ArgumentError(f"bad schedule arguments epoch={epoch}, total_epochs={total_epochs}")
    decay = lr0 / total_epochs
    return lr0 / (1.0 + decay * epoch)


def clip_by_global_norm(grads: ModelParams, max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(g * g)) for _, g in grads.arrays()))
    if norm > max_norm:
        scale = max_norm / norm
        for _, g in grads.arrays():
            g *= scale
    return norm


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    lr0: float = 1e-5
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100
    batch_size: int = 1024
    scheduler: Optional[bool] = None  # None: on for sgd_momentum, off for adam
    seed: int = 0
    clip_norm: Optional[float] = None
    max_len: int = 80
    embed_dim: int = 200
    lstm1: int = 64
    lstm2: int = 32
    dense: int = 64

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not self.lr0 > 0:
            raise ConfigError(f"lr0 must be > 0, got {self.lr0}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive")

    @property
    def scheduler_enabled(self) -> bool:
        return self.optimizer == "sgd_momentum" if self.scheduler is None else self.scheduler

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size, self.max_len, self.embed_dim, self.lstm1, self.lstm2, self.dense)

    @classmethod
    def paper_adam(cls, **kw) -> "TrainConfig":
        return cls(**{"optimizer": "adam", "lr0": 1e-5, "epochs": 100, "batch_size": 1024, **kw})

    @classmethod
    def paper_sgd(cls, **kw) -> "TrainConfig":
        return cls(
            **{"optimizer": "sgd_momentum", "lr0": 0.1, "momentum": 0.9, "epochs": 50,
               "batch_size": 1024, "scheduler": True, **kw}
        )

    def to_text(self) -> str:
        out = []
        for k, v in asdict(self).items():
            if k == "scheduler":
                v = "auto" if v is None else ("on" if v else "off")
            elif v is None:
                v = "none"
            out.append(f"{k}={v}")
        return "\n".join(out) + "\n"


_CONFIG_ALIASES = {"scheduler_enabled": "scheduler", "lstm1_units": "lstm1", "lstm2_units": "lstm2",
                   "dense_units": "dense"}


def _coerce(name: str, raw: str):
    raw = raw.strip()
    types = {f.name: f.type for f in fields(TrainConfig)}
    t = types[name]
    if name == "scheduler":
        v = raw.lower()
        if v in ("auto", "none", ""):
            return None
        if v in ("1", "on", "true", "yes"):
            return True
        if v in ("0", "off", "false", "no"):
            return False
        raise ConfigError(f"scheduler: expected on/off/auto, got {raw!r}")
    if name == "clip_norm":
        return None if raw.lower() in ("none", "off", "") else float(raw)
    if t in ("int", int):
        return int(raw)
    if t in ("float", float):
        return float(raw)
    return raw


def parse_config(text: str, base: TrainConfig | None = None, overrides: dict | None = None) -> TrainConfig:
    """Parse flat ``key=value`` lines (``#`` comments); ``overrides`` win."""
    values = {}
    known = {f.name for f in fields(TrainConfig)}
    for lineno, line in enumerate(io.StringIO(text), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = _CONFIG_ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {raw!r}") from None
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return replace(base or TrainConfig(), **values)


def load_config(path, overrides: dict | None = None) -> TrainConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), overrides=overrides)


# ---------------------------------------------------------------- training


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_acc,val_loss,val_acc,lr"]
        for r in self.records:
            lines.append(
                f"{r.epoch},{r.train_loss:.10g},{r.train_acc:.10g},{r.val_loss:.10g},{r.val_acc:.10g},{r.lr:.10g}"
            )
        return "\n".join(lines) + "\n"


def _score(params: ModelParams, x, y, batch_size: int) -> tuple[float, float]:
    total_loss, correct = 0.0, 0
    for s in range(0, len(x), batch_size):
        probs, _ = model_forward(x[s : s + batch_size], params)
        loss, _ = bce_loss(probs, y[s : s + batch_size])
        total_loss += loss * len(probs)
        correct += int(np.sum((probs >= 0.5) == (y[s : s + batch_size] == 1)))
    return total_loss / len(x), correct / len(x)


def train(
    model: ModelParams,
    train_set: tuple,
    val_set: tuple | None,
    config: TrainConfig,
    vocab=None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> tuple[ModelParams, TrainHistory]:
    """Mini-batch training on ``(grid, labels)`` pairs; returns a trained copy.

    Train loss/accuracy per epoch are sample-weighted means over the epoch's
    batches; validation metrics use the end-of-epoch parameters (NaN when
    no validation set is given).
    """
    x, y = np.asarray(train_set[0]), np.asarray(train_set[1])
    n = len(x)
    if n == 0:
        raise ArgumentError("training set is empty")
    params = model.copy()
    if vocab is not None:
        params.vocab_hash = vocab.hash()
    state = OptimizerState(config.optimizer)
    rng = SeededRng(config.seed).derive(1)
    history = TrainHistory()
    has_val = val_set is not None and len(val_set[0]) > 0
    bs = config.batch_size

    for epoch in range(config.epochs):
        lr = lr_schedule(epoch, config.lr0, config.epochs) if config.scheduler_enabled else config.lr0
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for bi, s in enumerate(range(0, n, bs)):
            idx = order[s : s + bs]
            xb, yb = x[idx], y[idx]
            probs, cache = model_forward(xb, params)
            loss, _ = bce_loss(probs, yb)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            grads = model_backward(xb, yb, params, cache)
            if config.clip_norm is not None:
                clip_by_global_norm(grads, config.clip_norm)
            if config.optimizer == "adam":
                adam_step(params, grads, state, lr, config.beta1, config.beta2, config.eps)
            else:
                sgd_momentum_step(params, grads, state, lr, config.momentum)
            loss_sum += loss * len(idx)
            correct += int(np.sum((probs >= 0.5) == (yb == 1)))
        if has_val:
            val_loss, val_acc = _score(params, np.asarray(val_set[0]), np.asarray(val_set[1]), bs)
        else:
            val_loss = val_acc = float("nan")
        rec = EpochRecord(epoch, loss_sum / n, correct / n, val_loss, val_acc, lr)
        history.records.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
    return params, history


# ---------------------------------------------------------------- k-fold


@dataclass
class CrossValResult:
    reports: list
    histories: list
    mean_accuracy: float
    sd_accuracy: float

    @property
    def accuracies(self) -> list[float]:
        return [r.accuracy for r in self.reports]


def default_model_builder(config: TrainConfig):
    def build(vocab, rng: SeededRng) -> ModelParams:
        return init_params(config.model_config(vocab.size), rng)

    return build


def cross_validate(
    dataset: Sequence,
    config: TrainConfig,
    k: int = 5,
    vocab_builder: Callable | None = None,
    model_builder: Callable | None = None,
    threads: int = 1,
) -> CrossValResult:
    """k-fold protocol: per fold, fresh vocabulary from the training part,
    a fresh model seeded from ``(config.seed, fold)``, scored on the held-out fold.
    """
    from .dataset import kfold
    from .pipeline import encode_comments, subset, vocab_from

    vocab_builder = vocab_builder or vocab_from
    model_builder = model_builder or default_model_builder(config)
    plan = kfold(len(dataset), SeededRng(config.seed).derive(2), k)

    def run_fold(i: int):
        train_part = subset(dataset, plan.train_indices(i))
        held_out = subset(dataset, plan.folds[i])
        vocab = vocab_builder(train_part)
        fold_cfg = replace(config, seed=int(SeededRng(config.seed).derive(3, i).integers(0, 2**63)))
        model = model_builder(vocab, SeededRng(fold_cfg.seed).derive(0))
        tr = encode_comments(train_part, vocab, config.max_len)
        te = encode_comments(held_out, vocab, config.max_len)
        params, hist = train(model, tr, te, fold_cfg, vocab=vocab)
        report = evaluate(params, te[0], te[1], vocab, batch_size=config.batch_size,
                          optimizer=config.optimizer, seed=fold_cfg.seed, fold=i + 1)
        return report, hist

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, range(plan.k)))
    else:
        results = [run_fold(i) for i in range(plan.k)]
    reports = [r for r, _ in results]
    mean, sd = mean_sd(r.accuracy for r in reports)
    return CrossValResult(reports, [h for _, h in results], mean, sd)
