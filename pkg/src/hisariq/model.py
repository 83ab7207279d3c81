"""CNN builder, training loop with early stopping, and prediction.

The architecture is a noise layer (native dataset only) followed by four
conv/pool/dropout blocks that narrow from 256 to 64 filters, a 128-unit
ReLU dense layer and a softmax output head. Input geometry is 2 x W with
W divisible by 16 (four width-halving pools).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .container import RADIOML_CLASSES
from .errors import ShapeError, TrainingDivergedError
from .modem import FAMILIES, VARIANTS, family_of
from .nn import (Adam, Context, Conv2D, Dense, Dropout, Flatten,
                 GaussianNoiseLayer, MaxPool1x2, dtype_for,
                 softmax_cross_entropy)
from .nn.checkpoint import load_checkpoint, save_checkpoint

CONV_FILTERS = (256, 128, 64, 64)
DENSE_HIDDEN = 128
KERNEL_SHAPE = (2, 3)


def rms_normalize(x: np.ndarray) -> np.ndarray:
    """Scale each record to unit RMS over its 2 x W tensor.

    Fading makes record amplitudes vary by an order of magnitude; removing
    the per-record gain is part of the training input convention (the
    envelope shape, which carries the family information, is preserved).
    """
    flat = x.reshape(x.shape[0], -1)
    rms = np.sqrt(np.mean(flat * flat, axis=1, keepdims=True))
    rms[rms == 0] = 1.0
    return (flat / rms).reshape(x.shape).astype(x.dtype)


def label_mode(mode: str):
    """(name -> class index, class names) for a labeling mode.

    'family' folds the 26 catalog variants onto the 5 families; 'variant'
    is the identity over the 10 upstream RadioML class names.
    """
    if mode == "family":
        mapping = {v: FAMILIES.index(family_of(v)) for v in VARIANTS}
        return mapping, FAMILIES
    if mode == "variant":
        mapping = {name: i for i, name in enumerate(RADIOML_CLASSES)}
        return mapping, RADIOML_CLASSES
    raise ValueError(f"label mode must be 'family' or 'variant', got {mode!r}")


@dataclass(frozen=True)
class ModelConfig:
    input_width: int = 1024
    n_classes: int = 5
    conv_filters: tuple = CONV_FILTERS
    dense_hidden: int = DENSE_HIDDEN
    dropout_rate: float = 0.5
    noise_layer: bool = True
    seed: int = 0
    mode: str = "fast"

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if any(a < b for a, b in zip(self.conv_filters, self.conv_filters[1:])):
            raise ValueError(
                f"conv filter schedule must be non-increasing, got "
                f"{self.conv_filters}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        dtype_for(self.mode)
        width = self.input_width
        for i in range(len(self.conv_filters)):
            if width % 2:
                raise ShapeError(
                    f"Max_Pool{i + 1}: width {width} is odd; input width "
                    f"{self.input_width} must be divisible by "
                    f"{2 ** len(self.conv_filters)}")
            width //= 2

    @property
    def flat_size(self) -> int:
        return 2 * (self.input_width // 2 ** len(self.conv_filters)) \
            * self.conv_filters[-1]


def shape_trace(config: ModelConfig):
    """(layer name, output dims) rows implied by the configuration."""
    rows = [("Input", (2, config.input_width))]
    if config.noise_layer:
        rows.append(("Noise Layer", (2, config.input_width)))
    width = config.input_width
    for i, f in enumerate(config.conv_filters, start=1):
        rows.append((f"Conv{i}", (2, width, f)))
        width //= 2
        rows.append((f"Max_Pool{i}", (2, width, f)))
        rows.append((f"Dropout{i}", (2, width, f)))
    rows.append(("Flatten", (config.flat_size,)))
    rows.append(("Dense1", (config.dense_hidden,)))
    rows.append(("Dense2", (config.n_classes,)))
    return rows


class Model:
    """A built layer stack with helpers for training and inference."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.dtype = dtype_for(config.mode)
        rng = np.random.default_rng(config.seed)
        self.noise = GaussianNoiseLayer() if config.noise_layer else None
        self.blocks = []
        cin = 1
        for i, f in enumerate(config.conv_filters, start=1):
            conv = Conv2D(cin, f, *KERNEL_SHAPE, activation=True, rng=rng,
                          dtype=self.dtype, name=f"conv{i}")
            self.blocks.append((conv, MaxPool1x2(name=f"pool{i}"),
                                Dropout(config.dropout_rate, name=f"drop{i}")))
            cin = f
        self.flatten = Flatten()
        self.dense1 = Dense(config.flat_size, config.dense_hidden,
                            activation=True, rng=rng, dtype=self.dtype,
                            name="dense1")
        self.dense2 = Dense(config.dense_hidden, config.n_classes,
                            activation=False, rng=rng, dtype=self.dtype,
                            name="dense2")

    def params(self):
        out = []
        for conv, _, _ in self.blocks:
            out.extend(conv.params())
        out.extend(self.dense1.params())
        out.extend(self.dense2.params())
        return out

    def parameter_count(self) -> int:
        return sum(p.value.size for p in self.params())

    def forward(self, x: np.ndarray, ctx: Context) -> np.ndarray:
        """Logits for a batch shaped (N, 2, W)."""
        if x.ndim != 3 or x.shape[1] != 2 or x.shape[2] != self.config.input_width:
            raise ShapeError(
                f"expected batch of (2, {self.config.input_width}) records, "
                f"got {x.shape}")
        x = x.astype(self.dtype, copy=False)
        if self.noise is not None:
            x = self.noise.forward(x, ctx)
        x = x[..., None]
        for conv, pool, drop in self.blocks:
            x = drop.forward(pool.forward(conv.forward(x, ctx), ctx), ctx)
        x = self.flatten.forward(x, ctx)
        x = self.dense1.forward(x, ctx)
        return self.dense2.forward(x, ctx)

    def backward(self, dlogits: np.ndarray) -> None:
        g = self.dense1.backward(self.dense2.backward(dlogits))
        g = self.flatten.backward(g)
        for conv, pool, drop in reversed(self.blocks):
            g = conv.backward(pool.backward(drop.backward(g)))

    def state(self):
        return [(p.name, p.value) for p in self.params()]

    def load_state(self, entries) -> None:
        for p in self.params():
            if p.name not in entries:
                raise ShapeError(f"checkpoint is missing {p.name}")
            value = entries[p.name]
            if tuple(value.shape) != tuple(p.value.shape):
                raise ShapeError(
                    f"{p.name}: checkpoint shape {value.shape} vs model "
                    f"{p.value.shape}")
            p.value = value.astype(self.dtype)
            p.grad = np.zeros_like(p.value)

    def save(self, path) -> None:
        save_checkpoint(self.state(), path)


def build_model(config: ModelConfig) -> Model:
    return Model(config)


def config_from_checkpoint(entries, mode: str = "fast",
                           noise_layer: bool = False) -> ModelConfig:
    """Reconstruct an eval-capable config from checkpoint array shapes."""
    try:
        filters = []
        i = 1
        while f"conv{i}.weight" in entries:
            filters.append(entries[f"conv{i}.weight"].shape[3])
            i += 1
        flat = entries["dense1.weight"].shape[0]
        hidden = entries["dense1.weight"].shape[1]
        n_classes = entries["dense2.weight"].shape[1]
    except KeyError as exc:
        raise ShapeError(f"checkpoint lacks required entry: {exc}")
    if not filters:
        raise ShapeError("checkpoint has no conv layers")
    width = flat * 2 ** len(filters) // (2 * filters[-1])
    return ModelConfig(input_width=width, n_classes=n_classes,
                       conv_filters=tuple(filters), dense_hidden=hidden,
                       dropout_rate=0.0, noise_layer=noise_layer, mode=mode)


def load_model(path, mode: str = "fast") -> Model:
    entries = load_checkpoint(path)
    model = build_model(config_from_checkpoint(entries, mode=mode))
    model.load_state(entries)
    return model


def predict(model: Model, x: np.ndarray, batch_size: int = 64):
    """Eval-mode per-record probabilities and argmax labels."""
    probs = []
    ctx = Context(train=False)
    for start in range(0, x.shape[0], batch_size):
        logits = model.forward(x[start:start + batch_size], ctx)
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs.append(e / e.sum(axis=1, keepdims=True))
    p = np.concatenate(probs, axis=0) if probs else np.zeros((0, model.config.n_classes))
    return p, p.argmax(axis=1)


def evaluate(model: Model, x: np.ndarray, y: np.ndarray,
             batch_size: int = 64):
    """(mean cross-entropy, accuracy) in eval mode."""
    ctx = Context(train=False)
    losses = np.empty(x.shape[0])
    correct = 0
    for start in range(0, x.shape[0], batch_size):
        xb, yb = x[start:start + batch_size], y[start:start + batch_size]
        loss, probs, _ = softmax_cross_entropy(model.forward(xb, ctx), yb)
        losses[start:start + xb.shape[0]] = loss
        correct += int((probs.argmax(axis=1) == yb).sum())
    return float(losses.mean()), correct / max(1, x.shape[0])


@dataclass
class TrainOptions:
    batch_size: int = 256
    max_epochs: int = 100
    patience: int = 5
    min_delta: float = 1e-4
    lr: float = 1e-4
    seed: int = 0
    target_val_accuracy: float | None = None


@dataclass
class TrainState:
    epochs_run: int = 0
    best_epoch: int = 0
    best_val_loss: float = np.inf
    stopped_early: bool = False
    history: list = field(default_factory=list)  # (train_loss, val_loss, val_acc)


def history_table(state: TrainState) -> str:
    lines = ["epoch\ttrain_loss\tval_loss\tval_acc"]
    for i, (tl, vl, va) in enumerate(state.history, start=1):
        lines.append(f"{i}\t{tl:.10g}\t{vl:.10g}\t{va:.10g}")
    return "\n".join(lines) + "\n"


def train(model: Model, train_data, val_data,
          options: TrainOptions) -> TrainState:
    """Mini-batch ADAM with early stopping on validation loss.

    train_data/val_data are (x, y, snr_db) triples; snr labels feed the
    noise layer and may be None when it is disabled. The model is left
    holding the weights of the best validation epoch.
    """
    x_train, y_train, snr_train = train_data
    x_val, y_val, _ = val_data
    if y_train.min() < 0 or y_train.max() >= model.config.n_classes:
        raise ValueError("training labels outside the configured class range")
    optimizer = Adam(model.params(), lr=options.lr)
    rng = np.random.default_rng(options.seed)
    state = TrainState()
    best_state = None
    patience_count = 0
    n = x_train.shape[0]
    for epoch in range(1, options.max_epochs + 1):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, options.batch_size):
            sel = order[start:start + options.batch_size]
            ctx = Context(train=True, rng=rng,
                          snr_db=None if snr_train is None else snr_train[sel])
            logits = model.forward(x_train[sel], ctx)
            loss, _, dlogits = softmax_cross_entropy(logits, y_train[sel])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite training loss at epoch {epoch}")
            model.backward(dlogits.astype(model.dtype))
            optimizer.step()
            batch_losses.append(loss)
        val_loss, val_acc = evaluate(model, x_val, y_val, options.batch_size)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(
                f"non-finite validation loss at epoch {epoch}")
        state.history.append((float(np.mean(batch_losses)), val_loss, val_acc))
        state.epochs_run = epoch
        if state.best_val_loss - val_loss > options.min_delta:
            state.best_val_loss = val_loss
            state.best_epoch = epoch
            best_state = copy.deepcopy(dict(model.state()))
            patience_count = 0
        else:
            patience_count += 1
            if patience_count >= options.patience:
                state.stopped_early = True
                break
        if (options.target_val_accuracy is not None
                and val_acc >= options.target_val_accuracy):
            if best_state is None or val_loss < state.best_val_loss:
                state.best_val_loss = val_loss
                state.best_epoch = epoch
                best_state = copy.deepcopy(dict(model.state()))
            break
    if best_state is not None:
        model.load_state(best_state)
    return state
