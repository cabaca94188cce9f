"""Deterministic feature extraction and a small trainable regressor.

The regressor is a plain MLP (tanh hidden layers, sigmoid output) trained by
mini-batch SGD on mean squared error.  Everything is bit-reproducible from a
seed: weight init comes from the seeded RNG and batches are taken in dataset
order, so the same (data, config) always yields the same model.  Analytic
gradients are verified against central finite differences by gradient_check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import modelio
from .raster import RasterImage, hsv_saturation, luminance

FEATURE_VERSION = 1
# 3x16 RGB histograms + 16 saturation + 16 gradient magnitude + 4x4 grid
# of luminance mean and std.
FEATURE_LENGTH = 112
_HIST_BINS = 16
_GRID = 4


class IncompatibleModelError(ValueError):
    """Model was trained against a different feature extractor."""


def _hist(values: np.ndarray) -> np.ndarray:
    counts, _ = np.histogram(values, bins=_HIST_BINS, range=(0.0, 1.0))
    return counts / values.size


def extract_features(img: RasterImage) -> np.ndarray:
    """112-dim feature vector: RGB / saturation / gradient histograms plus a
    4x4 grid of luminance mean and standard deviation.  Square input only."""
    if not img.is_square():
        raise ValueError(f"feature extraction requires a square image, got {img.width}x{img.height}")
    px = img.pixels
    parts = [_hist(px[:, :, c]) for c in range(3)]
    parts.append(_hist(hsv_saturation(px)))
    lum = luminance(px)
    gy, gx = np.gradient(lum)
    parts.append(_hist(np.clip(np.hypot(gx, gy), 0.0, 1.0)))
    n = lum.shape[0]
    bounds = [(i * n) // _GRID for i in range(_GRID + 1)]
    means = np.empty((_GRID, _GRID))
    stds = np.empty((_GRID, _GRID))
    for i in range(_GRID):
        for j in range(_GRID):
            block = lum[bounds[i] : bounds[i + 1], bounds[j] : bounds[j + 1]]
            means[i, j] = block.mean()
            stds[i, j] = block.std()
    parts.append(means.ravel())
    parts.append(stds.ravel())
    feat = np.concatenate(parts)
    assert feat.shape == (FEATURE_LENGTH,)
    return feat


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class MlpModel:
    """Feed-forward regressor; weights[i] has shape (fan_out, fan_in)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"
    extractor_version: int = FEATURE_VERSION
    format_version: int = modelio.FORMAT_VERSION
    train_log: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must pair up, one per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i} has inconsistent shapes {w.shape} / {b.shape}")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i} input does not chain from layer {i - 1}")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output layer must have a single unit")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpModel":
        return MlpModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
            self.extractor_version,
            self.format_version,
        )


def init_model(layer_sizes, seed: int) -> MlpModel:
    """Uniform +-1/sqrt(fan_in) weights from the seeded RNG, zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or sizes[-1] != 1:
        raise ValueError("layer sizes must end with a single output unit")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases)


def zero_model(layer_sizes) -> MlpModel:
    sizes = tuple(int(s) for s in layer_sizes)
    return MlpModel(
        [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
        [np.zeros(o) for o in sizes[1:]],
    )


def _forward(model: MlpModel, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Returns (predictions, per-layer activations incl. input); x is (n, features)."""
    acts = [x]
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        a = _sigmoid(z) if i == last else np.tanh(z)
        acts.append(a)
    return a[:, 0], acts


def predict_features(model: MlpModel, features: np.ndarray) -> float:
    pred, _ = _forward(model, features[None, :])
    return float(pred[0])


def predict(model: MlpModel, img: RasterImage) -> float:
    """Score in [0, 1] for a square image; pure function of (model, image)."""
    if model.extractor_version != FEATURE_VERSION:
        raise IncompatibleModelError(
            f"model expects extractor v{model.extractor_version}, "
            f"this build provides v{FEATURE_VERSION}"
        )
    return predict_features(model, extract_features(img))


def _backward(model: MlpModel, acts: list[np.ndarray], pred: np.ndarray, targets: np.ndarray):
    """Gradients of mean squared error over the batch, matching _forward."""
    n = targets.shape[0]
    out = acts[-1][:, 0]
    # d(MSE)/d(logit) through the output sigmoid.
    delta = (2.0 / n) * (pred - targets) * out * (1.0 - out)
    delta = delta[:, None]
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (1.0 - acts[i] ** 2)
    return grads_w, grads_b


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0
    hidden_sizes: tuple[int, ...] = (64,)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")


def train(data, cfg: TrainConfig) -> MlpModel:
    """Mini-batch SGD on mean squared error.

    Batches walk the dataset in order (no shuffling), which keeps the loss
    trajectory an exact function of (data, config) and makes batch-averaging
    arguments testable.  Epoch losses are recorded on model.train_log.
    """
    examples = list(data)
    if not examples:
        raise ValueError("training data must be nonempty")
    feats = np.stack([extract_features(ex.image) for ex in examples])
    targets = np.array([ex.target for ex in examples], dtype=np.float64)
    model = init_model((feats.shape[1],) + tuple(cfg.hidden_sizes) + (1,), cfg.seed)
    n = len(examples)
    for _ in range(cfg.epochs):
        sq_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            bx = feats[start : start + cfg.batch_size]
            bt = targets[start : start + cfg.batch_size]
            pred, acts = _forward(model, bx)
            sq_sum += float(np.sum((pred - bt) ** 2))
            grads_w, grads_b = _backward(model, acts, pred, bt)
            for w, b, gw, gb in zip(model.weights, model.biases, grads_w, grads_b):
                w -= cfg.learning_rate * gw
                b -= cfg.learning_rate * gb
        epoch_loss = sq_sum / n
        if not np.isfinite(epoch_loss):
            raise ArithmeticError(
                "training diverged to a non-finite loss; lower the learning rate"
            )
        model.train_log.append(epoch_loss)
    return model


# --- gradient verification -------------------------------------------------

def _flatten_params(model: MlpModel) -> list[np.ndarray]:
    out = []
    for w, b in zip(model.weights, model.biases):
        out.append(w)
        out.append(b)
    return out


def _example_loss(model: MlpModel, features: np.ndarray, target: float) -> float:
    pred, _ = _forward(model, features[None, :])
    return float((pred[0] - target) ** 2)


def example_gradients(model: MlpModel, features: np.ndarray, target: float) -> list[np.ndarray]:
    """Analytic gradient of the single-example squared error, one array per parameter."""
    pred, acts = _forward(model, features[None, :])
    grads_w, grads_b = _backward(model, acts, pred, np.array([target]))
    out = []
    for gw, gb in zip(grads_w, grads_b):
        out.append(gw)
        out.append(gb)
    return out


def gradient_check(
    model: MlpModel,
    example,
    epsilon: float = 1e-4,
    max_params: int = 100,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks every parameter, or a seeded random subset of `max_params` for
    larger models.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    features = extract_features(example.image)
    target = float(example.target)
    params = _flatten_params(model)
    analytic = example_gradients(model, features, target)
    total = sum(p.size for p in params)
    if total > max_params:
        picks = np.random.default_rng(seed).choice(total, size=max_params, replace=False)
    else:
        picks = np.arange(total)
    offsets = np.cumsum([0] + [p.size for p in params])
    worst = 0.0
    for flat_idx in picks:
        arr_idx = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        local = np.unravel_index(flat_idx - offsets[arr_idx], params[arr_idx].shape)
        original = params[arr_idx][local]
        params[arr_idx][local] = original + epsilon
        up = _example_loss(model, features, target)
        params[arr_idx][local] = original - epsilon
        down = _example_loss(model, features, target)
        params[arr_idx][local] = original
        numeric = (up - down) / (2.0 * epsilon)
        a = analytic[arr_idx][local]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, rel)
    return worst


def gradient_norm(model: MlpModel, example) -> float:
    grads = example_gradients(model, extract_features(example.image), float(example.target))
    return float(np.sqrt(sum(float(np.sum(g**2)) for g in grads)))


# --- persistence -------------------------------------------------------------

def save_model(model: MlpModel, path, metadata: dict | None = None) -> None:
    meta = {"kind": "mlp", "layer_sizes": list(model.layer_sizes)}
    if metadata:
        meta.update(metadata)
    modelio.save_arrays(
        path,
        _flatten_params(model),
        extractor_version=model.extractor_version,
        activation=model.activation,
        metadata=meta,
    )


def load_model(path) -> MlpModel:
    arrays, extractor, activation = modelio.load_arrays(path)
    if len(arrays) % 2 != 0:
        raise modelio.ModelFormatError(f"{path}: expected weight/bias pairs")
    weights = arrays[0::2]
    biases = arrays[1::2]
    return MlpModel(weights, biases, activation=activation, extractor_version=extractor)
