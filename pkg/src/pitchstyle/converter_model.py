"""Windowed feed-forward predictor of the residual band.

The model maps a window of the melody (low) band, its voicing flags and
a learned style vector to the matching window of the residual (high)
band. Trained with mean absolute error and plain SGD it learns to emit
near-zero residual for the straight style and a stylized oscillation
for the vibrato style; sliding it over a whole contour with triangular
overlap-add turns one style's contour into the other's.

Everything is plain numpy: forward pass, hand-derived backprop, and a
central finite difference gradient check.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .signal_io import F0Contour
from .style_engine import StyleBands, decompose, recompose

__all__ = [
    "STYLES",
    "ConverterModel",
    "TrainConfig",
    "WindowBatch",
    "build_window_dataset",
    "forward",
    "loss",
    "train",
    "grad_check",
    "convert_style",
    "save_model",
    "load_model",
]

STYLES = ("straight", "vibrato")

_CHECKPOINT_VERSION = "pitchstyle-converter-1"


def style_index(style: str) -> int:
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}, expected one of {STYLES}")
    return STYLES.index(style)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    steps: int = 20000
    batch_size: int = 32
    seed: int = 0
    log_interval: int = 100

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.log_interval < 1:
            raise ValueError("log_interval must be >= 1")


@dataclass
class ConverterModel:
    """Weights of the tanh MLP plus one learned vector per style."""

    window: int
    hidden_sizes: tuple[int, ...]
    style_dim: int
    seed: int
    layers: list[tuple[np.ndarray, np.ndarray]] = field(repr=False)
    style_vectors: np.ndarray = field(repr=False)

    @property
    def input_dim(self) -> int:
        return 2 * self.window + self.style_dim

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for w, b in self.layers:
            params.append(w)
            params.append(b)
        params.append(self.style_vectors)
        return params


def initialize(
    window: int = 64,
    hidden_sizes: tuple[int, ...] = (128, 128),
    style_dim: int = 16,
    seed: int = 0,
) -> ConverterModel:
    """Build a freshly seeded model with Glorot uniform weight ranges."""
    if window < 2:
        raise ValueError("window must be >= 2")
    if style_dim < 1:
        raise ValueError("style_dim must be >= 1")
    if not hidden_sizes:
        raise ValueError("need at least one hidden layer")
    rng = np.random.default_rng(seed)
    sizes = [2 * window + style_dim, *hidden_sizes, window]
    layers = []
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        if i == 0:
            # Melody and flag inputs start disconnected: a random
            # projection of them amplifies per-window variation into
            # output patterns that plain SGD is very slow to unlearn.
            # Zero columns let early training fit the per-style
            # structure first; these pathways grow later only where
            # the data pulls them in.
            w[: 2 * window, :] = 0.0
        layers.append((w, b))
    # Loud style vectors: the other inputs are nearly constant per
    # window, so the style channel must dominate the hidden state for
    # the two styles to become separable in reasonable training time.
    style_vectors = rng.standard_normal((len(STYLES), style_dim)) * 3.0
    return ConverterModel(
        window=window,
        hidden_sizes=tuple(hidden_sizes),
        style_dim=style_dim,
        seed=seed,
        layers=layers,
        style_vectors=style_vectors,
    )


@dataclass
class WindowBatch:
    """Training windows: centered low band, flags, style ids, targets."""

    low: np.ndarray
    flags: np.ndarray
    style_ids: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.low = np.asarray(self.low, dtype=float)
        self.flags = np.asarray(self.flags, dtype=float)
        self.style_ids = np.asarray(self.style_ids, dtype=int)
        self.targets = np.asarray(self.targets, dtype=float)
        if not (
            self.low.shape == self.flags.shape == self.targets.shape
            and self.low.ndim == 2
            and len(self.style_ids) == len(self.low)
        ):
            raise ValueError("inconsistent window batch shapes")

    def __len__(self) -> int:
        return len(self.low)

    def take(self, idx) -> "WindowBatch":
        return WindowBatch(
            low=self.low[idx],
            flags=self.flags[idx],
            style_ids=self.style_ids[idx],
            targets=self.targets[idx],
        )


def build_window_dataset(pairs, levels: int = 4, window: int = 64, hop: int | None = None) -> WindowBatch:
    """Slice decomposed contour pairs into aligned training windows.

    ``pairs`` yields (styled, source, label) where source is the same
    melody without the style gesture; the model input is the source's
    low band, the target the styled contour's high band. Windows start
    on a fixed grid (every ``hop`` frames, default half a window) so
    style gestures keep a stable phase relative to the window.
    """
    if hop is None:
        hop = window // 2
    lows, flags, ids, targets = [], [], [], []
    for styled, source, label in pairs:
        if len(styled) != len(source):
            raise ValueError("styled and source contours differ in length")
        sid = style_index(label)
        target_bands = decompose(styled, levels)
        source_bands = decompose(source, levels)
        n = len(styled)
        for s in range(0, n - window + 1, hop):
            seg_low = source_bands.low[s : s + window]
            lows.append(seg_low - seg_low.mean())
            flags.append(source_bands.voiced[s : s + window].astype(float))
            ids.append(sid)
            targets.append(target_bands.high[s : s + window])
    if not lows:
        raise ValueError("no training windows: contours shorter than the window size")
    return WindowBatch(
        low=np.array(lows),
        flags=np.array(flags),
        style_ids=np.array(ids),
        targets=np.array(targets),
    )


def _assemble_input(model: ConverterModel, low: np.ndarray, flags: np.ndarray, style_ids: np.ndarray) -> np.ndarray:
    return np.concatenate([low, flags, model.style_vectors[style_ids]], axis=1)


def _forward_internal(model: ConverterModel, x: np.ndarray):
    activations = [x]
    a = x
    for i, (w, b) in enumerate(model.layers):
        z = a @ w + b
        a = z if i == len(model.layers) - 1 else np.tanh(z)
        activations.append(a)
    return a, activations


def forward(model: ConverterModel, low_window, flags, style: str) -> np.ndarray:
    """Predict one high-band window from a centered low-band window."""
    low_window = np.asarray(low_window, dtype=float)
    flags = np.asarray(flags, dtype=float)
    if low_window.shape != (model.window,) or flags.shape != (model.window,):
        raise ValueError(f"inputs must have shape ({model.window},)")
    sid = np.array([style_index(style)])
    x = _assemble_input(model, low_window[None, :], flags[None, :], sid)
    y, _ = _forward_internal(model, x)
    return y[0]


def _batch_loss(model: ConverterModel, batch: WindowBatch):
    x = _assemble_input(model, batch.low, batch.flags, batch.style_ids)
    y, activations = _forward_internal(model, x)
    residual = y - batch.targets
    return float(np.mean(np.abs(residual))), residual, activations


def loss(model: ConverterModel, batch: WindowBatch) -> float:
    """Mean absolute error of the predicted high-band windows."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    value, _, _ = _batch_loss(model, batch)
    return value


def _gradients(model: ConverterModel, batch: WindowBatch, residual: np.ndarray, activations):
    b, w = residual.shape
    delta = np.sign(residual) / (b * w)
    grads_layers = []
    for i in range(len(model.layers) - 1, -1, -1):
        weight, _bias = model.layers[i]
        a_prev = activations[i]
        grads_layers.append((a_prev.T @ delta, delta.sum(axis=0)))
        delta = delta @ weight.T
        if i > 0:
            delta = delta * (1.0 - activations[i] ** 2)
    grads_layers.reverse()
    # delta is now the gradient w.r.t. the assembled input row.
    style_grad = np.zeros_like(model.style_vectors)
    style_part = delta[:, 2 * model.window :]
    np.add.at(style_grad, batch.style_ids, style_part)
    return grads_layers, style_grad


def train(model: ConverterModel, dataset: WindowBatch, config: TrainConfig | None = None):
    """SGD with a fixed step on mean absolute error.

    Batches are drawn with replacement from ``dataset`` using the
    config seed, so identical seeds reproduce identical models. The
    input model is left untouched; a trained copy is returned along
    with the mean loss per logging interval. Aborts if the loss stops
    being finite.
    """
    if config is None:
        config = TrainConfig()
    config.validate()
    if len(dataset) < config.batch_size:
        raise ValueError(
            f"dataset has {len(dataset)} windows, fewer than batch_size {config.batch_size}"
        )
    model = ConverterModel(
        window=model.window,
        hidden_sizes=model.hidden_sizes,
        style_dim=model.style_dim,
        seed=model.seed,
        layers=[(w.copy(), b.copy()) for w, b in model.layers],
        style_vectors=model.style_vectors.copy(),
    )
    rng = np.random.default_rng(config.seed)
    history: list[float] = []
    bucket: list[float] = []
    for step in range(1, config.steps + 1):
        idx = rng.integers(0, len(dataset), size=config.batch_size)
        batch = dataset.take(idx)
        value, residual, activations = _batch_loss(model, batch)
        if not np.isfinite(value):
            raise RuntimeError(f"training diverged at step {step}: loss={value}")
        bucket.append(value)
        grads_layers, style_grad = _gradients(model, batch, residual, activations)
        lr = config.learning_rate
        for (weight, bias), (gw, gb) in zip(model.layers, grads_layers):
            weight -= lr * gw
            bias -= lr * gb
        model.style_vectors -= lr * style_grad
        if step % config.log_interval == 0:
            history.append(float(np.mean(bucket)))
            bucket = []
    if bucket:
        history.append(float(np.mean(bucket)))
    return model, history


def grad_check(
    model: ConverterModel,
    sample: WindowBatch,
    epsilon: float = 1e-5,
    coords: int = 120,
    seed: int = 0,
) -> float:
    """Compare backprop against central finite differences.

    Checks ``coords`` randomly chosen weight coordinates and returns the
    largest relative error. Coordinates where the perturbation flips a
    residual sign (the loss is not differentiable there) are skipped and
    redrawn.
    """
    if len(sample) == 0:
        raise ValueError("empty gradient check sample")
    _, residual, activations = _batch_loss(model, sample)
    grads_layers, style_grad = _gradients(model, sample, residual, activations)
    flat_grads = []
    for gw, gb in grads_layers:
        flat_grads.append(gw)
        flat_grads.append(gb)
    flat_grads.append(style_grad)
    params = model.parameters()

    sizes = np.array([p.size for p in params])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    attempts = 0
    max_attempts = coords * 50
    while checked < coords and attempts < max_attempts:
        attempts += 1
        flat_choice = int(rng.integers(0, total))
        p_idx = int(np.searchsorted(np.cumsum(sizes), flat_choice, side="right"))
        local = flat_choice - int(np.concatenate([[0], np.cumsum(sizes)])[p_idx])
        param = params[p_idx]
        original = param.flat[local]

        param.flat[local] = original + epsilon
        plus, res_plus, _ = _batch_loss(model, sample)
        param.flat[local] = original - epsilon
        minus, res_minus, _ = _batch_loss(model, sample)
        param.flat[local] = original

        if np.any(np.sign(res_plus) != np.sign(res_minus)):
            continue
        numeric = (plus - minus) / (2 * epsilon)
        analytic = flat_grads[p_idx].flat[local]
        scale = max(abs(numeric), abs(analytic))
        if scale > 1e-12:
            worst = max(worst, abs(numeric - analytic) / scale)
        checked += 1
    if checked < coords:
        raise RuntimeError(
            f"could only check {checked} of {coords} coordinates; "
            "loss is non-smooth almost everywhere on this sample"
        )
    return worst


def _triangle_weights(window: int) -> np.ndarray:
    center = (window - 1) / 2.0
    return 1.0 - np.abs(np.arange(window) - center) / ((window + 1) / 2.0)


def convert_style(model: ConverterModel, contour: F0Contour, target_style: str, levels: int = 4) -> F0Contour:
    """Re-render a contour in another style.

    The low band passes through unchanged; the high band is replaced by
    the model's prediction for ``target_style``, assembled from windows
    on the half-window grid with triangular overlap-add.
    """
    sid = style_index(target_style)
    w = model.window
    n = len(contour)
    if n < w:
        raise ValueError(f"contour has {n} frames, need at least {w}")
    bands = decompose(contour, levels)

    hop = w // 2
    n_windows = 1 + max(0, -(-(n - w) // hop))
    padded = (n_windows - 1) * hop + w
    low = np.concatenate([bands.low, np.full(padded - n, bands.low[-1])])
    flags = np.concatenate([bands.voiced.astype(float), np.zeros(padded - n)])

    starts = np.arange(n_windows) * hop
    lows = np.stack([low[s : s + w] for s in starts])
    lows = lows - lows.mean(axis=1, keepdims=True)
    flag_rows = np.stack([flags[s : s + w] for s in starts])
    ids = np.full(n_windows, sid)
    x = _assemble_input(model, lows, flag_rows, ids)
    predictions, _ = _forward_internal(model, x)

    tri = _triangle_weights(w)
    acc = np.zeros(padded)
    norm = np.zeros(padded)
    for row, s in zip(predictions, starts):
        acc[s : s + w] += tri * row
        norm[s : s + w] += tri
    high = acc / norm

    rebuilt = StyleBands(
        low=bands.low,
        high=high[:n],
        voiced=bands.voiced,
        frame_rate=bands.frame_rate,
        levels=levels,
    )
    return recompose(rebuilt)


def save_model(path, model: ConverterModel) -> None:
    """Write a versioned checkpoint (npz archive)."""
    meta = {
        "version": _CHECKPOINT_VERSION,
        "window": model.window,
        "hidden_sizes": list(model.hidden_sizes),
        "style_dim": model.style_dim,
        "seed": model.seed,
        "n_layers": len(model.layers),
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for i, (w, b) in enumerate(model.layers):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    arrays["style_vectors"] = model.style_vectors
    np.savez(path, **arrays)


def load_model(path) -> ConverterModel:
    """Load a checkpoint, rejecting unknown versions."""
    with np.load(path, allow_pickle=False) as archive:
        try:
            meta = json.loads(bytes(archive["meta"]).decode())
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}: not a converter checkpoint") from exc
        if meta.get("version") != _CHECKPOINT_VERSION:
            raise ValueError(
                f"checkpoint version mismatch: file has {meta.get('version')!r}, "
                f"this build expects {_CHECKPOINT_VERSION!r}"
            )
        layers = [
            (archive[f"w{i}"].copy(), archive[f"b{i}"].copy())
            for i in range(meta["n_layers"])
        ]
        style_vectors = archive["style_vectors"].copy()
    return ConverterModel(
        window=meta["window"],
        hidden_sizes=tuple(meta["hidden_sizes"]),
        style_dim=meta["style_dim"],
        seed=meta["seed"],
        layers=layers,
        style_vectors=style_vectors,
    )
