"""
A small convolutional classifier with hand-written forward and backward passes.

Layout: for every conv layer, a stride-1 "same" convolution, its activation,
2x2 max pooling and (in training) inverted dropout; then a flatten, one
ReLU dense layer with optional dropout and a two-way softmax. All arrays are
float64.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit, logsumexp

from probewatch.errors import ArgumentError, ShapeMismatchError

ACTIVATIONS = ("relu", "sigmoid")
OPTIMIZERS = ("adam", "rmsprop")

Params = Dict[str, np.ndarray]


@dataclass
class ConvLayerSpec:
    filters: int = 64
    kernel: int = 3
    activation: str = "relu"
    dropout: float = 0.0

    def __post_init__(self):
        if self.filters < 1:
            raise ArgumentError("filters must be >= 1")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ArgumentError("kernel must be a positive odd size")
        if self.activation not in ACTIVATIONS:
            raise ArgumentError(f"activation must be one of {ACTIVATIONS}")
        if not 0.0 <= self.dropout < 1.0:
            raise ArgumentError("dropout must lie in [0, 1)")

    def to_dict(self) -> Dict:
        return {
            "filters": self.filters,
            "kernel": self.kernel,
            "activation": self.activation,
            "dropout": self.dropout,
        }


@dataclass
class CnnSpec:
    """
    Architecture and training hyperparameters.

    Attributes:
        conv_layers (List[ConvLayerSpec]): Convolution blocks, input side first.
        dense_units (int): Width of the hidden dense layer.
        dense_dropout (float): Dropout after the hidden dense layer.
        optimizer (str): ``adam`` or ``rmsprop``.
        learning_rate (float): Step size.
        batch_size (int): Rows per update.
        epochs (int): Passes over the training rows.
        side (int): Image side.
        seed (int): Seed of initialization, shuffling and dropout.
    """

    conv_layers: List[ConvLayerSpec] = field(default_factory=lambda: [ConvLayerSpec()])
    dense_units: int = 128
    dense_dropout: float = 0.0
    optimizer: str = "adam"
    learning_rate: float = 0.001
    batch_size: int = 128
    epochs: int = 5
    side: int = 32
    seed: int = 0

    def __post_init__(self):
        self.conv_layers = [
            c if isinstance(c, ConvLayerSpec) else ConvLayerSpec(**c)
            for c in self.conv_layers
        ]
        if self.optimizer not in OPTIMIZERS:
            raise ArgumentError(f"optimizer must be one of {OPTIMIZERS}")
        if self.epochs < 1:
            raise ArgumentError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ArgumentError("batch_size must be >= 1")
        if self.dense_units < 1:
            raise ArgumentError("dense_units must be >= 1")
        if not 0.0 <= self.dense_dropout < 1.0:
            raise ArgumentError("dense_dropout must lie in [0, 1)")
        if not self.learning_rate > 0:
            raise ArgumentError("learning_rate must be positive")
        if self.side >> len(self.conv_layers) < 1:
            raise ArgumentError(
                f"a {self.side}-pixel image cannot pass through "
                f"{len(self.conv_layers)} 2x2 poolings"
            )

    @classmethod
    def institutional(cls, **overrides) -> "CnnSpec":
        """Three 64-filter layers (sigmoid, relu, sigmoid), Adam, batch 128, 5 epochs."""
        layers = [
            ConvLayerSpec(64, 3, "sigmoid", 0.12),
            ConvLayerSpec(64, 3, "relu", 0.16),
            ConvLayerSpec(64, 3, "sigmoid", 0.11),
        ]
        defaults = {
            "conv_layers": layers,
            "optimizer": "adam",
            "batch_size": 128,
            "epochs": 5,
        }
        return cls(**{**defaults, **overrides})

    @classmethod
    def unsw(cls, **overrides) -> "CnnSpec":
        """Four layers of 64/64/32/64 filters, RMSprop, batch 128, 7 epochs.

        The last layer has no dropout.
        """
        layers = [
            ConvLayerSpec(64, 3, "relu", 0.54),
            ConvLayerSpec(64, 3, "sigmoid", 0.43),
            ConvLayerSpec(32, 3, "relu", 0.69),
            ConvLayerSpec(64, 3, "relu", 0.0),
        ]
        defaults = {
            "conv_layers": layers,
            "optimizer": "rmsprop",
            "batch_size": 128,
            "epochs": 7,
        }
        return cls(**{**defaults, **overrides})

    def to_dict(self) -> Dict:
        return {
            "conv_layers": [c.to_dict() for c in self.conv_layers],
            "dense_units": self.dense_units,
            "dense_dropout": self.dense_dropout,
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "side": self.side,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "CnnSpec":
        return cls(**d)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(z, 0.0) if kind == "relu" else expit(z)


def _activation_grad(z, a, upstream, kind: str, guided: bool) -> np.ndarray:
    if kind == "relu":
        grad = upstream * (z > 0)
        return grad * (upstream > 0) if guided else grad
    return upstream * a * (1.0 - a)


def conv_forward(
    x: np.ndarray, W: np.ndarray, b: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Same-padded stride-1 convolution (cross-correlation).

    Args:
        x: Input of shape (n, C, H, W).
        W: Filters of shape (F, C, k, k).
        b: Biases of shape (F,).

    Returns:
        Tuple[np.ndarray, np.ndarray]: Output (n, F, H, W) and the input windows.
    """
    p = W.shape[-1] // 2
    padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    windows = sliding_window_view(padded, W.shape[-2:], axis=(2, 3))
    out = np.tensordot(windows, W, axes=([1, 4, 5], [1, 2, 3]))
    return out.transpose(0, 3, 1, 2) + b[None, :, None, None], windows


def conv_backward(dout: np.ndarray, windows: np.ndarray, W: np.ndarray):
    """Gradients of ``conv_forward`` with respect to its input, filters and biases."""
    k = W.shape[-1]
    q = k - 1 - k // 2
    dW = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))
    db = dout.sum(axis=(0, 2, 3))
    padded = np.pad(dout, ((0, 0), (0, 0), (q, q), (q, q)))
    dwin = sliding_window_view(padded, (k, k), axis=(2, 3))
    dx = np.tensordot(dwin, W[:, :, ::-1, ::-1], axes=([1, 4, 5], [0, 2, 3]))
    return dx.transpose(0, 3, 1, 2), dW, db


def pool_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """2x2 max pooling (floor on odd sizes); returns the output and window argmaxes."""
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    blocks = x[:, :, : 2 * ho, : 2 * wo].reshape(n, c, ho, 2, wo, 2)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, ho, wo, 4)
    arg = blocks.argmax(axis=-1)
    return np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0], arg


def pool_backward(dout: np.ndarray, arg: np.ndarray, shape) -> np.ndarray:
    """Routes each window's gradient to its first maximum."""
    n, c, h, w = shape
    ho, wo = dout.shape[2], dout.shape[3]
    onehot = (np.arange(4) == arg[..., None]) * dout[..., None]
    blocks = onehot.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, 2 * ho, 2 * wo)
    dx = np.zeros(shape)
    dx[:, :, : 2 * ho, : 2 * wo] = blocks
    return dx


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> Optional[np.ndarray]:
    """Inverted dropout mask: kept units are scaled by 1 / (1 - rate)."""
    if rate <= 0.0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Network:
    """
    Parameters and passes of one CNN.

    Args:
        spec (CnnSpec): Architecture.
        params (Params, optional): Existing weights; freshly initialized from
            ``spec.seed`` when omitted.
    """

    def __init__(self, spec: CnnSpec, params: Optional[Params] = None):
        self.spec = spec
        self.params = params if params is not None else self.init_params(spec)
        self._check_shapes()

    @staticmethod
    def flat_size(spec: CnnSpec) -> int:
        side = spec.side
        for _ in spec.conv_layers:
            side //= 2
        channels = spec.conv_layers[-1].filters if spec.conv_layers else 1
        return channels * side * side

    @classmethod
    def param_shapes(cls, spec: CnnSpec) -> Dict[str, Tuple[int, ...]]:
        shapes: Dict[str, Tuple[int, ...]] = {}
        channels = 1
        for i, layer in enumerate(spec.conv_layers):
            shapes[f"conv{i}.W"] = (layer.filters, channels, layer.kernel, layer.kernel)
            shapes[f"conv{i}.b"] = (layer.filters,)
            channels = layer.filters
        shapes["dense.W"] = (cls.flat_size(spec), spec.dense_units)
        shapes["dense.b"] = (spec.dense_units,)
        shapes["out.W"] = (spec.dense_units, 2)
        shapes["out.b"] = (2,)
        return shapes

    @classmethod
    def init_params(cls, spec: CnnSpec) -> Params:
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed).spawn(1)[0])
        params: Params = {}
        for name, shape in cls.param_shapes(spec).items():
            if name.endswith(".b"):
                params[name] = np.zeros(shape)
            elif len(shape) == 4:
                receptive = shape[2] * shape[3]
                fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
                params[name] = glorot(rng, shape, fan_in, fan_out)
            else:
                params[name] = glorot(rng, shape, shape[0], shape[1])
        return params

    def _check_shapes(self):
        for name, shape in self.param_shapes(self.spec).items():
            if name not in self.params or self.params[name].shape != shape:
                raise ShapeMismatchError(f"parameter {name} must have shape {shape}")

    def _as_batch(self, images) -> np.ndarray:
        x = np.asarray(images, dtype=float)
        if x.ndim == 2:
            x = x[None]
        if x.ndim == 3:
            x = x[:, None]
        side = self.spec.side
        if x.ndim != 4 or x.shape[1:] != (1, side, side):
            raise ShapeMismatchError(
                f"expected {side}x{side} single-channel images, got {np.shape(images)}"
            )
        return x

    def forward(
        self, images, train: bool = False, rng: Optional[np.random.Generator] = None
    ):
        """
        Class probabilities for a batch of images.

        Args:
            images: ``(n, side, side)``, ``(n, 1, side, side)`` or one ``(side, side)`` image.
            train (bool): Apply dropout, drawing masks from ``rng``.
            rng (np.random.Generator, optional): Dropout stream; required when ``train``.

        Returns:
            Tuple[np.ndarray, Dict]: Probabilities (n, 2) and the cache for ``backward``.
        """
        if train and rng is None:
            raise ArgumentError("training-mode forward needs a dropout generator")
        x = self._as_batch(images)
        cache: Dict = {"input": x, "conv": []}
        for i, layer in enumerate(self.spec.conv_layers):
            W, b = self.params[f"conv{i}.W"], self.params[f"conv{i}.b"]
            z, windows = conv_forward(x, W, b)
            a = _activate(z, layer.activation)
            pooled, arg = pool_forward(a)
            mask = dropout_mask(rng, pooled.shape, layer.dropout) if train else None
            x = pooled * mask if mask is not None else pooled
            cache["conv"].append(
                {"windows": windows, "z": z, "a": a, "arg": arg, "mask": mask}
            )
        flat = x.reshape(len(x), -1)
        hz = flat @ self.params["dense.W"] + self.params["dense.b"]
        h = np.maximum(hz, 0.0)
        hmask = dropout_mask(rng, h.shape, self.spec.dense_dropout) if train else None
        hd = h * hmask if hmask is not None else h
        logits = hd @ self.params["out.W"] + self.params["out.b"]
        log_probs = logits - logsumexp(logits, axis=1, keepdims=True)
        cache.update(
            {
                "pool_shape": x.shape,
                "flat": flat,
                "hz": hz,
                "hmask": hmask,
                "hd": hd,
                "logits": logits,
                "log_probs": log_probs,
            }
        )
        return np.exp(log_probs), cache

    def backward_from_logits(
        self, cache: Dict, dlogits: np.ndarray, guided: bool = False
    ):
        """
        Backpropagates a gradient on the pre-softmax scores.

        Args:
            cache (Dict): Output of ``forward``.
            dlogits (np.ndarray): Gradient with respect to the logits, shape (n, 2).
            guided (bool): Pass only positive gradients through ReLUs.

        Returns:
            Tuple[Params, np.ndarray]: Parameter gradients and the input gradient.
        """
        grads: Params = {}
        grads["out.W"] = cache["hd"].T @ dlogits
        grads["out.b"] = dlogits.sum(axis=0)
        dh = dlogits @ self.params["out.W"].T
        if cache["hmask"] is not None:
            dh = dh * cache["hmask"]
        dhz = _activation_grad(cache["hz"], None, dh, "relu", guided)
        grads["dense.W"] = cache["flat"].T @ dhz
        grads["dense.b"] = dhz.sum(axis=0)
        dx = (dhz @ self.params["dense.W"].T).reshape(cache["pool_shape"])
        for i in reversed(range(len(self.spec.conv_layers))):
            layer, c = self.spec.conv_layers[i], cache["conv"][i]
            if c["mask"] is not None:
                dx = dx * c["mask"]
            da = pool_backward(dx, c["arg"], c["a"].shape)
            dz = _activation_grad(c["z"], c["a"], da, layer.activation, guided)
            dx, grads[f"conv{i}.W"], grads[f"conv{i}.b"] = conv_backward(
                dz, c["windows"], self.params[f"conv{i}.W"]
            )
        return grads, dx

    def backward(self, cache: Dict, labels) -> Params:
        """Gradients of the mean categorical cross-entropy for the cached batch."""
        y = np.asarray(labels, dtype=np.int64)
        probs = np.exp(cache["log_probs"])
        dlogits = probs.copy()
        dlogits[np.arange(len(y)), y] -= 1.0
        dlogits /= len(y)
        return self.backward_from_logits(cache, dlogits)[0]

    def predict_proba(self, images, batch_size: int = 256) -> np.ndarray:
        x = self._as_batch(images)
        out = [
            self.forward(x[i : i + batch_size])[0]
            for i in range(0, len(x), batch_size)
        ]
        return np.concatenate(out) if out else np.zeros((0, 2))


def cross_entropy(cache: Dict, labels) -> float:
    """Mean categorical cross-entropy of a cached forward pass."""
    y = np.asarray(labels, dtype=np.int64)
    return float(-np.mean(cache["log_probs"][np.arange(len(y)), y]))
