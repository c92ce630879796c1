"""
Mini-batch training of the CNN and the fitted-model wrapper.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from probewatch.cnn.encoding import ImageEncoding, fit_encoding
from probewatch.cnn.network import CnnSpec, Network, Params, cross_entropy
from probewatch.errors import (
    ArgumentError,
    DivergenceError,
    OneClassOnlyError,
    SchemaMismatchError,
)
from probewatch.evaluation.metrics import confusion, metrics
from probewatch.evaluation.roc import roc_auc

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
RMSPROP_RHO = 0.9
EPSILON = 1e-7


class Optimizer:
    """Adam or RMSprop state over a parameter dictionary."""

    def __init__(self, kind: str, learning_rate: float, params: Params):
        self.kind = kind
        self.lr = learning_rate
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: Params, grads: Params):
        self.t += 1
        for name, g in grads.items():
            if self.kind == "adam":
                self.m[name] = ADAM_BETA1 * self.m[name] + (1 - ADAM_BETA1) * g
                self.v[name] = ADAM_BETA2 * self.v[name] + (1 - ADAM_BETA2) * g * g
                m_hat = self.m[name] / (1 - ADAM_BETA1**self.t)
                v_hat = self.v[name] / (1 - ADAM_BETA2**self.t)
                params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + EPSILON)
            else:
                self.v[name] = RMSPROP_RHO * self.v[name] + (1 - RMSPROP_RHO) * g * g
                params[name] -= self.lr * g / (np.sqrt(self.v[name]) + EPSILON)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float
    val_loss: Optional[float] = None
    val_accuracy: Optional[float] = None
    val_f1: Optional[float] = None
    val_auc: Optional[float] = None

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


class CnnModel:
    """
    A trained CNN plus the encoding that turns feature rows into its images.

    Attributes:
        network (Network): Weights and passes.
        encoding (ImageEncoding, optional): Row encoder; None for image-only models.
        feature_names (List[str], optional): Columns the encoding expects.
        history (List[EpochRecord]): Per-epoch training record.
    """

    def __init__(
        self,
        network: Network,
        encoding: Optional[ImageEncoding] = None,
        feature_names: Optional[Sequence[str]] = None,
        history: Optional[List[EpochRecord]] = None,
    ):
        self.network = network
        self.encoding = encoding
        self.feature_names = list(feature_names) if feature_names is not None else None
        self.history = history or []

    @property
    def spec(self) -> CnnSpec:
        return self.network.spec

    def predict_proba_images(self, images) -> np.ndarray:
        return self.network.predict_proba(images)

    def predict_proba(
        self, X, feature_names: Optional[Sequence[str]] = None
    ) -> np.ndarray:
        """Class probabilities of feature rows, shape (n, 2)."""
        if self.encoding is None:
            raise RuntimeError(
                "this model has no row encoding; use predict_proba_images"
            )
        if feature_names is not None and self.feature_names is not None:
            if list(feature_names) != self.feature_names:
                raise SchemaMismatchError(
                    "input features differ from the training features"
                )
        return self.network.predict_proba(self.encoding.encode(np.atleast_2d(X)))

    def predict(self, X, threshold: float = 0.5, feature_names=None) -> np.ndarray:
        proba = self.predict_proba(X, feature_names)[:, 1]
        return (proba >= threshold).astype(np.int64)

    def predict_proba_table(self, table) -> np.ndarray:
        return self.predict_proba(table.matrix(self.feature_names), self.feature_names)

    def to_dict(self) -> Dict:
        return {
            "model": "cnn",
            "spec": self.spec.to_dict(),
            "params": {
                name: {"shape": list(v.shape), "data": v.reshape(-1)}
                for name, v in self.network.params.items()
            },
            "encoding": None if self.encoding is None else self.encoding.to_dict(),
            "features": self.feature_names,
            "history": [h.to_dict() for h in self.history],
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "CnnModel":
        spec = CnnSpec.from_dict(d["spec"])
        params = {
            name: np.asarray(p["data"], dtype=float).reshape(p["shape"])
            for name, p in d["params"].items()
        }
        encoding = ImageEncoding.from_dict(d["encoding"]) if d.get("encoding") else None
        history = [EpochRecord(**h) for h in d.get("history", [])]
        return cls(Network(spec, params), encoding, d.get("features"), history)


def _validation(network: Network, images, y) -> Dict[str, Optional[float]]:
    probs = network.predict_proba(images)
    y = np.asarray(y, dtype=np.int64)
    loss = float(-np.mean(np.log(np.clip(probs[np.arange(len(y)), y], 1e-300, None))))
    m = metrics(confusion(y, (probs[:, 1] >= 0.5).astype(np.int64)))
    try:
        auc = roc_auc(y, probs[:, 1])[1]
    except OneClassOnlyError:
        auc = None
    return {
        "val_loss": loss,
        "val_accuracy": m.accuracy,
        "val_f1": m.f1,
        "val_auc": auc,
    }


def train_images(
    images,
    y,
    spec: CnnSpec,
    val_images=None,
    val_y=None,
    encoding: Optional[ImageEncoding] = None,
    feature_names: Optional[Sequence[str]] = None,
) -> CnnModel:
    """
    Trains a CNN on ready-made images.

    Shuffling and dropout draw from streams derived from ``spec.seed``, so the
    same inputs and spec give bit-identical weights.

    Args:
        images: Training images, ``(n, side, side)``.
        y: Binary labels.
        spec (CnnSpec): Architecture and training hyperparameters.
        val_images, val_y: Optional validation images and labels, scored after every epoch.
        encoding (ImageEncoding, optional): Stored on the model for row prediction.
        feature_names (Sequence[str], optional): Stored on the model.

    Returns:
        CnnModel: The trained model with its history.

    Raises:
        DivergenceError: If the loss becomes non-finite; carries the partial history.
    """
    network = Network(spec)
    x = network._as_batch(images)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if len(x) != len(y):
        raise SchemaMismatchError(f"{len(x)} images vs {len(y)} labels")
    if len(y) == 0:
        raise ArgumentError("cannot train on zero images")
    _, shuffle_seq, dropout_seq = np.random.SeedSequence(spec.seed).spawn(3)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    optimizer = Optimizer(spec.optimizer, spec.learning_rate, network.params)
    history: List[EpochRecord] = []

    for epoch in range(1, spec.epochs + 1):
        order = shuffle_rng.permutation(len(y))
        total_loss, correct = 0.0, 0
        for start in range(0, len(y), spec.batch_size):
            batch = order[start : start + spec.batch_size]
            probs, cache = network.forward(x[batch], train=True, rng=dropout_rng)
            loss = cross_entropy(cache, y[batch])
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became {loss} in epoch {epoch}", history)
            grads = network.backward(cache, y[batch])
            optimizer.step(network.params, grads)
            total_loss += loss * len(batch)
            correct += int(np.sum(probs.argmax(axis=1) == y[batch]))
        record = EpochRecord(epoch, total_loss / len(y), correct / len(y))
        if val_images is not None and val_y is not None:
            for key, value in _validation(network, val_images, val_y).items():
                setattr(record, key, value)
        if not all(np.isfinite(p).all() for p in network.params.values()):
            raise DivergenceError(
                f"weights became non-finite in epoch {epoch}", history
            )
        history.append(record)
        logger.debug(
            "epoch %d: loss %.4f accuracy %.4f val_f1 %s",
            epoch,
            record.loss,
            record.accuracy,
            record.val_f1,
        )
    logger.info(
        "trained CNN for %d epochs, final loss %.4f", spec.epochs, history[-1].loss
    )
    return CnnModel(network, encoding, feature_names, history)


def train_cnn(
    X_train,
    y_train,
    spec: CnnSpec,
    X_val=None,
    y_val=None,
    feature_names: Optional[Sequence[str]] = None,
) -> CnnModel:
    """
    Fits the row encoding on the training rows and trains a CNN on the encoded images.

    Args:
        X_train: Training rows, shape (n, d).
        y_train: Binary labels.
        spec (CnnSpec): Architecture and training hyperparameters; ``spec.side`` sizes the images.
        X_val, y_val: Optional validation rows and labels.
        feature_names (Sequence[str], optional): Column names stored on the model.

    Returns:
        CnnModel: The trained model.
    """
    encoding = fit_encoding(X_train, side=spec.side)
    val_images = encoding.encode(np.atleast_2d(X_val)) if X_val is not None else None
    return train_images(
        encoding.encode(np.atleast_2d(X_train)),
        y_train,
        spec,
        val_images,
        y_val,
        encoding=encoding,
        feature_names=feature_names,
    )


def train_cnn_table(
    train, spec: CnnSpec, val=None, names: Optional[Sequence[str]] = None
) -> CnnModel:
    names = train.names if names is None else list(names)
    return train_cnn(
        train.matrix(names),
        train.require_labels(),
        spec,
        None if val is None else val.matrix(names),
        None if val is None else val.require_labels(),
        feature_names=names,
    )
