"""
Tabular rows to square grayscale images.

A ``d``-feature row is min-max scaled with training statistics, repeated
``k = side**2 // d`` times, zero padded to ``side**2`` values and reshaped
row-major into a ``side x side`` image.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np

from probewatch.errors import (
    ArgumentError,
    FeatureCountTooLargeError,
    ShapeMismatchError,
)


@dataclass
class ImageEncoding:
    """
    Fitted row-to-image mapping.

    Attributes:
        side (int): Image height and width.
        mins (np.ndarray): Per-feature training minimum.
        maxs (np.ndarray): Per-feature training maximum.
    """

    side: int
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=float)
        self.maxs = np.asarray(self.maxs, dtype=float)
        if self.mins.shape != self.maxs.shape or self.mins.ndim != 1:
            raise ShapeMismatchError("mins and maxs must be vectors of one length")
        if self.d == 0:
            raise ShapeMismatchError("an encoding needs at least one feature")
        if np.any(self.maxs < self.mins):
            raise ArgumentError("per-feature max must be >= min")
        if self.d > self.side**2:
            raise FeatureCountTooLargeError(
                f"{self.d} features do not fit a {self.side}x{self.side} image"
            )

    @property
    def d(self) -> int:
        return len(self.mins)

    @property
    def repeats(self) -> int:
        return self.side**2 // self.d

    @property
    def pad(self) -> int:
        return self.side**2 - self.repeats * self.d

    def scale(self, X) -> np.ndarray:
        """Min-max scales rows into [0, 1]; constant features map to 0."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ShapeMismatchError(f"expected {self.d} features, got {X.shape[1]}")
        span = self.maxs - self.mins
        out = np.zeros_like(X)
        varying = span > 0
        out[:, varying] = (X[:, varying] - self.mins[varying]) / span[varying]
        return np.clip(out, 0.0, 1.0)

    def encode(self, X) -> np.ndarray:
        """
        Encodes one row or a batch.

        Args:
            X: A ``d``-vector or an ``(n, d)`` matrix.

        Returns:
            np.ndarray: ``(side, side)`` for a vector, ``(n, side, side)`` for a matrix.
        """
        single = np.ndim(X) == 1
        scaled = self.scale(X)
        flat = np.concatenate(
            [np.tile(scaled, (1, self.repeats)), np.zeros((len(scaled), self.pad))],
            axis=1,
        )
        images = flat.reshape(len(scaled), self.side, self.side)
        return images[0] if single else images

    def decode(self, image) -> np.ndarray:
        """The scaled feature values held in the first ``d`` pixels of each image."""
        image = np.asarray(image, dtype=float)
        if image.shape[-2:] != (self.side, self.side):
            raise ShapeMismatchError(
                f"expected {self.side}x{self.side} images, got {image.shape}"
            )
        flat = image.reshape(image.shape[:-2] + (self.side**2,))
        return flat[..., : self.d]

    def to_dict(self) -> Dict:
        return {"side": self.side, "mins": self.mins, "maxs": self.maxs}

    @classmethod
    def from_dict(cls, d: Dict) -> "ImageEncoding":
        return cls(int(d["side"]), d["mins"], d["maxs"])


def fit_encoding(X, side: int = 32) -> ImageEncoding:
    """
    Learns the per-feature ranges of the training rows.

    Args:
        X: Training matrix, shape (n, d).
        side (int): Image side.

    Returns:
        ImageEncoding: The fitted encoding.

    Raises:
        FeatureCountTooLargeError: If ``d > side**2``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ShapeMismatchError("fit_encoding needs a non-empty (n, d) matrix")
    if side < 1:
        raise ArgumentError("side must be >= 1")
    return ImageEncoding(side, X.min(axis=0), X.max(axis=0))
