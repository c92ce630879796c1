"""
Saliency maps: which pixels drive a class score.
"""

import numpy as np

from probewatch.cnn.network import Network
from probewatch.errors import ArgumentError


def class_score(network: Network, image, target_class: int) -> float:
    """The pre-softmax score of ``target_class`` for one image."""
    _, cache = network.forward(image)
    return float(cache["logits"][0, target_class])


def saliency(model, image, target_class: int = 1, guided: bool = False) -> np.ndarray:
    """
    Absolute gradient of a class score with respect to every input pixel.

    Args:
        model: A ``CnnModel`` or a bare ``Network``.
        image: One ``(side, side)`` image.
        target_class (int): 0 (normal) or 1 (probing).
        guided (bool): Zero negative upstream gradients at every ReLU on the way back.

    Returns:
        np.ndarray: A non-negative ``(side, side)`` map.
    """
    if target_class not in (0, 1):
        raise ArgumentError(f"target_class must be 0 or 1, got {target_class}")
    network = getattr(model, "network", model)
    _, cache = network.forward(image)
    dlogits = np.zeros_like(cache["logits"])
    dlogits[:, target_class] = 1.0
    _, dx = network.backward_from_logits(cache, dlogits, guided=guided)
    return np.abs(dx[0, 0])
