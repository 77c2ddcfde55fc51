"""
helpers.py - Funciones auxiliares reutilizables.

Small numeric utilities shared by the model, the trainer, the security
evaluator and the search engine.
"""

import numpy as np


def derive_seed(*parts: int) -> int:
    """
    Derives a 32-bit seed from a tuple of non-negative integers.

    Args:
        parts: e.g. (run seed, sample index, node id).

    Returns:
        Seed usable with numpy.random.default_rng; distinct tuples give
        statistically independent streams.
    """
    entropy = [int(p) for p in parts]
    if any(p < 0 for p in entropy):
        raise ValueError(f"seed parts must be non-negative: {parts}")
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """
    Numerically stable softmax along `axis`.

    Args:
        logits: array of scores.
        axis: axis that is normalized.

    Returns:
        Array of the same shape whose slices along `axis` sum to 1.
    """
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """
    Mean softmax cross-entropy and its gradient w.r.t. the logits.

    Args:
        logits: (B, C) scores.
        labels: (B,) integer classes.

    Returns:
        (loss, dloss/dlogits) with the gradient already divided by B.
    """
    probs = softmax(logits, axis=1)
    idx = np.arange(len(labels))
    loss = float(-np.mean(np.log(np.clip(probs[idx, labels], 1e-300, None))))
    grad = probs.copy()
    grad[idx, labels] -= 1.0
    return loss, grad / len(labels)


def clamp(value: float, min_val: float, max_val: float) -> float:
    """
    Limita un valor dentro de un rango.

    Args:
        value: valor a limitar.
        min_val: valor mínimo.
        max_val: valor máximo.

    Returns:
        Valor dentro del rango [min_val, max_val].
    """
    return max(min_val, min(value, max_val))


def global_norm(arrays) -> float:
    """Euclidean norm of a list of arrays taken as one vector."""
    return float(np.sqrt(sum(float(np.sum(a * a)) for a in arrays)))
