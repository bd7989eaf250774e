"""The error metric every solver reports."""

import numpy as np

from .errors import DomainError


def relative_error(predicted, exact) -> float:
    """||predicted - exact||_2 / ||exact||_2 over matching point sets."""
    predicted = np.asarray(predicted, dtype=float).ravel()
    exact = np.asarray(exact, dtype=float).ravel()
    if predicted.shape != exact.shape or exact.size == 0:
        raise DomainError("relative_error needs matching, non-empty arrays")
    denom = float(np.linalg.norm(exact))
    if denom == 0.0:
        raise DomainError("exact solution has zero norm")
    return float(np.linalg.norm(predicted - exact) / denom)
