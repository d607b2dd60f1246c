"""
C-infinity cutoff functions used for windows, interaction cutoffs and tapers.
"""

import numpy as np


def _psi(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x) -> np.ndarray:
    """Smooth step: 0 for x <= 0, 1 for x >= 1, C-infinity in between."""
    x = np.asarray(x, dtype=float)
    a = _psi(x)
    b = _psi(1.0 - x)
    return a / (a + b)


def plateau(r, inner: float, outer: float) -> np.ndarray:
    """
    Radial plateau: 1 for |r| <= inner, 0 for |r| >= outer.

    Args:
        r: Distances (any shape)
        inner: Radius of the flat part
        outer: Radius of the support

    Returns:
        Array with the shape of r
    """
    if outer <= inner:
        raise ValueError("outer radius must exceed inner radius")
    r = np.abs(np.asarray(r, dtype=float))
    return smooth_step((outer - r) / (outer - inner))


def flat_top_window(n: int, flat_fraction: float = 0.5) -> np.ndarray:
    """Symmetric C-infinity window on n samples with a flat centre."""
    x = np.linspace(-1.0, 1.0, n)
    return plateau(x, flat_fraction, 1.0)
