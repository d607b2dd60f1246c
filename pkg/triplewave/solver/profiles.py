"""
One-dimensional conormal profiles riding on characteristic surfaces.

A profile is a function of the level-set value phi; the incoming wave
is v_j(y) = profile(phi_j(y)).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import betainc

from triplewave.errors import ArgumentError, PreconditionError
from triplewave.utils.smooth import plateau, smooth_step

logger = logging.getLogger(__name__)

PROFILE_KINDS = ("xplus", "jump", "symbol")


def smoothed_ramp(x, eps: float, q: int) -> np.ndarray:
    """
    C^q regularization of x_+ that equals x_+ outside [-eps, eps].

    It is the running integral of a smoothed Heaviside whose derivative is
    a Beta(q, q) density on [-eps, eps].
    """
    x = np.asarray(x, dtype=float)
    if eps == 0:
        return np.maximum(x, 0.0)
    u = x / eps
    w = np.clip(0.5 * (u + 1.0), 0.0, 1.0)
    inner = 2.0 * (w * betainc(q, q, w) - 0.5 * betainc(q + 1, q, w))
    out = np.where(u >= 1.0, u, inner)
    out = np.where(u <= -1.0, 0.0, out)
    return eps * out


@dataclass
class ConormalProfile:
    """
    Regularized conormal profile.

    Args:
        kind: "xplus" (x_+^k), "jump" (smoothed step) or "symbol"
            (band-limited inverse transform of <eta>^m)
        order: k for xplus, m for symbol (ignored for jump)
        smoothing_eps: Regularization width; 0 keeps x_+^k exact
        amplitude: Scale; the profile reaches about this size on its support
        width: Gaussian envelope width in phi
        surface: Label of the surface the profile rides on
    """

    kind: str = "xplus"
    order: float = 4.0
    smoothing_eps: float = 0.0
    amplitude: float = 1.0
    width: float = 0.5
    surface: str = ""
    _table: Optional[tuple] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ArgumentError(f"unknown profile kind '{self.kind}'")
        if self.smoothing_eps < 0 or self.width <= 0:
            raise ArgumentError("smoothing_eps must be >= 0 and width > 0")
        if self.kind == "xplus" and self.order < 0:
            raise ArgumentError("x_+^k profile needs k >= 0")

    @property
    def decay_exponent(self) -> float:
        """Expected Fourier decay exponent of the profile."""
        if self.kind == "xplus":
            return -self.order - 1.0
        if self.kind == "jump":
            return -1.0
        return self.order

    def check_resolution(self, h: float, min_cells: int = 4) -> None:
        """Refuse a smoothing width below min_cells grid cells."""
        needs_eps = self.kind == "jump" or self.smoothing_eps > 0
        if needs_eps and self.smoothing_eps < min_cells * h * (1 - 1e-9):
            raise PreconditionError(
                f"smoothing_eps={self.smoothing_eps} resolves fewer than {min_cells} cells of size {h}"
            )

    def _envelope(self, x: np.ndarray) -> np.ndarray:
        # Gaussian: its transform is negligible in the conormal band
        return np.exp(-(x / self.width) ** 2)

    def _peak(self) -> float:
        """Maximum of x^k exp(-(x/width)^2) over x > 0."""
        k = self.order
        if k == 0:
            return 1.0
        return (0.5 * k) ** (0.5 * k) * self.width ** k * math.exp(-0.5 * k)

    def _symbol_table(self):
        if self._table is None:
            n = 1 << 15
            half = 4.0 * self.width
            dx = 2 * half / n
            eta = 2 * np.pi * np.fft.fftfreq(n, d=dx)
            band = np.pi / (2.0 * max(self.smoothing_eps, 4 * dx))
            spec = (1.0 + eta ** 2) ** (0.5 * self.order) * plateau(eta, 0.5 * band, band)
            vals = np.fft.fftshift(np.real(np.fft.ifft(spec))) / dx
            xs = (np.arange(n) - n // 2) * dx
            vals /= np.max(np.abs(vals))
            self._table = (xs, vals)
        return self._table

    def __call__(self, phi) -> np.ndarray:
        x = np.asarray(phi, dtype=float)
        if self.amplitude == 0:
            return np.zeros_like(x)
        if self.kind == "xplus":
            q = int(math.ceil(self.order)) + 4
            base = smoothed_ramp(x, self.smoothing_eps, q) ** self.order / self._peak()
            base = np.where(x <= -self.smoothing_eps, 0.0, base)
        elif self.kind == "jump":
            if self.smoothing_eps == 0:
                base = (x > 0).astype(float)
            else:
                base = smooth_step((x + self.smoothing_eps) / (2 * self.smoothing_eps))
        else:
            xs, vals = self._symbol_table()
            base = np.interp(x, xs, vals, left=0.0, right=0.0)
        return self.amplitude * base * self._envelope(x)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "order": self.order, "smoothing_eps": self.smoothing_eps,
                "amplitude": self.amplitude, "width": self.width, "surface": self.surface}
