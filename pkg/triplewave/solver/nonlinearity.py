"""
Semilinear right-hand sides Y(y) f(y, u) and forcing terms.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from triplewave.errors import PreconditionError
from triplewave.utils.smooth import plateau, smooth_step

logger = logging.getLogger(__name__)

SpaceTimeFn = Callable[[np.ndarray], np.ndarray]


def interaction_cutoff(
    center: Sequence[float],
    radius: float,
    t_on: float = -1.0,
    t_full: float = -0.5,
    t_off: Optional[float] = None,
) -> SpaceTimeFn:
    """
    Y(y) = ramp(t) * bump(|x - center|).

    The ramp is 0 for t <= t_on and 1 for t >= t_full; with t_off it
    ramps down again over [t_off, t_off + (t_full - t_on)]. The spatial
    bump is 1 inside radius/2 and 0 outside radius.
    """
    c = np.asarray(center, dtype=float)
    rise = t_full - t_on

    def cutoff(y):
        y = np.asarray(y, dtype=float)
        t = y[..., 0]
        ramp = smooth_step((t - t_on) / rise)
        if t_off is not None:
            ramp = ramp * smooth_step((t_off + rise - t) / rise)
        r = np.linalg.norm(y[..., 1:] - c, axis=-1)
        return ramp * plateau(r, 0.5 * radius, radius)

    return cutoff


@dataclass
class Nonlinearity:
    """
    Right-hand side Y(y) f(y, u).

    Attributes:
        f: (y, u) -> array
        d3f_on_gamma: (q, u) -> d_u^3 f at points of Gamma
        cutoff: Y(y), zero for t < -1
        label: Descriptor for reports
        coeffs: Polynomial coefficients c_k of sum c_k u^k, when polynomial
    """

    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d3f_on_gamma: Callable[[np.ndarray, np.ndarray], np.ndarray]
    cutoff: SpaceTimeFn
    label: str = "custom"
    coeffs: Optional[Dict[int, float]] = None
    descriptor: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def polynomial(
        cls,
        coeffs: Dict[int, float],
        cutoff: SpaceTimeFn,
        chi: Optional[SpaceTimeFn] = None,
        label: Optional[str] = None,
    ) -> "Nonlinearity":
        """f(y, u) = chi(y) sum_k c_k u^k."""
        coeffs = {int(k): float(v) for k, v in coeffs.items() if float(v) != 0.0}

        def weight(y):
            return 1.0 if chi is None else chi(y)

        def f(y, u):
            out = np.zeros_like(u)
            for k, ck in coeffs.items():
                out = out + ck * u ** k
            return weight(y) * out

        def d3f(q, u):
            u = np.asarray(u, dtype=float)
            out = np.zeros_like(u)
            for k, ck in coeffs.items():
                if k >= 3:
                    out = out + k * (k - 1) * (k - 2) * ck * u ** (k - 3)
            return weight(q) * out

        name = label or (" + ".join(f"{v:g}*u^{k}" for k, v in sorted(coeffs.items())) or "0")
        return cls(f=f, d3f_on_gamma=d3f, cutoff=cutoff, label=name, coeffs=coeffs,
                   descriptor={"kind": "polynomial", "coeffs": {str(k): v for k, v in coeffs.items()},
                               "chi": chi is not None})

    @classmethod
    def zero(cls) -> "Nonlinearity":
        def nothing(y):
            return np.zeros(np.shape(y)[:-1])
        return cls.polynomial({}, nothing, label="0")

    @property
    def is_zero(self) -> bool:
        return self.coeffs is not None and not self.coeffs

    def rhs(self, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        if self.is_zero:
            return np.zeros_like(u)
        return self.cutoff(y) * self.f(y, u)

    def check_cutoff(self, samples: np.ndarray, atol: float = 0.0) -> None:
        """Y must vanish for t < -1 on the sample points."""
        samples = np.asarray(samples, dtype=float)
        early = samples[..., 0] < -1.0
        if np.any(early) and np.max(np.abs(self.cutoff(samples[early]))) > atol:
            raise PreconditionError("interaction cutoff is non-zero for t < -1")


def conormal_sources(
    surfaces,
    profiles,
    t_on: float = -1.0,
    t_full: float = -0.5,
) -> SpaceTimeFn:
    """
    Forcing g(y) = ramp(t) sum_j profile_j(phi_j(y)) switched on for t >= t_on.
    """
    rise = t_full - t_on

    def source(y):
        y = np.asarray(y, dtype=float)
        ramp = smooth_step((y[..., 0] - t_on) / rise)
        total = np.zeros(y.shape[:-1])
        for surf, prof in zip(surfaces, profiles):
            total = total + prof(surf.phi(y))
        return ramp * total

    return source
