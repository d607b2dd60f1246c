"""
Spectral decay estimates on one-dimensional transects.

A conormal singularity of symbol order m shows up as |u^(eta)| ~ |eta|^m
in the direction normal to its surface; the exponent is read off as a
least-squares slope in log-log coordinates.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.stats import linregress

from triplewave.errors import ArgumentError, InsufficientDataError
from triplewave.utils.smooth import flat_top_window

logger = logging.getLogger(__name__)

MIN_TRANSECT = 256


@dataclass
class SlopeEstimate:
    """Result of a spectral-slope fit; slope is None when rejected."""

    slope: Optional[float]
    intercept: Optional[float]
    rvalue: Optional[float]
    n_bins: int
    window: Tuple[float, float]
    accepted: bool
    reason: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def resolved_band(length: int, h: float) -> Tuple[float, float]:
    """Angular-frequency band [2 pi / (length h), pi / (4 h)] resolved by a transect."""
    return 2.0 * np.pi / (length * h), np.pi / (4.0 * h)


def spectrum(samples, h: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """(eta, |u^(eta)|) for eta >= 0 with the continuous-transform scaling h * DFT."""
    x = np.asarray(samples, dtype=float)
    eta = 2.0 * np.pi * np.fft.rfftfreq(len(x), d=h)
    return eta, h * np.abs(np.fft.rfft(x))


def spectral_slope(
    samples,
    window: Optional[Sequence[float]] = None,
    h: float = 1.0,
    noise_rel: float = 1e-11,
) -> SlopeEstimate:
    """
    Least-squares slope of log|u^| against log|eta| over a frequency window.

    Args:
        samples: 1-D transect (at least 256 samples)
        window: (eta_lo, eta_hi) angular frequencies; defaults to the upper
            part of the resolved band
        h: Sample spacing
        noise_rel: Floor relative to max|u^|; bins below it are discarded

    Returns:
        SlopeEstimate; not accepted when the spectrum in the window is
        degenerate (mostly below the floor)

    Raises:
        InsufficientDataError: transect shorter than 256 samples
        ArgumentError: window outside the resolved band
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) < MIN_TRANSECT:
        raise InsufficientDataError(f"spectral slope needs a 1-D transect of at least {MIN_TRANSECT} samples")
    lo_band, hi_band = resolved_band(len(x), h)
    if window is None:
        window = (16.0 * lo_band, hi_band)
    lo, hi = float(window[0]), float(window[1])
    if not (lo_band * (1 - 1e-9) <= lo < hi <= hi_band * (1 + 1e-9)):
        raise ArgumentError(f"window [{lo:.4g}, {hi:.4g}] is not inside the resolved band "
                            f"[{lo_band:.4g}, {hi_band:.4g}]")

    eta, mag = spectrum(x, h)
    in_window = (eta >= lo) & (eta <= hi)
    total = int(in_window.sum())
    peak = float(np.max(mag)) if mag.size else 0.0
    if peak == 0.0 or total < 2:
        return SlopeEstimate(None, None, None, 0, (lo, hi), False, "empty spectrum")
    keep = in_window & (mag > noise_rel * peak)
    n_bins = int(keep.sum())
    if n_bins < max(2, total // 2):
        logger.debug(f"spectral_slope: {n_bins}/{total} bins above the noise floor, rejected")
        return SlopeEstimate(None, None, None, n_bins, (lo, hi), False, "below noise floor")

    fit = linregress(np.log(eta[keep]), np.log(mag[keep]))
    return SlopeEstimate(float(fit.slope), float(fit.intercept), float(fit.rvalue), n_bins, (lo, hi), True)


def normal_transect(
    data: np.ndarray,
    h: Sequence[float],
    lower: Sequence[float],
    point: Sequence[float],
    direction: Sequence[float],
    length: int = 512,
    step: Optional[float] = None,
    flat_fraction: float = 0.6,
) -> Tuple[np.ndarray, float]:
    """
    Windowed samples of a grid function along the line point + r * direction.

    Cubic interpolation on the grid; the samples are multiplied by a flat-top
    C-infinity window so the transect is compactly supported.

    Returns:
        (samples, spacing)
    """
    h = np.asarray(h, dtype=float)
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0 or d.shape != (data.ndim,):
        raise ArgumentError("transect direction must be a non-zero vector of the grid dimension")
    d = d / norm
    ds = float(np.min(h)) if step is None else float(step)
    r = (np.arange(length) - length // 2) * ds
    pts = np.asarray(point, dtype=float)[None, :] + r[:, None] * d[None, :]
    idx = (pts - np.asarray(lower, dtype=float)[None, :]) / h[None, :]
    vals = map_coordinates(data, idx.T, order=3, mode="constant", cval=0.0)
    return vals * flat_top_window(length, flat_fraction), ds


def relative_order_gap(
    incoming: SlopeEstimate,
    outgoing: SlopeEstimate,
    predicted_gap: float,
    tolerance: float = 0.75,
) -> Dict[str, Any]:
    """
    Compare the measured slope difference (outgoing - incoming) with a
    predicted order gap.
    """
    report: Dict[str, Any] = {"predicted_gap": predicted_gap, "tolerance": tolerance,
                              "incoming": incoming.to_dict(), "outgoing": outgoing.to_dict()}
    if not (incoming.accepted and outgoing.accepted):
        report.update({"measured_gap": None, "weaker": None, "within_tolerance": False,
                       "passed": False, "reason": "slope not estimable"})
        return report
    gap = outgoing.slope - incoming.slope
    within = abs(gap - predicted_gap) <= tolerance
    report.update({"measured_gap": gap, "weaker": gap < 0, "within_tolerance": within,
                   "passed": bool(gap < 0 and within), "reason": ""})
    return report
