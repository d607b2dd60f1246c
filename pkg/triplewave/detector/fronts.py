"""
Front extraction from solver output and agreement with the predicted Q.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates
from scipy.spatial import cKDTree

from triplewave.errors import ArgumentError
from triplewave.geometry.flowout import FrontMesh, slice_at_time
from triplewave.scenarios.catalog import Scenario
from triplewave.solver.leapfrog import Grid, GridField
from triplewave.utils.smooth import flat_top_window

logger = logging.getLogger(__name__)

Band = Tuple[float, float]


@dataclass
class FrontEstimate:
    """
    Ridge points of the band-pass energy at one recorded time.

    Attributes:
        time: Recorded time the ridge was taken from
        points: Spatial coordinates (P, d) of ridge points (grid nodes)
        indices: Grid indices (P, d)
        strength: Smoothed band-pass energy at each ridge point
        energy_map: Full smoothed energy map
        threshold: Detection threshold used
        band: Angular-frequency band of the filter
        slope: Optional spectral slope estimate along the ridge normal
    """

    time: float
    points: np.ndarray
    indices: np.ndarray
    strength: np.ndarray
    energy_map: np.ndarray
    threshold: float
    band: Band
    slope: Optional[float] = None
    info: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0


def default_band(h: Sequence[float]) -> Band:
    """Upper octave of the resolved band, [pi / (8 h), pi / (4 h)]."""
    hmax = float(np.max(h))
    return np.pi / (8.0 * hmax), np.pi / (4.0 * hmax)


def _wavenumber(shape, h) -> np.ndarray:
    ks = [2.0 * np.pi * np.fft.fftfreq(n, d=hj) for n, hj in zip(shape, h)]
    grids = np.meshgrid(*ks, indexing="ij")
    return np.sqrt(sum(g * g for g in grids))


def _check_band(band: Band, kmag: np.ndarray) -> Tuple[float, float]:
    lo, hi = float(band[0]), float(band[1])
    if not (0.0 <= lo < hi) or not np.any((kmag >= lo) & (kmag <= hi)):
        raise ArgumentError(f"empty band [{lo:.4g}, {hi:.4g}]: no lattice frequencies inside")
    return lo, hi


def edge_window(shape, flat_fraction: float = 0.8) -> np.ndarray:
    """Separable C-infinity window, 1 on the central part of every axis."""
    win = np.ones(shape)
    for j, n in enumerate(shape):
        w = flat_top_window(n, flat_fraction)
        s = [1] * len(shape)
        s[j] = n
        win = win * w.reshape(s)
    return win


def band_pass(u: np.ndarray, h: Sequence[float], band: Band, flat_fraction: float = 0.8) -> np.ndarray:
    """
    Gaussian-annulus band-pass of the windowed field.

    Raises:
        ArgumentError: the band contains no lattice frequencies
    """
    kmag = _wavenumber(u.shape, h)
    lo, hi = _check_band(band, kmag)
    center, width = 0.5 * (lo + hi), 0.25 * (hi - lo)
    filt = np.exp(-0.5 * ((kmag - center) / width) ** 2)
    uw = u * edge_window(u.shape, flat_fraction)
    return np.real(np.fft.ifftn(np.fft.fftn(uw) * filt))


def _smoothing_sigma(band: Band) -> float:
    """Half a period of the band centre."""
    return np.pi / (0.5 * (band[0] + band[1]))


def band_energy_map(u: np.ndarray, h: Sequence[float], band: Band, flat_fraction: float = 0.8) -> np.ndarray:
    """|band_pass(u)|^2 smoothed over half a period of the band centre."""
    bp = band_pass(u, h, band, flat_fraction)
    sigma = _smoothing_sigma(band)
    return gaussian_filter(bp * bp, sigma=[sigma / hj for hj in h], mode="constant")


def crest_width(band: Band) -> float:
    """
    Standard deviation of the energy crest an isolated jump leaves in
    band_energy_map: the squared filter envelope widened by the smoothing.
    """
    width_k = 0.25 * (band[1] - band[0])
    return float(np.sqrt(0.5 / width_k ** 2 + _smoothing_sigma(band) ** 2))


def _gradient(a: np.ndarray) -> List[np.ndarray]:
    g = np.gradient(a)
    return [g] if a.ndim == 1 else list(g)


def ridge_mask(energy: np.ndarray, width: Optional[float] = None, sharpness: float = 0.25) -> np.ndarray:
    """
    Nodes on the crest of a smooth map.

    A crest node has a strictly negative Hessian eigenvalue that dominates
    the others in magnitude, and is not below its two neighbours one cell
    away along the corresponding eigenvector. With `width` (crest standard
    deviation in cells) the curvature must also reach
    sharpness * energy / width**2, which drops the flanks of curved crests
    and the flat directions of straight ones.
    """
    d = energy.ndim
    hess = np.empty(energy.shape + (d, d))
    for i, gi in enumerate(_gradient(energy)):
        for j, gij in enumerate(_gradient(gi)):
            hess[..., i, j] = gij
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    evals, evecs = np.linalg.eigh(hess)
    curv = -evals[..., 0]
    crest = (curv > 0) & (curv >= np.abs(evals[..., -1]))
    if width is not None:
        crest &= curv >= sharpness * energy / float(width) ** 2
    step = np.moveaxis(evecs[..., :, 0], -1, 0)
    nodes = np.indices(energy.shape).astype(float)
    ahead = map_coordinates(energy, nodes + step, order=1, mode="nearest")
    behind = map_coordinates(energy, nodes - step, order=1, mode="nearest")
    return crest & (energy >= ahead) & (energy >= behind)


def extract_front(
    field_: GridField,
    band: Optional[Band] = None,
    time: Optional[float] = None,
    kappa: float = 6.0,
    rel_peak: float = 0.05,
    floor_rel: float = 1e-24,
    mask: Optional[np.ndarray] = None,
    flat_fraction: float = 0.8,
    sharpness: float = 0.25,
) -> FrontEstimate:
    """
    Ridge of high band-pass energy in one recorded level.

    The threshold is max(median + kappa * MAD, rel_peak * peak, floor)
    with statistics of the band energy over the unmasked interior; ridge
    points are sharp crest nodes of the smoothed energy above it (see
    ridge_mask and crest_width).

    Args:
        field_: Solver output
        band: (k_lo, k_hi) angular frequencies; default is the upper octave
        time: Recorded time to analyse; the last level when omitted
        kappa: MAD multiplier
        rel_peak: Fraction of the peak energy a ridge must reach
        floor_rel: Absolute floor relative to max|u|^2
        mask: Boolean array, True where ridge points are discarded
        flat_fraction: Flat part of the edge window per axis
        sharpness: Minimum crest curvature relative to energy / width^2

    Raises:
        ArgumentError: empty band or mask of the wrong shape
    """
    if not field_.data:
        raise ArgumentError("field has no recorded levels")
    t = field_.times[-1] if time is None else time
    u = field_.at(t)
    h = field_.grid.h
    band = default_band(h) if band is None else band
    energy = band_energy_map(u, h, band, flat_fraction)

    interior = edge_window(u.shape, flat_fraction) >= 1.0 - 1e-12
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != u.shape:
            raise ArgumentError("mask shape does not match the field")
        interior &= ~mask
    values = energy[interior]
    peak = float(values.max()) if values.size else 0.0
    median = float(np.median(values)) if values.size else 0.0
    mad = float(np.median(np.abs(values - median))) if values.size else 0.0
    floor = floor_rel * float(np.max(np.abs(u))) ** 2
    threshold = max(median + kappa * mad, rel_peak * peak, floor)

    width = crest_width(band) / float(np.min(h))
    ridge = ridge_mask(energy, width=width, sharpness=sharpness) & interior & (energy > threshold)
    idx = np.argwhere(ridge)
    coords = np.column_stack([field_.grid.axes[j][idx[:, j]] for j in range(u.ndim)]) if len(idx) else \
        np.empty((0, u.ndim))
    logger.debug(f"extract_front: t={t:.4g}, {len(idx)} ridge points above {threshold:.3e}")
    return FrontEstimate(time=float(t), points=coords, indices=idx, strength=energy[ridge],
                         energy_map=energy, threshold=threshold, band=(float(band[0]), float(band[1])),
                         info={"kappa": kappa, "rel_peak": rel_peak, "median": median, "mad": mad,
                               "crest_width_cells": width, "sharpness": sharpness})


def exclusion_mask(
    grid: Grid,
    t: float,
    scenario: Scenario,
    radius: float,
) -> np.ndarray:
    """
    True within `radius` of each incoming surface and of the spatial
    projection of Gamma on the slice {time = t}.
    """
    x = grid.coords()
    y = grid.spacetime(t, x)
    mask = np.zeros(grid.shape, dtype=bool)
    for surf in scenario.surfaces:
        grad = surf.gradient(y)
        gx = np.linalg.norm(grad[..., 1:], axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.abs(surf.phi(y)) / gx
        mask |= np.nan_to_num(dist, nan=np.inf) <= radius
    _, gamma_pts = scenario.gamma_samples(64)
    for q in gamma_pts:
        mask |= np.linalg.norm(x - q[1:], axis=-1) <= radius
    return mask


def q_slice_points(
    target: Union[FrontMesh, Scenario],
    grid: Grid,
    t: float,
) -> np.ndarray:
    """
    Spatial sample points of Q on {time = t}.

    A FrontMesh is sliced along its rays; a scenario's closed form is
    contoured on the grid by linear interpolation across sign changes.
    """
    if isinstance(target, FrontMesh):
        pts = slice_at_time(target, t).reshape(-1, target.dim)
        pts = pts[np.all(np.isfinite(pts), axis=-1)]
        return pts[:, 1:]
    if target.closed_form_Q is None:
        raise ArgumentError(f"scenario {target.id} has no closed form for Q")
    x = grid.coords()
    g = target.closed_form_Q(grid.spacetime(t, x))
    out = []
    for j in range(grid.ndim):
        a = [slice(None)] * grid.ndim
        b = [slice(None)] * grid.ndim
        a[j] = slice(None, -1)
        b[j] = slice(1, None)
        ga, gb = g[tuple(a)], g[tuple(b)]
        cross = (ga * gb < 0) & np.isfinite(ga) & np.isfinite(gb)
        if not np.any(cross):
            continue
        w = ga[cross] / (ga[cross] - gb[cross])
        xa, xb = x[tuple(a)][cross], x[tuple(b)][cross]
        out.append(xa + w[:, None] * (xb - xa))
    return np.vstack(out) if out else np.empty((0, grid.ndim))


def q_agreement(
    front: FrontEstimate,
    target: Union[FrontMesh, Scenario],
    grid: Grid,
    exclusion: Optional[np.ndarray] = None,
    mean_tol_cells: float = 2.0,
    cover_cells: float = 3.0,
    coverage_min: float = 0.6,
) -> Dict[str, Any]:
    """
    Distances from ridge points to Q and the fraction of Q covered by ridges.

    Args:
        front: Extracted front
        target: FrontMesh or scenario with a closed form for Q
        grid: Grid of the field the front came from
        exclusion: Boolean mask, True inside the tubes around the incoming
            surfaces and Gamma (radius >= 3h)
        mean_tol_cells: Pass threshold on the mean distance, in cells
        cover_cells: A Q sample is covered by ridge points within this many cells
        coverage_min: Pass threshold on coverage

    Returns:
        Report dict; an empty front after masking reports on=False
    """
    h = float(np.max(grid.h))
    idx = front.indices
    keep = np.ones(len(idx), dtype=bool)
    if exclusion is not None and len(idx):
        keep = ~exclusion[tuple(idx.T)]
    ridge = front.points[keep]

    q_pts = q_slice_points(target, grid, front.time)
    if exclusion is not None and len(q_pts):
        lower = np.array([a[0] for a in grid.axes])
        cell = np.clip(np.rint((q_pts - lower) / grid.h).astype(int), 0, np.array(grid.shape) - 1)
        q_pts = q_pts[~exclusion[tuple(cell.T)]]
    inside = np.all([(q_pts[:, j] >= grid.axes[j][0]) & (q_pts[:, j] <= grid.axes[j][-1])
                     for j in range(grid.ndim)], axis=0) if len(q_pts) else np.zeros(0, dtype=bool)
    q_pts = q_pts[inside]

    report: Dict[str, Any] = {
        "time": front.time,
        "h": h,
        "n_ridge": int(len(front.points)),
        "n_unmasked": int(len(ridge)),
        "n_q_samples": int(len(q_pts)),
        "mean_tol": mean_tol_cells * h,
        "coverage_min": coverage_min,
    }
    if len(ridge) == 0 or len(q_pts) == 0:
        reason = "empty front after masking" if len(ridge) == 0 else "no Q samples on the slice"
        report.update({"on": False, "passed": False, "mean_distance": None, "max_distance": None,
                       "coverage": 0.0, "reason": reason})
        logger.info(f"q_agreement: OFF ({reason})")
        return report

    dist, _ = cKDTree(q_pts).query(ridge)
    near, _ = cKDTree(ridge).query(q_pts)
    coverage = float(np.mean(near <= cover_cells * h))
    mean_d, max_d = float(np.mean(dist)), float(np.max(dist))
    passed = mean_d <= mean_tol_cells * h and coverage >= coverage_min
    report.update({"on": True, "passed": bool(passed), "mean_distance": mean_d, "max_distance": max_d,
                   "coverage": coverage, "reason": ""})
    logger.info(f"q_agreement: mean {mean_d:.3e}, max {max_d:.3e}, coverage {coverage:.2f}")
    return report


def export_ridge_csv(front: FrontEstimate, path: Union[str, Path]) -> Path:
    """Ridge points as CSV: i..., x..., strength."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = front.energy_map.ndim
    names = [f"i{j + 1}" for j in range(d)] + [f"x{j + 1}" for j in range(d)] + ["strength"]
    table = np.column_stack([front.indices, front.points, front.strength]) if len(front) else \
        np.empty((0, 2 * d + 1))
    np.savetxt(path, table, delimiter=",", header=",".join(names), comments="", fmt="%.17g")
    logger.info(f"Wrote {len(front)} ridge point(s) to {path}")
    return path
