"""
Discrete anisotropic Sobolev norms with extra regularity conormal to
three hypersurfaces {y_j = 0}, j = 1, 2, 3.

The weight is

    W(eta) = prod_j <eta_j, eta''>^{k_j} * <eta>^{s - delta},

with <a, b> = (1 + |a|^2 + |b|^2)^{1/2} and eta'' the frequencies of
the remaining coordinates. The first three grid axes are y_1, y_2, y_3;
axes beyond the third are y''. Fields with fewer than three axes treat
the missing eta_j as zero.
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from triplewave.errors import ArgumentError, PreconditionError
from triplewave.utils.io import write_binary
from triplewave.utils.smooth import flat_top_window

logger = logging.getLogger(__name__)

MIN_POINTS = 64
DEFAULT_DELTA = 0.05


@dataclass(frozen=True)
class AnisoIndex:
    """Regularity index (s, k1, k2, k3)."""

    s: float
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0

    def __post_init__(self):
        if min(self.k) < 0:
            raise ArgumentError("extra orders k_j must be non-negative")

    @property
    def k(self) -> Tuple[float, float, float]:
        return (self.k1, self.k2, self.k3)

    def dominates(self, other: "AnisoIndex") -> bool:
        """(s, k) dominates (s', k') iff s >= s' and k_j >= k'_j for all j."""
        return self.s >= other.s and all(a >= b for a, b in zip(self.k, other.k))

    def shifted(self, ds: float = 0.0, dk: Sequence[float] = (0.0, 0.0, 0.0)) -> "AnisoIndex":
        return AnisoIndex(self.s + ds, *(a + b for a, b in zip(self.k, dk)))

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _frequencies(shape: Sequence[int], h: Sequence[float]):
    return [2.0 * np.pi * np.fft.fftfreq(n, d=hj) for n, hj in zip(shape, h)]


def _as_spacing(h, ndim: int) -> np.ndarray:
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.size == 1:
        h = np.full(ndim, float(h[0]))
    if h.shape != (ndim,) or np.any(h <= 0):
        raise ArgumentError("grid spacing must be positive, one value per axis")
    return h


class WeightKernel:
    """
    Values of W on the discrete frequency lattice of a grid.

    Args:
        shape: Grid shape
        h: Grid spacing (scalar or per axis)
        idx: Regularity index
        delta: Regularization exponent (weight carries <eta>^{-delta})
    """

    def __init__(self, shape: Sequence[int], h, idx: AnisoIndex, delta: float = DEFAULT_DELTA):
        self.shape = tuple(int(n) for n in shape)
        self.h = _as_spacing(h, len(self.shape))
        self.idx = idx
        self.delta = float(delta)
        self.values = self._build()

    def _build(self) -> np.ndarray:
        d = len(self.shape)
        axes = _frequencies(self.shape, self.h)
        grids = np.meshgrid(*axes, indexing="ij") if d else []
        sq = [g * g for g in grids]
        rest = sum(sq[3:]) if d > 3 else 0.0
        total = sum(sq)
        w = (1.0 + total) ** (0.5 * (self.idx.s - self.delta))
        for j, kj in enumerate(self.idx.k):
            if kj == 0:
                continue
            ej = sq[j] if j < d else 0.0
            w = w * (1.0 + ej + rest) ** (0.5 * kj)
        return np.broadcast_to(w, self.shape).copy()

    @property
    def lattice_step(self) -> np.ndarray:
        """Frequency spacing 2 pi / L per axis."""
        return 2.0 * np.pi / (np.asarray(self.shape) * self.h)

    def inverse_square_sum(self) -> float:
        """(2 pi)^{-d} sum W^{-2} deta^d, the discrete embedding constant squared."""
        d = len(self.shape)
        return float(np.sum(self.values ** -2.0) * np.prod(self.lattice_step) / (2.0 * np.pi) ** d)

    def export(self, path: Union[str, Path]) -> Path:
        """Kernel values in fftfreq order, header + float64 payload."""
        header = {"kind": "weight_kernel", "shape": list(self.shape), "h": self.h.tolist(),
                  "index": self.idx.to_dict(), "delta": self.delta}
        return write_binary(path, header, self.values)


def apply_window(u: np.ndarray, flat_fraction: Optional[float] = 0.8) -> np.ndarray:
    """Separable flat-top window; None leaves the field unchanged."""
    if flat_fraction is None:
        return u
    out = u
    for j, n in enumerate(u.shape):
        s = [1] * u.ndim
        s[j] = n
        out = out * flat_top_window(n, flat_fraction).reshape(s)
    return out


def _check_grid(u: np.ndarray) -> None:
    if u.ndim == 0 or min(u.shape) < MIN_POINTS:
        raise PreconditionError(f"anisotropic norm needs at least {MIN_POINTS} points per axis, got {u.shape}")


def weighted_spectrum(u: np.ndarray, kernel: WeightKernel) -> np.ndarray:
    """W^2 |u^|^2 / Vol on the lattice, with u^ = h^d * FFT."""
    uhat = np.prod(kernel.h) * np.fft.fftn(u)
    vol = float(np.prod(np.asarray(u.shape) * kernel.h))
    return (kernel.values ** 2) * np.abs(uhat) ** 2 / vol


def aniso_norm(
    u: np.ndarray,
    h,
    idx: AnisoIndex,
    delta: float = DEFAULT_DELTA,
    window: Optional[float] = 0.8,
    kernel: Optional[WeightKernel] = None,
) -> float:
    """
    Discrete H^{s - delta, k1, k2, k3} norm of a windowed grid field.

    Args:
        u: Field on a uniform grid; axes 1-3 are the conormal coordinates
        h: Spacing (scalar or per axis)
        idx: Regularity index
        delta: Regularization exponent
        window: Flat fraction of the C-infinity window, None for no window
        kernel: Precomputed kernel for the same grid and index

    Raises:
        PreconditionError: fewer than 64 points along an axis
    """
    u = np.asarray(u, dtype=float)
    _check_grid(u)
    kernel = kernel or WeightKernel(u.shape, h, idx, delta)
    return float(np.sqrt(np.sum(weighted_spectrum(apply_window(u, window), kernel))))


def _half_band(shape) -> np.ndarray:
    masks = [np.abs(np.fft.fftfreq(n)) <= 0.25 for n in shape]
    grids = np.meshgrid(*masks, indexing="ij")
    out = np.ones(shape, dtype=bool)
    for g in grids:
        out &= g
    return out


def resolved_norm(
    u: np.ndarray,
    h,
    idx: AnisoIndex,
    delta: float = DEFAULT_DELTA,
    window: Optional[float] = 0.8,
    growth_max: float = 1.2,
) -> Dict[str, Any]:
    """
    Norm with a finiteness diagnostic: the full-lattice value is compared
    with the value on the lower half of the band; a ratio above growth_max
    means the norm is not resolved (infinite in the continuum).
    """
    u = np.asarray(u, dtype=float)
    _check_grid(u)
    kernel = WeightKernel(u.shape, h, idx, delta)
    spec = weighted_spectrum(apply_window(u, window), kernel)
    full = float(np.sqrt(np.sum(spec)))
    half = float(np.sqrt(np.sum(spec[_half_band(u.shape)])))
    if not np.isfinite(full):
        return {"norm": full, "half_band": half, "growth": float("inf"), "finite": False}
    growth = 1.0 if full == 0.0 else (float("inf") if half == 0.0 else full / half)
    return {"norm": full, "half_band": half, "growth": growth, "finite": bool(growth <= growth_max)}


def product_closure_check(
    u: np.ndarray,
    v: np.ndarray,
    h,
    idx: AnisoIndex,
    delta: float = DEFAULT_DELTA,
    n: Optional[int] = None,
    window: Optional[float] = 0.8,
) -> Dict[str, Any]:
    """
    Ratio ||uv|| / (||u|| ||v||) at (s - delta, k1, k2, k3).

    Args:
        u, v: Fields on the same grid
        h: Spacing
        idx: Index with k_j > n/6
        delta: Regularization exponent
        n: Dimension in the k_j > n/6 condition; the field dimension by default

    Returns:
        Report with the ratio, or skipped=True with a diagnostic when a
        factor norm is not finite

    Raises:
        PreconditionError: k_j <= n/6
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ArgumentError("product check needs fields on the same grid")
    n = u.ndim if n is None else n
    if min(idx.k) <= n / 6.0:
        raise PreconditionError(f"product closure needs every k_j > n/6 = {n / 6.0:.4g}, got {idx.k}")

    ru = resolved_norm(u, h, idx, delta, window)
    rv = resolved_norm(v, h, idx, delta, window)
    report: Dict[str, Any] = {"index": idx.to_dict(), "delta": delta, "norm_u": ru["norm"],
                              "norm_v": rv["norm"], "growth_u": ru["growth"], "growth_v": rv["growth"]}
    if not (ru["finite"] and rv["finite"]):
        which = "u" if not ru["finite"] else "v"
        logger.warning(f"product_closure_check: norm of {which} is not finite at {idx}, pair skipped")
        report.update({"skipped": True, "ratio": None, "norm_uv": None,
                       "reason": f"norm of {which} not resolved (growth above threshold)"})
        return report
    norm_uv = aniso_norm(u * v, h, idx, delta, window)
    denom = ru["norm"] * rv["norm"]
    ratio = float("inf") if denom == 0 else norm_uv / denom
    report.update({"skipped": False, "ratio": ratio, "norm_uv": norm_uv, "reason": ""})
    return report


def linf_embedding_check(
    u: np.ndarray,
    h,
    idx: AnisoIndex,
    delta: float = DEFAULT_DELTA,
    n: Optional[int] = None,
    window: Optional[float] = 0.8,
) -> Dict[str, Any]:
    """
    sup|u| against the Cauchy-Schwarz bound K^{1/2} ||u||, where
    K = (2 pi)^{-d} sum W^{-2} deta^d. The bound holds on every grid; the
    embedding is meaningful when K stays bounded under refinement, which
    requires k_j > n/6.
    """
    u = np.asarray(u, dtype=float)
    _check_grid(u)
    if idx.s < 0:
        raise ArgumentError("embedding check needs s >= 0")
    n = u.ndim if n is None else n
    kernel = WeightKernel(u.shape, h, idx, delta)
    uw = apply_window(u, window)
    norm = float(np.sqrt(np.sum(weighted_spectrum(uw, kernel))))
    k_disc = kernel.inverse_square_sum()
    sup = float(np.max(np.abs(uw)))
    bound = float(np.sqrt(k_disc) * norm)
    return {
        "index": idx.to_dict(),
        "delta": delta,
        "sup": sup,
        "norm": norm,
        "kernel_sum": k_disc,
        "bound": bound,
        "constant": sup / norm if norm > 0 else 0.0,
        "satisfied": bool(sup <= bound * (1.0 + 1e-12) + 1e-300),
        "hypothesis_ok": bool(min(idx.k) > n / 6.0),
    }


def conormal_model(y, m: float, sigma: float = 1.0) -> np.ndarray:
    """Model conormal wave (y/sigma)_+^{-m-1} exp(-y^2 / (2 sigma^2)) of symbol order m."""
    if m >= -1:
        raise ArgumentError("model needs symbol order m < -1")
    y = np.asarray(y, dtype=float) / sigma
    return np.where(y > 0, np.abs(y) ** (-m - 1.0), 0.0) * np.exp(-0.5 * y * y)


def incoming_order_threshold(
    m: float = -6.0,
    r_values: Sequence[float] = (4.5, 5.0, 5.5, 6.0, 6.5),
    base_points: int = 1024,
    refinements: int = 3,
    length: float = 24.0,
    sigma: float = 1.0,
    delta: float = 0.0,
) -> Dict[str, Any]:
    """
    Finiteness threshold of the 1-D model in r = k1 + s under grid refinement.

    Each refinement halves h at fixed length. For a divergent norm the
    increments of ||u||^2 between refinements grow like 2^p with
    p = 2 r - 2 delta + 2 m + 1; p < 0 means bounded. The measured threshold
    is the midpoint between the largest bounded and the smallest growing r.
    """
    if refinements < 2:
        raise ArgumentError("threshold scan needs at least two refinements")
    predicted = -m - 0.5
    rows = []
    for r in r_values:
        idx = AnisoIndex(s=0.0, k1=float(r))
        sq = []
        for level in range(refinements + 1):
            n_pts = base_points * 2 ** level
            h = length / n_pts
            y = -0.5 * length + h * np.arange(n_pts)
            sq.append(aniso_norm(conormal_model(y, m, sigma), h, idx, delta, window=0.8) ** 2)
        inc = np.diff(sq)
        if inc[-2] > 0 and inc[-1] > 0:
            exponent = float(np.log2(inc[-1] / inc[-2]))
        else:
            exponent = float("-inf")
        growth = float(np.sqrt(sq[-1] / sq[-2])) if sq[-2] > 0 else float("inf")
        rows.append({"r": float(r), "norms": [float(np.sqrt(v)) for v in sq], "growth": growth,
                     "exponent": exponent, "growing": bool(exponent > 0)})
        logger.debug(f"incoming_order_threshold: r={r} exponent {exponent:.3f} growth {growth:.3f}")

    bounded = [row["r"] for row in rows if not row["growing"]]
    growing = [row["r"] for row in rows if row["growing"]]
    if bounded and growing and max(bounded) < min(growing):
        measured = 0.5 * (max(bounded) + min(growing))
    else:
        finite = [row["r"] - 0.5 * row["exponent"] for row in rows if np.isfinite(row["exponent"])]
        measured = float(np.mean(finite)) if finite else float("nan")
    measured += delta
    return {
        "m": m,
        "predicted": predicted,
        "measured": measured,
        "within": bool(abs(measured - predicted) <= 0.5),
        "rows": rows,
        "refinements": refinements,
        "base_points": base_points,
    }
