"""
Quadrature of the inverse squared weight  int W(eta)^{-2} d eta  over R^n.
"""

import itertools
import logging
from typing import Any, Dict, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gamma as gamma_fn

from triplewave.anisonorm.norms import DEFAULT_DELTA, AnisoIndex
from triplewave.errors import ArgumentError

logger = logging.getLogger(__name__)


def radial_criterion(idx: AnisoIndex, n: int, delta: float = DEFAULT_DELTA) -> Dict[str, Any]:
    """
    Convergence test for int W^{-2}.

    Radial bound: W^{-2} is homogeneous of degree -2(sum k + s - delta) at
    infinity, so the integral needs n - 2 sum k - 2 (s - delta) < 0. Each
    coordinate subspace spanned by a subset S of the conormal axes carries
    |S| dimensions and decays like 2 (sum_S k + s - delta); those must
    converge as well.
    """
    sigma = idx.s - delta
    margin = n - 2.0 * sum(idx.k) - 2.0 * sigma
    subsets_ok = True
    for size in (1, 2, 3):
        for subset in itertools.combinations(range(3), size):
            if 2.0 * sum(idx.k[j] for j in subset) + 2.0 * sigma <= size:
                subsets_ok = False
    return {"margin": margin, "subsets_ok": subsets_ok, "convergent": bool(margin < 0 and subsets_ok)}


def _axis_nodes(radius: float, count: int) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(1e-2, radius, count - 1)])


def _box_integral(idx: AnisoIndex, n: int, delta: float, radius: float, count: int) -> float:
    """Integral over the box [0, R]^3 x {|eta''| <= R} using the symmetry in each eta_j."""
    sigma = idx.s - delta
    nodes = _axis_nodes(radius, count)
    e1, e2, e3 = np.meshgrid(nodes, nodes, nodes, indexing="ij")
    if n > 3:
        rho = nodes.reshape((1, 1, 1, -1))
        e1, e2, e3 = e1[..., None], e2[..., None], e3[..., None]
        rest = rho * rho
    else:
        rest = 0.0
    total = 1.0 + e1 ** 2 + e2 ** 2 + e3 ** 2 + rest
    f = total ** (-sigma)
    for ej, kj in zip((e1, e2, e3), idx.k):
        f = f * (1.0 + ej ** 2 + rest) ** (-kj)
    if n > 3:
        # surface of the unit sphere in R^{n-3}
        area = 2.0 * np.pi ** (0.5 * (n - 3)) / gamma_fn(0.5 * (n - 3))
        f = area * f * rho ** (n - 4)
        f = trapezoid(f, nodes, axis=-1)
    for _ in range(3):
        f = trapezoid(f, nodes, axis=-1)
    return 8.0 * float(f)


def kernel_integral(
    idx: AnisoIndex,
    n: int,
    delta: float = DEFAULT_DELTA,
    radii: Sequence[float] = (16.0, 32.0, 64.0, 128.0, 256.0),
    nodes_per_axis: int = 32,
) -> Dict[str, Any]:
    """
    Estimate int_{R^n} W^{-2} d eta on expanding boxes.

    The convergence flag comes from the radial criterion; the quadrature
    reports the values on boxes of growing radius and the tail exponent
    p in I(2R) - I(R) ~ R^p, which is positive for a divergent integral.

    Args:
        idx: Regularity index
        n: Dimension (>= 3; the first three axes are the conormal ones)
        delta: Regularization exponent
        radii: Increasing box half-widths
        nodes_per_axis: Log-spaced quadrature nodes per axis

    Returns:
        Report dict with "convergent", "value" (last box value, inf when
        divergent), "values", "tail_exponent" and the radial margin
    """
    if n < 3:
        raise ArgumentError("kernel integral needs n >= 3")
    if len(radii) < 3 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ArgumentError("kernel integral needs at least three increasing radii")
    crit = radial_criterion(idx, n, delta)
    values = [_box_integral(idx, n, delta, r, nodes_per_axis) for r in radii]
    inc = np.diff(values)
    steps = np.log(np.asarray(radii[1:]) / np.asarray(radii[:-1]))
    if inc[-1] > 0 and inc[-2] > 0:
        tail = float(np.log(inc[-1] / inc[-2]) / steps[-1])
    else:
        tail = float("-inf")
    convergent = crit["convergent"]
    logger.debug(f"kernel_integral: n={n}, k={idx.k}, s={idx.s}, margin {crit['margin']:.3f}, "
                 f"tail exponent {tail:.3f}")
    return {
        "index": idx.to_dict(),
        "n": n,
        "delta": delta,
        "radial_margin": crit["margin"],
        "subsets_ok": crit["subsets_ok"],
        "convergent": convergent,
        "value": values[-1] if convergent else float("inf"),
        "values": values,
        "radii": list(radii),
        "tail_exponent": tail,
        "numeric_agrees": bool((tail < 0) == convergent),
    }
