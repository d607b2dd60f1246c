"""
Characteristic hypersurfaces, their triple intersection and the null
cone inside the conormal fiber of the intersection.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from triplewave.errors import ArgumentError, PreconditionError
from triplewave.geometry.operator import (
    CovectorPoint,
    HyperbolicOperator,
    check_coefficients,
    symbol_arrays,
)

logger = logging.getLogger(__name__)

_FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass
class CharSurface:
    """
    Level set {phi = 0} of a (characteristic) hypersurface.

    Args:
        phi: Batched level-set function, arrays (..., n) -> (...)
        grad_phi: Batched gradient (..., n) -> (..., n); finite differences if None
        label: Identifier used in reports
        characteristic: Whether the surface is declared characteristic
        wave: Progressing-wave descriptor used for exact initial data,
            {"kind": "plane"} or {"kind": "sphere", "center": [...], "t0": float}
    """

    phi: Callable[[np.ndarray], np.ndarray]
    grad_phi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "surface"
    characteristic: bool = True
    wave: Dict = field(default_factory=dict)

    def gradient(self, y: np.ndarray) -> np.ndarray:
        """Gradient of phi, analytic when available."""
        y = np.asarray(y, dtype=float)
        if self.grad_phi is not None:
            return np.asarray(self.grad_phi(y), dtype=float)
        n = y.shape[-1]
        grad = np.empty(y.shape)
        for i in range(n):
            step = _FD_STEP * np.maximum(1.0, np.abs(y[..., i]))
            e = np.zeros(n)
            e[i] = 1.0
            plus = self.phi(y + step[..., None] * e)
            minus = self.phi(y - step[..., None] * e)
            grad[..., i] = (plus - minus) / (2.0 * step)
        return grad

    @classmethod
    def plane(cls, normal: Sequence[float], offset: float = 0.0, label: str = "plane") -> "CharSurface":
        """phi(y) = normal . y - offset."""
        nvec = np.asarray(normal, dtype=float)

        def phi(y):
            return np.asarray(y, dtype=float) @ nvec - offset

        def grad(y):
            return np.broadcast_to(nvec, np.shape(y)).copy()

        return cls(phi=phi, grad_phi=grad, label=label,
                   wave={"kind": "plane", "normal": nvec.tolist(), "offset": float(offset)})

    @classmethod
    def light_cone(cls, vertex: Sequence[float], label: str = "cone") -> "CharSurface":
        """phi(y) = (t - t_v) - |x - x_v| for a Minkowski point source at vertex."""
        v = np.asarray(vertex, dtype=float)

        def phi(y):
            y = np.asarray(y, dtype=float)
            return (y[..., 0] - v[0]) - np.linalg.norm(y[..., 1:] - v[1:], axis=-1)

        def grad(y):
            y = np.asarray(y, dtype=float)
            d = y[..., 1:] - v[1:]
            r = np.linalg.norm(d, axis=-1, keepdims=True)
            out = np.empty(y.shape)
            out[..., 0] = 1.0
            with np.errstate(invalid="ignore", divide="ignore"):
                out[..., 1:] = -d / r
            return out

        return cls(phi=phi, grad_phi=grad, label=label,
                   wave={"kind": "sphere", "center": v[1:].tolist(), "t0": float(v[0])})


def eikonal_residual(op: HyperbolicOperator, surf: CharSurface, sample_pts) -> float:
    """
    Max |p(y, d phi(y))| over sample points of {phi = 0}.

    Raises:
        ArgumentError: if the sample set is empty
    """
    pts = np.atleast_2d(np.asarray(sample_pts, dtype=float))
    if pts.size == 0:
        raise ArgumentError("eikonal residual needs at least one sample point")
    check_coefficients(op, pts)
    dphi = surf.gradient(pts)
    return float(np.max(np.abs(symbol_arrays(op, pts, dphi))))


def is_characteristic(op: HyperbolicOperator, surf: CharSurface, sample_pts, tol_eikonal: float = 1e-10) -> bool:
    """Characteristic check: residual within tol_eikonal."""
    return eikonal_residual(op, surf, sample_pts) <= tol_eikonal


@dataclass
class TripleIntersection:
    """Sampled triple intersection with per-point transversality data."""

    points: np.ndarray
    normals: np.ndarray
    sigma_min: np.ndarray
    transversal: np.ndarray
    report: Dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.points.shape[0]


def _stack_phi(surfs: Sequence[CharSurface], y: np.ndarray) -> np.ndarray:
    return np.stack([s.phi(y) for s in surfs], axis=-1)


def _stack_grad(surfs: Sequence[CharSurface], y: np.ndarray) -> np.ndarray:
    return np.stack([s.gradient(y) for s in surfs], axis=-2)


def _thin_points(points: np.ndarray, radius: float) -> np.ndarray:
    """Greedy thinning in lexicographic order: keep points at least radius apart."""
    order = np.lexsort(points.T[::-1])
    points = points[order]
    tree = cKDTree(points)
    removed = np.zeros(len(points), dtype=bool)
    keep = []
    for i in range(len(points)):
        if removed[i]:
            continue
        keep.append(i)
        for j in tree.query_ball_point(points[i], radius):
            if j != i:
                removed[j] = True
    return points[keep]


def triple_intersection(
    surfs: Sequence[CharSurface],
    search_box: Sequence[Tuple[float, float]],
    grid_res: int = 21,
    tol: float = 1e-12,
    tol_transversal: float = 1e-6,
    max_newton: int = 50,
) -> TripleIntersection:
    """
    Sample Gamma = {phi_1 = phi_2 = phi_3 = 0} inside a box.

    Seeds come from a uniform grid, are refined by Gauss-Newton with the
    minimum-norm step and are thinned to roughly one point per cell.

    Args:
        surfs: Three surfaces
        search_box: (lo, hi) per spacetime coordinate
        grid_res: Seed points per axis
        tol: Residual tolerance on every |phi_j|
        tol_transversal: Threshold on the smallest singular value of the normals

    Returns:
        TripleIntersection (possibly empty)
    """
    if len(surfs) != 3:
        raise ArgumentError(f"need exactly three surfaces, got {len(surfs)}")
    box = np.asarray(search_box, dtype=float)
    n = box.shape[0]
    axes = [np.linspace(lo, hi, grid_res) for lo, hi in box]
    cell = (box[:, 1] - box[:, 0]) / max(grid_res - 1, 1)
    seeds = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)

    # keep seeds within about one cell of every surface
    vals = np.abs(_stack_phi(surfs, seeds))
    grads = np.linalg.norm(_stack_grad(surfs, seeds), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = vals / grads
    near = np.all(dist <= np.linalg.norm(cell), axis=-1)
    y = seeds[near]
    logger.debug(f"triple_intersection: {len(y)} seeds of {len(seeds)} grid points")

    for _ in range(max_newton):
        if len(y) == 0:
            break
        res = _stack_phi(surfs, y)
        if np.all(np.abs(res) <= tol):
            break
        jac = _stack_grad(surfs, y)
        step = np.einsum("mij,mj->mi", np.linalg.pinv(jac), res)
        y = y - step
        y = y[np.all(np.isfinite(y), axis=-1)]

    if len(y):
        res = np.abs(_stack_phi(surfs, y))
        margin = 1e-9 * np.maximum(1.0, np.abs(box)).max(axis=1)
        inside = np.all((y >= box[:, 0] - margin) & (y <= box[:, 1] + margin), axis=-1)
        ok = np.all(res <= max(tol, 1e-10), axis=-1) & inside & np.all(np.isfinite(y), axis=-1)
        y = y[ok]
    if len(y) == 0:
        logger.info("triple_intersection: no intersection inside the search box")
        return TripleIntersection(
            points=np.empty((0, n)), normals=np.empty((0, 3, n)),
            sigma_min=np.empty(0), transversal=np.empty(0, dtype=bool),
            report={"count": 0, "non_transversal": 0, "tol_transversal": tol_transversal},
        )

    y = _thin_points(y, 0.5 * float(np.min(cell)))
    normals = _stack_grad(surfs, y)
    sigma_min = np.linalg.svd(normals, compute_uv=False)[:, -1]
    transversal = sigma_min >= tol_transversal
    bad = int(np.count_nonzero(~transversal))
    if bad:
        logger.warning(f"triple_intersection: {bad} non-transversal point(s)")
    return TripleIntersection(
        points=y, normals=normals, sigma_min=sigma_min, transversal=transversal,
        report={"count": int(len(y)), "non_transversal": bad,
                "min_sigma": float(sigma_min.min()), "tol_transversal": tol_transversal},
    )


def fiber_basis(normals: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """
    Orthonormal basis (n x 3) of the span of three covectors.

    Gram-Schmidt orientation (positive diagonal of R) keeps the basis
    continuous in the normals.

    Raises:
        PreconditionError: if the normals are linearly dependent
    """
    normals = np.asarray(normals, dtype=float)
    if normals.shape[0] != 3:
        raise ArgumentError("need three normals")
    q, r = np.linalg.qr(normals.T)
    diag = np.diag(r)
    scale = np.max(np.abs(diag)) if diag.size else 0.0
    if scale == 0.0 or np.min(np.abs(diag)) <= tol * scale:
        raise PreconditionError("normals are not linearly independent; conormal fiber is not 3-dimensional")
    return q * np.sign(diag)


def conormal_null_fiber(
    op: HyperbolicOperator,
    gamma_pt: np.ndarray,
    normals: np.ndarray,
    angular_res: int = 64,
    nappe: str = "future",
    tol_null: float = 1e-10,
) -> List[CovectorPoint]:
    """
    Unit null covectors in span(normals) at a point of Gamma.

    The restriction of p to the 3-dimensional fiber is a quadratic form;
    its null set on the unit sphere is one circle per nappe. Each circle
    is sampled at angular_res meridians, the null point on each meridian
    found by root-finding.

    Args:
        op: Operator
        gamma_pt: Point q of Gamma
        normals: Three covectors spanning N*_q Gamma (3 x n)
        angular_res: Number of directions per circle
        nappe: "future" (tau > 0) or "both"

    Returns:
        List of CovectorPoint (empty if p is definite on the fiber)
    """
    if nappe not in ("future", "both"):
        raise ArgumentError(f"unknown nappe '{nappe}'")
    q = np.asarray(gamma_pt, dtype=float)
    check_coefficients(op, q)
    basis = fiber_basis(normals)
    n = op.dim

    gram = np.zeros((n, n))
    gram[0, 0] = float(op.alpha(q)) ** 2
    gram[1:, 1:] = -np.asarray(op.metric(q), dtype=float)
    form = basis.T @ gram @ basis
    evals, evecs = np.linalg.eigh(form)
    signs = np.sign(evals)
    if np.all(signs > 0) or np.all(signs < 0):
        logger.warning(f"conormal_null_fiber: symbol is definite on the fiber at {q.tolist()}; empty null cone")
        return []
    positive = signs > 0
    iso = int(np.flatnonzero(positive)[0]) if positive.sum() == 1 else int(np.flatnonzero(~positive)[0])
    axis = evecs[:, iso]
    if (basis @ axis)[0] < 0:
        axis = -axis

    ref = np.eye(3)[0] if abs(axis[0]) < 0.95 else np.eye(3)[1]
    b1 = ref - (ref @ axis) * axis
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(axis, b1)

    def p_on(c):
        eta = basis @ c
        return float(symbol_arrays(op, q, eta))

    points = []
    thetas = 2.0 * np.pi * np.arange(angular_res) / angular_res
    for theta in thetas:
        w = np.cos(theta) * b1 + np.sin(theta) * b2

        def along(phi_ang, w=w):
            return p_on(np.cos(phi_ang) * axis + np.sin(phi_ang) * w)

        lo, hi = along(0.0), along(0.5 * np.pi)
        if lo * hi > 0:
            logger.warning(f"conormal_null_fiber: no sign change along meridian theta={theta:.4f}")
            continue
        root = brentq(along, 0.0, 0.5 * np.pi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        c = np.cos(root) * axis + np.sin(root) * w
        eta = basis @ c
        eta /= np.linalg.norm(eta)
        if abs(float(symbol_arrays(op, q, eta))) > tol_null:
            logger.warning(f"conormal_null_fiber: null check failed at theta={theta:.4f}")
            continue
        points.append(CovectorPoint(q.copy(), eta))

    if nappe == "both":
        points = points + [CovectorPoint(pt.y.copy(), -pt.eta) for pt in points]
    return points
