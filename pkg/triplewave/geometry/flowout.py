"""
Flow-out of the conormal null fiber over Gamma and its projection Q.

A FrontMesh is a structured sample of the flow-out over
(Gamma sample, fiber direction, flow time s).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline

from triplewave.errors import ArgumentError, InsufficientDataError, TripleWaveError
from triplewave.geometry.operator import CovectorPoint, HyperbolicOperator
from triplewave.geometry.rays import StepControl, trace_ray
from triplewave.utils.io import read_binary, write_binary

logger = logging.getLogger(__name__)


@dataclass
class FrontMesh:
    """
    Sampled flow-out Lagrangian and its spacetime projection.

    Arrays are indexed (Gamma index, fiber index, s index[, component]).
    """

    gamma_params: np.ndarray
    fiber_angles: np.ndarray
    s: np.ndarray
    points: np.ndarray
    covectors: np.ndarray
    jacobian_det: Optional[np.ndarray] = None
    caustic_flag: Optional[np.ndarray] = None
    hole: Optional[np.ndarray] = None
    errors: Dict[Tuple[int, int], str] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    scenario_id: str = ""

    @property
    def dim(self) -> int:
        return self.points.shape[-1]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.points.shape[:3]

    def valid_nodes(self) -> np.ndarray:
        """Mask of nodes that are neither holes nor caustic."""
        ok = np.all(np.isfinite(self.points), axis=-1)
        if self.hole is not None:
            ok &= ~self.hole
        if self.caustic_flag is not None:
            ok &= ~self.caustic_flag
        return ok


def _trace_fan(args):
    op, pt, s_max, ctrl = args
    try:
        ray = trace_ray(op, pt, s_max, ctrl)
        return ray.y, ray.eta, None
    except TripleWaveError as e:
        return None, None, str(e)


def projection_jacobian(
    points: np.ndarray,
    covectors: np.ndarray,
    gamma_params: np.ndarray,
    fiber_angles: np.ndarray,
    s: np.ndarray,
) -> np.ndarray:
    """
    Signed determinant of [d/dgamma, d/dtheta, d/ds, eta/|eta|] per node.

    The fiber angle is periodic. Gamma contributes a column only when it is
    one-dimensional; a zero-dimensional Gamma (a point) contributes none.
    """
    g_count, f_count, s_count, n = points.shape
    gdim = gamma_params.shape[1] if gamma_params.ndim == 2 else 0
    if gdim > 1:
        raise ArgumentError("more than one Gamma parameter is not supported")
    if gdim + 3 != n:
        raise ArgumentError(f"Gamma parameter dimension {gdim} does not match n={n}")

    dtheta = 2.0 * np.pi / f_count
    d_theta = (np.roll(points, -1, axis=1) - np.roll(points, 1, axis=1)) / (2.0 * dtheta)
    if s_count >= 2:
        d_s = np.gradient(points, s, axis=2)
    else:
        d_s = np.full(points.shape, np.nan)
    nu = covectors / np.linalg.norm(covectors, axis=-1, keepdims=True)
    cols = [d_theta, d_s, nu]
    if gdim == 1:
        if g_count >= 2:
            d_g = np.gradient(points, gamma_params[:, 0], axis=0)
        else:
            d_g = np.full(points.shape, np.nan)
        cols = [d_g] + cols
    mat = np.stack(cols, axis=-1)
    return np.linalg.det(mat)


def flag_caustics(det: np.ndarray, tol_caustic: float) -> np.ndarray:
    """
    Caustic flag: |det| below tol_caustic times the median |det|, or a sign
    change of det between consecutive s nodes. The s = 0 layer is Gamma and
    is never flagged.
    """
    flag = np.zeros(det.shape, dtype=bool)
    if det.shape[2] < 2:
        return flag
    inner = det[:, :, 1:]
    finite = np.isfinite(inner)
    if not np.any(finite):
        return flag
    scale = float(np.median(np.abs(inner[finite])))
    with np.errstate(invalid="ignore"):
        small = np.abs(inner) < tol_caustic * scale
        flip = np.zeros_like(small)
        flip[:, :, 1:] = (inner[:, :, 1:] * inner[:, :, :-1]) < 0
    flag[:, :, 1:] = (small | flip) & finite
    return flag


def flow_out(
    op: HyperbolicOperator,
    gamma_samples: np.ndarray,
    fibers: Sequence[Sequence[CovectorPoint]],
    s_max: float,
    res: int,
    step_ctrl: Optional[StepControl] = None,
    gamma_params: Optional[np.ndarray] = None,
    tol_caustic: float = 1e-6,
    threads: int = 1,
    scenario_id: str = "",
) -> FrontMesh:
    """
    Trace rays from every (q, eta) and assemble the FrontMesh.

    Args:
        op: Operator
        gamma_samples: Points of Gamma (G, n)
        fibers: Per Gamma sample, the null covectors from conormal_null_fiber
        s_max: Flow length
        res: Number of s samples (1 when s_max == 0)
        step_ctrl: Integrator settings (n_samples is overridden by res)
        gamma_params: Chart parameters of the Gamma samples (G, dim Gamma)
        tol_caustic: Relative determinant threshold
        threads: Worker threads for ray tracing; results keep seed order

    Returns:
        FrontMesh; failed rays become NaN holes with the error recorded
    """
    gamma_samples = np.atleast_2d(np.asarray(gamma_samples, dtype=float))
    g_count, n = gamma_samples.shape
    if len(fibers) != g_count:
        raise ArgumentError("one fiber list per Gamma sample is required")
    f_counts = {len(f) for f in fibers}
    if len(f_counts) != 1 or 0 in f_counts:
        raise ArgumentError("all fibers must be non-empty with the same number of directions")
    f_count = f_counts.pop()
    if gamma_params is None:
        gamma_params = np.zeros((g_count, 0)) if n == 3 else np.arange(g_count, dtype=float)[:, None]
    gamma_params = np.asarray(gamma_params, dtype=float).reshape(g_count, -1)

    s_count = 1 if s_max == 0 else max(int(res), 2)
    s = np.linspace(0.0, s_max, s_count)
    base = step_ctrl or StepControl()
    ctrl = StepControl(**{**base.__dict__, "n_samples": s_count})

    seeds = [(op, fibers[g][f], s_max, ctrl) for g in range(g_count) for f in range(f_count)]
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(_trace_fan, seeds))

    points = np.full((g_count, f_count, s_count, n), np.nan)
    covectors = np.full((g_count, f_count, s_count, n), np.nan)
    hole = np.zeros((g_count, f_count, s_count), dtype=bool)
    errors: Dict[Tuple[int, int], str] = {}
    for idx, (y, eta, err) in enumerate(results):
        g, f = divmod(idx, f_count)
        if err is not None:
            hole[g, f, :] = True
            errors[(g, f)] = err
            continue
        points[g, f] = y
        covectors[g, f] = eta
    if errors:
        logger.warning(f"flow_out: {len(errors)} ray(s) failed; mesh has holes")

    if s_count == 1:
        det = np.zeros((g_count, f_count, 1))
    else:
        det = projection_jacobian(points, covectors, gamma_params,
                                  np.arange(f_count) * 2 * np.pi / f_count, s)
    flag = flag_caustics(det, tol_caustic)
    logger.info(f"flow_out: {g_count}x{f_count}x{s_count} mesh, {int(flag.sum())} caustic node(s)")
    return FrontMesh(
        gamma_params=gamma_params,
        fiber_angles=2.0 * np.pi * np.arange(f_count) / f_count,
        s=s,
        points=points,
        covectors=covectors,
        jacobian_det=det,
        caustic_flag=flag,
        hole=hole,
        errors=errors,
        tolerances={"tol_caustic": tol_caustic, "rtol": ctrl.rtol, "atol": ctrl.atol},
        scenario_id=scenario_id,
    )


@dataclass
class CausticComponent:
    """One connected component of flagged mesh nodes."""

    size: int
    nodes: np.ndarray
    s_range: Tuple[float, float]
    corank: int


def caustic_scan(mesh: FrontMesh, corank_rel: float = 0.05) -> Dict[str, Any]:
    """
    Connected components of the caustic flag with an estimated corank.

    The corank counts the singular values of the parameter-to-spacetime
    differential that are small relative to the largest, clamped to 1..2.

    Raises:
        ArgumentError: if the mesh carries no Jacobian data
    """
    if mesh.jacobian_det is None or mesh.caustic_flag is None:
        raise ArgumentError("mesh has no jacobian data")
    flag = mesh.caustic_flag
    labels, count = ndimage.label(flag)
    g_count, f_count, s_count, n = mesh.points.shape
    components: List[CausticComponent] = []
    for lab in range(1, count + 1):
        nodes = np.argwhere(labels == lab)
        coranks = []
        for g, f, k in nodes:
            cols = []
            if f_count >= 3:
                cols.append((mesh.points[g, (f + 1) % f_count, k] - mesh.points[g, f - 1, k]) * f_count / (4 * np.pi))
            if 0 < k < s_count - 1:
                cols.append((mesh.points[g, f, k + 1] - mesh.points[g, f, k - 1]) / (mesh.s[k + 1] - mesh.s[k - 1]))
            if 0 < g < g_count - 1 and mesh.gamma_params.shape[1] == 1:
                dg = mesh.gamma_params[g + 1, 0] - mesh.gamma_params[g - 1, 0]
                cols.append((mesh.points[g + 1, f, k] - mesh.points[g - 1, f, k]) / dg)
            if not cols:
                continue
            sv = np.linalg.svd(np.stack(cols, axis=-1), compute_uv=False)
            if not np.all(np.isfinite(sv)) or sv[0] == 0:
                continue
            coranks.append(int(np.count_nonzero(sv / sv[0] < corank_rel)) + (len(cols) - len(sv)))
        corank = int(np.clip(max(coranks) if coranks else 1, 1, 2))
        s_vals = mesh.s[nodes[:, 2]]
        components.append(CausticComponent(size=len(nodes), nodes=nodes,
                                           s_range=(float(s_vals.min()), float(s_vals.max())), corank=corank))
    components.sort(key=lambda c: (-c.size, c.s_range))
    logger.info(f"caustic_scan: {len(components)} component(s)")
    return {
        "count": len(components),
        "total_nodes": int(flag.sum()),
        "components": [
            {"size": c.size, "s_range": list(c.s_range), "corank": c.corank,
             "first_node": c.nodes[0].tolist()} for c in components
        ],
        "empty": len(components) == 0,
    }


def slice_at_time(mesh: FrontMesh, t: float) -> np.ndarray:
    """
    Points of Q on the time slice {time = t}.

    Each ray is interpolated in its time coordinate (increasing along
    future rays) with a cubic spline.

    Returns:
        Array (G, F, n); NaN where the ray does not reach t or is a hole
    """
    g_count, f_count, s_count, n = mesh.points.shape
    out = np.full((g_count, f_count, n), np.nan)
    if s_count < 2:
        return out
    for g in range(g_count):
        for f in range(f_count):
            pts = mesh.points[g, f]
            if not np.all(np.isfinite(pts)):
                continue
            times = pts[:, 0]
            if np.any(np.diff(times) <= 0) or not (times[0] <= t <= times[-1]):
                continue
            out[g, f] = CubicSpline(times, pts)(t)
    return out


def _fit_circle(xy: np.ndarray) -> Tuple[np.ndarray, float]:
    """Algebraic least-squares circle fit; returns (center, radius)."""
    a = np.column_stack([2.0 * xy[:, 0], 2.0 * xy[:, 1], np.ones(len(xy))])
    b = np.sum(xy ** 2, axis=1)
    (cx, cy, c), *_ = np.linalg.lstsq(a, b, rcond=None)
    return np.array([cx, cy]), float(np.sqrt(c + cx * cx + cy * cy))


def slice_radius(
    mesh: FrontMesh,
    t: float,
    x3: float,
    center: Optional[Sequence[float]] = None,
    min_points: int = 8,
) -> float:
    """
    Radius of the circular section of Q at time t and x_3 = x3 (n = 4).

    For each fiber direction the slice points are interpolated across the
    Gamma samples to the requested x3, then a circle is fitted in (x1, x2).
    """
    if mesh.dim != 4:
        raise ArgumentError("circular sections need a mesh in 1+3 dimensions")
    pts = slice_at_time(mesh, t)
    section = []
    for f in range(pts.shape[1]):
        col = pts[:, f]
        ok = np.all(np.isfinite(col), axis=-1)
        if ok.sum() < 4:
            continue
        col = col[ok]
        order = np.argsort(col[:, 3])
        x3s = col[order, 3]
        if np.any(np.diff(x3s) <= 0) or not (x3s[0] <= x3 <= x3s[-1]):
            continue
        spline = CubicSpline(x3s, col[order, 1:3])
        section.append(spline(x3))
    if len(section) < min_points:
        raise InsufficientDataError(f"slice t={t}, x3={x3} has {len(section)} point(s), need {min_points}")
    xy = np.asarray(section)
    if center is not None:
        return float(np.mean(np.linalg.norm(xy - np.asarray(center, dtype=float), axis=1)))
    return _fit_circle(xy)[1]


def apparent_front_speed(
    mesh: FrontMesh,
    x3: float,
    times: Sequence[float],
    center: Optional[Sequence[float]] = None,
    dt: float = 0.05,
) -> Dict[str, np.ndarray]:
    """
    dR/dt of the circular sections of Q by central differences.

    Returns:
        {"t": times, "radius": R(t), "speed": dR/dt}
    """
    times = np.asarray(times, dtype=float)
    radius = np.array([slice_radius(mesh, t, x3, center) for t in times])
    speed = np.array([
        (slice_radius(mesh, t + dt, x3, center) - slice_radius(mesh, t - dt, x3, center)) / (2.0 * dt)
        for t in times
    ])
    return {"t": times, "radius": radius, "speed": speed}


def export_front_mesh(mesh: FrontMesh, path: Union[str, Path]) -> Path:
    """
    Header + float64 payload of shape (G, F, S, 2n + 2).

    Components per node: y (n), eta (n), jacobian_det, caustic_flag (0/1).
    """
    det = mesh.jacobian_det if mesh.jacobian_det is not None else np.full(mesh.shape, np.nan)
    flag = mesh.caustic_flag if mesh.caustic_flag is not None else np.zeros(mesh.shape, dtype=bool)
    payload = np.concatenate(
        [mesh.points, mesh.covectors, det[..., None], flag[..., None].astype(float)], axis=-1
    )
    header = {
        "kind": "front_mesh",
        "dim": mesh.dim,
        "grid_shape": list(mesh.shape),
        "components": ["t"] + [f"x{i}" for i in range(1, mesh.dim)] + ["tau"]
        + [f"xi{i}" for i in range(1, mesh.dim)] + ["jacobian_det", "caustic_flag"],
        "s": mesh.s.tolist(),
        "fiber_angles": mesh.fiber_angles.tolist(),
        "gamma_params": mesh.gamma_params.tolist(),
        "tolerances": mesh.tolerances,
        "scenario": mesh.scenario_id,
        "holes": sorted([list(k) for k in mesh.errors]),
    }
    return write_binary(path, header, payload)


def load_front_mesh(path: Union[str, Path]) -> FrontMesh:
    """Inverse of export_front_mesh."""
    header, payload = read_binary(path)
    n = header["dim"]
    errors = {tuple(k): "hole" for k in header.get("holes", [])}
    hole = np.zeros(payload.shape[:3], dtype=bool)
    for g, f in errors:
        hole[g, f, :] = True
    return FrontMesh(
        gamma_params=np.asarray(header["gamma_params"], dtype=float).reshape(payload.shape[0], -1),
        fiber_angles=np.asarray(header["fiber_angles"], dtype=float),
        s=np.asarray(header["s"], dtype=float),
        points=payload[..., :n].copy(),
        covectors=payload[..., n:2 * n].copy(),
        jacobian_det=payload[..., 2 * n].copy(),
        caustic_flag=payload[..., 2 * n + 1] > 0.5,
        hole=hole,
        errors=errors,
        tolerances=header.get("tolerances", {}),
        scenario_id=header.get("scenario", ""),
    )
