"""
Built-in reference scenarios with closed-form Gamma and Q.

Each scenario bundles an operator, three characteristic surfaces and the
closed forms used as oracles by the geometry pipeline and as initial-data
factories by the solver.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from triplewave.errors import ArgumentError, PreconditionError, UnsupportedError
from triplewave.geometry.operator import CovectorPoint, HyperbolicOperator
from triplewave.geometry.surfaces import CharSurface, conormal_null_fiber, eikonal_residual

logger = logging.getLogger(__name__)

SCENARIO_IDS = ("planes-cylinder", "planes-cone", "spheres", "fig1-2d", "lens")

_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "planes-cylinder": {"gamma_range": [-1.0, 1.0]},
    "planes-cone": {"gamma_range": [-1.0, 1.0]},
    "spheres": {"a": 1.0, "b": 1.0, "gamma_range": [-1.0, 1.0]},
    "fig1-2d": {"angles_deg": [90.0, 210.0, 330.0], "center": [0.0, 0.0], "t_meet": 0.0},
    "lens": {"strength": 0.3, "source": [-6.0, 0.0], "t_source": 0.0},
}


@dataclass
class Scenario:
    """
    A reference configuration.

    Attributes:
        id: Scenario identifier
        operator: The hyperbolic operator
        surfaces: Characteristic surfaces (empty for the lens point source)
        closed_form_Q: Batched G(y); Q = {G = 0}; None when unknown
        closed_form_Q_grad: Batched gradient of G
        closed_form_Gamma: Chart map params (..., k) -> points (..., n)
        gamma_range: Chart parameter range per Gamma dimension
        params: Resolved scenario constants
    """

    id: str
    operator: HyperbolicOperator
    surfaces: List[CharSurface]
    closed_form_Q: Optional[Callable[[np.ndarray], np.ndarray]]
    closed_form_Q_grad: Optional[Callable[[np.ndarray], np.ndarray]]
    closed_form_Gamma: Callable[[np.ndarray], np.ndarray]
    gamma_range: List[Tuple[float, float]]
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.operator.dim

    @property
    def gamma_dim(self) -> int:
        return len(self.gamma_range)

    def gamma_samples(self, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """Uniform chart samples of Gamma: (params (G, k), points (G, n))."""
        if self.gamma_dim == 0:
            params = np.zeros((1, 0))
        else:
            lo, hi = self.gamma_range[0]
            params = np.linspace(lo, hi, max(int(count), 1))[:, None]
        return params, self.closed_form_Gamma(params)

    def normals_at(self, q: np.ndarray) -> np.ndarray:
        """Three covectors spanning the conormal fiber at q."""
        if not self.surfaces:
            return np.eye(self.dim)[:3]
        return np.stack([s.gradient(np.asarray(q, dtype=float)) for s in self.surfaces])

    def fibers(self, points: np.ndarray, angular_res: int, nappe: str = "future") -> List[List[CovectorPoint]]:
        """Null fibers over each Gamma point."""
        return [conormal_null_fiber(self.operator, q, self.normals_at(q), angular_res, nappe=nappe)
                for q in np.atleast_2d(points)]

    def to_config(self) -> Dict[str, Any]:
        """Serialization into the run-config form."""
        return {"id": self.id, "params": dict(self.params)}


def _planes_cylinder(params: Dict[str, Any]) -> Scenario:
    op = HyperbolicOperator.minkowski(4)
    r = 1.0 / np.sqrt(2.0)
    surfaces = [
        CharSurface.plane([1.0, -1.0, 0.0, 0.0], label="t=x1"),
        CharSurface.plane([1.0, 0.0, -1.0, 0.0], label="t=x2"),
        CharSurface.plane([1.0, -r, -r, 0.0], label="t=(x1+x2)/sqrt2"),
    ]

    def gamma(u):
        u = np.asarray(u, dtype=float)[..., 0]
        z = np.zeros_like(u)
        return np.stack([z, z, z, u], axis=-1)

    def g(y):
        return y[..., 0] ** 2 - y[..., 1] ** 2 - y[..., 2] ** 2

    def g_grad(y):
        out = np.zeros(np.shape(y))
        out[..., 0] = 2 * y[..., 0]
        out[..., 1] = -2 * y[..., 1]
        out[..., 2] = -2 * y[..., 2]
        return out

    return Scenario("planes-cylinder", op, surfaces, g, g_grad, gamma,
                    [tuple(params["gamma_range"])], params)


def _planes_cone(params: Dict[str, Any]) -> Scenario:
    op = HyperbolicOperator.minkowski(4)
    surfaces = [CharSurface.plane(np.r_[1.0, -np.eye(3)[j]], label=f"t=x{j + 1}") for j in range(3)]

    def gamma(u):
        u = np.asarray(u, dtype=float)[..., 0]
        return np.stack([u, u, u, u], axis=-1)

    def _d(y):
        t = y[..., 0]
        x = y[..., 1:]
        total = x.sum(axis=-1)
        # d_j = x_j - (other two) + t
        return 2.0 * x - total[..., None] + t[..., None]

    def g(y):
        y = np.asarray(y, dtype=float)
        a = 3.0 * y[..., 0] - y[..., 1:].sum(axis=-1)
        return a ** 2 - np.sum(_d(y) ** 2, axis=-1)

    def g_grad(y):
        y = np.asarray(y, dtype=float)
        a = 3.0 * y[..., 0] - y[..., 1:].sum(axis=-1)
        d = _d(y)
        out = np.empty(y.shape)
        out[..., 0] = 6.0 * a - 2.0 * d.sum(axis=-1)
        dsum = d.sum(axis=-1)
        # d d_j / d x_i = 1 if i == j else -1
        out[..., 1:] = -2.0 * a[..., None] - 2.0 * (2.0 * d - dsum[..., None])
        return out

    return Scenario("planes-cone", op, surfaces, g, g_grad, gamma,
                    [tuple(params["gamma_range"])], params)


def _spheres(params: Dict[str, Any]) -> Scenario:
    a, b = float(params["a"]), float(params["b"])
    if a <= 0 or b <= 0:
        raise ArgumentError("spheres scenario needs a > 0 and b > 0")
    op = HyperbolicOperator.minkowski(4)
    surfaces = [
        CharSurface.light_cone([0.0, 0.0, 0.0, 0.0], label="p1"),
        CharSurface.light_cone([0.0, 2 * a, 0.0, 0.0], label="p2"),
        CharSurface.light_cone([0.0, 0.0, 2 * b, 0.0], label="p3"),
    ]
    r0 = np.hypot(a, b)

    def gamma(u):
        u = np.asarray(u, dtype=float)[..., 0]
        return np.stack([np.sqrt(u * u + r0 * r0), np.full_like(u, a), np.full_like(u, b), u], axis=-1)

    def g(y):
        y = np.asarray(y, dtype=float)
        w = np.sqrt(y[..., 0] ** 2 - y[..., 3] ** 2)
        return (y[..., 1] - a) ** 2 + (y[..., 2] - b) ** 2 - (w - r0) ** 2

    def g_grad(y):
        y = np.asarray(y, dtype=float)
        w = np.sqrt(y[..., 0] ** 2 - y[..., 3] ** 2)
        out = np.empty(y.shape)
        out[..., 0] = -2.0 * (w - r0) * y[..., 0] / w
        out[..., 1] = 2.0 * (y[..., 1] - a)
        out[..., 2] = 2.0 * (y[..., 2] - b)
        out[..., 3] = 2.0 * (w - r0) * y[..., 3] / w
        return out

    return Scenario("spheres", op, surfaces, g, g_grad, gamma,
                    [tuple(params["gamma_range"])], params)


def _fig1_2d(params: Dict[str, Any]) -> Scenario:
    angles = np.deg2rad(np.asarray(params["angles_deg"], dtype=float))
    if angles.shape != (3,):
        raise ArgumentError("fig1-2d needs exactly three angles")
    center = np.asarray(params["center"], dtype=float)
    t_meet = float(params["t_meet"])
    op = HyperbolicOperator.minkowski(3)
    surfaces = []
    for j, th in enumerate(angles):
        omega = np.array([np.cos(th), np.sin(th)])
        surfaces.append(CharSurface.plane(np.r_[1.0, -omega], offset=t_meet - omega @ center,
                                          label=f"line{j + 1}"))

    def gamma(u):
        count = np.shape(u)[0]
        return np.tile(np.r_[t_meet, center], (count, 1))

    def g(y):
        y = np.asarray(y, dtype=float)
        return (y[..., 0] - t_meet) ** 2 - np.sum((y[..., 1:] - center) ** 2, axis=-1)

    def g_grad(y):
        y = np.asarray(y, dtype=float)
        out = np.empty(y.shape)
        out[..., 0] = 2.0 * (y[..., 0] - t_meet)
        out[..., 1:] = -2.0 * (y[..., 1:] - center)
        return out

    return Scenario("fig1-2d", op, surfaces, g, g_grad, gamma, [], params)


def _lens(params: Dict[str, Any]) -> Scenario:
    eps = float(params["strength"])
    if not -1.0 < eps:
        raise ArgumentError("lens strength must exceed -1 so the speed stays positive")
    source = np.asarray(params["source"], dtype=float)
    t_source = float(params["t_source"])

    def speed(y):
        x = np.asarray(y, dtype=float)[..., 1:]
        return 1.0 + eps * np.exp(-np.sum(x * x, axis=-1))

    def speed_grad(y):
        y = np.asarray(y, dtype=float)
        x = y[..., 1:]
        out = np.zeros(y.shape)
        out[..., 1:] = -2.0 * x * (eps * np.exp(-np.sum(x * x, axis=-1)))[..., None]
        return out

    op = HyperbolicOperator.isotropic(3, speed, speed_grad, label="lens")

    def gamma(u):
        count = np.shape(u)[0]
        return np.tile(np.r_[t_source, source], (count, 1))

    return Scenario("lens", op, [], None, None, gamma, [], params)


_BUILDERS = {
    "planes-cylinder": _planes_cylinder,
    "planes-cone": _planes_cone,
    "spheres": _spheres,
    "fig1-2d": _fig1_2d,
    "lens": _lens,
}


def list_scenarios() -> List[str]:
    return list(SCENARIO_IDS)


def make_scenario(id: str, params: Optional[Dict[str, Any]] = None, tol_eikonal: float = 1e-10) -> Scenario:
    """
    Build a scenario by id.

    Args:
        id: One of SCENARIO_IDS
        params: Overrides of the scenario constants
        tol_eikonal: Characteristic check tolerance on Gamma samples

    Raises:
        ArgumentError: unknown id, unknown or invalid params
        PreconditionError: a surface fails the characteristic check
    """
    if id not in _BUILDERS:
        raise ArgumentError(f"unknown scenario '{id}'; expected one of {', '.join(SCENARIO_IDS)}")
    params = dict(params or {})
    unknown = set(params) - set(_DEFAULTS[id])
    if unknown:
        raise ArgumentError(f"unknown parameter(s) for {id}: {', '.join(sorted(unknown))}")
    resolved = {**_DEFAULTS[id], **params}
    if "gamma_range" in resolved:
        lo, hi = (float(v) for v in resolved["gamma_range"])
        if not lo <= hi:
            raise ArgumentError("gamma_range must be increasing")
        resolved["gamma_range"] = [lo, hi]
    scenario = _BUILDERS[id](resolved)

    _, pts = scenario.gamma_samples(5)
    for surf in scenario.surfaces:
        residual = eikonal_residual(scenario.operator, surf, pts)
        if residual > tol_eikonal:
            raise PreconditionError(f"surface {surf.label} of {id} is not characteristic (residual {residual:.3e})")
    logger.debug(f"make_scenario: built {id} with {resolved}")
    return scenario


def closed_form_distance(scenario: Scenario, points) -> float:
    """
    Max first-order distance |G| / |grad G| of points to Q.

    Points where G vanishes (Gamma itself included) count as 0. Points
    outside the domain of the closed form count as infinitely far.

    Raises:
        UnsupportedError: if the scenario has no closed form for Q
    """
    if scenario.closed_form_Q is None:
        raise UnsupportedError(f"scenario {scenario.id} has no closed form for Q")
    pts = np.asarray(points, dtype=float).reshape(-1, scenario.dim)
    pts = pts[np.all(np.isfinite(pts), axis=-1)]
    if len(pts) == 0:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.abs(scenario.closed_form_Q(pts))
        grad = np.linalg.norm(scenario.closed_form_Q_grad(pts), axis=-1)
        dist = np.where(g == 0.0, 0.0, g / grad)
    dist = np.where(np.isnan(dist), np.inf, dist)
    if np.isinf(dist).any():
        logger.debug(f"closed_form_distance: {int(np.isinf(dist).sum())} point(s) outside the closed form's domain")
    return float(np.max(dist))
