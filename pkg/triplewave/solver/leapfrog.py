"""
Explicit leapfrog solver for alpha^2 u_tt - h^{jk} d_j d_k u + b.grad u = Y f(y, u) + g.

Second-order centered stencil with mixed differences for off-diagonal
metric entries. Time-derivative damping (b_t and the sponge layer) is
treated semi-implicitly; spatial first-order terms explicitly.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from triplewave.errors import (
    ArgumentError,
    NumericError,
    PreconditionError,
    UnsupportedError,
)
from triplewave.geometry.operator import HyperbolicOperator
from triplewave.geometry.surfaces import eikonal_residual
from triplewave.scenarios.catalog import Scenario
from triplewave.solver.nonlinearity import Nonlinearity
from triplewave.solver.profiles import ConormalProfile
from triplewave.utils.io import read_binary, write_binary

logger = logging.getLogger(__name__)

BOUNDARY_KINDS = ("dirichlet", "sponge")


@dataclass
class Grid:
    """Uniform tensor grid over the spatial coordinates."""

    axes: List[np.ndarray]

    @classmethod
    def uniform(cls, lower: Sequence[float], upper: Sequence[float], points: Sequence[int]) -> "Grid":
        if not (len(lower) == len(upper) == len(points)):
            raise ArgumentError("grid bounds and point counts must have equal length")
        if any(p < 3 for p in points) or any(hi <= lo for lo, hi in zip(lower, upper)):
            raise ArgumentError("grid needs at least 3 points per axis and increasing bounds")
        return cls([np.linspace(lo, hi, int(p)) for lo, hi, p in zip(lower, upper, points)])

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def h(self) -> np.ndarray:
        return np.array([a[1] - a[0] for a in self.axes])

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def coords(self) -> np.ndarray:
        """Spatial coordinates, shape grid.shape + (d,)."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def spacetime(self, t: float, coords: Optional[np.ndarray] = None) -> np.ndarray:
        """Spacetime points (t, x) on the grid, shape grid.shape + (d + 1,)."""
        x = self.coords() if coords is None else coords
        tt = np.full(x.shape[:-1] + (1,), float(t))
        return np.concatenate([tt, x], axis=-1)

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": [float(a[0]) for a in self.axes], "upper": [float(a[-1]) for a in self.axes],
                "points": list(self.shape)}


@dataclass
class GridField:
    """Recorded solution levels u(t_k, x) with run metadata."""

    grid: Grid
    times: List[float]
    data: List[np.ndarray]
    cfl: float
    bc: str
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.data):
            raise ArgumentError("times and data must have the same length")
        for u in self.data:
            if u.shape != self.grid.shape:
                raise ArgumentError("recorded level does not match the grid shape")

    @property
    def h(self) -> np.ndarray:
        return self.grid.h

    def at(self, t: float) -> np.ndarray:
        """Level recorded closest to time t."""
        k = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.data[k]

    def matches(self, other: "GridField") -> bool:
        return (self.grid.shape == other.grid.shape
                and np.allclose(self.grid.h, other.grid.h)
                and np.allclose([a[0] for a in self.grid.axes], [a[0] for a in other.grid.axes])
                and len(self.times) == len(other.times)
                and np.allclose(self.times, other.times))


@dataclass
class GridState:
    """Two consecutive time levels of the leapfrog scheme."""

    prev: np.ndarray
    cur: np.ndarray
    t: float
    index: int = 0


def _second_differences(u: np.ndarray, h: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """sum_jk h_jk D_j D_k u with zero ghost cells."""
    d = u.ndim
    up = np.pad(u, 1)
    center = tuple(slice(1, -1) for _ in range(d))
    out = np.zeros_like(u)

    def shifted(offsets):
        return up[tuple(slice(1 + o, up.shape[i] - 1 + o) for i, o in enumerate(offsets))]

    for j in range(d):
        e = [0] * d
        e[j] = 1
        plus = shifted(e)
        e[j] = -1
        minus = shifted(e)
        out += metric[..., j, j] * ((plus + minus) - 2.0 * up[center]) / (h[j] * h[j])
        for k in range(j + 1, d):
            off = metric[..., j, k]
            if np.all(off == 0):
                continue
            o = [0] * d
            o[j], o[k] = 1, 1
            pp = shifted(o)
            o[j], o[k] = -1, -1
            mm = shifted(o)
            o[j], o[k] = 1, -1
            pm = shifted(o)
            o[j], o[k] = -1, 1
            mp = shifted(o)
            out += 2.0 * off * ((pp + mm) - (pm + mp)) / (4.0 * h[j] * h[k])
    return out


def _first_differences(u: np.ndarray, h: np.ndarray) -> List[np.ndarray]:
    up = np.pad(u, 1)
    d = u.ndim
    grads = []
    for j in range(d):
        hi = tuple(slice(2, None) if i == j else slice(1, -1) for i in range(d))
        lo = tuple(slice(None, -2) if i == j else slice(1, -1) for i in range(d))
        grads.append((up[hi] - up[lo]) / (2.0 * h[j]))
    return grads


def sponge_profile(
    grid: Grid,
    width: int,
    strength: Optional[float] = None,
    speed: float = 1.0,
    reflection: float = 1e-3,
) -> np.ndarray:
    """
    Damping sigma(x) of u_t: zero in the interior, rising quadratically over
    `width` cells at each face.

    Without an explicit peak `strength`, each axis gets
    3 c ln(1 / reflection) / L with L the layer thickness, so a wave that
    crosses the layer and comes back is damped by `reflection`.
    """
    sigma = np.zeros(grid.shape)
    if width <= 0:
        return sigma
    if not 0.0 < reflection < 1.0:
        raise ArgumentError("sponge reflection must lie in (0, 1)")
    for j, ax in enumerate(grid.axes):
        n = len(ax)
        idx = np.arange(n)
        dist = np.minimum(idx, n - 1 - idx)
        depth = np.clip(1.0 - dist / float(width), 0.0, 1.0)
        peak = strength
        if peak is None:
            peak = 3.0 * speed * np.log(1.0 / reflection) / (width * grid.h[j])
        ramp = peak * depth ** 2
        shape = [1] * grid.ndim
        shape[j] = n
        sigma = np.maximum(sigma, ramp.reshape(shape))
    return sigma


class LeapfrogSolver:
    """
    Leapfrog time stepper on a fixed grid.

    Args:
        op: Hyperbolic operator (dim = grid.ndim + 1)
        grid: Spatial grid
        nonlinearity: Right-hand side Y f; None for the linear equation
        source: Optional forcing g(y)
        bc: "dirichlet" or "sponge"
        sponge_width: Sponge thickness in cells
        sponge_strength: Peak damping rate of the sponge; derived from
            sponge_reflection and the largest speed when omitted
        sponge_reflection: Round-trip damping factor of the sponge
        cfl_max: Largest accepted Courant number
    """

    def __init__(
        self,
        op: HyperbolicOperator,
        grid: Grid,
        nonlinearity: Optional[Nonlinearity] = None,
        source: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        bc: str = "dirichlet",
        sponge_width: int = 20,
        sponge_strength: Optional[float] = None,
        sponge_reflection: float = 1e-3,
        cfl_max: float = 0.5,
    ):
        if op.dim != grid.ndim + 1:
            raise ArgumentError(f"operator dimension {op.dim} does not match a {grid.ndim}-D grid")
        if bc not in BOUNDARY_KINDS:
            raise ArgumentError(f"unknown boundary condition '{bc}'")
        self.op = op
        self.grid = grid
        self.nonlinearity = nonlinearity
        self.source = source
        self.bc = bc
        self.cfl_max = cfl_max
        self._coords = grid.coords()
        self._static = None
        if op.constant:
            self._static = self._coefficients(0.0)
        self._sigma = None
        if bc == "sponge":
            self._sigma = sponge_profile(grid, sponge_width, sponge_strength,
                                         speed=self.max_speed(0.0), reflection=sponge_reflection)

    def _coefficients(self, t: float):
        y = self.grid.spacetime(t, self._coords)
        a2 = self.op.alpha(y) ** 2
        metric = self.op.metric(y)
        b = None if self.op.first_order is None else self.op.first_order(y)
        return y, a2, metric, b

    def max_speed(self, t: float = 0.0) -> float:
        _, a2, metric, _ = self._static or self._coefficients(t)
        lam = np.linalg.eigvalsh(metric)[..., -1]
        return float(np.max(np.sqrt(lam / a2)))

    def stable_dt(self, cfl: float, t: float = 0.0) -> float:
        return cfl * float(np.min(self.grid.h)) / self.max_speed(t)

    def check_cfl(self, dt: float, t: float = 0.0) -> float:
        """Courant number of dt; refuses dt above cfl_max."""
        courant = dt * self.max_speed(t) / float(np.min(self.grid.h))
        if courant > self.cfl_max * (1 + 1e-12):
            raise PreconditionError(f"CFL violated: Courant number {courant:.4f} exceeds {self.cfl_max}")
        return courant

    def step(self, state: GridState, dt: float) -> GridState:
        """One leapfrog update from (prev, cur) at time state.t."""
        t = state.t
        if self._static is not None:
            _, a2, metric, b = self._static
            y = None
        else:
            y, a2, metric, b = self._coefficients(t)
        u = state.cur
        rhs = _second_differences(u, self.grid.h, metric)
        damping = 0.0
        if b is not None:
            damping = b[..., 0]
            grads = _first_differences(u, self.grid.h)
            for j, gj in enumerate(grads):
                rhs = rhs - b[..., j + 1] * gj
        if self._sigma is not None:
            damping = damping + a2 * self._sigma
        if (self.nonlinearity is not None and not self.nonlinearity.is_zero) or self.source is not None:
            if y is None:
                y = self.grid.spacetime(t, self._coords)
            if self.nonlinearity is not None and not self.nonlinearity.is_zero:
                rhs = rhs + self.nonlinearity.rhs(y, u)
            if self.source is not None:
                rhs = rhs + self.source(y)
        half = 0.5 * dt * damping
        nxt = (2.0 * a2 * u - (a2 - half) * state.prev + dt * dt * rhs) / (a2 + half)
        if not np.all(np.isfinite(nxt)):
            raise NumericError(f"non-finite value at time index {state.index + 1} (t={t + dt:.6g})",
                               location=state.index + 1)
        return GridState(prev=u, cur=nxt, t=t + dt, index=state.index + 1)

    def discrete_energy(self, prev: np.ndarray, cur: np.ndarray, dt: float) -> float:
        """
        E = ||(u^{n+1} - u^n)/dt||^2_alpha - <u^{n+1}, L u^n>, conserved by
        the linear scheme with constant coefficients and zero boundary values.
        """
        _, a2, metric, _ = self._static or self._coefficients(0.0)
        vol = float(np.prod(self.grid.h))
        kinetic = np.sum(a2 * ((cur - prev) / dt) ** 2)
        potential = -np.sum(cur * _second_differences(prev, self.grid.h, metric))
        return 0.5 * vol * float(kinetic + potential)


def _progressing_wave(surface, profile: ConormalProfile, y: np.ndarray) -> np.ndarray:
    wave = surface.wave or {}
    kind = wave.get("kind")
    if kind == "plane":
        normal = np.asarray(wave["normal"], dtype=float)
        return profile(surface.phi(y) / normal[0])
    if kind == "sphere" and y.shape[-1] == 4:
        center = np.asarray(wave["center"], dtype=float)
        r = np.linalg.norm(y[..., 1:] - center, axis=-1)
        phi = surface.phi(y)
        vals = profile(phi)
        if np.any((vals != 0) & (r < 1e-12)):
            raise PreconditionError(f"spherical wave {surface.label} is singular at its centre on the grid")
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(vals != 0, vals / r, 0.0)
    raise UnsupportedError(f"no progressing-wave solution for surface {surface.label} in dimension {y.shape[-1]}")


def synthesize_initial_data(
    scenario: Scenario,
    profiles: Sequence[ConormalProfile],
    grid: Grid,
    t0: float,
    dt: float,
    tol_eikonal: float = 1e-10,
) -> GridField:
    """
    Two initial levels u(t0), u(t0 + dt) of v = v_1 + v_2 + v_3 sampled
    from exact progressing waves v_j = profile_j(phi_j).

    Raises:
        PreconditionError: non-characteristic surface or unresolved smoothing
        UnsupportedError: no exact progressing wave for the surface/operator
    """
    if len(profiles) != len(scenario.surfaces) or not profiles:
        raise ArgumentError("need one profile per scenario surface")
    if not scenario.operator.constant:
        raise UnsupportedError(f"scenario {scenario.id} has variable coefficients; no exact progressing waves")
    if scenario.dim != grid.ndim + 1:
        raise ArgumentError("grid dimension does not match the scenario")
    h = float(np.max(grid.h))
    _, gamma_pts = scenario.gamma_samples(5)
    for surf, prof in zip(scenario.surfaces, profiles):
        if eikonal_residual(scenario.operator, surf, gamma_pts) > tol_eikonal:
            raise PreconditionError(f"surface {surf.label} is not characteristic")
        prof.check_resolution(h)

    coords = grid.coords()
    levels = []
    for t in (t0, t0 + dt):
        y = grid.spacetime(t, coords)
        u = np.zeros(grid.shape)
        for surf, prof in zip(scenario.surfaces, profiles):
            u = u + _progressing_wave(surf, prof, y)
        levels.append(u)
    return GridField(grid=grid, times=[t0, t0 + dt], data=levels, cfl=float("nan"), bc="",
                     metadata={"scenario": scenario.id, "profiles": [p.to_dict() for p in profiles]})


def step(
    state: GridState,
    op: HyperbolicOperator,
    nonlinearity: Optional[Nonlinearity],
    dt: float,
    grid: Grid,
    bc: str = "dirichlet",
    cfl_max: float = 0.5,
) -> GridState:
    """One leapfrog step; refuses a CFL violation."""
    solver = LeapfrogSolver(op, grid, nonlinearity, bc=bc, cfl_max=cfl_max)
    solver.check_cfl(dt, state.t)
    return solver.step(state, dt)


def run(
    scenario: Scenario,
    profiles: Sequence[ConormalProfile],
    nonlinearity: Optional[Nonlinearity],
    T_end: float,
    record_times: Sequence[float],
    grid: Grid,
    t0: float = -1.5,
    cfl: float = 0.4,
    cfl_max: float = 0.5,
    bc: str = "dirichlet",
    sponge_width: int = 20,
    source: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    zero_initial_data: bool = False,
) -> GridField:
    """
    March from t0 to T_end and record the levels closest to record_times.

    Args:
        scenario: Scenario with plane or spherical surfaces
        profiles: One profile per surface
        nonlinearity: Y f; None or Nonlinearity.zero() for linear runs
        T_end: Final time
        record_times: Times to record (clipped to [t0, T_end])
        grid: Spatial grid
        t0: Initial time
        cfl: Target Courant number
        bc: Boundary condition kind
        source: Optional forcing g(y) (forcing variant)
        zero_initial_data: Start from u = 0 (forcing variant)

    Returns:
        GridField with metadata for reproducibility
    """
    if T_end <= t0:
        raise ArgumentError("T_end must exceed t0")
    solver = LeapfrogSolver(scenario.operator, grid, nonlinearity, source=source, bc=bc,
                            sponge_width=sponge_width, cfl_max=cfl_max)
    dt_max = solver.stable_dt(cfl, t0)
    n_steps = int(np.ceil((T_end - t0) / dt_max - 1e-9))
    dt = (T_end - t0) / n_steps
    courant = solver.check_cfl(dt, t0)

    if nonlinearity is not None:
        nonlinearity.check_cutoff(grid.spacetime(min(t0, -1.0 - dt), grid.coords()))

    if zero_initial_data:
        init = [np.zeros(grid.shape), np.zeros(grid.shape)]
    else:
        init = synthesize_initial_data(scenario, profiles, grid, t0, dt).data

    wanted = sorted({int(round((min(max(t, t0), T_end) - t0) / dt)) for t in record_times})
    recorded: Dict[int, np.ndarray] = {}
    for k in (0, 1):
        if k in wanted:
            recorded[k] = init[k].copy()

    state = GridState(prev=init[0], cur=init[1], t=t0 + dt, index=1)
    logger.info(f"run: {scenario.id}, {n_steps} steps of dt={dt:.4g}, grid {grid.shape}, "
                f"nonlinearity {nonlinearity.label if nonlinearity else 'none'}")
    while state.index < n_steps:
        state = solver.step(state, dt)
        if state.index in wanted:
            recorded[state.index] = state.cur.copy()

    times = [t0 + k * dt for k in sorted(recorded)]
    metadata = {
        "scenario": scenario.to_config(),
        "profiles": [p.to_dict() for p in profiles],
        "nonlinearity": nonlinearity.descriptor if nonlinearity else {"kind": "none"},
        "t0": t0, "T_end": T_end, "dt": dt, "n_steps": n_steps,
        "grid": grid.to_dict(), "forcing": source is not None,
    }
    return GridField(grid=grid, times=times, data=[recorded[k] for k in sorted(recorded)],
                     cfl=courant, bc=bc, metadata=metadata)


def export_grid_field(field_: GridField, path: Union[str, Path]) -> Path:
    """Header + float64 payload with one block per recorded time."""
    header = {
        "kind": "grid_field",
        "shape": list(field_.grid.shape),
        "h": field_.grid.h.tolist(),
        "lower": [float(a[0]) for a in field_.grid.axes],
        "times": list(field_.times),
        "cfl": field_.cfl,
        "bc": field_.bc,
        "metadata": field_.metadata,
    }
    payload = np.stack(field_.data) if field_.data else np.empty((0,) + field_.grid.shape)
    return write_binary(path, header, payload)


def load_grid_field(path: Union[str, Path]) -> GridField:
    header, payload = read_binary(path)
    axes = [lo + h * np.arange(n) for lo, h, n in zip(header["lower"], header["h"], header["shape"])]
    return GridField(grid=Grid(axes), times=header["times"], data=list(payload), cfl=header["cfl"],
                     bc=header["bc"], metadata=header.get("metadata", {}))
