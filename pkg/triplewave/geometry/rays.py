"""
Null bicharacteristics: adaptive integration of the Hamilton field.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from triplewave.errors import IntegrationError, PreconditionError
from triplewave.geometry.operator import (
    CovectorPoint,
    HyperbolicOperator,
    check_coefficients,
    hamilton_field,
    symbol_arrays,
)

logger = logging.getLogger(__name__)


@dataclass
class StepControl:
    """
    Integrator settings for trace_ray.

    Args:
        method: solve_ivp method (embedded RK of order >= 4(5))
        rtol: Relative tolerance
        atol: Absolute tolerance
        max_step: Largest allowed step in s
        n_samples: Number of output samples on [0, s_max]
        tol_null: Null check tolerance for the start point (relative to |eta|^2)
        tol_ray: Allowed drift of p along the ray (relative to 1 + |eta(0)|^2)
        blowup: |eta| above which integration stops with an error
    """

    method: str = "DOP853"
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = np.inf
    n_samples: int = 101
    tol_null: float = 1e-8
    tol_ray: float = 1e-8
    blowup: float = 1e8

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method, "rtol": self.rtol, "atol": self.atol,
            "max_step": None if np.isinf(self.max_step) else self.max_step,
            "n_samples": self.n_samples, "tol_null": self.tol_null,
            "tol_ray": self.tol_ray, "blowup": self.blowup,
        }


@dataclass
class Ray:
    """
    A sampled null bicharacteristic.

    Attributes:
        s: Flow parameter samples, strictly increasing
        y: Spacetime points (S, n)
        eta: Covectors (S, n)
        amplitude: Optional complex amplitude per sample
        step_stats: Integrator diagnostics
    """

    s: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    amplitude: Optional[np.ndarray] = None
    step_stats: Dict[str, Any] = field(default_factory=dict)

    @property
    def samples(self) -> List[Tuple[float, CovectorPoint]]:
        return [(float(si), CovectorPoint(yi, ei)) for si, yi, ei in zip(self.s, self.y, self.eta)]

    def __len__(self) -> int:
        return len(self.s)

    def null_drift(self, op: HyperbolicOperator) -> float:
        """max_s |p(y(s), eta(s)) - p(y(0), eta(0))|."""
        p = symbol_arrays(op, self.y, self.eta)
        return float(np.max(np.abs(p - p[0])))


def _rhs(op: HyperbolicOperator, n: int):
    def fun(_s, z):
        y_dot, eta_dot = hamilton_field(op, CovectorPoint(z[:n], z[n:]))
        return np.concatenate([y_dot, eta_dot])
    return fun


def trace_ray(
    op: HyperbolicOperator,
    start: CovectorPoint,
    s_max: float,
    step_ctrl: Optional[StepControl] = None,
    direction: int = 1,
) -> Ray:
    """
    Integrate the Hamilton field of p from a null start point.

    Args:
        op: Operator
        start: Null covector point
        s_max: Flow length (>= 0)
        step_ctrl: Integrator settings
        direction: +1 forward, -1 backward; a backward ray is returned with
            s in [-s_max, 0] in increasing order

    Returns:
        Ray sampled at step_ctrl.n_samples points

    Raises:
        PreconditionError: if the start is not null
        IntegrationError: on blow-up or step underflow, with the last good state
    """
    ctrl = step_ctrl or StepControl()
    if direction not in (1, -1):
        raise PreconditionError("direction must be +1 or -1")
    if s_max < 0:
        raise PreconditionError("s_max must be non-negative")
    check_coefficients(op, start.y)
    n = op.dim
    p0 = float(symbol_arrays(op, start.y, start.eta))
    scale = float(start.eta @ start.eta)
    if abs(p0) > ctrl.tol_null * max(scale, np.finfo(float).tiny):
        raise PreconditionError(f"start covector is not null: p = {p0:.3e}")

    if s_max == 0:
        return Ray(s=np.zeros(1), y=start.y[None, :].copy(), eta=start.eta[None, :].copy(),
                   step_stats={"nfev": 0, "status": "trivial", "null_drift": 0.0})

    s_eval = direction * np.linspace(0.0, s_max, max(ctrl.n_samples, 2))
    z0 = np.concatenate([start.y, start.eta])

    def blowup(_s, z):
        return ctrl.blowup - np.linalg.norm(z[n:])
    blowup.terminal = True

    try:
        sol = solve_ivp(
            _rhs(op, n), (0.0, direction * s_max), z0, method=ctrl.method, t_eval=s_eval,
            rtol=ctrl.rtol, atol=ctrl.atol, max_step=ctrl.max_step, events=blowup,
        )
    except Exception as e:
        raise IntegrationError(f"ray integration failed: {e}", last_state=(0.0, start.y, start.eta)) from e

    if sol.status != 0 or sol.y.shape[1] != len(s_eval) or not np.all(np.isfinite(sol.y)):
        good = np.all(np.isfinite(sol.y), axis=0)
        last = None
        if np.any(good):
            k = int(np.flatnonzero(good)[-1])
            last = (float(sol.t[k]), sol.y[:n, k].copy(), sol.y[n:, k].copy())
        reason = "blow-up" if sol.status == 1 else (sol.message or "non-finite state")
        logger.error(f"trace_ray: {reason}")
        raise IntegrationError(f"ray integration stopped: {reason}", last_state=last)

    s = sol.t
    y = sol.y[:n].T.copy()
    eta = sol.y[n:].T.copy()
    if direction < 0:
        s, y, eta = s[::-1].copy(), y[::-1].copy(), eta[::-1].copy()
    ray = Ray(s=s, y=y, eta=eta, step_stats={"nfev": int(sol.nfev), "status": "ok", "method": ctrl.method})
    drift = ray.null_drift(op)
    ray.step_stats["null_drift"] = drift
    ray.step_stats["null_conserved"] = bool(drift <= ctrl.tol_ray * (1.0 + scale))
    if not ray.step_stats["null_conserved"]:
        logger.warning(f"trace_ray: null drift {drift:.3e} exceeds tolerance")
    return ray


def trace_ray_fixed_step(
    op: HyperbolicOperator,
    start: CovectorPoint,
    s_max: float,
    n_steps: int,
) -> Ray:
    """Classical RK4 with a fixed step; a reference solution for tests."""
    n = op.dim
    fun = _rhs(op, n)
    h = s_max / n_steps
    z = np.concatenate([start.y, start.eta]).astype(float)
    zs = [z.copy()]
    for k in range(n_steps):
        s = k * h
        k1 = fun(s, z)
        k2 = fun(s + 0.5 * h, z + 0.5 * h * k1)
        k3 = fun(s + 0.5 * h, z + 0.5 * h * k2)
        k4 = fun(s + h, z + h * k3)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        zs.append(z.copy())
    zs = np.asarray(zs)
    return Ray(s=np.linspace(0.0, s_max, n_steps + 1), y=zs[:, :n], eta=zs[:, n:],
               step_stats={"method": "rk4", "n_steps": n_steps})


def export_ray_csv(rays: List[Ray], path: Union[str, Path], dim: int) -> Path:
    """
    Write rays as CSV with columns ray, s, t, x..., tau, xi...

    An empty ray list writes the header only.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = ["ray", "s", "t"] + [f"x{i}" for i in range(1, dim)] + ["tau"] + [f"xi{i}" for i in range(1, dim)]
    blocks = [np.column_stack([np.full(len(r), i), r.s, r.y, r.eta]) for i, r in enumerate(rays)]
    table = np.vstack(blocks) if blocks else np.empty((0, len(names)))
    np.savetxt(path, table, delimiter=",", header=",".join(names), comments="", fmt="%.17g")
    logger.info(f"Wrote {len(rays)} ray(s) to {path}")
    return path
