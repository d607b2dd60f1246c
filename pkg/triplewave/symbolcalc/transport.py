"""
Principal-symbol transport along null bicharacteristics.

The amplitude a of a half-density solves (L_{H_p} + i c) a = 0; in a
ray-tube trivialization with Jacobian J this reads

    da/ds + (i c + (1/2) d log J / ds) a = 0,

with c the subprincipal symbol in the convention of
geometry.operator.subprincipal_symbol.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from triplewave.errors import ArgumentError, CausticError
from triplewave.geometry.flowout import FrontMesh
from triplewave.geometry.operator import CovectorPoint, HyperbolicOperator, subprincipal_symbol
from triplewave.geometry.rays import Ray

logger = logging.getLogger(__name__)


@dataclass
class SymbolOnRay:
    """Amplitude samples a(s) and subprincipal samples c(s) along a ray."""

    ray: Ray
    a: np.ndarray
    c: np.ndarray
    jacobian: np.ndarray
    residual: float = 0.0
    info: Dict[str, Any] = field(default_factory=dict)


def tube_jacobian(mesh: FrontMesh, g: int, f: int) -> np.ndarray:
    """Ray-tube Jacobian J(s) of one mesh ray (the projection determinant)."""
    if mesh.jacobian_det is None:
        raise ArgumentError("mesh has no jacobian data")
    return np.asarray(mesh.jacobian_det[g, f], dtype=float)


def mesh_ray(mesh: FrontMesh, g: int, f: int) -> Ray:
    return Ray(s=mesh.s.copy(), y=mesh.points[g, f].copy(), eta=mesh.covectors[g, f].copy())


def _subprincipal_along(op: HyperbolicOperator, ray: Ray) -> np.ndarray:
    return np.array([subprincipal_symbol(op, CovectorPoint(y, e)) for y, e in zip(ray.y, ray.eta)])


def _check_jacobian(jac: np.ndarray, s: np.ndarray, tol_j: float) -> None:
    scale = np.max(np.abs(jac))
    bad = np.flatnonzero(~(np.abs(jac) > tol_j * scale))
    if scale == 0 or bad.size:
        k = int(bad[0]) if bad.size else 0
        raise CausticError(f"ray-tube Jacobian vanishes at s={s[k]:.6g}", s=float(s[k]))
    if np.any(np.sign(jac) != np.sign(jac[0])):
        k = int(np.flatnonzero(np.sign(jac) != np.sign(jac[0]))[0])
        raise CausticError(f"ray-tube Jacobian changes sign before s={s[k]:.6g}", s=float(s[k]))


def transport_amplitude(
    op: HyperbolicOperator,
    ray: Ray,
    a0: complex,
    jacobian: Optional[np.ndarray] = None,
    start: int = 0,
    tol_j: float = 1e-8,
) -> SymbolOnRay:
    """
    Integrate the transport equation along a ray.

    The solution is a = a0 (J0/J)^(1/2) exp(-i int c ds), with the integral
    taken from a cubic-spline antiderivative of c.

    Args:
        op: Operator (for the subprincipal symbol)
        ray: Traced ray
        a0: Amplitude at the start sample
        jacobian: J(s) per ray sample; None for a plane tube (J constant)
        start: Index of the first sample (s > 0 for point-source tubes)
        tol_j: Relative threshold below which J counts as vanishing

    Raises:
        CausticError: if J vanishes or changes sign on the ray
    """
    s = ray.s[start:]
    if len(s) < 2:
        raise ArgumentError("transport needs at least two ray samples")
    sub = Ray(s=s, y=ray.y[start:], eta=ray.eta[start:])
    jac = np.ones_like(s) if jacobian is None else np.asarray(jacobian, dtype=float)[start:]
    _check_jacobian(jac, s, tol_j)

    c = _subprincipal_along(op, sub)
    phase = CubicSpline(s, 1j * c).antiderivative()
    a = complex(a0) * np.sqrt(jac[0] / jac) * np.exp(-(phase(s) - phase(s[0])))

    # residual of da/ds + (i c + 1/2 dlogJ/ds) a on the samples
    a_spl = CubicSpline(s, a)
    logj = CubicSpline(s, np.log(np.abs(jac)))
    res = a_spl(s, 1) + (1j * c + 0.5 * logj(s, 1)) * a
    residual = float(np.max(np.abs(res)) / max(abs(a0), np.finfo(float).tiny))

    ray.amplitude = np.full(len(ray.s), np.nan + 0j)
    ray.amplitude[start:] = a
    logger.debug(f"transport_amplitude: {len(s)} samples, residual {residual:.2e}")
    return SymbolOnRay(ray=ray, a=a, c=c, jacobian=jac, residual=residual,
                       info={"start": start, "s0": float(s[0])})


def transport_amplitude_rk4(
    op: HyperbolicOperator,
    ray: Ray,
    a0: complex,
    jacobian: Optional[np.ndarray] = None,
    start: int = 0,
    refine: int = 100,
) -> np.ndarray:
    """
    Fixed-step RK4 solution of the transport ODE on a grid `refine` times
    finer than the ray samples; c and log J are spline-interpolated.
    Returns the amplitude at the ray samples from `start` on.
    """
    s = ray.s[start:]
    sub = Ray(s=s, y=ray.y[start:], eta=ray.eta[start:])
    jac = np.ones_like(s) if jacobian is None else np.asarray(jacobian, dtype=float)[start:]
    c_spl = CubicSpline(s, 1j * _subprincipal_along(op, sub))
    dlogj = CubicSpline(s, np.log(np.abs(jac))).derivative()

    def rate(x):
        return -(c_spl(x) + 0.5 * dlogj(x))

    out = [complex(a0)]
    a = complex(a0)
    for k in range(len(s) - 1):
        h = (s[k + 1] - s[k]) / refine
        x = s[k]
        for _ in range(refine):
            k1 = rate(x) * a
            k2 = rate(x + 0.5 * h) * (a + 0.5 * h * k1)
            k3 = rate(x + 0.5 * h) * (a + 0.5 * h * k2)
            k4 = rate(x + h) * (a + h * k3)
            a = a + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            x += h
        out.append(a)
    return np.asarray(out)
