"""
Predicted leading term of the wave created on Q.
"""

import logging
from typing import Any, Callable, Dict, Optional

import numpy as np

from triplewave.errors import CausticError
from triplewave.geometry.flowout import FrontMesh
from triplewave.scenarios.catalog import Scenario
from triplewave.symbolcalc.orders import symbol_order_gap, triple_output_order
from triplewave.symbolcalc.symbols import ProductSymbolV
from triplewave.symbolcalc.transport import mesh_ray, transport_amplitude, tube_jacobian

logger = logging.getLogger(__name__)


def _normal_components(normals: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Coefficients zeta with eta = sum_j zeta_j normals_j."""
    coef, *_ = np.linalg.lstsq(normals.T, eta, rcond=None)
    return coef


def predicted_leading_term(
    scenario: Scenario,
    m: float,
    d3f_on_gamma: Callable[[np.ndarray, np.ndarray], np.ndarray],
    mesh: Optional[FrontMesh] = None,
    symbol: Optional[ProductSymbolV] = None,
    u_on_gamma: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    gamma_count: int = 21,
    tol: float = 0.0,
) -> Dict[str, Any]:
    """
    Orders, on/off predicate over Gamma and (optionally) amplitudes on Q.

    The leading singularity on Q is predicted wherever (d_u^3 f)(q, u(q))
    is non-zero on Gamma. Amplitudes start from (d_u^3 f) V at each ray's
    first s > 0 node and are transported along the ray; only the order
    shift and the on/off pattern are claimed, not an absolute constant.

    Args:
        scenario: Scenario with Gamma
        m: Symbol order of the incoming waves
        d3f_on_gamma: (q (G, n), u (G,)) -> d_u^3 f values
        mesh: Optional flow-out mesh for amplitude transport
        symbol: Product symbol V (needed with mesh)
        u_on_gamma: Values u(q) of the solution on Gamma; zero if not given
        gamma_count: Gamma samples when no mesh is given
        tol: |d_u^3 f| above tol counts as non-zero

    Returns:
        Report dict with orders, predicate per Gamma sample and amplitudes
    """
    n = scenario.dim
    orders = triple_output_order(m, n)
    if mesh is not None:
        q = mesh.points[:, 0, 0, :]
        params = mesh.gamma_params
    else:
        params, q = scenario.gamma_samples(gamma_count)
    u = np.zeros(len(q)) if u_on_gamma is None else np.asarray(u_on_gamma(q), dtype=float)
    d3f = np.asarray(d3f_on_gamma(q, u), dtype=float) * np.ones(len(q))
    predicate = np.abs(d3f) > tol

    report: Dict[str, Any] = {
        "scenario": scenario.id,
        "m": m,
        "n": n,
        "output_order": orders["output_order"],
        "incoming_order": orders["incoming_order"],
        "hypothesis_ok": orders["hypothesis_ok"],
        "symbol_order_gap": symbol_order_gap(m),
        "gamma_params": params,
        "gamma_points": q,
        "d3f_on_gamma": d3f,
        "predicate": predicate,
        "on": bool(np.any(predicate)),
    }
    logger.info(f"predicted_leading_term: {int(predicate.sum())}/{len(predicate)} Gamma samples predict a wave on Q")

    if mesh is not None and symbol is not None and mesh.s.size >= 3:
        g_count, f_count, s_count = mesh.shape
        amps = np.full((g_count, f_count, s_count), np.nan + 0j)
        caustic_hits = 0
        for g in range(g_count):
            normals = scenario.normals_at(q[g])
            for f in range(f_count):
                if mesh.hole is not None and mesh.hole[g, f, 0]:
                    continue
                zeta = _normal_components(normals, mesh.covectors[g, f, 0])
                a0 = d3f[g] * complex(symbol.evaluate(zeta[0], zeta[1], zeta[2]))
                try:
                    out = transport_amplitude(scenario.operator, mesh_ray(mesh, g, f), a0,
                                              jacobian=tube_jacobian(mesh, g, f), start=1)
                    amps[g, f, 1:] = out.a
                except CausticError as e:
                    caustic_hits += 1
                    logger.debug(f"predicted_leading_term: ray ({g},{f}) stopped at caustic s={e.s}")
        report["amplitude"] = amps
        report["amplitude_caustic_rays"] = caustic_hits
    return report
