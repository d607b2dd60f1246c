"""
Cubic on/off discriminator: compares matched runs with f = u^3, u^2 and 0.
"""

import logging
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from triplewave.detector.fronts import (
    Band,
    FrontEstimate,
    band_energy_map,
    default_band,
    exclusion_mask,
    extract_front,
    q_agreement,
    q_slice_points,
)
from triplewave.errors import ArgumentError
from triplewave.geometry.flowout import FrontMesh
from triplewave.scenarios.catalog import Scenario
from triplewave.solver.leapfrog import Grid, GridField

logger = logging.getLogger(__name__)

RUN_KEYS = ("cubic", "quadratic", "linear")


def q_tube(grid: Grid, q_points: np.ndarray, radius: float) -> np.ndarray:
    """Grid cells within `radius` of the sampled Q slice."""
    if len(q_points) == 0:
        return np.zeros(grid.shape, dtype=bool)
    dist, _ = cKDTree(q_points).query(grid.coords().reshape(-1, grid.ndim))
    return (dist <= radius).reshape(grid.shape)


def _energy_ratio(e3: float, controls: Dict[str, float]) -> float:
    ref = max(controls.values())
    if ref == 0.0:
        return 1.0 if e3 == 0.0 else float("inf")
    return e3 / ref


def cubic_discriminator(
    runs: Mapping[str, GridField],
    scenario: Scenario,
    target: Optional[Union[FrontMesh, Scenario]] = None,
    time: Optional[float] = None,
    band: Optional[Band] = None,
    r_min: float = 10.0,
    mask_cells: float = 3.0,
    tube_cells: float = 3.0,
    kappa: float = 6.0,
    rel_peak: float = 0.05,
    coverage_min: float = 0.6,
    return_front: bool = False,
) -> Union[Dict[str, Any], Tuple[Dict[str, Any], FrontEstimate]]:
    """
    Verdict on whether the cubic run carries a new wave on Q.

    The Q-band energy is measured on the raw fields inside a tube around
    Q (outside the exclusion masks). The front is extracted from the
    cubic run minus the linear run when the linear run is present, which
    removes the incoming waves.

    Args:
        runs: {"cubic": ..., "quadratic": ..., "linear": ...}; the cubic run
            and at least one control are required
        scenario: Scenario of the runs (incoming surfaces and Gamma)
        target: Q as a FrontMesh or closed form; defaults to the scenario
        time: Recorded time to compare; the last common level by default
        band: Band-pass band; the upper octave by default
        r_min: Required energy ratio over every control
        mask_cells: Exclusion tube radius around surfaces and Gamma, in cells
        tube_cells: Q tube radius, in cells
        return_front: Also return the extracted FrontEstimate

    Returns:
        Report dict with "verdict" ("ON"/"OFF") and the numeric evidence;
        (report, front) with return_front

    Raises:
        ArgumentError: missing runs or grids/times that do not match
    """
    unknown = set(runs) - set(RUN_KEYS)
    if unknown:
        raise ArgumentError(f"unknown run keys: {sorted(unknown)}")
    if "cubic" not in runs or not (set(runs) & {"quadratic", "linear"}):
        raise ArgumentError("discriminator needs the cubic run and at least one control run")
    cubic = runs["cubic"]
    for key, run in runs.items():
        if not cubic.matches(run):
            raise ArgumentError(f"run '{key}' does not share the cubic run's grid and record times")
    if mask_cells < 3.0:
        raise ArgumentError("exclusion masks need a radius of at least 3 cells")

    grid = cubic.grid
    h = float(np.max(grid.h))
    t = cubic.times[-1] if time is None else time
    band = default_band(grid.h) if band is None else band
    target = scenario if target is None else target

    exclusion = exclusion_mask(grid, t, scenario, mask_cells * h)
    q_pts = q_slice_points(target, grid, t)
    tube = q_tube(grid, q_pts, tube_cells * h) & ~exclusion
    vol = float(np.prod(grid.h))

    energies = {key: float(np.sum(band_energy_map(run.at(t), grid.h, band)[tube]) * vol)
                for key, run in runs.items()}
    controls = {k: v for k, v in energies.items() if k != "cubic"}
    ratio = _energy_ratio(energies["cubic"], controls)

    difference = cubic.at(t)
    if "linear" in runs:
        difference = difference - runs["linear"].at(t)
    diff_field = GridField(grid=grid, times=[t], data=[difference], cfl=cubic.cfl, bc=cubic.bc)
    front = extract_front(diff_field, band=band, time=t, kappa=kappa, rel_peak=rel_peak, mask=exclusion)
    agreement = q_agreement(front, target, grid, exclusion=exclusion, coverage_min=coverage_min)

    on = bool(ratio >= r_min and agreement["passed"])
    logger.info(f"cubic_discriminator: ratio {ratio:.3g} (need {r_min}), q_agreement "
                f"{'passed' if agreement['passed'] else 'failed'} -> {'ON' if on else 'OFF'}")
    report = {
        "verdict": "ON" if on else "OFF",
        "time": float(t),
        "band": [float(band[0]), float(band[1])],
        "r_min": r_min,
        "energies": energies,
        "ratio": ratio,
        "tube_cells": int(tube.sum()),
        "excluded_cells": int(exclusion.sum()),
        "front_source": "cubic-linear" if "linear" in runs else "cubic",
        "q_agreement": agreement,
    }
    return (report, front) if return_front else report
