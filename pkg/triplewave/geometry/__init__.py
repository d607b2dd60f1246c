"""
Operators, characteristic surfaces, ray tracing and flow-out meshes.
"""

from triplewave.geometry.operator import (
    CovectorPoint,
    HyperbolicOperator,
    hamilton_field,
    principal_symbol,
    subprincipal_symbol,
)
from triplewave.geometry.surfaces import (
    CharSurface,
    TripleIntersection,
    conormal_null_fiber,
    eikonal_residual,
    triple_intersection,
)
from triplewave.geometry.rays import Ray, StepControl, export_ray_csv, trace_ray
from triplewave.geometry.flowout import (
    FrontMesh,
    apparent_front_speed,
    caustic_scan,
    export_front_mesh,
    flow_out,
    load_front_mesh,
    slice_at_time,
)

__all__ = [
    "CovectorPoint", "HyperbolicOperator", "hamilton_field", "principal_symbol",
    "subprincipal_symbol", "CharSurface", "TripleIntersection", "conormal_null_fiber",
    "eikonal_residual", "triple_intersection", "Ray", "StepControl", "export_ray_csv",
    "trace_ray", "FrontMesh", "apparent_front_speed", "caustic_scan", "export_front_mesh",
    "flow_out", "load_front_mesh", "slice_at_time",
]
