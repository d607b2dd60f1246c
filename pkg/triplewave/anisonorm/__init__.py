"""
Anisotropic Sobolev norms with conormal regularity and their property checks.
"""

from triplewave.anisonorm.norms import (
    AnisoIndex,
    WeightKernel,
    aniso_norm,
    conormal_model,
    incoming_order_threshold,
    linf_embedding_check,
    product_closure_check,
    resolved_norm,
)
from triplewave.anisonorm.kernel import kernel_integral, radial_criterion

__all__ = [
    "AnisoIndex", "WeightKernel", "aniso_norm", "conormal_model", "incoming_order_threshold",
    "linf_embedding_check", "product_closure_check", "resolved_norm", "kernel_integral",
    "radial_criterion",
]
