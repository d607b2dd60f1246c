"""
Front extraction, spectral order estimates and the cubic discriminator.
"""

from triplewave.detector.spectral import (
    SlopeEstimate,
    normal_transect,
    relative_order_gap,
    spectral_slope,
)
from triplewave.detector.fronts import (
    FrontEstimate,
    band_pass,
    exclusion_mask,
    export_ridge_csv,
    extract_front,
    q_agreement,
)
from triplewave.detector.discriminator import cubic_discriminator

__all__ = [
    "SlopeEstimate", "normal_transect", "relative_order_gap", "spectral_slope",
    "FrontEstimate", "band_pass", "exclusion_mask", "export_ridge_csv", "extract_front",
    "q_agreement", "cubic_discriminator",
]
