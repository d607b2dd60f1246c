"""
Order bookkeeping, product symbols, transport and the leading-term prediction.
"""

from triplewave.symbolcalc.orders import (
    ConormalOrder,
    k_of_m,
    pair_interaction_report,
    product_order,
    symbol_order_gap,
    triple_output_order,
)
from triplewave.symbolcalc.symbols import ProductSymbolV, SymbolFactor, build_product_symbol
from triplewave.symbolcalc.transport import SymbolOnRay, transport_amplitude
from triplewave.symbolcalc.prediction import predicted_leading_term

__all__ = [
    "ConormalOrder", "k_of_m", "pair_interaction_report", "product_order", "symbol_order_gap",
    "triple_output_order", "ProductSymbolV", "SymbolFactor", "build_product_symbol",
    "SymbolOnRay", "transport_amplitude", "predicted_leading_term",
]
