"""
triplewave: numerical toolkit for triple interactions of conormal waves.

Traces the flow-out surface of a triple intersection, keeps the order
bookkeeping of the new wave, runs a semilinear wave solver and detects
the singular fronts it produces.
"""

__version__ = "0.1.0"
