"""
Order bookkeeping for conormal classes.

Symbol order m of a conormal wave on a hypersurface corresponds to the
class order m - n/4 + 1/2; the product of three transversal waves of
symbol order m produces a wave of class order 3m - n/4 on Q.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Any, Dict

from triplewave.errors import DomainError, HypothesisWarning

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConormalOrder:
    """
    Symbol order m of a conormal distribution to a codimension-k manifold
    in n dimensions, with class order mu = m + (2k - n)/4.
    """

    m: float
    codim: int
    n: int

    @property
    def class_order(self) -> float:
        return self.m + (2 * self.codim - self.n) / 4.0

    @classmethod
    def from_class_order(cls, mu: float, codim: int, n: int) -> "ConormalOrder":
        return cls(m=mu - (2 * codim - n) / 4.0, codim=codim, n=n)

    def includes(self, other: "ConormalOrder") -> bool:
        """I^{other} is contained in I^{self} (same manifold)."""
        if (other.codim, other.n) != (self.codim, self.n):
            raise DomainError("orders refer to different manifolds")
        return other.class_order <= self.class_order


def k_of_m(m: float) -> int:
    """
    The non-negative integer k with -m - 2 <= k < -m - 1.

    Raises:
        DomainError: if m >= -1
    """
    if m >= -1:
        raise DomainError(f"k(m) needs m < -1, got m={m}")
    return int(math.ceil(round(-m - 2.0, 9)))


def product_order(m: float, N: int, n: int) -> float:
    """Class order m - n/4 + 1/2 - (N - 1) k(m) of a product of N waves."""
    if N < 1:
        raise DomainError("N must be at least 1")
    return m - n / 4.0 + 0.5 - (N - 1) * k_of_m(m)


def incoming_class_order(m: float, n: int) -> float:
    return m - n / 4.0 + 0.5


def triple_output_order(m: float, n: int) -> Dict[str, Any]:
    """
    Class order 3m - n/4 of the new wave on Q.

    Outside m < -(n+7)/2 a HypothesisWarning is emitted and the value is
    still returned.

    Returns:
        {"output_order", "incoming_order", "hypothesis_ok", "threshold"}
    """
    threshold = -(n + 7) / 2.0
    ok = m < threshold
    if not ok:
        msg = f"m={m} is not below -(n+7)/2={threshold}; order reported outside the triple-interaction range"
        logger.debug(msg)
        warnings.warn(msg, HypothesisWarning, stacklevel=2)
    return {
        "output_order": 3.0 * m - n / 4.0,
        "incoming_order": incoming_class_order(m, n),
        "hypothesis_ok": ok,
        "threshold": threshold,
    }


def symbol_order_gap(m: float) -> float:
    """Symbol-order gap between the wave on Q and an incoming wave: 2m - 1/2."""
    return 2.0 * m - 0.5


def pair_interaction_report(m: float, n: int) -> Dict[str, Any]:
    """
    Two transversal conormal waves interact without creating a new
    singular surface; their product stays conormal to the union of the
    two surfaces at the incoming order.
    """
    return {
        "new_singularity": False,
        "incoming_order": incoming_class_order(m, n),
    }
