"""
Product principal symbol V = a_1 a_2 a_3 restricted to Gamma.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from triplewave.errors import ArgumentError

logger = logging.getLogger(__name__)


def japanese(eta) -> np.ndarray:
    """<eta> = (1 + |eta|^2)^(1/2) for scalar frequencies."""
    eta = np.asarray(eta, dtype=float)
    return np.sqrt(1.0 + eta * eta)


@dataclass(frozen=True)
class SymbolFactor:
    """
    One-dimensional symbol a_j(eta_j) of an incoming wave restricted to Gamma.

    Args:
        func: eta_j (array) -> complex array
        order: Symbol order m
        on_gamma: Declared as the restriction to Gamma
        elliptic_const: c in |a_j| >= c <eta_j>^m, None if not declared elliptic
    """

    func: Callable[[np.ndarray], np.ndarray]
    order: float
    on_gamma: bool = True
    elliptic_const: Optional[float] = None

    def __call__(self, eta) -> np.ndarray:
        return np.asarray(self.func(np.asarray(eta, dtype=float)))

    @classmethod
    def japanese_power(cls, m: float, scale: float = 1.0) -> "SymbolFactor":
        """a(eta) = scale <eta>^m, elliptic with c = |scale|."""
        return cls(func=lambda eta: scale * japanese(eta) ** m, order=m, elliptic_const=abs(scale))

    def is_elliptic(self, eta_samples) -> bool:
        if self.elliptic_const is None:
            return False
        eta = np.asarray(eta_samples, dtype=float)
        return bool(np.all(np.abs(self(eta)) >= self.elliptic_const * japanese(eta) ** self.order * (1 - 1e-12)))


@dataclass(frozen=True)
class ProductSymbolV:
    """Product-type symbol V(eta_1, eta_2, eta_3) on Gamma."""

    factors: tuple
    order_each: float
    gamma_param: Optional[np.ndarray] = None

    def evaluate(self, eta1, eta2, eta3) -> np.ndarray:
        a1, a2, a3 = self.factors
        return a1(eta1) * a2(eta2) * a3(eta3)

    def ellipticity_scan(self, eta_samples) -> List[bool]:
        return [f.is_elliptic(eta_samples) for f in self.factors]

    def scaled(self, j: int, lam: float) -> "ProductSymbolV":
        """V with factor j multiplied by lam."""
        f = self.factors[j]
        new = replace(f, func=lambda eta, f=f: lam * f(eta))
        factors = list(self.factors)
        factors[j] = new
        return replace(self, factors=tuple(factors))

    def pullback(self, lambdas: Sequence[float]) -> "ProductSymbolV":
        """
        Symbol after the linear change y_j -> lam_j y_j, which keeps each
        surface {y_j = 0}: a_j(eta_j) becomes a_j(eta_j / lam_j) / |lam_j|.
        """
        if len(lambdas) != 3 or any(l == 0 for l in lambdas):
            raise ArgumentError("need three non-zero scale factors")
        factors = tuple(
            replace(f, func=lambda eta, f=f, lam=float(lam): f(eta / lam) / abs(lam))
            for f, lam in zip(self.factors, lambdas)
        )
        return replace(self, factors=factors)


def build_product_symbol(
    factors: Sequence[SymbolFactor],
    gamma_param: Optional[np.ndarray] = None,
) -> ProductSymbolV:
    """
    Assemble V from the three incoming symbols restricted to Gamma.

    Raises:
        ArgumentError: wrong number of factors or a factor not declared on Gamma
    """
    if len(factors) != 3:
        raise ArgumentError(f"need three factors, got {len(factors)}")
    for j, f in enumerate(factors):
        if not f.on_gamma:
            raise ArgumentError(f"factor {j + 1} is not declared as a restriction to Gamma")
    orders = {f.order for f in factors}
    if len(orders) != 1:
        logger.warning(f"build_product_symbol: factors have different orders {sorted(orders)}")
    return ProductSymbolV(factors=tuple(factors), order_each=max(orders), gamma_param=gamma_param)
