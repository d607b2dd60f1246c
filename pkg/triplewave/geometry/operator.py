"""
Second-order strictly hyperbolic operators and their symbols.

The operator is P = alpha^2 d_t^2 - sum h_jk d_j d_k + b.grad with
principal symbol p(y, eta) = alpha^2 tau^2 - sum h_jk xi_j xi_k.
Coefficient callables are batched: they take arrays whose last axis has
length n (spacetime points y = (t, x_1, ..., x_{n-1})).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from triplewave.errors import DomainError, NumericError

logger = logging.getLogger(__name__)

ScalarCoeff = Callable[[np.ndarray], np.ndarray]
MatrixCoeff = Callable[[np.ndarray], np.ndarray]

# cube root of machine epsilon, scaled by the local coordinate size
_FD_BASE = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True)
class CovectorPoint:
    """A spacetime point y with a covector eta = (tau, xi)."""

    y: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))
        if self.y.shape != self.eta.shape:
            raise ValueError("y and eta must have the same length")

    @property
    def dim(self) -> int:
        return self.y.shape[-1]


@dataclass
class HyperbolicOperator:
    """
    Coefficients of alpha^2 d_t^2 - h^{jk} d_j d_k + b.grad.

    Args:
        dim: Spacetime dimension n
        alpha: alpha(y) > 0, batched scalar
        metric: h(y), batched (..., n-1, n-1) positive definite
        first_order: b(y), batched (..., n); None for no first-order part
        alpha_grad: optional analytic gradient of alpha, (..., n)
        metric_grad: optional analytic gradient of h, (..., n, n-1, n-1)
        first_order_grad: optional analytic Jacobian of b, (..., n, n) as d b_i / d y_j
        domain: optional predicate y -> bool array for the coefficient domain
        constant: coefficients are constant (derivatives vanish)
        label: short name used in reports
    """

    dim: int
    alpha: ScalarCoeff
    metric: MatrixCoeff
    first_order: Optional[Callable[[np.ndarray], np.ndarray]] = None
    alpha_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    metric_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    first_order_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constant: bool = False
    label: str = "operator"
    params: dict = field(default_factory=dict)

    @classmethod
    def constant_coefficients(
        cls,
        dim: int,
        alpha: float = 1.0,
        metric: Optional[np.ndarray] = None,
        first_order: Optional[np.ndarray] = None,
        label: str = "constant",
    ) -> "HyperbolicOperator":
        """Operator with constant alpha, h and b."""
        h = np.eye(dim - 1) if metric is None else np.asarray(metric, dtype=float)
        b = None if first_order is None else np.asarray(first_order, dtype=float)

        def alpha_fn(y):
            return np.full(np.shape(y)[:-1], float(alpha))

        def metric_fn(y):
            return np.broadcast_to(h, np.shape(y)[:-1] + h.shape).copy()

        def b_fn(y):
            return np.broadcast_to(b, np.shape(y)[:-1] + b.shape).copy()

        return cls(
            dim=dim,
            alpha=alpha_fn,
            metric=metric_fn,
            first_order=None if b is None else b_fn,
            constant=True,
            label=label,
            params={"alpha": float(alpha), "metric": h.tolist(),
                    "first_order": None if b is None else b.tolist()},
        )

    @classmethod
    def minkowski(cls, dim: int) -> "HyperbolicOperator":
        """The wave operator d_t^2 - Laplacian."""
        return cls.constant_coefficients(dim, label="minkowski")

    @classmethod
    def isotropic(
        cls,
        dim: int,
        speed: ScalarCoeff,
        speed_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        label: str = "isotropic",
    ) -> "HyperbolicOperator":
        """alpha = 1 and h = c(y)^2 I for a wave speed c."""
        eye = np.eye(dim - 1)

        def metric_fn(y):
            c = np.asarray(speed(y), dtype=float)
            return (c ** 2)[..., None, None] * eye

        metric_grad = None
        if speed_grad is not None:
            def metric_grad(y):
                c = np.asarray(speed(y), dtype=float)
                dc = np.asarray(speed_grad(y), dtype=float)
                return (2.0 * c[..., None] * dc)[..., None, None] * eye

        def alpha_fn(y):
            return np.ones(np.shape(y)[:-1])

        def alpha_grad(y):
            return np.zeros(np.shape(y))

        return cls(dim=dim, alpha=alpha_fn, metric=metric_fn, alpha_grad=alpha_grad,
                   metric_grad=metric_grad, label=label)

    def max_speed(self, y: np.ndarray) -> float:
        """Largest characteristic speed sqrt(lambda_max(h))/alpha over the points y."""
        y = np.asarray(y, dtype=float)
        lam = np.linalg.eigvalsh(self.metric(y))[..., -1]
        return float(np.max(np.sqrt(lam) / self.alpha(y)))


def check_coefficients(op: HyperbolicOperator, y: np.ndarray) -> None:
    """
    Raise DomainError unless y is in the coefficient domain with alpha > 0
    and h positive definite.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != op.dim:
        raise DomainError(f"point has dimension {y.shape[-1]}, operator has {op.dim}")
    if op.domain is not None and not np.all(op.domain(y)):
        raise DomainError(f"point outside coefficient domain of {op.label}")
    if not np.all(op.alpha(y) > 0):
        raise DomainError(f"alpha is not positive at queried point(s) of {op.label}")
    if not np.all(np.linalg.eigvalsh(op.metric(y))[..., 0] > 0):
        raise DomainError(f"metric is not positive definite at queried point(s) of {op.label}")


def symbol_arrays(op: HyperbolicOperator, y: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Batched principal symbol over arrays of points and covectors."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    tau = eta[..., 0]
    xi = eta[..., 1:]
    h = op.metric(y)
    return op.alpha(y) ** 2 * tau ** 2 - np.einsum("...j,...jk,...k->...", xi, h, xi)


def principal_symbol(op: HyperbolicOperator, pt: CovectorPoint) -> float:
    """p(y, eta) = alpha(y)^2 tau^2 - sum h_jk(y) xi_j xi_k."""
    check_coefficients(op, pt.y)
    return float(symbol_arrays(op, pt.y, pt.eta))


def _fd_gradient(fn: Callable[[np.ndarray], np.ndarray], y: np.ndarray) -> np.ndarray:
    """Centered-difference gradient of a (possibly matrix valued) function at one point."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    steps = _FD_BASE * np.maximum(1.0, np.abs(y))
    shifts = np.eye(n) * steps
    plus = np.asarray(fn(y + shifts), dtype=float)
    minus = np.asarray(fn(y - shifts), dtype=float)
    grad = (plus - minus) / steps.reshape((n,) + (1,) * (plus.ndim - 1))
    return 0.5 * grad


def coefficient_gradients(op: HyperbolicOperator, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradients of alpha and h at a single point.

    Returns:
        (d alpha / d y of shape (n,), d h / d y of shape (n, n-1, n-1))
    """
    n = op.dim
    if op.constant:
        return np.zeros(n), np.zeros((n, n - 1, n - 1))
    da = op.alpha_grad(y) if op.alpha_grad is not None else _fd_gradient(op.alpha, y)
    dh = op.metric_grad(y) if op.metric_grad is not None else _fd_gradient(op.metric, y)
    da = np.asarray(da, dtype=float).reshape(n)
    dh = np.asarray(dh, dtype=float).reshape(n, n - 1, n - 1)
    if not (np.all(np.isfinite(da)) and np.all(np.isfinite(dh))):
        raise NumericError("coefficient derivative is not finite", location=np.asarray(y).tolist())
    return da, dh


def symbol_derivatives(op: HyperbolicOperator, y: np.ndarray, eta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(d_eta p, d_y p) at a single point."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    tau, xi = eta[0], eta[1:]
    a = float(op.alpha(y))
    h = np.asarray(op.metric(y), dtype=float)
    d_eta = np.empty_like(eta)
    d_eta[0] = 2.0 * a * a * tau
    d_eta[1:] = -2.0 * h @ xi
    da, dh = coefficient_gradients(op, y)
    d_y = 2.0 * a * da * tau * tau - np.einsum("j,ijk,k->i", xi, dh, xi)
    return d_eta, d_y


def hamilton_field(op: HyperbolicOperator, pt: CovectorPoint) -> Tuple[np.ndarray, np.ndarray]:
    """
    Hamilton vector field of p.

    Returns:
        (y_dot, eta_dot) = (d_eta p, -d_y p)
    """
    d_eta, d_y = symbol_derivatives(op, pt.y, pt.eta)
    y_dot, eta_dot = d_eta, -d_y
    if not (np.all(np.isfinite(y_dot)) and np.all(np.isfinite(eta_dot))):
        raise NumericError("Hamilton field is not finite", location=pt.y.tolist())
    return y_dot, eta_dot


def subprincipal_symbol(op: HyperbolicOperator, pt: CovectorPoint) -> complex:
    """
    Subprincipal symbol c = p_1 + (i/2) sum_j d^2 p / dy_j d eta_j.

    The operator is taken with the overall sign that makes its principal
    symbol p in the variable D = -i d, so the first-order part b.grad
    contributes p_1 = -i b.eta. With this convention c vanishes for
    constant coefficients without first-order part, and d_t^2 - Laplacian
    + beta d_t gives c = -i beta tau.
    """
    check_coefficients(op, pt.y)
    y, eta = pt.y, pt.eta
    p1 = 0.0j
    if op.first_order is not None:
        b = np.asarray(op.first_order(y), dtype=float)
        p1 = -1j * float(b @ eta)
    if op.constant:
        return complex(p1)
    # sum_j d/dy_j (d_eta_j p): only tau and xi enter linearly in d_eta p
    tau, xi = eta[0], eta[1:]
    da, dh = coefficient_gradients(op, y)
    a = float(op.alpha(y))
    mixed = 4.0 * a * da[0] * tau - 2.0 * np.einsum("jjk,k->", dh[1:], xi)
    if not np.isfinite(mixed):
        raise NumericError("mixed symbol derivative is not finite", location=y.tolist())
    return complex(p1 + 0.5j * mixed)
