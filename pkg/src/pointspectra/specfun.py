"""Special functions and quadrature used by the principal-matrix formulas.

The standard functions (digamma, K0/K1, scaled erfc) are thin, domain-checked
wrappers over :mod:`scipy.special`.  The Legendre function of the second kind
is evaluated from its integral representation, which is the form the
hyperbolic-plane formulas are built on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

__all__ = [
    "DomainError",
    "QuadratureError",
    "QuadratureResult",
    "digamma",
    "trigamma",
    "legendre_q",
    "legendre_q_arc",
    "legendre_q_arc_dlambda",
    "bessel_k",
    "erfc_scaled_phi",
    "integrate_interval",
    "integrate_semiinfinite",
]


class DomainError(ValueError):
    """Argument outside the domain on which a function is defined here."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach its tolerance.

    The partial result is kept on the exception so callers can decide
    whether it is still usable.
    """

    def __init__(self, message: str, value: float, abs_error_estimate: float):
        super().__init__(f"{message} (value={value!r}, err={abs_error_estimate!r})")
        self.value = value
        self.abs_error_estimate = abs_error_estimate


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __post_init__(self):
        if not self.abs_error_estimate >= 0:
            raise ValueError("abs_error_estimate must be >= 0")
        if self.evaluations < 1:
            raise ValueError("evaluations must be >= 1")

    def __float__(self) -> float:
        return self.value


# ---------------------------------------------------------------------------
# quadrature


def _quad(g, a, b, rtol, atol, limit, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if points is not None and np.isfinite(b):
            val, err, info = integrate.quad(
                g, a, b, epsabs=atol, epsrel=rtol, limit=limit, points=points,
                full_output=1)[:3]
        else:
            val, err, info = integrate.quad(
                g, a, b, epsabs=atol, epsrel=rtol, limit=limit, full_output=1)[:3]
    return val, err, info["neval"]


def _check(val, err, rtol, atol, what):
    # quad's estimate is pessimistic; only a gross miss is a failure
    if not np.isfinite(val) or err > 1e3 * max(atol, rtol * abs(val)):
        raise QuadratureError(f"{what} did not converge", float(val), float(err))


def integrate_interval(f: Callable[[float], float], a: float, b: float, *,
                       rtol: float = 1e-10, atol: float = 1e-13, limit: int = 200,
                       points=None) -> QuadratureResult:
    """Adaptive Gauss-Kronrod integral of ``f`` over the finite interval [a, b]."""
    val, err, n = _quad(f, a, b, rtol, atol, limit, points)
    _check(val, err, rtol, atol, "finite-interval quadrature")
    return QuadratureResult(float(val), float(err), max(int(n), 1))


def integrate_semiinfinite(f: Callable[[float], float], lower: float = 0.0,
                           decay_rate: float | None = None,
                           singular_power: float | None = None, *,
                           rtol: float = 1e-10, atol: float = 1e-13,
                           limit: int = 200) -> QuadratureResult:
    """Integrate ``f`` over (lower, inf).

    ``decay_rate`` is the exponential rate of decay at infinity; the range is
    split at ``lower + 1/decay_rate`` so the finite and tail pieces each see a
    single scale.  ``singular_power`` p declares ``f(t) ~ (t - lower)**p`` near
    the lower endpoint (p > -1); the substitution ``t = lower + u**(1/(1+p))``
    removes the singularity before integrating.
    """
    if lower < 0:
        raise DomainError("lower limit must be >= 0")
    k = 1.0
    if singular_power is not None and singular_power < 0:
        if singular_power <= -1:
            raise DomainError("endpoint singularity is not integrable")
        k = 1.0 / (1.0 + singular_power)

    if k == 1.0:
        def g(u):
            return f(lower + u)
    else:
        def g(u):
            return f(lower + u ** k) * k * u ** (k - 1.0)

    split = 1.0 / decay_rate if decay_rate else 1.0
    split = split ** (1.0 / k)
    v1, e1, n1 = _quad(g, 0.0, split, rtol, atol, limit)
    v2, e2, n2 = _quad(g, split, np.inf, rtol, atol, limit)
    val, err = v1 + v2, e1 + e2
    _check(val, err, rtol, atol, "semi-infinite quadrature")
    return QuadratureResult(float(val), float(err), int(n1 + n2))


# ---------------------------------------------------------------------------
# standard functions


def digamma(x: float) -> float:
    """psi(x) for real x > 0."""
    if not x > 0:
        raise DomainError(f"digamma needs x > 0, got {x}")
    return float(special.psi(x))


def trigamma(x: float) -> float:
    """psi'(x) for real x > 0."""
    if not x > 0:
        raise DomainError(f"trigamma needs x > 0, got {x}")
    return float(special.polygamma(1, x))


def bessel_k(order: int, x: float) -> float:
    """Macdonald function K_0 or K_1 at x > 0."""
    if order not in (0, 1):
        raise DomainError("only orders 0 and 1 are provided")
    if not x > 0:
        raise DomainError(f"bessel_k needs x > 0, got {x}")
    return float(special.k0(x) if order == 0 else special.k1(x))


def erfc_scaled_phi(x: float, kappa: float) -> float:
    """sqrt(y) * exp(y) * erfc(sqrt(y)) with y = x**2/kappa**2 + 1/4.

    Evaluated through ``erfcx`` so large arguments do not overflow.
    """
    if not kappa > 0:
        raise DomainError("kappa must be > 0")
    r = math.sqrt((x / kappa) ** 2 + 0.25)
    return float(r * special.erfcx(r))


# ---------------------------------------------------------------------------
# Legendre function of the second kind


def _log_sinh(x: float) -> float:
    if x > 20.0:
        return x - math.log(2.0) + math.log1p(-math.exp(-2.0 * x))
    return math.log(math.sinh(x))


def _q_integrand(lam: float, a: float, weight_r: bool):
    # r = a + u^2; cosh r - cosh a = 2 sinh(a + u^2/2) sinh(u^2/2)
    c = lam + 0.5

    def g(u):
        u2 = u * u
        if u2 == 0.0:
            return 0.0
        r = a + u2
        logv = (math.log(2.0 * u) - c * r
                - 0.5 * (math.log(4.0) + _log_sinh(a + 0.5 * u2) + _log_sinh(0.5 * u2)))
        if logv < -745.0:
            return 0.0
        v = math.exp(logv)
        return r * v if weight_r else v
    return g


def _q_quad(lam: float, a: float, weight_r: bool, rtol: float) -> float:
    g = _q_integrand(lam, a, weight_r)
    c = lam + 1.0   # decay rate in u^2 at large u
    # u-scales: sqrt(a) where the singular factor turns over, 1/sqrt(c) for decay
    scales = sorted({min(math.sqrt(a), 50.0), 1.0 / math.sqrt(c)})
    edges = [0.0] + [s for s in scales if s > 0] + [6.0 / math.sqrt(c) + scales[-1]]
    edges = sorted(set(edges))
    total = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e, _ = _quad(g, lo, hi, rtol, 0.0, 200)
        total += v
        err += e
    v, e, _ = _quad(g, edges[-1], np.inf, rtol, 0.0, 200)
    total += v
    err += e
    _check(total, err, rtol, 1e-300, "Legendre-Q quadrature")
    return total


def legendre_q_arc(lam: float, a: float, rtol: float = 1e-11) -> float:
    """Q_lam(cosh a) for a > 0, lam > -1, from its integral over r in (a, inf)."""
    if not lam > -1:
        raise DomainError(f"Legendre Q needs lambda > -1, got {lam}")
    if not a > 0:
        raise DomainError(f"Legendre Q needs a = arccosh(x) > 0, got {a}")
    if (lam + 0.5) * a > 745.0 + 10.0:
        return 0.0
    return _q_quad(lam, a, False, rtol)


def legendre_q_arc_dlambda(lam: float, a: float, rtol: float = 1e-11) -> float:
    """d/dlam of Q_lam(cosh a), by differentiating under the integral sign."""
    if not lam > -1:
        raise DomainError(f"Legendre Q needs lambda > -1, got {lam}")
    if not a > 0:
        raise DomainError(f"Legendre Q needs a > 0, got {a}")
    return -_q_quad(lam, a, True, rtol)


def legendre_q(lam: float, x: float) -> float:
    """Legendre function of the second kind Q_lam(x) for real x > 1, lam > -1."""
    if not x > 1:
        raise DomainError(f"Legendre Q needs x > 1, got {x}")
    return legendre_q_arc(lam, math.acosh(x))
