"""The principal matrix Phi and the quantities built from it.

Non-relativistic entries are evaluated on the negative real axis z = -nu**2
and relativistic ones at real energy E in (-m, m).  Every geometry has two
independent evaluation paths:

* :func:`principal_matrix` -- closed forms (flat, H3, H2), a single quadrature
  of the flat relativistic integral, and for the relativistic hyperbolic plane
  a reduction to resolvents of the Laplacian (one quadrature over Legendre-Q);
* :func:`principal_matrix_oracle` -- direct quadrature over the heat kernel of
  the defining Laplace-type integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erfc

from .geometry import (
    FOUR_PI,
    Configuration,
    Geometry,
    Kind,
    _h2_reduced,
    heat_kernel,
    require_valid,
)
from .specfun import (
    DomainError,
    bessel_k,
    digamma,
    integrate_interval,
    integrate_semiinfinite,
    legendre_q_arc,
    legendre_q_arc_dlambda,
    trigamma,
)

__all__ = [
    "PrincipalMatrix",
    "ResolventCorrection",
    "H2_INDEX_VARIANTS",
    "principal_matrix",
    "principal_matrix_oracle",
    "principal_matrix_derivative",
    "principal_matrix_derivative_oracle",
    "bare_coupling",
    "resolvent_kernel",
    "krein_correction",
]

TWO_PI = 2.0 * math.pi

# Legendre index offset in the H2 off-diagonal: Q_{sigma(nu) + offset}
H2_INDEX_VARIANTS = {"standard": -1.0, "printed": 0.0}
DEFAULT_H2_INDEX = "standard"


@dataclass(frozen=True)
class PrincipalMatrix:
    entries: np.ndarray
    spectral_param: float
    geometry: Geometry
    method: str  # "closed_form" | "quadrature"

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True)
class ResolventCorrection:
    value: float
    pole_proximity: float
    near_pole: bool


def _check_param(geom: Geometry, p: float) -> None:
    if geom.relativistic:
        if not -geom.m < p < geom.m:
            raise DomainError(f"E = {p} outside (-m, m) with m = {geom.m}")
    elif not p > 0:
        raise DomainError(f"nu must be > 0, got {p}")


# ---------------------------------------------------------------------------
# closed-form building blocks


def _h2_sigma(nu: float, kappa: float) -> float:
    return 0.5 + math.sqrt((nu / kappa) ** 2 + 0.25)


def _h2_green(d: float, nu: float, kappa: float, offset: float = -1.0) -> float:
    """Resolvent kernel of the H2 Laplacian at z = -nu**2, distance d > 0."""
    return legendre_q_arc(_h2_sigma(nu, kappa) + offset, kappa * d) / TWO_PI


def _h2_psi(nu: float, kappa: float) -> float:
    """Finite part of the coincident H2 resolvent, up to sign and a constant."""
    return digamma(_h2_sigma(nu, kappa)) / TWO_PI


def _nonrel_diag(kind: Kind, kappa, mu: float, nu: float) -> float:
    if kind is Kind.FLAT2:
        return math.log(nu / mu) / TWO_PI
    if kind is Kind.FLAT3:
        return (nu - mu) / FOUR_PI
    if kind is Kind.H3:
        return (math.sqrt(kappa * kappa + nu * nu) - math.sqrt(kappa * kappa + mu * mu)) / FOUR_PI
    if kind is Kind.H2:
        return _h2_psi(nu, kappa) - _h2_psi(mu, kappa)
    raise AssertionError(kind)


def _nonrel_green(kind: Kind, kappa, d: float, nu: float, h2_offset: float = -1.0) -> float:
    # free resolvent kernel R_0(d | -nu^2), d > 0
    if kind is Kind.FLAT2:
        return bessel_k(0, nu * d) / TWO_PI
    if kind is Kind.FLAT3:
        return math.exp(-nu * d) / (FOUR_PI * d)
    if kind is Kind.H3:
        return (kappa * math.exp(-d * math.sqrt(kappa * kappa + nu * nu))
                / (FOUR_PI * math.sinh(kappa * d)))
    if kind is Kind.H2:
        return _h2_green(d, nu, kappa, h2_offset)
    raise AssertionError(kind)


# relativistic, flat plane


def _relflat_offdiag(d: float, E: float, m: float) -> float:
    # w = asinh(s) turns the integrand into exp(-d (m cosh w - E sinh w)); that
    # exponent equals d*nu*cosh(w - w0), so the peak sits at w0 and the tail is
    # cut where the exponent passes 745.
    nu = math.sqrt(m * m - E * E)
    w0 = 0.5 * math.log((m + E) / (m - E))
    dn = d * nu
    vmax = math.acosh(max(745.0 / dn, 1.0)) + 1.0

    def f(w):
        return math.exp(-dn * math.cosh(w - w0))

    total = 0.0
    lo = 0.0
    if w0 > 0:
        total += integrate_interval(f, 0.0, w0, rtol=1e-12, atol=0.0).value
        lo = w0
    hi = max(w0, 0.0) + vmax
    total += integrate_interval(f, lo, hi, rtol=1e-12, atol=0.0).value
    return -total / TWO_PI


def _relflat_diag(mu: float, E: float, m: float) -> float:
    return math.log((m - E) / (m - mu)) / TWO_PI


# relativistic, hyperbolic plane
#
# With w = sqrt(-Laplacian + m^2), the off-diagonal is -[1/(w (w - E))](a_i, a_j).
# Writing 1/w = (2/pi) int_0^inf dk / (w^2 + k^2) and k = |E| tan(theta) gives
#   1/(w (w-E)) = G(nu_E) + (2 sgn E / pi) int_0^{pi/2} [G(nu_E) - G(sqrt(m^2 + E^2 tan^2))] dtheta
# with G(nu) = (-Laplacian + nu^2)^{-1} and nu_E = sqrt(m^2 - E^2).


def _theta_average(fn, e: float, m: float, base: float, rtol: float) -> float:
    if e == 0.0:
        return 0.0

    def g(th):
        if th >= 0.5 * math.pi:
            return -base
        k = abs(e) * math.tan(th)
        return fn(math.sqrt(m * m + k * k)) - base

    val = integrate_interval(g, 0.0, 0.5 * math.pi, rtol=rtol, atol=1e-15).value
    return math.copysign(2.0 / math.pi, e) * val


def _relh2_offdiag(d: float, E: float, m: float, kappa: float, rtol: float = 1e-9) -> float:
    nu_e = math.sqrt(m * m - E * E)
    green = lambda nu: _h2_green(d, nu, kappa)
    g_e = green(nu_e)
    corr = _theta_average(lambda nu: -green(nu), E, m, -g_e, rtol)
    return -(g_e + corr)


@lru_cache(maxsize=4096)
def _relh2_j(e: float, m: float, kappa: float, rtol: float) -> float:
    nu_e = math.sqrt(m * m - e * e)
    psi = lambda nu: _h2_psi(nu, kappa)
    return _theta_average(psi, e, m, psi(nu_e), rtol)


def _relh2_diag(mu: float, E: float, m: float, kappa: float, rtol: float = 1e-9) -> float:
    nu_e = math.sqrt(m * m - E * E)
    nu_mu = math.sqrt(m * m - mu * mu)
    return (_h2_psi(nu_e, kappa) - _h2_psi(nu_mu, kappa)
            + _relh2_j(mu, m, kappa, rtol) - _relh2_j(E, m, kappa, rtol))


# ---------------------------------------------------------------------------


def _assemble(cfg: Configuration, diag_fn, off_fn) -> np.ndarray:
    n = cfg.n
    out = np.empty((n, n))
    cache = {}
    for i in range(n):
        out[i, i] = diag_fn(cfg.mu[i])
        for j in range(i + 1, n):
            d = float(cfg.dist[i, j])
            if d not in cache:
                cache[d] = off_fn(d)
            out[i, j] = out[j, i] = cache[d]
    return out


def principal_matrix(geom: Geometry, cfg: Configuration, p: float, *,
                     h2_index: str = DEFAULT_H2_INDEX) -> PrincipalMatrix:
    """Phi(-nu**2) (non-relativistic, p = nu) or Phi(E) (relativistic, p = E).

    ``h2_index`` selects the Legendre index of the H2 off-diagonal: "standard"
    is Q_{-1/2 + sqrt(nu^2/kappa^2 + 1/4)}, "printed" shifts it up by one.
    """
    require_valid(cfg, geom)
    _check_param(geom, p)
    kind, kappa = geom.kind, geom.kappa
    method = "closed_form"
    if kind is Kind.REL_FLAT2:
        m = geom.m
        ent = _assemble(cfg, lambda mu: _relflat_diag(mu, p, m),
                        lambda d: _relflat_offdiag(d, p, m))
        method = "quadrature"
    elif kind is Kind.REL_H2:
        m = geom.m
        ent = _assemble(cfg, lambda mu: _relh2_diag(mu, p, m, kappa),
                        lambda d: _relh2_offdiag(d, p, m, kappa))
        method = "quadrature"
    else:
        offset = H2_INDEX_VARIANTS[h2_index]
        ent = _assemble(cfg, lambda mu: _nonrel_diag(kind, kappa, mu, p),
                        lambda d: -_nonrel_green(kind, kappa, d, p, offset))
    return PrincipalMatrix(ent, p, geom, method)


# ---------------------------------------------------------------------------
# heat-kernel quadrature oracle


def _kernel_fn(geom: Geometry, d: float):
    if geom.kind is Kind.H2:
        k = geom.kappa
        return lambda t: k * k * _h2_reduced(k * d, k * k * t, rtol=1e-11)
    return lambda t: heat_kernel(geom, d, t).value


def _bottom(geom: Geometry) -> float:
    """Bottom of the spectrum of the free Laplacian."""
    if geom.kind is Kind.H3:
        return geom.kappa ** 2
    if geom.kind in (Kind.H2, Kind.REL_H2):
        return geom.kappa ** 2 / 4.0
    return 0.0


def _oracle_diag(geom, mu, nu):
    K = _kernel_fn(geom, 0.0)
    a, b = mu * mu, nu * nu

    def f(t):
        # e^{-a t} - e^{-b t}, without cancellation
        if b >= a:
            return -K(t) * math.exp(-a * t) * math.expm1(-(b - a) * t)
        return K(t) * math.exp(-b * t) * math.expm1(-(a - b) * t)

    rate = min(a, b) + _bottom(geom)
    sing = -0.5 if geom.dimension == 3 else None
    return integrate_semiinfinite(f, 0.0, decay_rate=rate, singular_power=sing,
                                  rtol=1e-10, atol=0.0).value


def _oracle_offdiag(geom, d, nu):
    K = _kernel_fn(geom, d)
    b = nu * nu
    rate = b + _bottom(geom)
    return -integrate_semiinfinite(lambda t: K(t) * math.exp(-b * t), 0.0,
                                   decay_rate=max(rate, 2.0 / d), rtol=1e-10, atol=0.0).value


def _rel_tform(geom: Geometry, cfg: Configuration, E: float, h: float = 0.1) -> np.ndarray:
    """Relativistic Phi(E) from the t-form double integral over the heat kernel.

    Both the inner heat-time integral and the outer t integral are done with
    the trapezoidal rule in logarithmic variables.
    """
    m = geom.m
    space = geom.spatial()
    big_m = math.sqrt(m * m + _bottom(space))
    top = max(E, max(cfg.mu), 0.0)
    t_min = 1e-13 / big_m
    t_max = 90.0 / (big_m - top)
    yt = np.arange(math.log(t_min), math.log(t_max) + h, h)
    t = np.exp(yt)
    u_min = t_min * t_min / 800.0
    u_max = 90.0 / (big_m * big_m)
    yu = np.arange(math.log(u_min), math.log(u_max) + h, h)
    u = np.exp(yu)
    # G(t) = pi^{-1/2} int du e^{-t^2/4u - u m^2} K_u / sqrt(u), trapezoid in log u
    expo = -(t[:, None] ** 2) / (4.0 * u[None, :]) - u[None, :] * m * m
    weights = np.exp(expo) * np.sqrt(u)[None, :] * h / math.sqrt(math.pi)

    def G(d):
        if space.kind is Kind.FLAT2:
            Ku = np.exp(-d * d / (4.0 * u)) / (FOUR_PI * u)
        else:
            k = space.kappa
            Ku = np.array([k * k * _h2_reduced(k * d, k * k * x, rtol=1e-11) for x in u])
        return weights @ Ku

    n = cfg.n
    out = np.empty((n, n))
    g0 = G(0.0)
    for i in range(n):
        integrand = np.exp(E * t) * np.expm1((cfg.mu[i] - E) * t) * g0
        out[i, i] = h * np.sum(integrand * t)
    cache = {}
    for i in range(n):
        for j in range(i + 1, n):
            d = float(cfg.dist[i, j])
            if d not in cache:
                cache[d] = -h * np.sum(np.exp(E * t) * G(d) * t)
            out[i, j] = out[j, i] = cache[d]
    return out


def principal_matrix_oracle(geom: Geometry, cfg: Configuration, p: float) -> PrincipalMatrix:
    """Phi by quadrature of its heat-kernel integral representation."""
    require_valid(cfg, geom)
    _check_param(geom, p)
    if geom.relativistic:
        ent = _rel_tform(geom, cfg, p)
    else:
        ent = _assemble(cfg, lambda mu: _oracle_diag(geom, mu, p),
                        lambda d: _oracle_offdiag(geom, d, p))
    return PrincipalMatrix(ent, p, geom, "quadrature")


# ---------------------------------------------------------------------------
# derivative


def _analytic_derivative(geom: Geometry, cfg: Configuration, nu: float) -> np.ndarray:
    kind, k = geom.kind, geom.kappa

    def diag(mu):
        if kind is Kind.FLAT2:
            return 1.0 / (FOUR_PI * nu * nu)
        if kind is Kind.FLAT3:
            return 1.0 / (2.0 * FOUR_PI * nu)
        if kind is Kind.H3:
            return 1.0 / (2.0 * FOUR_PI * math.sqrt(k * k + nu * nu))
        r = math.sqrt((nu / k) ** 2 + 0.25)
        return trigamma(0.5 + r) / TWO_PI / (2.0 * k * k * r)

    def off(d):
        if kind is Kind.FLAT2:
            return d * bessel_k(1, nu * d) / (FOUR_PI * nu)
        if kind is Kind.FLAT3:
            return math.exp(-nu * d) / (2.0 * FOUR_PI * nu)
        if kind is Kind.H3:
            s = math.sqrt(k * k + nu * nu)
            return d / (2.0 * s) * k * math.exp(-d * s) / (FOUR_PI * math.sinh(k * d))
        r = math.sqrt((nu / k) ** 2 + 0.25)
        return -legendre_q_arc_dlambda(r - 0.5, k * d) / TWO_PI / (2.0 * k * k * r)

    return _assemble(cfg, diag, off)


def principal_matrix_derivative(geom: Geometry, cfg: Configuration, p: float,
                                method: str = "auto") -> np.ndarray:
    """M = -dPhi/dz at z = -nu**2, i.e. M_ij = int_0^inf t K_t(a_i, a_j) e^{-t nu^2} dt.

    For relativistic geometries the result is -dPhi/dE.  ``method`` is "auto"
    (analytic where available), "analytic" or "fd" (central differences).
    """
    require_valid(cfg, geom)
    _check_param(geom, p)
    if method not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown method {method!r}")
    if geom.relativistic:
        if method == "analytic":
            raise ValueError("no analytic derivative for relativistic geometries")
        h = 1e-5 * geom.m
        h = min(h, 0.5 * (geom.m - abs(p)))
        plus = principal_matrix(geom, cfg, p + h).entries
        minus = principal_matrix(geom, cfg, p - h).entries
        return -(plus - minus) / (2.0 * h)
    if method in ("auto", "analytic"):
        return _analytic_derivative(geom, cfg, p)
    z = -p * p
    h = 1e-5 * max(1.0, p * p)
    h = min(h, 0.5 * p * p)
    up = principal_matrix(geom, cfg, math.sqrt(-(z + h))).entries
    down = principal_matrix(geom, cfg, math.sqrt(-(z - h))).entries
    return -(up - down) / (2.0 * h)


def principal_matrix_derivative_oracle(geom: Geometry, cfg: Configuration,
                                       nu: float) -> np.ndarray:
    """int_0^inf t K_t(a_i, a_j) e^{-t nu^2} dt by quadrature over the heat kernel."""
    require_valid(cfg, geom)
    if geom.relativistic:
        raise ValueError("oracle derivative is defined for non-relativistic geometries")
    _check_param(geom, nu)
    b = nu * nu
    rate = b + _bottom(geom)

    def entry(d):
        K = _kernel_fn(geom, d)
        sing = -0.5 if (d == 0.0 and geom.dimension == 3) else None
        return integrate_semiinfinite(lambda t: t * K(t) * math.exp(-b * t), 0.0,
                                      decay_rate=rate, singular_power=sing,
                                      rtol=1e-10, atol=0.0).value

    diag = entry(0.0)
    return _assemble(cfg, lambda mu: diag, entry)


# ---------------------------------------------------------------------------


def bare_coupling(geom: Geometry, mu: float, epsilon: float) -> float:
    """Regularized coupling lambda(epsilon) that renormalizes to binding parameter mu.

    Non-relativistic: 1/lambda = int_eps^inf K_t(a, a) e^{-t mu^2} dt.
    Relativistic: the s-integral of the coupling is done in closed form,
    1/g = int_eps^inf e^{-u (m^2 - mu^2)} erfc(-mu sqrt(u)) K_u(a, a) du.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be > 0")
    space = geom.spatial()
    K = _kernel_fn(space, 0.0)
    if geom.relativistic:
        if not -geom.m < mu < geom.m:
            raise DomainError("mu must lie in (-m, m)")
        m = geom.m

        def f(t):
            u = epsilon + t
            return math.exp(-u * (m * m - mu * mu)) * erfc(-mu * math.sqrt(u)) * K(u)
        rate = m * m - mu * mu + _bottom(space)
    else:
        if not mu > 0:
            raise DomainError("mu must be > 0")

        def f(t):
            u = epsilon + t
            return K(u) * math.exp(-mu * mu * u)
        rate = mu * mu + _bottom(space)
    # the integrand falls off on the scale epsilon near the cutoff and 1/rate
    # far from it: decade pieces in between, then the exponential tail
    end = max(1.0 / rate, epsilon)
    edges = [0.0]
    while edges[-1] < end:
        edges.append(epsilon * 10.0 ** (len(edges) - 1))
    inv = sum(integrate_interval(f, lo, hi, rtol=1e-11, atol=0.0).value
              for lo, hi in zip(edges[:-1], edges[1:]))
    inv += integrate_semiinfinite(f, edges[-1], decay_rate=rate, rtol=1e-10, atol=0.0).value
    return 1.0 / inv


def resolvent_kernel(geom: Geometry, d: float, nu: float, *,
                     h2_index: str = DEFAULT_H2_INDEX) -> float:
    """Free resolvent kernel R_0(x, y | -nu**2) = int_0^inf e^{-nu^2 t} K_t(x, y) dt."""
    if geom.relativistic:
        raise DomainError("resolvent_kernel is defined for non-relativistic geometries")
    if not d > 0:
        raise DomainError("resolvent kernel diverges on the diagonal; need d > 0")
    if geom.kind is Kind.FLAT2 and not nu > 0:
        raise DomainError("flat-plane resolvent needs nu > 0")
    if not nu >= 0:
        raise DomainError("nu must be >= 0")
    return _nonrel_green(geom.kind, geom.kappa, d, nu, H2_INDEX_VARIANTS[h2_index])


def krein_correction(geom: Geometry, cfg: Configuration, nu: float,
                     dists_x, dists_y, pole_threshold: float = 1e-12) -> ResolventCorrection:
    """Finite-rank part sum_ij R_0(x, a_i) [Phi^{-1}]_ij R_0(a_j, y) of the resolvent kernel."""
    dx = np.asarray(dists_x, dtype=float)
    dy = np.asarray(dists_y, dtype=float)
    if dx.shape != (cfg.n,) or dy.shape != (cfg.n,):
        raise ValueError("need one distance per center")
    if np.any(dx <= 0) or np.any(dy <= 0):
        raise DomainError("distances to the centers must be > 0")
    phi = principal_matrix(geom, cfg, nu).entries
    rx = np.array([resolvent_kernel(geom, d, nu) for d in dx])
    ry = np.array([resolvent_kernel(geom, d, nu) for d in dy])
    w = np.linalg.eigvalsh(phi)
    prox = float(np.min(np.abs(w)))
    near = prox < pole_threshold
    if prox == 0.0:
        value = math.inf
    else:
        value = float(rx @ np.linalg.solve(phi, ry))
    return ResolventCorrection(value, prox, near)
