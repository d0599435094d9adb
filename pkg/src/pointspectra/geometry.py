"""Ambient geometries, center configurations and heat kernels."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .specfun import DomainError, _quad, _check, _log_sinh

__all__ = [
    "Kind",
    "Geometry",
    "Configuration",
    "ConfigurationError",
    "HeatKernelValue",
    "heat_kernel",
    "heat_kernel_diag_lower_h2",
    "heat_kernel_upper_h2",
    "cheeger_yau_check",
    "validate_configuration",
    "load_config",
    "config_to_dict",
]

FOUR_PI = 4.0 * math.pi


class Kind(str, Enum):
    FLAT2 = "flat2"
    FLAT3 = "flat3"
    H2 = "h2"
    H3 = "h3"
    REL_FLAT2 = "relflat2"
    REL_H2 = "relh2"


_HYPERBOLIC = {Kind.H2, Kind.H3, Kind.REL_H2}
_RELATIVISTIC = {Kind.REL_FLAT2, Kind.REL_H2}


@dataclass(frozen=True)
class Geometry:
    """Ambient space: flat or hyperbolic (curvature -kappa**2), optionally relativistic."""

    kind: Kind
    kappa: float | None = None
    m: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in _HYPERBOLIC:
            if self.kappa is None or not self.kappa > 0:
                raise DomainError(f"{self.kind.value} needs kappa > 0")
        else:
            object.__setattr__(self, "kappa", None)
        if self.kind in _RELATIVISTIC:
            if self.m is None or not self.m > 0:
                raise DomainError(f"{self.kind.value} needs mass m > 0")
        else:
            object.__setattr__(self, "m", None)

    @classmethod
    def flat2(cls):
        return cls(Kind.FLAT2)

    @classmethod
    def flat3(cls):
        return cls(Kind.FLAT3)

    @classmethod
    def h2(cls, kappa: float):
        return cls(Kind.H2, kappa=kappa)

    @classmethod
    def h3(cls, kappa: float):
        return cls(Kind.H3, kappa=kappa)

    @classmethod
    def rel_flat2(cls, m: float):
        return cls(Kind.REL_FLAT2, m=m)

    @classmethod
    def rel_h2(cls, kappa: float, m: float):
        return cls(Kind.REL_H2, kappa=kappa, m=m)

    @property
    def relativistic(self) -> bool:
        return self.kind in _RELATIVISTIC

    @property
    def hyperbolic(self) -> bool:
        return self.kind in _HYPERBOLIC

    @property
    def dimension(self) -> int:
        return 3 if self.kind in (Kind.FLAT3, Kind.H3) else 2

    def spatial(self) -> "Geometry":
        """The non-relativistic space whose heat kernel the model uses."""
        if self.kind is Kind.REL_FLAT2:
            return Geometry.flat2()
        if self.kind is Kind.REL_H2:
            return Geometry.h2(self.kappa)
        return self

    def with_params(self, kappa=None, m=None) -> "Geometry":
        return Geometry(self.kind,
                        kappa=self.kappa if kappa is None else kappa,
                        m=self.m if m is None else m)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.kappa is not None:
            out["kappa"] = self.kappa
        if self.m is not None:
            out["m"] = self.m
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        return cls(Kind(d["kind"]), kappa=d.get("kappa"), m=d.get("m"))


class ConfigurationError(ValueError):
    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class Configuration:
    """N centers given by binding parameters and pairwise geodesic distances."""

    mu: tuple
    dist: np.ndarray = field(repr=False)

    def __post_init__(self):
        mu = tuple(float(x) for x in np.atleast_1d(self.mu))
        dist = np.array(self.dist, dtype=float, copy=True)
        if dist.ndim == 0 and len(mu) == 1:
            dist = np.zeros((1, 1))
        dist.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "dist", dist)

    @property
    def n(self) -> int:
        return len(self.mu)

    @classmethod
    def collinear(cls, mu: Sequence[float], spacing: float) -> "Configuration":
        """Centers equally spaced on one geodesic: d_ij = |i - j| * spacing."""
        mu = tuple(np.atleast_1d(mu))
        idx = np.arange(len(mu))
        return cls(mu, spacing * np.abs(idx[:, None] - idx[None, :]))

    @classmethod
    def single(cls, mu: float) -> "Configuration":
        return cls((mu,), np.zeros((1, 1)))

    def mu_array(self) -> np.ndarray:
        return np.array(self.mu)

    def min_distance(self) -> float:
        if self.n < 2:
            return math.inf
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    def permuted(self, order: Sequence[int]) -> "Configuration":
        order = list(order)
        return Configuration(tuple(self.mu[i] for i in order),
                             self.dist[np.ix_(order, order)])

    def with_mu(self, mu: Sequence[float]) -> "Configuration":
        return Configuration(tuple(mu), self.dist)


def validate_configuration(cfg: Configuration, geom: Geometry) -> list[str]:
    """All violated configuration invariants, as human-readable strings."""
    out = []
    n = len(cfg.mu)
    if n < 1:
        return ["configuration needs at least one center"]
    d = cfg.dist
    if d.shape != (n, n):
        return [f"distance matrix has shape {d.shape}, expected ({n}, {n})"]
    if not np.all(np.isfinite(d)):
        out.append("distance matrix has non-finite entries")
        return out
    if not np.array_equal(d, d.T):
        out.append("distance matrix is not symmetric")
    if np.any(np.diag(d) != 0):
        out.append("distance matrix has nonzero diagonal")
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] < 0):
        out.append("negative distance")
    if np.any(d[off] == 0):
        out.append("coincident centers: d_ij = 0 for some i != j")
    for i, mu in enumerate(cfg.mu):
        if not math.isfinite(mu):
            out.append(f"mu[{i}] is not finite")
        elif geom.relativistic:
            if not -geom.m < mu < geom.m:
                out.append(f"mu[{i}] = {mu} outside (-m, m) = ({-geom.m}, {geom.m})")
        elif not mu > 0:
            out.append(f"mu[{i}] = {mu} must be > 0")
    return out


def require_valid(cfg: Configuration, geom: Geometry) -> None:
    errs = validate_configuration(cfg, geom)
    if errs:
        raise ConfigurationError(errs)


# ---------------------------------------------------------------------------
# heat kernels


@dataclass(frozen=True)
class HeatKernelValue:
    value: float
    method: str  # "closed_form" | "quadrature"

    def __float__(self):
        return self.value


def _h2_reduced(rho: float, tau: float, rtol: float = 1e-10) -> float:
    """Heat kernel of the unit-curvature hyperbolic plane at distance rho, time tau.

    Substitution s = rho + u**2 in the Mckean integral; the integrand is then
    bounded at u = 0 for every rho >= 0.
    """
    def g(u):
        u2 = u * u
        if u2 == 0.0:
            return 0.0
        s = rho + u2
        den = 0.5 * (math.log(2.0) + _log_sinh(rho + 0.5 * u2) + _log_sinh(0.5 * u2))
        logv = math.log(2.0 * u * s) - s * s / (4.0 * tau) - den
        return math.exp(logv) if logv > -745.0 else 0.0

    # integrand ~ exp(-u^4/4tau - u^2/2): pick the u where that reaches e^-60
    big = tau * (-0.5 + math.sqrt(0.25 + 60.0 / tau))
    umax = math.sqrt(big) + 1.0
    # u-scales of the peak: sqrt(rho), the quartic width and the width about rho
    w = [math.sqrt(rho), (4.0 * tau) ** 0.25]
    if rho > 0:
        w.append(math.sqrt(2.0 * tau / rho))
    edges = sorted({0.0, umax} | {c * x for x in w for c in (1.0, 4.0) if 0 < c * x < umax})
    total = err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            v, e, _ = _quad(g, lo, hi, rtol, 0.0, 200)
            total += v
            err += e
    v, e, _ = _quad(g, umax, np.inf, rtol, 0.0, 100)
    total += v
    err += e
    _check(total, err, rtol, 1e-300, "H2 heat kernel")
    return math.sqrt(2.0) * (FOUR_PI * tau) ** -1.5 * math.exp(-tau / 4.0) * total


def _h3_kernel(d, t, kappa):
    a = kappa * d
    ratio = 1.0 - a * a / 6.0 if a < 1e-6 else a / math.sinh(a)
    return ratio * (FOUR_PI * t) ** -1.5 * math.exp(-kappa * kappa * t - d * d / (4.0 * t))


def heat_kernel(geom: Geometry, d: float, t: float) -> HeatKernelValue:
    """K_t(x, y) at geodesic distance d(x, y) = d."""
    if not t > 0:
        raise DomainError(f"heat kernel needs t > 0, got {t}")
    if not d >= 0:
        raise DomainError(f"heat kernel needs d >= 0, got {d}")
    kind = geom.kind
    if kind is Kind.FLAT2:
        return HeatKernelValue(math.exp(-d * d / (4 * t)) / (FOUR_PI * t), "closed_form")
    if kind is Kind.FLAT3:
        return HeatKernelValue((FOUR_PI * t) ** -1.5 * math.exp(-d * d / (4 * t)), "closed_form")
    if kind is Kind.H3:
        return HeatKernelValue(_h3_kernel(d, t, geom.kappa), "closed_form")
    if kind is Kind.H2:
        k = geom.kappa
        return HeatKernelValue(k * k * _h2_reduced(k * d, k * k * t), "quadrature")
    raise DomainError("relativistic geometries have no heat kernel of their own; "
                      "use geom.spatial()")


def heat_kernel_diag_lower_h2(t: float, kappa: float) -> float:
    """Davies-Mandouvalos type lower bound on the diagonal H2 heat kernel."""
    if not t > 0:
        raise DomainError("t must be > 0")
    return (math.exp(-kappa * kappa * t / 4.0)
            / (8.0 * FOUR_PI ** 1.5 * t * math.sqrt(1.0 + kappa * kappa * t)))


def heat_kernel_upper_h2(d: float, t: float, kappa: float) -> float:
    """Gaussian upper bound (3/t) exp(-d^2/4t - kappa^2 t/4) on the H2 heat kernel."""
    if not t > 0:
        raise DomainError("t must be > 0")
    return 3.0 / t * math.exp(-d * d / (4.0 * t) - kappa * kappa * t / 4.0)


def _h2_reduced_alt(rho: float, tau: float) -> float:
    # independent route: cosh s = cosh rho + v^2, so the square root becomes v
    # half-angle form of that relation keeps s accurate for tiny v
    sh2 = math.sinh(0.5 * rho) ** 2

    def g(v):
        s = 2.0 * math.asinh(math.sqrt(sh2 + 0.5 * v * v))
        if s < 1e-8:
            return 2.0 * math.exp(-s * s / (4.0 * tau))
        logv = math.log(2.0 * s) - _log_sinh(s) - s * s / (4.0 * tau)
        return math.exp(logv) if logv > -745.0 else 0.0

    # v^2 ~ sinh(rho) (s - rho) + (s - rho)^2 / 2 with s - rho ~ sqrt(tau)
    w = math.sqrt(math.sinh(rho) * math.sqrt(tau) + tau)
    # the Gaussian in s drifts out to s ~ rho + tau for large tau
    s_end = min(rho + tau + 40.0 * math.sqrt(tau) + 10.0, 1200.0)
    v_end = math.exp(0.5 * s_end)
    edges = [0.0]
    while w < v_end:
        edges.append(w)
        w *= 4.0
    v = sum(_quad(g, lo, hi, 1e-11, 0.0, 200)[0] for lo, hi in zip(edges[:-1], edges[1:]))
    v += _quad(g, edges[-1], np.inf, 1e-11, 0.0, 200)[0]
    return math.sqrt(2.0) * (FOUR_PI * tau) ** -1.5 * math.exp(-tau / 4.0) * v


def model_heat_kernel(geom: Geometry, d: float, t: float) -> float:
    """Heat kernel of the constant-curvature model space of ``geom``.

    For H2 this goes through a different substitution than :func:`heat_kernel`,
    so comparing the two is a genuine check rather than an identity.
    """
    if geom.kind is Kind.H2:
        k = geom.kappa
        return k * k * _h2_reduced_alt(k * d, k * k * t)
    return heat_kernel(geom, d, t).value


def cheeger_yau_check(geom: Geometry, d: float, t: float,
                      comparison: Geometry | None = None, rtol: float = 1e-7) -> bool:
    """True iff K_t on ``geom`` dominates the comparison-space kernel at (d, t).

    ``comparison`` defaults to the model space of ``geom`` itself, where the
    bound is attained with equality.
    """
    lhs = heat_kernel(geom, d, t).value
    rhs = model_heat_kernel(comparison or geom, d, t)
    return lhs >= rhs * (1.0 - rtol)


# ---------------------------------------------------------------------------
# JSON configuration files


def config_to_dict(geom: Geometry, cfg: Configuration) -> dict:
    return {"mu": list(cfg.mu), "dist": cfg.dist.tolist(), "geometry": geom.to_dict()}


def load_config(source) -> tuple[Geometry, Configuration]:
    """Read ``{"mu": [...], "dist": [[...]], "geometry": {...}}`` from a path or dict."""
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text())
    else:
        data = source
    geom = Geometry.from_dict(data["geometry"])
    mu = data["mu"]
    dist = np.array(data.get("dist", [[0.0]]), dtype=float)
    return geom, Configuration(tuple(mu), dist)
