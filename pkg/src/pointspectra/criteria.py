"""Sufficient conditions for N bound states.

Two kinds of test live here.  The matrix tests (Gerschgorin rows and
Brauer-Cassini ovals) look at Phi at one spectral parameter: if every
eigenvalue is provably negative there, every branch has already crossed zero
and there are N bound states.  The closed-form tests (h3, h2, flat two-center,
relativistic) are explicit inequalities in (kappa, m, min mu, min distance, N)
that guarantee such a witness exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .geometry import Configuration, Geometry, Kind, require_valid
from .principal import principal_matrix
from .specfun import DomainError

__all__ = [
    "CriterionReport",
    "REL_H2_CONSTANT",
    "gerschgorin_condition",
    "gerschgorin_scan",
    "cassini_condition",
    "cassini_scan",
    "h3_criterion",
    "h2_criterion",
    "flat_two_center_criterion",
    "rel_flat2_criterion",
    "rel_h2_criterion",
    "default_witness_grid",
    "applicable_criteria",
]

REL_H2_CONSTANT = 24.0 * (4.0 * math.pi) ** 1.5
WITNESS_POINTS = 64


@dataclass(frozen=True)
class CriterionReport:
    criterion_id: str
    lhs: float
    rhs: float
    relation: str              # "<" or ">": satisfied iff lhs <relation> rhs
    satisfied: bool
    witness: Optional[float] = None
    predicted_count: Optional[int] = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.relation not in ("<", ">"):
            raise ValueError(f"relation must be '<' or '>', got {self.relation!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _report(cid, lhs, rhs, relation, n, witness=None, predicted_if_not=None, **details):
    ok = lhs < rhs if relation == "<" else lhs > rhs
    pred = n if ok else predicted_if_not
    return CriterionReport(cid, float(lhs), float(rhs), relation, bool(ok), witness, pred, details)


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise DomainError(f"{k} must be > 0, got {v}")


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be an integer >= 1, got {n}")


# ---------------------------------------------------------------------------
# matrix tests at a witness


def _gerschgorin_rows(phi: np.ndarray) -> np.ndarray:
    off = np.abs(phi).sum(axis=1) - np.abs(np.diag(phi))
    return np.diag(phi) + off


def gerschgorin_condition(geom: Geometry, cfg: Configuration, p_star: float) -> CriterionReport:
    """Phi_ii + sum_{j != i} |Phi_ij| < 0 for every row i at nu* (or E*)."""
    phi = principal_matrix(geom, cfg, p_star).entries
    rows = _gerschgorin_rows(phi)
    return _report("gerschgorin", rows.max(), 0.0, "<", cfg.n, witness=p_star,
                   rows=[float(r) for r in rows])


def _cassini_lhs(phi: np.ndarray) -> float:
    n = phi.shape[0]
    a = np.diag(phi)
    R = np.abs(phi).sum(axis=1) - np.abs(a)
    best = -math.inf
    for j in range(n):
        for k in range(j + 1, n):
            # rightmost real point of the oval |z - a_j| |z - a_k| <= R_j R_k
            x = 0.5 * (a[j] + a[k] + math.sqrt((a[j] - a[k]) ** 2 + 4.0 * R[j] * R[k]))
            best = max(best, x)
    return best


def cassini_condition(geom: Geometry, cfg: Configuration, p_star: float) -> CriterionReport:
    """Every Brauer-Cassini oval of Phi lies in the open left half-line.

    The centers are reordered so that mu_1 <= mu_2 <= ...; the report carries
    the Gerschgorin verdict at the same parameter for comparison.
    """
    if cfg.n < 2:
        raise DomainError("the Cassini condition needs at least two centers")
    order = np.argsort(cfg.mu_array(), kind="stable")
    cfg = cfg.permuted(order)
    phi = principal_matrix(geom, cfg, p_star).entries
    lhs = _cassini_lhs(phi)
    diag_ok = bool(np.all(np.diag(phi) < 0))
    rep = _report("cassini", lhs, 0.0, "<", cfg.n, witness=p_star,
                  gerschgorin_satisfied=bool(_gerschgorin_rows(phi).max() < 0),
                  gerschgorin_lhs=float(_gerschgorin_rows(phi).max()),
                  diagonal_negative=diag_ok)
    return rep


def default_witness_grid(geom: Geometry, cfg: Configuration,
                         points: int = WITNESS_POINTS) -> np.ndarray:
    """64 log-spaced points in (1e-3 mu, mu), or in (max mu + delta, m - delta).

    Relativistic points are log-spaced in the distance m - E to the threshold.
    """
    if geom.relativistic:
        m = geom.m
        delta = 1e-6 * m
        top = max(cfg.mu)
        gaps = np.geomspace(m - top - delta, delta, points)
        return m - gaps
    mu = min(cfg.mu)
    return np.geomspace(1e-3 * mu, mu, points + 2)[1:-1]


def _scan(test, geom, cfg, grid):
    grid = default_witness_grid(geom, cfg) if grid is None else np.asarray(grid, float)
    best = None
    for p in grid:
        rep = test(geom, cfg, float(p))
        if rep.satisfied:
            return rep
        if best is None or rep.lhs < best.lhs:
            best = rep
    return best


def gerschgorin_scan(geom: Geometry, cfg: Configuration, grid=None) -> Optional[float]:
    """First grid point where the Gerschgorin condition holds, else None."""
    rep = _scan(gerschgorin_condition, geom, cfg, grid)
    return rep.witness if rep is not None and rep.satisfied else None


def cassini_scan(geom: Geometry, cfg: Configuration, grid=None) -> Optional[float]:
    rep = _scan(cassini_condition, geom, cfg, grid)
    return rep.witness if rep is not None and rep.satisfied else None


# ---------------------------------------------------------------------------
# explicit inequalities


def h3_criterion(kappa: float, mu_min: float, d_min: float, n: int,
                 form: str = "infimum") -> CriterionReport:
    """Hyperbolic-space criterion exp(d sqrt(kappa^2 + mu^2) - 1) sinh(kappa d) / (kappa d) > N - 1.

    The inequality comes from minimizing the worst Gerschgorin row
    f(s) = s - S + B exp(-d s), with s = sqrt(kappa^2 + nu^2) in (kappa, S),
    S = sqrt(kappa^2 + mu^2) and B = (N - 1) kappa / sinh(kappa d).  The
    printed inequality is exactly "min f < 0" when the stationary point
    s_c = log(d B) / d lies inside that interval.  When s_c <= kappa the
    minimum sits at nu -> 0 and the right test is f(kappa) < 0, which the
    printed inequality does not imply.

    ``form="infimum"`` (default) applies the test matching the regime;
    ``form="printed"`` evaluates the printed inequality alone.
    """
    _positive(kappa=kappa, mu_min=mu_min, d_min=d_min)
    _check_n(n)
    if form not in ("infimum", "printed"):
        raise ValueError(f"unknown form {form!r}")
    a = kappa * d_min
    log_sinhc = (a - math.log(2.0) + math.log1p(-math.exp(-2.0 * a)) - math.log(a)
                 if a > 1e-8 else 0.0)
    S = math.sqrt(kappa * kappa + mu_min * mu_min)
    log_lhs = d_min * S - 1.0 + log_sinhc
    lhs = math.exp(log_lhs) if log_lhs < 709.0 else math.inf
    if n == 1:
        s_c = -math.inf
    else:
        # log(d B) = log(N - 1) - log(sinh(kappa d) / (kappa d))
        s_c = (math.log(n - 1) - log_sinhc) / d_min
    if form == "printed" or kappa < s_c:
        regime = "printed" if form == "printed" else ("interior" if s_c < S else "none")
        return _report("h3", lhs, n - 1, ">", n, log_lhs=log_lhs, regime=regime, s_c=s_c)
    # boundary regime: f(kappa) = kappa - S + B exp(-kappa d)
    edge = (n - 1) * kappa * math.exp(-a - log_sinhc - math.log(a))
    f0 = (kappa - S) + edge
    return _report("h3", f0, 0.0, "<", n, log_lhs=log_lhs, regime="boundary", s_c=s_c,
                   printed_lhs=lhs)


def h2_criterion(kappa: float, mu_min: float, d_min: float, n: int) -> CriterionReport:
    """Hyperbolic-plane criterion with regime selector t(mu) = 1/2 + sqrt(mu^2/kappa^2 + 1/4).

    t >= e:  N - 1 < kappa d t / (2e);  otherwise  N - 1 < (kappa d / 2) log t.
    """
    _positive(kappa=kappa, mu_min=mu_min, d_min=d_min)
    _check_n(n)
    t = 0.5 + math.sqrt((mu_min / kappa) ** 2 + 0.25)
    if t >= math.e:
        rhs, regime = kappa * d_min * t / (2.0 * math.e), "large_mu"
    else:
        rhs, regime = 0.5 * kappa * d_min * math.log(t), "small_mu"
    return _report("h2", n - 1, rhs, "<", n, t=t, regime=regime)


def flat_two_center_criterion(dimension: int, mu1: float, mu2: float, d: float) -> CriterionReport:
    """sqrt(mu1 mu2) d > 2 (plane) or > 1 (space): two bound states, else one."""
    if dimension not in (2, 3):
        raise DomainError("dimension must be 2 or 3")
    _positive(mu1=mu1, mu2=mu2, d=d)
    s = math.sqrt(mu1 * mu2) * d
    return _report("flat_two_center", s, 2.0 if dimension == 2 else 1.0, ">", 2,
                   predicted_if_not=1, dimension=dimension)


def _rel_mu(m, mu_min):
    _positive(m=m)
    if not -m < mu_min < m:
        raise DomainError(f"mu must lie in (-m, m), got {mu_min}")


def rel_flat2_criterion(m: float, mu_min: float, d_min: float, n: int) -> CriterionReport:
    """N - 1 < d (m - mu) / e."""
    _rel_mu(m, mu_min)
    _positive(d_min=d_min)
    _check_n(n)
    return _report("rel_flat2", n - 1, d_min * (m - mu_min) / math.e, "<", n)


def rel_h2_criterion(kappa: float, m: float, mu_min: float, d_min: float,
                     n: int) -> CriterionReport:
    """Relativistic hyperbolic-plane criterion, X = sqrt(m^2 + kappa^2/4), C = 24 (4 pi)^{3/2}.

    X - mu >= e (X - m):  N - 1 < d (X - mu) / (C e);
    otherwise:            N - 1 < d (X - m) / C * log((X - mu) / (X - m)).
    """
    _rel_mu(m, mu_min)
    _positive(kappa=kappa, d_min=d_min)
    _check_n(n)
    X = math.sqrt(m * m + 0.25 * kappa * kappa)
    if X - mu_min >= math.e * (X - m):
        rhs, regime = d_min * (X - mu_min) / (REL_H2_CONSTANT * math.e), "far"
    else:
        rhs = d_min * (X - m) / REL_H2_CONSTANT * math.log((X - mu_min) / (X - m))
        regime = "near"
    return _report("rel_h2", n - 1, rhs, "<", n, X=X, regime=regime)


# ---------------------------------------------------------------------------


def applicable_criteria(geom: Geometry, cfg: Configuration, grid=None) -> list[CriterionReport]:
    """Every criterion that applies to this geometry and configuration.

    Matrix tests are scanned over ``grid`` (default :func:`default_witness_grid`);
    the report is the first satisfied point, or the point closest to satisfying.
    """
    require_valid(cfg, geom)
    n = cfg.n
    mu_min = min(cfg.mu)
    d_min = cfg.min_distance() if n > 1 else math.inf
    out = [_scan(gerschgorin_condition, geom, cfg, grid)]
    if n >= 2:
        out.append(_scan(cassini_condition, geom, cfg, grid))
    kind = geom.kind
    if kind in (Kind.FLAT2, Kind.FLAT3) and n == 2:
        out.append(flat_two_center_criterion(geom.dimension, cfg.mu[0], cfg.mu[1],
                                             float(cfg.dist[0, 1])))
    if n >= 2:
        if kind is Kind.H3:
            out.append(h3_criterion(geom.kappa, mu_min, d_min, n))
        elif kind is Kind.H2:
            out.append(h2_criterion(geom.kappa, mu_min, d_min, n))
        elif kind is Kind.REL_FLAT2:
            out.append(rel_flat2_criterion(geom.m, mu_min, d_min, n))
        elif kind is Kind.REL_H2:
            out.append(rel_h2_criterion(geom.kappa, geom.m, mu_min, d_min, n))
    return [r for r in out if r is not None]
