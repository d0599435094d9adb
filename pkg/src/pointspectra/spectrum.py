"""Bound states from the zeros of the eigenvalue branches of Phi.

Each analytic eigenvalue branch of Phi is strictly increasing in nu (strictly
decreasing in E for the relativistic model), so the sorted eigenvalues are
monotone too and each has at most one zero.  A bound state is a zero of one of
the sorted branches; the number of states is the number of branches that
change sign across the search window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .geometry import Configuration, Geometry, require_valid
from .principal import principal_matrix, principal_matrix_derivative, resolvent_kernel

__all__ = [
    "EigenBranches",
    "BoundState",
    "SpectrumError",
    "AsymmetryError",
    "MonotonicityError",
    "BracketError",
    "CountMismatchError",
    "NormalizationError",
    "symmetric_eigen",
    "eigenvalue_branches",
    "find_bound_states",
    "count_bound_states",
    "eigenfunction",
    "JACOBI_CAP",
    "NULL_THRESHOLD",
]

JACOBI_CAP = 64
NULL_THRESHOLD = 1e-8
MONOTONE_TOL = 1e-9


class SpectrumError(RuntimeError):
    """Numerical failure inside the spectral solver."""


class AsymmetryError(ValueError):
    pass


class MonotonicityError(SpectrumError):
    pass


class BracketError(SpectrumError):
    pass


class CountMismatchError(SpectrumError):
    pass


class NormalizationError(SpectrumError):
    pass


@dataclass(frozen=True)
class EigenBranches:
    values: np.ndarray   # ascending
    vectors: np.ndarray  # column k belongs to values[k]
    param: float = math.nan

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BoundState:
    nu: float             # nu_k, or E_k for relativistic geometries
    energy: float         # -nu**2, or E
    multiplicity: int
    amplitudes: np.ndarray  # shape (N, multiplicity), unit columns
    normalization: float    # (A^T M A)^{-1/2} for the first column
    branches: tuple = ()    # sorted-branch indices merged into this state
    null_dim: int = 0       # numerical null-space dimension of Phi at the root
    det_ratio: float = 0.0  # |det Phi| / ||Phi||_2^N at the root
    relativistic: bool = False

    def to_dict(self) -> dict:
        key = "E" if self.relativistic else "nu"
        return {
            key: self.nu,
            "energy": self.energy,
            "multiplicity": self.multiplicity,
            "amplitudes": [list(map(float, col)) for col in self.amplitudes.T],
            "normalization": self.normalization,
        }


# ---------------------------------------------------------------------------
# dense symmetric eigenproblem


def symmetric_eigen(M, cap: int = JACOBI_CAP, sym_tol: float = 1e-12) -> EigenBranches:
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"need a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > cap:
        raise ValueError(f"matrix of size {n} exceeds the Jacobi cap {cap}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = np.max(np.abs(A)) if n else 0.0
    if n and np.max(np.abs(A - A.T)) > sym_tol * max(scale, np.finfo(float).tiny):
        raise AsymmetryError("matrix is not symmetric to 1e-12 relative")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    fro = np.linalg.norm(A)
    offmask = ~np.eye(n, dtype=bool)
    for _ in range(100):
        off = float(np.linalg.norm(A[offmask])) if n > 1 else 0.0
        if off <= 1e-22 * fro or off == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise SpectrumError("Jacobi sweeps did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return EigenBranches(w[order], V[:, order])


def _branches(geom, cfg, p, **kw) -> EigenBranches:
    phi = principal_matrix(geom, cfg, p, **kw).entries
    eb = symmetric_eigen(phi)
    return EigenBranches(eb.values, eb.vectors, p)


def eigenvalue_branches(geom: Geometry, cfg: Configuration, grid, *,
                        check_monotone: bool = True, **kw) -> list[EigenBranches]:
    """Sorted eigenvalues of Phi along ``grid``.

    The grid runs ascending in nu (descending in E for relativistic
    geometries), so every sorted branch must be nondecreasing along it.
    """
    grid = [float(x) for x in grid]
    steps = np.diff(grid)
    if geom.relativistic and np.any(steps >= 0):
        raise ValueError("relativistic grid must be strictly descending in E")
    if not geom.relativistic and np.any(steps <= 0):
        raise ValueError("grid must be strictly ascending in nu")
    out = [_branches(geom, cfg, p, **kw) for p in grid]
    if check_monotone:
        for a, b in zip(out[:-1], out[1:]):
            drop = a.values - b.values
            tol = MONOTONE_TOL * np.maximum(1.0, np.abs(a.values))
            if np.any(drop > tol):
                k = int(np.argmax(drop - tol))
                raise MonotonicityError(
                    f"branch {k} decreases from {a.values[k]!r} at {a.param!r} "
                    f"to {b.values[k]!r} at {b.param!r}")
    return out


# ---------------------------------------------------------------------------
# root finding


@dataclass
class _Search:
    geom: Geometry
    cfg: Configuration
    kw: dict
    cache: dict = field(default_factory=dict)

    def at(self, p: float) -> EigenBranches:
        if p not in self.cache:
            self.cache[p] = _branches(self.geom, self.cfg, p, **self.kw)
        return self.cache[p]

    def omega(self, k: int):
        return lambda p: self.at(p).values[k]


def _scale(geom: Geometry, cfg: Configuration) -> float:
    s = max(abs(x) for x in cfg.mu)
    if geom.hyperbolic:
        s = max(s, geom.kappa)
    if geom.relativistic:
        s = geom.m
    return s if s > 0 else 1.0


def _window(geom, cfg, search, tol):
    """Search window and the branches that change sign across it."""
    scale = _scale(geom, cfg)
    if geom.relativistic:
        lo, hi = -geom.m + tol, geom.m - tol
        # increasing direction of the branches is decreasing E
        start, end = search.at(hi), search.at(lo)
        return hi, lo, start, end
    lo = 1e-8 * scale
    hi = max(max(cfg.mu), geom.kappa if geom.hyperbolic else 0.0, scale)
    for _ in range(60):
        if search.at(hi).values[0] > 0:
            break
        hi *= 2.0
    else:
        vals = search.at(hi).values
        raise BracketError(
            f"branches still non-positive at nu = {hi!r} (lowest {vals[0]!r}); "
            f"mu = {list(cfg.mu)}, geometry = {geom.to_dict()}")
    return lo, hi, search.at(lo), search.at(hi)


def _marginal_eps(eb: EigenBranches) -> float:
    return 1e-12 * max(1.0, float(np.max(np.abs(eb.values))))


def _roots(geom, cfg, tol, kw):
    search = _Search(geom, cfg, kw)
    a, b, start, end = _window(geom, cfg, search, tol)
    eps = _marginal_eps(start)
    roots = []
    marginal = []
    for k in range(cfg.n):
        w0, w1 = start.values[k], end.values[k]
        if abs(w0) <= eps:
            marginal.append(k)
            continue
        if w0 < 0 < w1:
            x = brentq(search.omega(k), a, b, xtol=tol, rtol=4 * np.finfo(float).eps,
                       maxiter=500)
            roots.append((k, x))
        elif w0 < 0 and w1 <= 0 and not geom.relativistic:
            raise BracketError(f"branch {k} does not turn positive by nu = {b!r}")
    n_start = int(np.sum(start.values < -eps))
    n_end = int(np.sum(end.values < 0))
    return roots, marginal, n_start - n_end, search


def _normalization(geom, cfg, p, A) -> float:
    M = principal_matrix_derivative(geom, cfg, p)
    bracket = float(A @ M @ A)
    if not bracket > 0:
        raise NormalizationError(f"normalization bracket {bracket!r} is not positive at {p!r}")
    return bracket ** -0.5


def _fix_sign(v: np.ndarray) -> np.ndarray:
    s = float(np.sum(v))
    if s == 0.0:
        s = float(v[np.argmax(np.abs(v))])
    return -v if s < 0 else v


def find_bound_states(geom: Geometry, cfg: Configuration, tol: float | None = None,
                      **kw) -> list[BoundState]:
    """All bound states, sorted by energy ascending.

    ``tol`` is the absolute bracket width of each root (default 1e-12 times
    the problem scale).  Roots closer than 10*tol are merged into one state
    whose multiplicity is the number of merged branches.
    """
    require_valid(cfg, geom)
    if tol is None:
        tol = 1e-12 * _scale(geom, cfg)
    if not tol > 0:
        raise ValueError("tol must be > 0")
    roots, _, _, search = _roots(geom, cfg, tol, kw)
    roots.sort(key=lambda r: r[1])
    groups: list[list] = []
    for k, x in roots:
        if groups and abs(x - groups[-1][-1][1]) <= 10.0 * tol:
            groups[-1].append((k, x))
        else:
            groups.append([(k, x)])
    states = []
    for grp in groups:
        p = float(np.mean([x for _, x in grp]))
        eb = symmetric_eigen(principal_matrix(geom, cfg, p, **kw).entries)
        norm2 = float(np.max(np.abs(eb.values)))
        null_dim = int(np.sum(np.abs(eb.values) <= NULL_THRESHOLD * norm2))
        det_ratio = float(np.prod(np.abs(eb.values) / norm2)) if norm2 > 0 else 0.0
        # the eigenvectors of the branches closest to zero span the null space
        idx = sorted(np.argsort(np.abs(eb.values))[:len(grp)])
        A = eb.vectors[:, idx]
        if len(grp) == 1:
            A = _fix_sign(A[:, 0])[:, None]
        norm = _normalization(geom, cfg, p, A[:, 0])
        energy = p if geom.relativistic else -p * p
        states.append(BoundState(p, energy, len(grp), A, norm, tuple(k for k, _ in grp),
                                 null_dim, det_ratio, geom.relativistic))
    states.sort(key=lambda s: s.energy)
    return states


def count_bound_states(geom: Geometry, cfg: Configuration, tol: float | None = None,
                       **kw) -> int:
    """Number of bound states counted with multiplicity.

    Computed twice, from the located roots and from the branch signs at the
    ends of the search window; the two must agree.
    """
    require_valid(cfg, geom)
    if tol is None:
        tol = 1e-12 * _scale(geom, cfg)
    roots, _, by_sign, _ = _roots(geom, cfg, tol, kw)
    if len(roots) != by_sign:
        raise CountMismatchError(
            f"{len(roots)} roots located but {by_sign} branches change sign")
    return by_sign


def eigenfunction(geom: Geometry, cfg: Configuration, state: BoundState,
                  dists_to_centers, component: int = 0) -> float:
    """psi_k(x) = (A^T M A)^{-1/2} sum_i A_i R_0(d(x, a_i) | -nu_k^2)."""
    if geom.relativistic:
        raise ValueError("eigenfunctions are provided for non-relativistic geometries")
    d = np.asarray(dists_to_centers, dtype=float)
    if d.shape != (cfg.n,):
        raise ValueError("need one distance per center")
    if np.any(d <= 0):
        raise ValueError("distances to the centers must be > 0")
    A = state.amplitudes[:, component]
    norm = state.normalization if component == 0 else _normalization(geom, cfg, state.nu, A)
    return norm * float(sum(a * resolvent_kernel(geom, di, state.nu) for a, di in zip(A, d)))
