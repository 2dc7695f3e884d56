"""Elliptic relative equilibria of the planar three-body problem.

The essential part of the linearized flow (Meyer-Schmidt form) in the true
anomaly ``t`` is the 4 x 4 path::

    B_e(t) = [[I, -J2], [J2, I - r_e(t) R]],   r_e(t) = 1 / (1 + e cos t)

with ``R = 3/2 I + sqrt(9 - beta)/2 diag(1, -1)`` for Lagrangian orbits and
``R = diag(-delta, 2 delta + 3)`` for Euler orbits. Eccentricity bounds come
from ``Tr F^2`` on the two half-period (-1)-brake problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
from scipy.optimize import brentq, minimize_scalar

from .brake import SplitBoundaries, split_boundaries
from .errors import DegenerateBaseProblem, InvalidEccentricity
from .hill import frame_matrix
from .propagator import DEFAULT_TOL, CoefficientPath, monodromy
from .symplectic import BrakeSymmetryData
from .trace import frame_traces

PERIOD = 2.0 * math.pi
J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
N_ERE = np.diag([1.0, -1.0, -1.0, 1.0])
LAGRANGE_STABLE_BETA = 0.75


@dataclass(frozen=True)
class EREKind:
    kind: str
    param: float
    e: float = 0.0

    def __post_init__(self):
        if self.kind not in ("lagrange", "euler"):
            raise ValueError(f"unknown ERE kind {self.kind!r}")
        if not 0.0 <= self.e < 1.0:
            raise InvalidEccentricity(f"eccentricity must lie in [0, 1), got {self.e}")
        if self.kind == "lagrange" and not 0.0 <= self.param <= 9.0:
            raise ValueError(f"beta must lie in [0, 9], got {self.param}")
        if self.kind == "euler" and self.param < 0.0:
            raise ValueError(f"delta must be nonnegative, got {self.param}")

    @property
    def R(self) -> np.ndarray:
        if self.kind == "lagrange":
            eta = math.sqrt(9.0 - self.param) / 2.0
            return np.diag([1.5 + eta, 1.5 - eta])
        return np.diag([-self.param, 2.0 * self.param + 3.0])

    def with_e(self, e: float) -> "EREKind":
        return EREKind(self.kind, self.param, e)


def meyer_schmidt_system(cfg: EREKind) -> CoefficientPath:
    """``B_e(t)`` on ``[0, 2 pi]``; constant when ``e = 0``."""
    if not 0.0 <= cfg.e < 1.0:
        raise InvalidEccentricity(f"eccentricity must lie in [0, 1), got {cfg.e}")
    R, e = cfg.R, cfg.e
    I2 = np.eye(2)
    top = np.hstack([I2, -J2])

    def at(r):
        return np.vstack([top, np.hstack([J2, I2 - r * R])])

    label = f"{cfg.kind}({cfg.param:g},{e:g})"
    if e == 0.0:
        return CoefficientPath.constant(at(1.0), PERIOD, label)
    return CoefficientPath(2, PERIOD, lambda t: at(1.0 / (1.0 + e * math.cos(t))), (), label)


def perturbation(cfg: EREKind) -> CoefficientPath:
    """``B_e - B_0 = e cos(t) r_e(t) diag(0, R)`` on ``[0, 2 pi]``."""
    K = np.zeros((4, 4))
    K[2:, 2:] = cfg.R
    e = cfg.e
    return CoefficientPath(2, PERIOD, lambda t: (e * math.cos(t) / (1.0 + e * math.cos(t))) * K,
                           (), f"D_e[{cfg.kind}]")


def _cos_plus(t):
    return max(math.cos(t), 0.0)


def _cos_minus(t):
    return min(math.cos(t), 0.0)


def split_perturbation(cfg: EREKind):
    """Sign-split perturbation directions ``(K+, K-)`` on ``[0, pi]``.

    ``K+ >= 0 >= K-`` pointwise and ``K+ + K- = cos(t) diag(0, R)``; both
    have a kink at ``pi/2``.
    """
    R = cfg.R
    T, kink = math.pi, (math.pi / 2,)
    if cfg.kind == "lagrange":
        K = np.zeros((4, 4))
        K[2:, 2:] = R
        plus = CoefficientPath(2, T, lambda t: _cos_plus(t) * K, kink, "K+")
        minus = CoefficientPath(2, T, lambda t: _cos_minus(t) * K, kink, "K-")
        return plus, minus
    a, b = R[0, 0], R[1, 1]  # -delta, 2 delta + 3

    def kplus(t):
        return np.diag([0.0, 0.0, a * _cos_minus(t), b * _cos_plus(t)])

    def kminus(t):
        return np.diag([0.0, 0.0, a * _cos_plus(t), b * _cos_minus(t)])

    return (CoefficientPath(2, T, kplus, kink, "K+"),
            CoefficientPath(2, T, kminus, kink, "K-"))


def brake_data(S_sign: int = -1) -> BrakeSymmetryData:
    return BrakeSymmetryData(N_ERE, S_sign * np.eye(4))


def half_period_boundaries(S_sign: int = -1) -> SplitBoundaries:
    return split_boundaries(brake_data(S_sign), PERIOD)


@dataclass(frozen=True)
class CurveValue:
    """``Tr F^2`` on ``E+`` and ``E-`` of the (-1)-brake splitting."""

    plus: float
    minus: float

    @property
    def bound_plus(self) -> float:
        return eccentricity_bound(self.plus)

    @property
    def bound_minus(self) -> float:
        return eccentricity_bound(self.minus)

    @property
    def bound(self) -> float:
        return min(self.bound_plus, self.bound_minus)


def eccentricity_bound(tr2: float) -> float:
    """``1 / (1 + sqrt(tr2))``: largest ``e`` with ``(e/(1-e))^2 tr2 < 1``."""
    return 1.0 / (1.0 + math.sqrt(max(tr2, 0.0)))


_WHICH = {("lagrange", "f"): 1, ("euler", "g1"): 0, ("euler", "g2"): 1}


def curve_value(kind: str, param: float, which: str = None, tol: float = DEFAULT_TOL) -> CurveValue:
    """``f+-(beta)``, ``g1+-(delta)`` or ``g2+-(delta)``.

    ``Tr F^2`` is taken from the renormalized frame propagation
    (:func:`frame_traces`): for large ``delta`` the circular monodromy grows
    like ``1e5`` over half a period and the ``G_j`` products lose every digit.

    ``f`` uses ``K-`` (Lagrangian), ``g1`` uses ``K+`` and ``g2`` uses ``K-``
    (Euler). Raises ``DegenerateBaseProblem`` (with ``.sign``) when the
    circular base problem on ``E+`` or ``E-`` is degenerate.
    """
    which = which or ("f" if kind == "lagrange" else "g1")
    try:
        idx = _WHICH[(kind, which)]
    except KeyError:
        raise ValueError(f"curve {which!r} is not defined for kind {kind!r}") from None
    cfg = EREKind(kind, param, 0.0)
    B = meyer_schmidt_system(cfg).restrict(math.pi)
    K = split_perturbation(cfg)[idx]
    split = half_period_boundaries(-1)
    out = {}
    for sign, pair in (("plus", split.plus), ("minus", split.minus)):
        try:
            out[sign] = frame_traces(B, K, pair, tol)[1]
        except DegenerateBaseProblem as exc:
            raise DegenerateBaseProblem(f"E{'+' if sign == 'plus' else '-'} base problem at "
                                        f"{kind} param {param}: {exc}", sign) from exc
    return CurveValue(out["plus"], out["minus"])


class Classification(str, Enum):
    STABLE = "certified_stable"
    EH = "certified_EH"
    UNCERTIFIED = "uncertified"


def degeneracy_closed_forms(j: int):
    """``(phi_j(0), psi_j(0))`` for Euler orbits at ``e = 0``."""
    if j < 1:
        raise ValueError("j must be >= 1")

    def form(x):
        return (x * x - 3.0 + math.sqrt(9.0 * x ** 4 - 14.0 * x * x + 9.0)) / 4.0

    phi = (j - 3.0 + math.sqrt(9.0 * j ** 4 - 14.0 * j ** 2 + 9.0)) / 4.0
    return phi, form(j + 0.5)


def euler_band(delta: float, jmax: int = 50):
    """Band index ``j`` with ``delta`` in ``[psi_j(0), psi_{j+1}(0))`` (``psi_0 = 0``);
    ``None`` when ``delta`` sits on an anchor."""
    edges = [0.0] + [degeneracy_closed_forms(j)[1] for j in range(1, jmax + 1)]
    for j in range(len(edges) - 1):
        if edges[j] <= delta < edges[j + 1]:
            if j > 0 and math.isclose(delta, edges[j], rel_tol=0, abs_tol=1e-12):
                return None
            return j
    raise ValueError(f"delta = {delta} beyond tabulated bands")


def classify(cfg: EREKind, tol: float = DEFAULT_TOL) -> Classification:
    """Sufficient-condition classification of ``gamma_{param, e}(2 pi)``."""
    try:
        if cfg.kind == "lagrange":
            if not 0.0 <= cfg.param < LAGRANGE_STABLE_BETA:
                return Classification.UNCERTIFIED
            bound = curve_value("lagrange", cfg.param, "f", tol).bound
            return Classification.STABLE if cfg.e < bound else Classification.UNCERTIFIED
        band = euler_band(cfg.param)
        if band is None:
            return Classification.UNCERTIFIED
        bound = curve_value("euler", cfg.param, "g1", tol).bound
        if band > 0:
            bound = min(bound, curve_value("euler", cfg.param, "g2", tol).bound)
        return Classification.EH if cfg.e < bound else Classification.UNCERTIFIED
    except DegenerateBaseProblem:
        return Classification.UNCERTIFIED


def minus_one_factors(cfg: EREKind, tol: float = DEFAULT_TOL):
    """Signed Lagrangian-intersection determinants whose zeros are the
    (-1)-degeneracies of ``gamma(2 pi)`` (one per brake subspace)."""
    split = half_period_boundaries(-1)
    G_half = monodromy(meyer_schmidt_system(cfg), tol, at=math.pi)
    return tuple(float(np.linalg.det(frame_matrix(G_half, pair))) for pair in (split.plus, split.minus))


def smallest_singular_value(M: np.ndarray) -> float:
    return float(np.linalg.svd(M, compute_uv=False)[-1])


def minus_one_defect(cfg: EREKind, tol: float = DEFAULT_TOL) -> float:
    """Smallest singular value of ``gamma(2 pi) + I``."""
    return smallest_singular_value(monodromy(meyer_schmidt_system(cfg), tol) + np.eye(4))


def monodromy_eigenvalues(cfg: EREKind, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Eigenvalues of ``gamma(2 pi)`` from the brake factorization.

    ``gamma(2 pi) = N gamma(pi)^{-1} N gamma(pi)``, so the spectrum is that of
    the pencil ``(gamma(pi), N gamma(pi) N)``; QZ on the half-period factor
    keeps unit-circle eigenvalues accurate when ``gamma(2 pi)`` is huge.
    """
    H = monodromy(meyer_schmidt_system(cfg), tol, at=math.pi)
    return scipy.linalg.eigvals(H, N_ERE @ H @ N_ERE)


def unit_circle_count(mu: np.ndarray, tol: float = 1e-8) -> int:
    """Number of eigenvalues with ``| |mu| - 1 | < tol``."""
    return int(np.sum(np.abs(np.abs(mu) - 1.0) < tol))


def plus_one_defect(cfg: EREKind, tol: float = DEFAULT_TOL) -> float:
    return smallest_singular_value(monodromy(meyer_schmidt_system(cfg), tol) - np.eye(4))


def polish_minus_one_degeneracy(kind: str, guess: float, e: float = 0.0, halfwidth: float = 0.05,
                                tol: float = DEFAULT_TOL, xtol: float = 1e-12) -> float:
    """Parameter value near ``guess`` where ``gamma(2 pi)`` has eigenvalue -1.

    Root-finds on whichever brake factor changes sign across the bracket;
    falls back to minimizing the smallest singular value of ``gamma + I``.
    """
    lo, hi = guess - halfwidth, guess + halfwidth
    if kind == "lagrange":
        lo, hi = max(lo, 0.0), min(hi, 9.0)
    else:
        lo = max(lo, 0.0)
    fl = minus_one_factors(EREKind(kind, lo, e), tol)
    fh = minus_one_factors(EREKind(kind, hi, e), tol)
    for k in range(2):
        if fl[k] * fh[k] < 0:
            return brentq(lambda p: minus_one_factors(EREKind(kind, p, e), tol)[k], lo, hi,
                          xtol=xtol, rtol=4 * np.finfo(float).eps)
    res = minimize_scalar(lambda p: minus_one_defect(EREKind(kind, p, e), tol), bounds=(lo, hi),
                          method="bounded", options={"xatol": xtol})
    return float(res.x)


def degeneracy_anchors(j: int, tol: float = DEFAULT_TOL, verify: bool = True):
    """Closed-form ``(phi_j(0), psi_j(0))`` plus a propagation check.

    Returns ``(phi, psi, sigma)`` where ``sigma`` is the smallest singular
    value of ``gamma_{delta,0}(2 pi) + I`` at the polished root next to
    ``psi`` (``nan`` when ``verify`` is false).
    """
    phi, psi = degeneracy_closed_forms(j)
    sigma = math.nan
    if verify:
        root = polish_minus_one_degeneracy("euler", psi, 0.0, halfwidth=min(0.05, psi / 4), tol=tol)
        sigma = minus_one_defect(EREKind("euler", root, 0.0), tol)
    return phi, psi, sigma
