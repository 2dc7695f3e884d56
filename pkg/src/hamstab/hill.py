"""Finite-dimensional side of the Hill-type determinant formula.

For ``gamma_alpha`` the fundamental solution of ``B + alpha D`` and
Lagrangian frames ``Z0, Z1``::

    f(alpha) = det(gamma_alpha(T) Z0, Z1) / det(gamma_0(T) Z0, Z1)

which equals the conditional Fredholm determinant ``det(I - alpha F)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateBaseProblem, DegenerateEndpoint, DimensionError
from .propagator import DEFAULT_TOL, CoefficientPath, SymplecticPath, monodromy
from .symplectic import BoundaryPair, orthonormal_frame

DEGENERACY_TOL = 1e-8


@dataclass(frozen=True)
class HillData:
    """Projection data of the unperturbed boundary problem.

    ``P = (Z0, gamma0(T)^{-1} Z1)``; ``Q = P diag(0, I) P^{-1}`` is the
    idempotent with kernel ``V0`` and image ``gamma0(T)^{-1} V1``;
    ``Qd = diag(I, 0)`` so that ``I - Q = P Qd P^{-1}``.
    ``transversality`` is ``|det P|``; ``transversality_normalized`` is the
    same determinant with each block of columns orthonormalized, i.e. the
    product of the sines of the principal angles (1 = orthogonal, 0 = not
    transversal).
    """

    P: np.ndarray
    Q: np.ndarray
    Qd: np.ndarray
    Z0: np.ndarray
    transversality: float
    transversality_normalized: float

    @property
    def n(self) -> int:
        return self.Z0.shape[1]

    @property
    def Qd_frame(self) -> np.ndarray:
        """``(Z0, 0) = P Qd``, the projection factor entering ``G_j``."""
        return self.P @ self.Qd


def _normalized_transversality(Za: np.ndarray, Zb: np.ndarray) -> float:
    return abs(float(np.linalg.det(np.hstack([orthonormal_frame(Za), orthonormal_frame(Zb)]))))


def transversality(boundary: BoundaryPair, gamma0, degeneracy_tol: float = DEGENERACY_TOL) -> HillData:
    """Check ``V0`` is transversal to ``gamma0(T)^{-1} V1`` and build ``HillData``.

    ``gamma0`` may be a :class:`SymplecticPath` or the monodromy matrix itself.

    Raises
    ------
    DegenerateBaseProblem
        When the normalized transversality falls below ``degeneracy_tol``,
        i.e. ``A - B`` has a kernel.
    """
    G = gamma0.monodromy if isinstance(gamma0, SymplecticPath) else np.asarray(gamma0, dtype=float)
    n = boundary.n
    if G.shape != (2 * n, 2 * n):
        raise DimensionError(f"monodromy shape {G.shape} does not match n = {n}")
    Z0 = boundary.Z0
    W1 = np.linalg.solve(G, boundary.Z1)
    P = np.hstack([Z0, W1])
    tn = _normalized_transversality(Z0, W1)
    if tn < degeneracy_tol:
        raise DegenerateBaseProblem(
            f"V0 and gamma0(T)^-1 V1 are not transversal (normalized |det P| = {tn:.3e})")
    Pinv = np.linalg.inv(P)
    Qn = np.diag(np.r_[np.zeros(n), np.ones(n)])
    Qd = np.diag(np.r_[np.ones(n), np.zeros(n)])
    Q = P @ Qn @ Pinv
    return HillData(P, Q, Qd, Z0, abs(float(np.linalg.det(P))), tn)


@dataclass(frozen=True)
class HillEvaluation:
    """Value of ``f(alpha)`` together with diagnostics."""

    alpha: float
    value: float
    numerator: float
    denominator: float
    condition: float
    transversality: float


def _lu_det(M: np.ndarray) -> float:
    lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    sign = (-1.0) ** int(np.sum(piv != np.arange(len(piv))))
    return float(sign * np.prod(np.diag(lu)))


def frame_matrix(G: np.ndarray, boundary: BoundaryPair) -> np.ndarray:
    return np.hstack([G @ boundary.Z0, boundary.Z1])


def hill_evaluation(B: CoefficientPath, D: CoefficientPath, boundary: BoundaryPair,
                    alpha: float, tol: float = DEFAULT_TOL, gamma0=None) -> HillEvaluation:
    if B.n != boundary.n or D.n != boundary.n:
        raise DimensionError("coefficient and boundary half-dimensions differ")
    G0 = monodromy(B, tol) if gamma0 is None else (
        gamma0.monodromy if isinstance(gamma0, SymplecticPath) else np.asarray(gamma0))
    transversality(boundary, G0)
    Ga = G0 if alpha == 0 else monodromy(B + D.scaled(alpha), tol)
    Ma, M0 = frame_matrix(Ga, boundary), frame_matrix(G0, boundary)
    num, den = _lu_det(Ma), _lu_det(M0)
    cond = float(np.linalg.cond(Ma))
    tn = _normalized_transversality(Ga @ boundary.Z0, boundary.Z1)
    return HillEvaluation(float(alpha), num / den, num, den, cond, tn)


def hill_ratio(B: CoefficientPath, D: CoefficientPath, boundary: BoundaryPair,
               alpha: float = 1.0, tol: float = DEFAULT_TOL, gamma0=None) -> float:
    """``f(alpha) = det(gamma_alpha(T) Z0, Z1) / det(gamma_0(T) Z0, Z1)``."""
    return hill_evaluation(B, D, boundary, alpha, tol, gamma0).value


def hill_curve(B, D, boundary, alphas, tol: float = DEFAULT_TOL) -> np.ndarray:
    G0 = monodromy(B, tol)
    return np.array([hill_ratio(B, D, boundary, a, tol, gamma0=G0) for a in alphas])


def determinant_sign(B: CoefficientPath, D: CoefficientPath, boundary: BoundaryPair,
                     tol: float = DEFAULT_TOL, degeneracy_tol: float = DEGENERACY_TOL) -> int:
    """Sign of ``f(1)``; equals ``(-1)**I(A - B, A - B - D)``.

    Raises
    ------
    DegenerateEndpoint
        If ``A - B`` or ``A - B - D`` is degenerate.
    """
    G0 = monodromy(B, tol)
    try:
        transversality(boundary, G0, degeneracy_tol)
    except DegenerateBaseProblem as exc:
        raise DegenerateEndpoint(f"degenerate at alpha = 0: {exc}") from exc
    ev = hill_evaluation(B, D, boundary, 1.0, tol, gamma0=G0)
    if ev.transversality < degeneracy_tol:
        raise DegenerateEndpoint(
            f"degenerate at alpha = 1 (normalized transversality {ev.transversality:.3e})")
    return 1 if ev.value > 0 else -1
