"""Brake-symmetry splitting of S-periodic problems into two Lagrangian ones.

With ``N`` an anti-symplectic orthogonal involution and ``S`` orthogonal
symplectic satisfying ``N S^T = S N``, coefficients with
``N B(T - t) = B(t) N`` split the S-periodic problem on ``[0, T]`` into the
half-period problems ``z(0) in V(+-)(SN)``, ``z(T/2) in V(+-)(N)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBaseProblem, DegenerateFactor, DimensionError
from .hill import frame_matrix, transversality
from .propagator import DEFAULT_TOL, CoefficientPath, fundamental_solution
from .symplectic import BoundaryPair, BrakeSymmetryData, normalize_boundary_pair, rotation


def check_brake_symmetry(B: CoefficientPath, D: CoefficientPath, sym: BrakeSymmetryData,
                         samples: int = 257, tol: float = 1e-10) -> bool:
    """True iff ``N B(T-t) = B(t) N`` and ``N D(T-t) = D(t) N`` on a sample grid."""
    if B.n != sym.n or D.n != sym.n:
        raise DimensionError("symmetry and coefficient dimensions differ")
    N, T = sym.N, B.T
    for t in np.linspace(0.0, T, samples):
        for C in (B, D):
            a, b = C(T - t), C(t)
            scale = max(1.0, float(np.max(np.abs(b))))
            if np.max(np.abs(N @ a - b @ N)) > tol * scale:
                return False
    return True


@dataclass(frozen=True)
class SplitBoundaries:
    plus: BoundaryPair
    minus: BoundaryPair
    T_half: float


def split_boundaries(sym: BrakeSymmetryData, T: float) -> SplitBoundaries:
    """Half-period boundary pairs ``V(+-)(SN) -> V(+-)(N)`` in original coordinates."""
    n = sym.n
    U = sym.basis_change
    half = rotation(sym.theta_S / 2)
    Zp = np.vstack([np.eye(n), np.zeros((n, n))])
    Zm = np.vstack([np.zeros((n, n)), np.eye(n)])
    plus = normalize_boundary_pair(U @ half @ Zp, U @ Zp)
    minus = normalize_boundary_pair(U @ half @ Zm, U @ Zm)
    return SplitBoundaries(plus, minus, T / 2)


@dataclass(frozen=True)
class DecompositionReport:
    periodic_ratio: float
    plus_ratio: float
    minus_ratio: float
    product_residual: float
    block_residuals: tuple
    display_residuals: tuple

    @property
    def max_residual(self) -> float:
        return max((self.product_residual,) + self.block_residuals + self.display_residuals)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def decomposition_check(B: CoefficientPath, D: CoefficientPath, sym: BrakeSymmetryData,
                        tol: float = DEFAULT_TOL, degeneracy_tol: float = 1e-8) -> DecompositionReport:
    """Evaluate both sides of the brake decomposition of the S-periodic Hill ratio.

    Computes ``det(S g1(T) - I) / det(S g0(T) - I)``, the two half-period
    Lagrangian ratios, and the block identity
    ``det(S g(T) - I) = (-1)^n 4^n det(b) det(c)`` for ``M^ = g(T/2) R_{theta/2}``.
    """
    n, T = sym.n, B.T
    eye = np.eye(2 * n)
    S = sym.S
    paths = [fundamental_solution(C, tol, extra_nodes=(T / 2,)) for C in (B, B + D)]
    full = [p.monodromy for p in paths]
    half = [p.dense_eval(T / 2) for p in paths]

    per = [float(np.linalg.det(S @ G - eye)) for G in full]
    if abs(per[0]) < degeneracy_tol * max(1.0, np.linalg.norm(full[0], 2)) ** (2 * n):
        raise DegenerateFactor("S-periodic base problem is degenerate", "periodic")
    split = split_boundaries(sym, T)
    ratios = []
    for name, pair in (("plus", split.plus), ("minus", split.minus)):
        try:
            transversality(pair, half[0], degeneracy_tol)
        except DegenerateBaseProblem as exc:
            raise DegenerateFactor(f"{name} half-period base problem is degenerate", name) from exc
        num = np.linalg.det(frame_matrix(half[1], pair))
        den = np.linalg.det(frame_matrix(half[0], pair))
        ratios.append(float(num / den))
    periodic_ratio = per[1] / per[0]
    product_residual = _rel(periodic_ratio, ratios[0] * ratios[1])

    U = sym.basis_change
    R = rotation(sym.theta_S / 2)
    Zp = np.vstack([np.eye(n), np.zeros((n, n))])
    Zm = np.vstack([np.zeros((n, n)), np.eye(n)])
    block, display = [], []
    for G_half, value in zip(half, per):
        Mh = U.T @ G_half @ U @ R
        b, c = Mh[:n, n:], Mh[n:, :n]
        db, dc = float(np.linalg.det(b)), float(np.linalg.det(c))
        block.append(_rel(value, (-1) ** n * 4 ** n * db * dc))
        Gn = U.T @ G_half @ U
        display.append(_rel(float(np.linalg.det(np.hstack([Gn @ R @ Zp, Zp]))), (-1) ** n * dc))
        display.append(_rel(float(np.linalg.det(np.hstack([Gn @ R @ Zm, Zm]))), db))
    return DecompositionReport(periodic_ratio, ratios[0], ratios[1], product_residual,
                               tuple(block), tuple(display))
