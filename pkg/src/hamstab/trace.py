"""Conditional traces ``Tr F^m`` from the matrices ``G_j = P^{-1} M_j (Z0, 0)``."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.integrate import quad_vec, solve_ivp

from .errors import DegenerateBaseProblem, DimensionError, StiffnessError
from .hill import HillData, hill_ratio, transversality
from .propagator import (DEFAULT_TOL, CoefficientPath, IteratedIntegrals, breakpoints,
                         fundamental_solution, iterated_integrals)
from .symplectic import BoundaryPair, orthonormal_frame, rotation, standard_j


@dataclass(frozen=True)
class TraceReport:
    G1: np.ndarray
    G2: np.ndarray
    tr1: float
    tr2: float
    f_samples: list = field(default_factory=list)


def g_matrices(hill: HillData, integrals: IteratedIntegrals):
    """``G_j = P^{-1} M_j (Z0, 0)`` for ``j = 1 .. order``.

    In normal form ``(Z0, 0) = diag(I, 0)``; in general it is ``P diag(I, 0)``.
    """
    m = 2 * hill.n
    if integrals.matrices[0].shape != (m, m):
        raise DimensionError("iterated integrals do not match the boundary dimension")
    if hill.transversality_normalized <= 0:
        raise DegenerateBaseProblem("P is singular")
    Pinv = np.linalg.inv(hill.P)
    Qd = hill.Qd_frame
    return tuple(Pinv @ M @ Qd for M in integrals.matrices)


def _compositions(m: int, k: int):
    """Ordered tuples of ``k`` positive integers summing to ``m``."""
    for parts in product(range(1, m - k + 2), repeat=k):
        if sum(parts) == m:
            yield parts


def trace_power(gs, m: int) -> float:
    """``Tr F^m = m sum_k (-1)^k / k sum_{j1+..+jk=m} Tr(G_j1 ... G_jk)``.

    ``gs`` holds ``G_1 .. G_m`` (at least ``m`` of them).
    """
    if len(gs) < m:
        raise ValueError(f"need G_1 .. G_{m}, got {len(gs)} matrices")
    total = 0.0
    for k in range(1, m + 1):
        inner = 0.0
        for parts in _compositions(m, k):
            prod = gs[parts[0] - 1]
            for j in parts[1:]:
                prod = prod @ gs[j - 1]
            inner += np.trace(prod)
        total += (-1) ** k / k * inner
    return float(m * total)


def trace_powers(G1, G2) -> TraceReport:
    tr1 = -float(np.trace(G1))
    tr2 = float(np.trace(G1 @ G1) - 2.0 * np.trace(G2))
    return TraceReport(np.asarray(G1), np.asarray(G2), tr1, tr2)


def conditional_traces(B: CoefficientPath, D: CoefficientPath, boundary: BoundaryPair,
                       tol: float = DEFAULT_TOL, alphas=()) -> TraceReport:
    """Propagate, build ``P``, ``M_1``, ``M_2`` and return ``Tr F``, ``Tr F^2``.

    ``alphas`` optionally requests samples of ``f(alpha)`` for the report.
    """
    gamma0 = fundamental_solution(B, tol)
    hd = transversality(boundary, gamma0)
    G1, G2 = g_matrices(hd, iterated_integrals(gamma0, D, 2, tol))
    report = trace_powers(G1, G2)
    for a in alphas:
        report.f_samples.append((float(a), hill_ratio(B, D, boundary, a, tol, gamma0=gamma0)))
    return report


def _sup_norm(C: CoefficientPath, samples: int = 33) -> float:
    if C.is_constant:
        return float(np.linalg.norm(C.constant_value, 2))
    return max(float(np.linalg.norm(C(t), 2)) for t in np.linspace(0.0, C.T, samples))


def frame_traces(B: CoefficientPath, D: CoefficientPath, boundary: BoundaryPair,
                 tol: float = DEFAULT_TOL, degeneracy_tol: float = 1e-8):
    """``(Tr F, Tr F^2)`` as ``-(log f)'(0)`` and ``-(log f)''(0)``, well conditioned.

    Propagates the frame ``Z = gamma_alpha Z0`` with its first two
    ``alpha``-derivatives ``Y, X`` and re-orthonormalizes on short pieces.
    Each renormalization is a right factor ``K(alpha) = C + alpha E +
    alpha^2 H / 2`` whose log-determinant derivatives are tracked exactly,
    so the growth of ``gamma0`` never enters the arithmetic. Agrees with
    the ``G_j`` route when that one is well conditioned.
    """
    n, T = B.n, B.T
    if D.n != n or boundary.n != n:
        raise DimensionError("coefficient and boundary half-dimensions differ")
    J = standard_j(n)
    m = 2 * n
    rate = 2.0 * (_sup_norm(B) + _sup_norm(D)) + 1.0
    nodes = breakpoints(T, B.kink_points, D.kink_points)
    pieces = []
    for a, b in zip(nodes[:-1], nodes[1:]):
        k = max(1, int(np.ceil((b - a) * rate / 2.0)))
        edges = np.linspace(a, b, k + 1)
        pieces.extend(zip(edges[:-1], edges[1:]))
    fB, fD = B.func, D.func

    def rhs(t, y):
        Z, Y, X = y.reshape(3, m, n)
        JB, JD = J @ fB(t), J @ fD(t)
        return np.concatenate([(JB @ Z).ravel(), (JB @ Y + JD @ Z).ravel(),
                               (JB @ X + 2.0 * JD @ Y).ravel()])

    Z = orthonormal_frame(boundary.Z0)
    Y = np.zeros((m, n))
    X = np.zeros((m, n))
    L1 = L2 = 0.0
    rtol = max(tol * 0.1, 2.3e-14)
    for a, b in pieces:
        sol = solve_ivp(rhs, (a, b), np.concatenate([Z.ravel(), Y.ravel(), X.ravel()]),
                        method="DOP853", rtol=rtol, atol=tol * 0.1)
        if sol.status != 0:
            raise StiffnessError(f"integration failed on [{a:.6g}, {b:.6g}]: {sol.message}")
        Z, Y, X = sol.y[:, -1].reshape(3, m, n)
        Q, R = np.linalg.qr(Z)
        C = np.linalg.inv(R)
        Yc = Y @ C
        A = Q.T @ Yc                      # C^{-1} E = -A
        E = -C @ A
        Xt = X @ C + 2.0 * Y @ E
        Bq = Q.T @ Xt                     # C^{-1} H = -Bq
        L1 -= np.trace(A)
        L2 += -np.trace(Bq) - np.trace(A @ A)
        Z, Y, X = Q, Yc - Q @ A, Xt - Q @ Bq
    Z1 = orthonormal_frame(boundary.Z1)
    W = np.hstack([Z, Z1])
    if abs(np.linalg.det(W)) < degeneracy_tol:
        raise DegenerateBaseProblem("V0 and gamma0(T)^-1 V1 are not transversal")
    zero = np.zeros((m, n))
    A1 = np.linalg.solve(W, np.hstack([Y, zero]))
    A2 = np.linalg.solve(W, np.hstack([X, zero]))
    d1 = np.trace(A1) - L1
    d2 = np.trace(A2) - np.trace(A1 @ A1) - L2
    return float(-d1), float(-d2)


def constant_coefficient_trace(nu: float, D: CoefficientPath, boundary: BoundaryPair,
                               tol: float = DEFAULT_TOL) -> float:
    """Closed-form ``Tr F(nu, D)`` for ``B = nu I``::

        sum_j cot(theta_j - T nu) int (D~ e_j, e_j) dt + sum_j int (D~ e_{n+j}, e_j) dt

    with ``D~(t) = exp(-nu J t) D(t) exp(nu J t)``, evaluated in the normal-form
    basis of ``boundary``.
    """
    n, T = D.n, D.T
    if boundary.n != n:
        raise DimensionError("boundary and coefficient half-dimensions differ")
    s = np.sin(boundary.theta - T * nu)
    if np.min(np.abs(s)) < 1e-12:
        raise DegenerateBaseProblem(f"resonance: sin(theta_j - T nu) = 0 for nu = {nu}")
    cot = np.cos(boundary.theta - T * nu) / s
    Dn = D.conjugated(boundary.basis_change)

    def integrand(t):
        # exp(nu J t) = R_{nu t}; J commutes with it
        E = rotation(np.full(n, nu * t))
        Dt = E.T @ Dn(t) @ E
        return np.r_[np.diag(Dt[:n, :n]), np.diag(Dt[n:, :n])]

    nodes = breakpoints(T, D.kink_points)
    total = np.zeros(2 * n)
    for a, b in zip(nodes[:-1], nodes[1:]):
        val, _ = quad_vec(integrand, a, b, epsabs=tol * 0.1, epsrel=tol * 0.1)
        total += val
    return float(cot @ total[:n] + np.sum(total[n:]))


def commuting_part(D: CoefficientPath) -> CoefficientPath:
    """``(D - J D J) / 2``, the part of ``D`` commuting with ``J``."""
    return _j_split(D, +1)


def anticommuting_part(D: CoefficientPath) -> CoefficientPath:
    """``(D + J D J) / 2``, the part of ``D`` anticommuting with ``J``."""
    return _j_split(D, -1)


def _j_split(D: CoefficientPath, sign: int) -> CoefficientPath:
    J = standard_j(D.n)
    if D.is_constant:
        M = D.constant_value
        return CoefficientPath.constant((M - sign * J @ M @ J) / 2, D.T)
    f = D.func
    return CoefficientPath(D.n, D.T, lambda t: (f(t) - sign * J @ f(t) @ J) / 2, D.kink_points)
