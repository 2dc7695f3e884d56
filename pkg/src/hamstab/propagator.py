"""Fundamental solutions of ``z' = J B(t) z`` and iterated integrals.

Integration uses scipy's DOP853 (explicit Runge-Kutta 8(5,3) with dense
output). Coefficient paths carry their non-smooth points; the integration
is restarted at every kink so that no step straddles one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import AccuracyError, DimensionError, StiffnessError
from .symplectic import standard_j

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class CoefficientPath:
    """Continuous path of symmetric ``2n x 2n`` matrices on ``[0, T]``."""

    n: int
    T: float
    func: Callable[[float], np.ndarray]
    kink_points: tuple = ()
    label: str = ""
    constant_value: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("period length must be positive")
        kinks = sorted(float(k) for k in self.kink_points if 0.0 < k < self.T)
        object.__setattr__(self, "kink_points", tuple(kinks))

    def __call__(self, t: float) -> np.ndarray:
        return self.func(t)

    eval = __call__

    @classmethod
    def constant(cls, M, T: float, label: str = "") -> "CoefficientPath":
        M = np.array(M, dtype=float)
        n = M.shape[0] // 2
        if M.shape != (2 * n, 2 * n) or not np.allclose(M, M.T, atol=1e-12):
            raise DimensionError("constant coefficient must be a symmetric 2n x 2n matrix")
        M.setflags(write=False)
        return cls(n, float(T), lambda t, _M=M: _M, (), label, M)

    @classmethod
    def zero(cls, n: int, T: float) -> "CoefficientPath":
        return cls.constant(np.zeros((2 * n, 2 * n)), T, "zero")

    @property
    def is_constant(self) -> bool:
        return self.constant_value is not None

    def restrict(self, T_new: float) -> "CoefficientPath":
        """Same coefficients on the shorter horizon ``[0, T_new]``."""
        if not 0 < T_new <= self.T * (1 + 1e-14):
            raise ValueError("restriction horizon must lie in (0, T]")
        return CoefficientPath(self.n, float(T_new), self.func, self.kink_points,
                               self.label, self.constant_value)

    def scaled(self, c: float) -> "CoefficientPath":
        if self.is_constant:
            return CoefficientPath.constant(c * self.constant_value, self.T, self.label)
        f = self.func
        return CoefficientPath(self.n, self.T, lambda t: c * f(t), self.kink_points, self.label)

    def __add__(self, other: "CoefficientPath") -> "CoefficientPath":
        _check_compatible(self, other)
        if self.is_constant and other.is_constant:
            return CoefficientPath.constant(self.constant_value + other.constant_value, self.T)
        f, g = self.func, other.func
        return CoefficientPath(self.n, self.T, lambda t: f(t) + g(t),
                               self.kink_points + other.kink_points)

    def conjugated(self, U: np.ndarray) -> "CoefficientPath":
        """``U^T B(t) U``; used for symplectic changes of basis."""
        U = np.asarray(U, dtype=float)
        if self.is_constant:
            return CoefficientPath.constant(U.T @ self.constant_value @ U, self.T, self.label)
        f = self.func
        return CoefficientPath(self.n, self.T, lambda t: U.T @ f(t) @ U,
                               self.kink_points, self.label)


def _check_compatible(a: CoefficientPath, b: CoefficientPath):
    if a.n != b.n:
        raise DimensionError(f"half-dimensions differ: {a.n} vs {b.n}")
    if abs(a.T - b.T) > 1e-12 * max(1.0, a.T):
        raise DimensionError(f"horizons differ: {a.T} vs {b.T}")


def breakpoints(T: float, *kink_lists: Sequence[float]) -> np.ndarray:
    pts = {0.0, float(T)}
    for kinks in kink_lists:
        pts.update(float(k) for k in kinks if 0.0 < k < T)
    pts = np.array(sorted(pts))
    keep = np.concatenate([[True], np.diff(pts) > 1e-13 * max(1.0, T)])
    pts = pts[keep]
    pts[-1] = T
    return pts


def integrate_linear(rhs, y0: np.ndarray, nodes: np.ndarray, tol: float):
    """Integrate ``y' = rhs(t, y)`` through the breakpoints ``nodes``.

    Returns ``(times, states, dense)`` where ``dense`` is a list of
    ``(t_start, t_end, OdeSolution)`` segments.
    """
    times, states, dense = [nodes[0]], [y0.copy()], []
    y = y0
    rtol = max(tol * 0.1, 2.3e-14)
    atol = tol * 0.1
    for a, b in zip(nodes[:-1], nodes[1:]):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True)
        if sol.status != 0:
            raise StiffnessError(f"integration failed on [{a:.6g}, {b:.6g}]: {sol.message}")
        times.extend(sol.t[1:])
        states.extend(sol.y[:, 1:].T)
        dense.append((a, b, sol.sol))
        y = sol.y[:, -1]
    return np.array(times), np.array(states), dense


def _relative_defect(M: np.ndarray, J: np.ndarray) -> float:
    scale = max(1.0, float(np.linalg.norm(M, 2)) ** 2)
    return float(np.max(np.abs(M.T @ J @ M - J))) / scale


@dataclass(frozen=True)
class SymplecticPath:
    """Sampled fundamental solution with dense output."""

    coeffs: CoefficientPath
    grid: np.ndarray
    values: np.ndarray
    accuracy: float
    tol: float
    _dense: list = field(repr=False, compare=False, default_factory=list)

    @property
    def n(self) -> int:
        return self.coeffs.n

    @property
    def T(self) -> float:
        return self.coeffs.T

    @property
    def monodromy(self) -> np.ndarray:
        return self.values[-1]

    def dense_eval(self, t: float) -> np.ndarray:
        m = 2 * self.n
        if t <= 0.0:
            return self.values[0]
        for a, b, sol in self._dense:
            if t <= b:
                return sol(min(max(t, a), b))[: m * m].reshape(m, m)
        return self.values[-1]

    __call__ = dense_eval

    def max_symplectic_defect(self) -> float:
        J = standard_j(self.n)
        return max(_relative_defect(M, J) for M in self.values)


def _hamiltonian_rhs(coeffs: CoefficientPath):
    m = 2 * coeffs.n
    J = standard_j(coeffs.n)
    if coeffs.is_constant:
        JB = J @ coeffs.constant_value
        return lambda t, y: (JB @ y.reshape(m, m)).ravel()
    f = coeffs.func
    return lambda t, y: (J @ f(t) @ y.reshape(m, m)).ravel()


def fundamental_solution(coeffs: CoefficientPath, tol: float = DEFAULT_TOL,
                         extra_nodes: Sequence[float] = (), certify: bool = False) -> SymplecticPath:
    """Solve ``gamma' = J B(t) gamma``, ``gamma(0) = I`` on ``[0, T]``.

    Parameters
    ----------
    coeffs : CoefficientPath
    tol : float
        Target accuracy. Local error control runs at ``tol / 10``.
    extra_nodes : sequence of float
        Additional times forced onto the grid (e.g. ``T/2``).
    certify : bool
        If true, the global error is estimated by re-integrating at
        ``tol / 100`` and the more accurate run is returned.

    Raises
    ------
    StiffnessError
        The step size underflowed.
    AccuracyError
        The relative symplectic defect exceeds ``100 * tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = 2 * coeffs.n
    nodes = breakpoints(coeffs.T, coeffs.kink_points, extra_nodes)
    rhs = _hamiltonian_rhs(coeffs)
    y0 = np.eye(m).ravel()
    times, states, dense = integrate_linear(rhs, y0, nodes, tol)
    accuracy = tol
    if certify:
        t2, s2, d2 = integrate_linear(rhs, y0, nodes, tol / 100)
        diff = np.max(np.abs(s2[-1] - states[-1])) / max(1.0, np.max(np.abs(s2[-1])))
        times, states, dense = t2, s2, d2
        accuracy = max(float(diff), tol / 100)
    values = states.reshape(-1, m, m)
    J = standard_j(coeffs.n)
    defect = max(_relative_defect(M, J) for M in values)
    if defect > 100 * tol:
        raise AccuracyError(f"symplectic defect {defect:.3e} exceeds 100 x tol = {100 * tol:.1e}")
    accuracy = max(accuracy, defect)
    values.setflags(write=False)
    return SymplecticPath(coeffs, times, values, accuracy, tol, dense)


def monodromy(coeffs: CoefficientPath, tol: float = DEFAULT_TOL, at: float = None) -> np.ndarray:
    """``gamma(T)`` (or ``gamma(at)``) without keeping the sampled path."""
    if at is not None and at < coeffs.T:
        coeffs = coeffs.restrict(at)
    m = 2 * coeffs.n
    nodes = breakpoints(coeffs.T, coeffs.kink_points)
    _, states, _ = integrate_linear(_hamiltonian_rhs(coeffs), np.eye(m).ravel(), nodes, tol)
    return states[-1].reshape(m, m)


@dataclass(frozen=True)
class IteratedIntegrals:
    order: int
    matrices: tuple

    def __getitem__(self, j: int) -> np.ndarray:
        """``M_j`` with 1-based ``j``."""
        return self.matrices[j - 1]


def iterated_integrals(gamma0: SymplecticPath, D: CoefficientPath, order: int = 2,
                       tol: float = None) -> IteratedIntegrals:
    """Ordered integrals ``M_j`` of ``J D^(t)``, ``D^ = gamma0^T D gamma0``.

    ``M_j`` is the value at ``T`` of ``Y_j' = J D^ Y_{j-1}``, ``Y_j(0) = 0``,
    ``Y_0 = I``, integrated together with ``gamma0`` itself so that all of
    them share one step-size controller.
    """
    B = gamma0.coeffs
    _check_compatible(B, D)
    if order < 1:
        raise ValueError("order must be >= 1")
    tol = gamma0.tol if tol is None else tol
    n, m = B.n, 2 * B.n
    J = standard_j(n)
    fB, fD = B.func, D.func
    blk = m * m

    def rhs(t, y):
        Y = y.reshape(order + 1, m, m)
        g = Y[0]
        JDhat = J @ (g.T @ fD(t) @ g)
        out = np.empty_like(Y)
        out[0] = J @ fB(t) @ g
        out[1] = JDhat
        for j in range(2, order + 1):
            out[j] = JDhat @ Y[j - 1]
        return out.ravel()

    y0 = np.zeros((order + 1) * blk)
    y0[:blk] = np.eye(m).ravel()
    nodes = breakpoints(B.T, B.kink_points, D.kink_points)
    _, states, _ = integrate_linear(rhs, y0, nodes, tol)
    final = states[-1].reshape(order + 1, m, m)
    return IteratedIntegrals(order, tuple(final[1:].copy()))
