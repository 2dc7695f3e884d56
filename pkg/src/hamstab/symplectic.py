"""Symplectic matrices, Lagrangian frames and the boundary-pair normal form.

Conventions: ``J = [[0, -I], [I, 0]]``; a Lagrangian frame is a ``2n x n``
matrix ``Z = (X; Y)`` of rank ``n`` with ``X^T Y`` symmetric. Orthogonal
symplectic matrices are identified with unitary ``n x n`` matrices through
``U = Ur + i Ui  <->  [[Ur, -Ui], [Ui, Ur]]``, under which ``J`` acts as
multiplication by ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidFrame, InvalidSymmetry

SYMPLECTIC_TOL = 1e-9
FRAME_TOL = 1e-10
RANK_TOL = 1e-10


def standard_j(n: int) -> np.ndarray:
    """Return the ``2n x 2n`` standard symplectic matrix."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def half_dim(M) -> int:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise DimensionError(f"expected a square matrix of even size, got shape {M.shape}")
    return M.shape[0] // 2


def symplectic_defect(M) -> float:
    """Max-norm of ``M^T J M - J``."""
    M = np.asarray(M, dtype=float)
    J = standard_j(half_dim(M))
    return float(np.max(np.abs(M.T @ J @ M - J)))


def is_symplectic(M, tol: float = SYMPLECTIC_TOL) -> bool:
    return symplectic_defect(M) <= tol


def complex_to_real(U: np.ndarray) -> np.ndarray:
    """Realify an ``n x n`` complex matrix into the ``2n x 2n`` block form."""
    Ur, Ui = U.real, U.imag
    return np.block([[Ur, -Ui], [Ui, Ur]])


def rotation(theta) -> np.ndarray:
    """``R_theta = [[cos, -sin], [sin, cos]]`` with diagonal blocks."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return complex_to_real(np.diag(np.exp(1j * theta)))


def _frame_shape(Z) -> int:
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[0] != 2 * Z.shape[1] or Z.shape[1] == 0:
        raise DimensionError(f"a Lagrangian frame must be 2n x n, got shape {Z.shape}")
    return Z.shape[1]


def check_lagrangian_frame(Z, frame_tol: float = FRAME_TOL, rank_tol: float = RANK_TOL) -> bool:
    """True iff ``Z`` has full rank and spans an isotropic subspace.

    The isotropy test is applied to the orthonormalized frame so that the
    tolerance does not depend on the scale of the columns.
    """
    n = _frame_shape(Z)
    Z = np.asarray(Z, dtype=float)
    s = np.linalg.svd(Z, compute_uv=False)
    if s[-1] <= rank_tol * max(1.0, s[0]):
        return False
    Q = orthonormal_frame(Z)
    X, Y = Q[:n], Q[n:]
    return float(np.max(np.abs(X.T @ Y - Y.T @ X))) <= frame_tol


def orthonormal_frame(Z) -> np.ndarray:
    """Orthonormal basis (via thin QR) of the column span of ``Z``."""
    Q, _ = np.linalg.qr(np.asarray(Z, dtype=float))
    return Q


def subspace_distance(Za, Zb) -> float:
    """Spectral-norm distance between the orthogonal projectors onto two spans."""
    Qa, Qb = orthonormal_frame(Za), orthonormal_frame(Zb)
    return float(np.linalg.norm(Qa @ Qa.T - Qb @ Qb.T, 2))


@dataclass(frozen=True)
class SymplecticMatrix:
    entries: np.ndarray
    tol: float = SYMPLECTIC_TOL

    def __post_init__(self):
        M = np.array(self.entries, dtype=float)
        half_dim(M)
        M.setflags(write=False)
        object.__setattr__(self, "entries", M)
        if not is_symplectic(M, self.tol):
            raise ValueError(f"matrix is not symplectic (defect {symplectic_defect(M):.3e})")

    @property
    def n(self) -> int:
        return self.entries.shape[0] // 2


@dataclass(frozen=True)
class LagrangianFrame:
    columns: np.ndarray

    def __post_init__(self):
        Z = np.array(self.columns, dtype=float)
        _frame_shape(Z)
        if not check_lagrangian_frame(Z):
            raise InvalidFrame("columns do not span a Lagrangian subspace")
        Z.setflags(write=False)
        object.__setattr__(self, "columns", Z)

    @property
    def n(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def horizontal(cls, n: int) -> "LagrangianFrame":
        return cls(np.vstack([np.eye(n), np.zeros((n, n))]))

    @classmethod
    def vertical(cls, n: int) -> "LagrangianFrame":
        return cls(np.vstack([np.zeros((n, n)), np.eye(n)]))

    @classmethod
    def from_angles(cls, theta) -> "LagrangianFrame":
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return cls(np.vstack([np.diag(np.cos(theta)), np.diag(np.sin(theta))]))


def _as_frame(Z) -> np.ndarray:
    if isinstance(Z, LagrangianFrame):
        return Z.columns
    return np.asarray(Z, dtype=float)


def frame_pair_det(Za, Zb) -> float:
    """Determinant of the square matrix ``(Za, Zb)``."""
    Za, Zb = _as_frame(Za), _as_frame(Zb)
    if Za.shape != Zb.shape:
        raise DimensionError(f"frames differ in shape: {Za.shape} vs {Zb.shape}")
    _frame_shape(Za)
    return float(np.linalg.det(np.hstack([Za, Zb])))


def _frame_unitary(Z: np.ndarray) -> np.ndarray:
    n = Z.shape[1]
    Q = orthonormal_frame(Z)
    return Q[:n] + 1j * Q[n:]


def _joint_orthogonal_diagonalizer(Wsym: np.ndarray) -> np.ndarray:
    """Real orthogonal ``O`` with ``O^T Wsym O`` diagonal, for symmetric unitary ``Wsym``.

    ``Wsym = A + iB`` with commuting real symmetric ``A, B``; a generic real
    combination of the two shares their eigenvectors.
    """
    A, B = Wsym.real, Wsym.imag
    A, B = (A + A.T) / 2, (B + B.T) / 2
    best, best_off = None, np.inf
    for rho in (0.6180339887, 1.4142135623, -0.3819660113, 2.7182818284):
        _, O = np.linalg.eigh(A + rho * B)
        R = O.T @ Wsym @ O
        off = np.max(np.abs(R - np.diag(np.diag(R))))
        if off < best_off:
            best, best_off = O, off
        if off < 1e-10:
            break
    return best


@dataclass(frozen=True)
class BoundaryPair:
    """Two Lagrangian frames together with their normal form.

    ``basis_change`` maps the normal-form coordinates to the original ones:
    ``span(U @ (I; 0)) = span(V0)`` and ``span(U @ (C; S)) = span(V1)``.
    """

    V0: LagrangianFrame
    V1: LagrangianFrame
    theta: np.ndarray
    basis_change: np.ndarray

    @property
    def n(self) -> int:
        return self.V0.n

    @property
    def Z0(self) -> np.ndarray:
        return self.V0.columns

    @property
    def Z1(self) -> np.ndarray:
        return self.V1.columns

    def normal_frames(self):
        """``(Z0, Z1)`` of the normal form, in normal-form coordinates."""
        return (LagrangianFrame.horizontal(self.n).columns,
                LagrangianFrame.from_angles(self.theta).columns)

    def with_frames(self, Z0, Z1) -> "BoundaryPair":
        """Same subspaces, different frame representatives."""
        return BoundaryPair(LagrangianFrame(Z0), LagrangianFrame(Z1), self.theta, self.basis_change)


def _wrap_angles(theta: np.ndarray, tie_tol: float = 1e-12) -> np.ndarray:
    theta = np.where(theta <= -np.pi / 2 + tie_tol, theta + np.pi, theta)
    return np.where(theta > np.pi / 2 + tie_tol, theta - np.pi, theta)


def normalize_boundary_pair(V0, V1) -> BoundaryPair:
    """Bring ``(V0, V1)`` to ``Z0 = (I; 0)``, ``Z1 = (C(theta); S(theta))``.

    Angles lie in ``(-pi/2, pi/2]`` and are sorted ascending.
    """
    frames = []
    for V in (V0, V1):
        if not isinstance(V, LagrangianFrame):
            Z = np.asarray(V, dtype=float)
            _frame_shape(Z)
            if not check_lagrangian_frame(Z):
                raise InvalidFrame("boundary frame is not Lagrangian")
            V = LagrangianFrame(Z)
        frames.append(V)
    V0, V1 = frames
    if V0.n != V1.n:
        raise DimensionError("boundary frames have different half-dimensions")

    W0 = _frame_unitary(V0.columns)
    W1 = W0.conj().T @ _frame_unitary(V1.columns)
    # W1 W1^T = O diag(e^{2 i theta}) O^T with O real orthogonal
    O = _joint_orthogonal_diagonalizer(W1 @ W1.T)
    mu = np.diag(O.T @ W1 @ W1.T @ O)
    theta = _wrap_angles(np.angle(mu) / 2)
    order = np.argsort(theta, kind="stable")
    theta = theta[order]
    O = O[:, order]
    U = complex_to_real(W0 @ O)
    return BoundaryPair(V0, V1, theta, U)


@dataclass(frozen=True)
class BrakeSymmetryData:
    """Anti-symplectic orthogonal involution ``N`` and compatible ``S``."""

    N: np.ndarray
    S: np.ndarray
    tol: float = 1e-10
    theta_S: np.ndarray = field(default=None, compare=False)
    basis_change: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        N = np.array(self.N, dtype=float)
        S = np.array(self.S, dtype=float)
        n = half_dim(N)
        if S.shape != N.shape:
            raise DimensionError("N and S must have the same shape")
        J = standard_j(n)
        eye = np.eye(2 * n)
        tol = self.tol
        checks = {
            "N^2 = I": N @ N - eye,
            "N orthogonal": N.T @ N - eye,
            "NJ = -JN": N @ J + J @ N,
            "N S^T = S N": N @ S.T - S @ N,
            "S orthogonal": S.T @ S - eye,
            "S symplectic": S.T @ J @ S - J,
        }
        for name, residual in checks.items():
            if np.max(np.abs(residual)) > tol:
                raise InvalidSymmetry(f"brake symmetry data violates {name}")
        U, theta = _brake_normal_form(N, S)
        for M in (N, S, U, theta):
            M.setflags(write=False)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "theta_S", theta)
        object.__setattr__(self, "basis_change", U)

    @property
    def n(self) -> int:
        return self.N.shape[0] // 2


def _brake_normal_form(N: np.ndarray, S: np.ndarray):
    """Orthogonal symplectic ``U`` with ``U^T N U = diag(I, -I)``, ``U^T S U = R_theta``."""
    n = N.shape[0] // 2
    w, V = np.linalg.eigh((N + N.T) / 2)
    plus = V[:, w > 0]
    if plus.shape[1] != n or not check_lagrangian_frame(plus):
        raise InvalidSymmetry("+1 eigenspace of N is not Lagrangian")
    # the unitary of an orthonormal Lagrangian frame carries the horizontal
    # plane to V+(N) and, since J anticommutes with N, the vertical to V-(N)
    U = complex_to_real(plus[:n] + 1j * plus[n:])
    Sn = U.T @ S @ U
    C, Dm = Sn[:n, :n], Sn[n:, :n]
    O = _joint_orthogonal_diagonalizer(C + 1j * Dm)
    U = U @ np.kron(np.eye(2), O)
    Sn = U.T @ S @ U
    theta = np.arctan2(np.diag(Sn[n:, :n]), np.diag(Sn[:n, :n]))
    if np.max(np.abs(Sn - rotation(theta))) > 1e-9:
        raise InvalidSymmetry("S could not be brought to rotation normal form")
    return U, theta
