"""Builtin test systems and the sampled-coefficient text format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import ere
from .errors import ConfigError, FormatError
from .propagator import CoefficientPath
from .symplectic import BoundaryPair, BrakeSymmetryData, LagrangianFrame, normalize_boundary_pair


@dataclass(frozen=True)
class System:
    """Coefficients plus boundary data.

    Lagrangian problems carry ``boundary``; periodic ones carry ``S`` and,
    when brake-symmetric, ``sym``.
    """

    name: str
    B: CoefficientPath
    D: CoefficientPath
    boundary: BoundaryPair = None
    S: np.ndarray = None
    sym: BrakeSymmetryData = None
    params: dict = field(default_factory=dict)

    def with_boundary(self, boundary: BoundaryPair) -> "System":
        return System(self.name, self.B, self.D, boundary, self.S, self.sym, dict(self.params))


def dirichlet_boundary(n: int = 1) -> BoundaryPair:
    """``V0`` horizontal, ``V1`` vertical (all angles ``pi/2``)."""
    return normalize_boundary_pair(LagrangianFrame.horizontal(n), LagrangianFrame.vertical(n))


def angle_boundary(theta) -> BoundaryPair:
    """``V0`` horizontal, ``V1`` spanned by ``(cos theta_j e_j + sin theta_j e_{n+j})``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return normalize_boundary_pair(LagrangianFrame.horizontal(len(theta)), LagrangianFrame.from_angles(theta))


def _counterexample(T: float = 1.0):
    D = CoefficientPath.constant(np.array([[0.0, 1.0], [1.0, 0.0]]), T, "offdiag")
    return System("counterexample33", CoefficientPath.zero(1, T), D, dirichlet_boundary(1), params={"T": T})


def _dirichlet_free(T: float = 1.0):
    return System("dirichlet-free", CoefficientPath.zero(1, T), CoefficientPath.constant(np.eye(2), T, "I"),
                  dirichlet_boundary(1), params={"T": T})


def _constant_nu(nu: float = 0.3, T: float = 1.0):
    B = CoefficientPath.constant(nu * np.eye(2), T, f"{nu:g} I")
    return System("constant-nu", B, CoefficientPath.constant(np.eye(2), T, "I"), dirichlet_boundary(1),
                  params={"nu": nu, "T": T})


def _ere(kind: str, param: float, e: float = 0.1, S: int = -1, half: str = None):
    if S not in (1, -1):
        raise ConfigError(f"S must be +1 or -1, got {S}")
    cfg = ere.EREKind(kind, float(param), float(e))
    B = ere.meyer_schmidt_system(cfg.with_e(0.0))
    D = ere.perturbation(cfg)
    key = "beta" if kind == "lagrange" else "delta"
    params = {key: float(param), "e": float(e), "S": S, "half": half}
    sym = ere.brake_data(S)
    if half is None:
        return System(kind, B, D, None, S * np.eye(4), sym, params)
    if half not in ("plus", "minus"):
        raise ConfigError(f"half must be 'plus' or 'minus', got {half!r}")
    split = ere.half_period_boundaries(S)
    pair = split.plus if half == "plus" else split.minus
    return System(kind, B.restrict(math.pi), D.restrict(math.pi), pair, None, None, params)


def _lagrange(beta: float = 1.0, e: float = 0.1, S: int = -1, half: str = None):
    return _ere("lagrange", beta, e, S, half)


def _euler(delta: float = 0.5, e: float = 0.1, S: int = -1, half: str = None):
    return _ere("euler", delta, e, S, half)


BUILTINS = {
    "counterexample33": _counterexample,
    "dirichlet-free": _dirichlet_free,
    "constant-nu": _constant_nu,
    "lagrange": _lagrange,
    "euler": _euler,
}


def builtin_system(name: str, **params) -> System:
    """Look up a builtin system; unknown names or parameters raise ``ConfigError``.

    ERE systems (``lagrange``, ``euler``) use ``B = B_0`` (circular orbit)
    and ``D = B_e - B_0``. Without ``half`` they describe the ``S``-periodic
    problem on ``[0, 2 pi]``; with ``half = 'plus' | 'minus'`` the
    corresponding brake half-period Lagrangian problem on ``[0, pi]``.
    """
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown system {name!r}; choose from {sorted(BUILTINS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# sampled coefficient tables
#
#   # kinks: 0.5 1.25           (optional)
#   t  B11 B12 ... B(2n)(2n)  D11 ... D(2n)(2n)
#
# B and D are given by their upper triangles in row-major order.


def _dim_from_columns(ncol: int) -> int:
    # ncol = 1 + 2 * m (m + 1) / 2 with m = 2n
    m = int(round((-1 + math.sqrt(1 + 4 * (ncol - 1))) / 2))
    if m < 2 or m % 2 or m * (m + 1) != ncol - 1:
        raise FormatError(f"{ncol} columns do not match 1 + 2 * (2n)(2n+1)/2 for any n")
    return m // 2


def _from_upper(rows: np.ndarray, m: int) -> np.ndarray:
    iu = np.triu_indices(m)
    out = np.zeros((len(rows), m, m))
    out[:, iu[0], iu[1]] = rows
    out[:, iu[1], iu[0]] = rows
    return out


def _read_table(path):
    kinks = []
    data = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                body = s[1:].strip()
                if body.lower().startswith("kinks:"):
                    try:
                        kinks = [float(x) for x in body[6:].replace(",", " ").split()]
                    except ValueError:
                        raise FormatError(f"line {lineno}: bad kink list") from None
                continue
            try:
                data.append([float(x) for x in s.replace(",", " ").split()])
            except ValueError:
                raise FormatError(f"line {lineno}: non-numeric entry") from None
    if len(data) < 2:
        raise FormatError("need at least two sample rows")
    if len({len(r) for r in data}) != 1:
        raise FormatError("rows have differing column counts")
    return np.array(data), kinks


def _interpolant(t: np.ndarray, mats: np.ndarray, kinks, label: str) -> CoefficientPath:
    n = mats.shape[1] // 2
    T = float(t[-1] - t[0])
    if np.all(np.abs(mats - mats[0]) <= 1e-15 * max(1.0, np.max(np.abs(mats)))):
        return CoefficientPath.constant(mats[0], T, label)
    t = t - t[0]
    edges = [0.0] + [k for k in kinks if 0.0 < k < T] + [T]
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        mask = (t >= a - 1e-14) & (t <= b + 1e-14)
        if mask.sum() < 2:
            raise FormatError(f"segment [{a}, {b}] between kinks has fewer than two samples")
        pieces.append((b, CubicSpline(t[mask], mats[mask], axis=0)))

    def func(s):
        for b, sp in pieces:
            if s <= b:
                return sp(s)
        return pieces[-1][1](s)

    return CoefficientPath(n, T, func, tuple(edges[1:-1]), label)


def load_sampled_coefficients(path):
    """Read a sampled table and return piecewise-cubic ``(B, D)`` paths.

    Time is shifted so the first row sits at ``t = 0``. Kink points from
    the optional ``# kinks:`` header split the interpolation into
    independent cubic segments.

    Raises
    ------
    FormatError
        Non-monotone ``t``, bad column count or malformed rows.
    """
    data, kinks = _read_table(path)
    t = data[:, 0]
    if np.any(np.diff(t) <= 0):
        raise FormatError("sample times must be strictly increasing")
    m = 2 * _dim_from_columns(data.shape[1])
    k = m * (m + 1) // 2
    Bs = _from_upper(data[:, 1:1 + k], m)
    Ds = _from_upper(data[:, 1 + k:], m)
    kinks = [x - t[0] for x in kinks]
    return _interpolant(t, Bs, kinks, "sampled B"), _interpolant(t, Ds, kinks, "sampled D")


def export_sampled_coefficients(B: CoefficientPath, D: CoefficientPath, path, samples: int = 2001):
    """Write ``B`` and ``D`` in the sampled format, with samples on every kink."""
    if B.n != D.n or not math.isclose(B.T, D.T):
        raise ConfigError("B and D must share dimension and period")
    kinks = sorted(set(B.kink_points) | set(D.kink_points))
    t = np.union1d(np.linspace(0.0, B.T, samples), kinks)
    iu = np.triu_indices(2 * B.n)
    rows = [np.r_[s, B(s)[iu], D(s)[iu]] for s in t]
    header = f"hamstab sampled coefficients n={B.n} T={B.T!r}"
    if kinks:
        header += "\nkinks: " + " ".join(repr(float(k)) for k in kinks)
    np.savetxt(path, np.array(rows), fmt="%.17g", header=header)
