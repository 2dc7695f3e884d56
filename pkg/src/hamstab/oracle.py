"""Independent spectral checks for the Hill and trace formulas.

* shooting: real eigenvalues of ``-J z' = (B + lambda D) z`` with Lagrangian
  boundary conditions, as zeros of ``lambda -> det(gamma_lambda(T) Z0, Z1)``;
* eigen-sums ``sum lambda_j^{-m}`` with a lattice tail correction;
* Galerkin truncations of ``A - B`` on the eigenbasis of ``A``;
* relative Morse indices by counting oriented crossings along ``B + s D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import zeta

from .errors import (DegenerateBaseProblem, DegenerateEndpoint, DimensionError, NonRegularCrossing,
                     SuspectedEvenOrderRoot, TruncationResonance, WindowTooSmall)
from .hill import frame_matrix
from .propagator import (DEFAULT_TOL, CoefficientPath, breakpoints, fundamental_solution,
                         iterated_integrals, monodromy)
from .symplectic import BoundaryPair, half_dim, orthonormal_frame, standard_j

EIG_TOL = 1e-6
# dips of the smallest singular value above this are not inspected
SCREEN_SIGMA = 0.5


# ---------------------------------------------------------------------------
# locating singular points of a one-parameter matrix family


class SingularPoint(NamedTuple):
    param: float
    multiplicity: int
    sigma: float


def _smallest_singular_values(M):
    return np.linalg.svd(M, compute_uv=False)[::-1]


def find_singular_points(family: Callable, lo: float, hi: float, grid: int,
                         eig_tol: float = EIG_TOL, xtol: float = 1e-13,
                         skip_lo: bool = False, skip_hi: bool = False, max_subdivide: int = 3):
    """Zeros of ``p -> det(family(p)[0])`` on ``[lo, hi]``.

    ``family(p)`` returns ``(raw, normalized)``: ``raw`` has a continuous
    determinant (used for sign bracketing), ``normalized`` has scale-free
    singular values (used for multiplicity and for spotting even-order
    zeros that do not change sign).
    """
    ps = np.linspace(lo, hi, grid + 1)
    dets, sigmas = [], []
    for p in ps:
        raw, nrm = family(p)
        dets.append(float(np.linalg.det(raw)))
        sigmas.append(float(_smallest_singular_values(nrm)[0]))
    return _scan_cells(family, ps, np.array(dets), np.array(sigmas), eig_tol, xtol,
                       skip_lo, skip_hi, max_subdivide)


def _multiplicity(family, p, eig_tol):
    s = _smallest_singular_values(family(p)[1])
    return int(np.sum(s < eig_tol)), float(s[0])


def _polish_multiple(family, x, k, a, b, iters: int = 4):
    """Newton steps on the ``k x k`` block of ``family`` facing its near-kernel.

    Near a zero ``x0`` of geometric multiplicity ``k``,
    ``U^T M(x) V ~ U^T M'(x) V (x - x0)``, so the shift is the mean eigenvalue
    of ``-(U^T M' V)^{-1} U^T M V``. Smooth, unlike the V-shaped singular value.
    """
    for _ in range(iters):
        M = family(x)[0]
        u, _, vt = np.linalg.svd(M)
        U, V = u[:, -k:], vt[-k:].T
        h = 1e-6 * max(1.0, abs(x))
        dM = (family(x + h)[0] - family(x - h)[0]) / (2 * h)
        try:
            shift = np.linalg.eigvals(-np.linalg.solve(U.T @ dM @ V, U.T @ M @ V))
        except np.linalg.LinAlgError:
            break
        step = float(np.mean(shift.real))
        x_new = min(max(x + step, a), b)
        if abs(x_new - x) < 1e-15 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    return x


def _det_at(family, p):
    return float(np.linalg.det(family(p)[0]))


@dataclass(frozen=True)
class _GridZero:
    x: float


def _scan_cells(family, ps, dets, sigmas, eig_tol, xtol, skip_lo, skip_hi, depth):
    found = []
    sgn = np.sign(dets)
    last = len(ps) - 1
    changed = np.zeros(last, dtype=bool)
    for i in range(last):
        a, b = ps[i], ps[i + 1]
        if sgn[i] == 0 or sgn[i + 1] == 0:
            continue
        if sgn[i] != sgn[i + 1]:
            changed[i] = True
            r = brentq(lambda p: _det_at(family, p), a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
            mult, sig = _multiplicity(family, r, eig_tol)
            found.append(SingularPoint(r, max(mult, 1), sig))
    for i in range(last + 1):
        if sgn[i] == 0:
            mult, sig = _multiplicity(family, ps[i], eig_tol)
            found.append(SingularPoint(float(ps[i]), max(mult, 1), sig))
    # sign-preserving local minima of the smallest singular value
    for i in range(1, last):
        margin = 1e-9 * max(sigmas[i - 1], sigmas[i + 1])
        if not (sigmas[i] < sigmas[i - 1] - margin and sigmas[i] < sigmas[i + 1] - margin):
            continue
        if sigmas[i] > SCREEN_SIGMA:
            continue
        if changed[i - 1] or changed[i]:
            continue
        a, b = ps[i - 1], ps[i + 1]
        if sgn[i] == 0:
            # grid point landed on a zero (already recorded); look further only
            # if the determinant keeps its sign across it
            if sgn[i - 1] != sgn[i + 1]:
                continue
            res = _GridZero(float(ps[i]))
        else:
            res = minimize_scalar(lambda p: _smallest_singular_values(family(p)[1])[0],
                                  bounds=(a, b), method="bounded", options={"xatol": xtol})
            if res.fun >= eig_tol:
                continue
        mult, sig = _multiplicity(family, res.x, eig_tol)
        if sgn[i] == 0 and mult % 2 == 0:
            continue
        if mult % 2 == 0 and mult > 0:
            x = _polish_multiple(family, float(res.x), mult, a, b)
            mult, sig = _multiplicity(family, x, eig_tol)
            found.append(SingularPoint(x, max(mult, 2), sig))
            continue
        # odd near-kernel without a sign change: two close simple zeros or a tangency
        if depth <= 0:
            raise SuspectedEvenOrderRoot(
                f"zero of odd multiplicity without sign change near {res.x:.12g}")
        sub = np.linspace(a, b, 17)
        sd, ss = [], []
        for p in sub:
            raw, nrm = family(p)
            sd.append(float(np.linalg.det(raw)))
            ss.append(float(_smallest_singular_values(nrm)[0]))
        found.extend(_scan_cells(family, sub, np.array(sd), np.array(ss), eig_tol, xtol,
                                 True, True, depth - 1))
    lo, hi = ps[0], ps[-1]
    span = hi - lo
    out = []
    for pt in sorted(found, key=lambda s: s.param):
        if skip_lo and pt.param <= lo + 1e-12 * max(1.0, span):
            continue
        if skip_hi and pt.param >= hi - 1e-12 * max(1.0, span):
            continue
        if out and abs(pt.param - out[-1].param) <= 1e3 * xtol * max(1.0, abs(pt.param)):
            continue
        out.append(pt)
    return out


# ---------------------------------------------------------------------------
# shooting


@dataclass(frozen=True)
class EigenvalueList:
    values: np.ndarray
    multiplicities: np.ndarray
    window: tuple
    period: float
    n: int
    sigmas: np.ndarray = field(default=None, repr=False)

    def expanded(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.repeat(self.values, self.multiplicities)

    def __len__(self):
        return len(self.values)


def _lagrangian_family(path, boundary, tol):
    """``lam -> (raw, normalized)`` frame matrices for the coefficients ``path(lam)``."""
    Z1n = orthonormal_frame(boundary.Z1)

    def family(lam):
        G = monodromy(path(lam), tol)
        raw = frame_matrix(G, boundary)
        nrm = np.hstack([orthonormal_frame(G @ boundary.Z0), Z1n])
        return raw, nrm
    return family


def _coefficient_bound(C: CoefficientPath, samples: int = 65) -> float:
    if C.is_constant:
        return float(np.linalg.norm(C.constant_value, 2))
    return max(float(np.linalg.norm(C(t), 2)) for t in np.linspace(0.0, C.T, samples))


def shoot_eigenvalues(B: CoefficientPath, D: CoefficientPath, boundary: BoundaryPair, window,
                      tol: float = 1e-12, step: float = None, eig_tol: float = EIG_TOL) -> EigenvalueList:
    """Real eigenvalues in ``window`` by sign bracketing, Brent polish and an
    even-order audit on the smallest singular value.

    The coarse step defaults to ``pi / (16 T max|D|)``, well below the
    asymptotic eigenvalue spacing ``pi / (T max|D|)``.
    """
    lo, hi = map(float, window)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError("window must be a finite interval")
    T = B.T
    if step is None:
        step = math.pi / (16.0 * T * max(_coefficient_bound(D), 1e-12))
    grid = max(8, int(math.ceil((hi - lo) / step)))
    pts = find_singular_points(_lagrangian_family(lambda lam: B + D.scaled(lam), boundary, tol), lo, hi, grid,
                               eig_tol=eig_tol, xtol=max(tol, 1e-14))
    pts = [p for p in pts if lo <= p.param <= hi]
    return EigenvalueList(np.array([p.param for p in pts]),
                          np.array([p.multiplicity for p in pts], dtype=int),
                          (lo, hi), T, B.n, np.array([p.sigma for p in pts]))


# ---------------------------------------------------------------------------
# eigen-sums


class EigenSum(NamedTuple):
    value: float
    tail: float
    tail_bound: float


def _lattice_tail(side: np.ndarray, n: int, m: int, spacing: float, eig_tol: float):
    """Tail and error bound for one side (positive magnitudes, ascending)."""
    if len(side) < 2 * n:
        raise WindowTooSmall(f"need at least {2 * n} eigenvalues per side, found {len(side)}")
    last = side[-n:]
    scale = 1.0 / spacing
    tail, bound = 0.0, 0.0
    for p in last:
        q = p * scale + 1.0
        tail += scale ** m * float(zeta(m, q))
        r = float(np.min(np.abs(side - (p - spacing))))
        r = max(r, eig_tol)
        bound += m * r * p * scale ** (m + 2) * float(zeta(m + 2, q)) \
            + m * eig_tol * scale ** (m + 1) * float(zeta(m + 1, q))
    return tail, bound


def eigen_sum(eigs: EigenvalueList, m: int, tail_bound: float = None,
              eig_tol: float = EIG_TOL) -> EigenSum:
    """``sum_j lambda_j^{-m}`` over the window plus a lattice tail estimate.

    Beyond the window each of the ``n`` outermost eigenvalues on either side
    is continued by the lattice ``lambda + k pi / T``, summed exactly with the
    Hurwitz zeta function. The error bound scales with how far the observed
    spectrum deviates from that lattice at the window edge. With
    ``tail_bound=None`` only the finite sum is returned. An empty list sums
    to zero with no tail.

    Raises
    ------
    WindowTooSmall
        Too few eigenvalues to fit the lattice, or the achieved bound
        exceeds ``tail_bound``.
    """
    if m < 2:
        raise ValueError("eigen-sums need m >= 2")
    lam = eigs.expanded()
    if len(lam) and np.min(np.abs(lam)) == 0:
        raise DegenerateBaseProblem("0 is an eigenvalue")
    value = float(np.sum(lam ** (-float(m))))
    if tail_bound is None or len(lam) == 0:
        return EigenSum(value, 0.0, 0.0)
    spacing = math.pi / eigs.period
    pos = np.sort(lam[lam > 0])
    neg = np.sort(-lam[lam < 0])
    tail, bound = 0.0, 0.0
    for side, sign in ((pos, 1.0), (neg, (-1.0) ** m)):
        t, b = _lattice_tail(side, eigs.n, m, spacing, eig_tol)
        tail += sign * t
        bound += b
    if bound > tail_bound:
        raise WindowTooSmall(f"tail bound {bound:.3e} exceeds requested {tail_bound:.3e}")
    return EigenSum(value + tail, tail, bound)


def eigen_sum_by_shooting(B, D, boundary, m: int = 2, tail_bound: float = 1e-7,
                          tol: float = 1e-12, max_doublings: int = 6) -> EigenSum:
    """Grow a symmetric window until the tail bound is below ``tail_bound / 10``."""
    L = 4.0 * (boundary.n + 1) * math.pi / B.T
    for _ in range(max_doublings + 1):
        eigs = shoot_eigenvalues(B, D, boundary, (-L, L), tol)
        try:
            return eigen_sum(eigs, m, tail_bound / 10)
        except WindowTooSmall:
            L *= 2
    raise WindowTooSmall(f"no window up to |lambda| = {L / 2:g} met tail bound {tail_bound:g}")


# ---------------------------------------------------------------------------
# Galerkin truncation


@dataclass(frozen=True)
class GalerkinTruncation:
    N: int
    labels: list
    eigenvalues: np.ndarray
    matrixB: np.ndarray
    matrixBD: np.ndarray

    def determinant_ratio(self) -> float:
        sB, lB = np.linalg.slogdet(self.matrixB)
        sBD, lBD = np.linalg.slogdet(self.matrixBD)
        if sB == 0:
            raise TruncationResonance("truncated A - B is singular")
        return float(sB * sBD * math.exp(lBD - lB))


def _gauss_nodes(T: float, kinks, omega: float, order: int = 24):
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(breakpoints(T, kinks)[:-1], breakpoints(T, kinks)[1:]):
        panels = max(1, int(math.ceil(omega * (b - a) / 4.0)))
        edges = np.linspace(a, b, panels + 1)
        for c, d in zip(edges[:-1], edges[1:]):
            h = (d - c) / 2
            nodes.append(c + h * (x + 1))
            weights.append(h * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _bilinear(C: CoefficientPath, t, w, E):
    """Matrix of ``<C e_a, e_b>`` from basis samples ``E[q] (2n x K)``."""
    if C.is_constant:
        CE = np.einsum("ij,qjk->qik", C.constant_value, E)
    else:
        CE = np.stack([C(tq) @ Eq for tq, Eq in zip(t, E)])
    CE *= w[:, None, None]
    K = E.shape[2]
    G = E.reshape(-1, K).T @ CE.reshape(-1, K)
    return (G + G.T) / 2


def galerkin_truncation(B: CoefficientPath, D: CoefficientPath, boundary: BoundaryPair,
                        N: int) -> GalerkinTruncation:
    """Truncate ``A - B`` and ``A - B - D`` to ``span{e_jk : |k| <= N}``.

    ``e_jk(t) = exp(lambda_jk J t) e_j / sqrt(T)``, ``lambda_jk = (theta_j + k pi)/T``
    in the normal-form coordinates of ``boundary``; inner products by
    Gauss-Legendre panels aligned with the coefficient kinks.
    """
    n, T = boundary.n, B.T
    if B.n != n or D.n != n:
        raise DimensionError("coefficient and boundary half-dimensions differ")
    U = boundary.basis_change
    Bn, Dn = B.conjugated(U), D.conjugated(U)
    ks = np.arange(-N, N + 1)
    labels = [(j, int(k)) for j in range(n) for k in ks]
    lam = np.array([(boundary.theta[j] + k * math.pi) / T for j, k in labels])
    omega = 2.0 * np.max(np.abs(lam)) + 2.0 * max(_coefficient_bound(Bn), _coefficient_bound(Dn)) + 1.0
    t, w = _gauss_nodes(T, tuple(B.kink_points) + tuple(D.kink_points), omega)
    K = len(labels)
    E = np.zeros((len(t), 2 * n, K))
    jj = np.array([j for j, _ in labels])
    phase = np.outer(t, lam)
    cols = np.arange(K)
    E[:, jj, cols] = np.cos(phase) / math.sqrt(T)
    E[:, n + jj, cols] = np.sin(phase) / math.sqrt(T)
    Ab = np.diag(lam) - _bilinear(Bn, t, w, E)
    Abd = Ab - _bilinear(Dn, t, w, E)
    return GalerkinTruncation(N, labels, lam, Ab, Abd)


def galerkin_determinant(B: CoefficientPath, D: CoefficientPath, boundary: BoundaryPair,
                         N: int) -> float:
    """``det(P_N (A-B-D) P_N) / det(P_N (A-B) P_N)``.

    Raises ``TruncationResonance`` when the truncated ``A - B`` is singular;
    callers may retry with ``N + 1``.
    """
    trunc = galerkin_truncation(B, D, boundary, N)
    ev = np.linalg.eigvalsh(trunc.matrixB)
    if np.min(np.abs(ev)) < 1e-12 * max(1.0, np.max(np.abs(ev))):
        raise TruncationResonance(f"truncated A - B is singular at N = {N}")
    return trunc.determinant_ratio()


# ---------------------------------------------------------------------------
# oriented crossing counts


def _kernel_vectors(M: np.ndarray, k: int) -> np.ndarray:
    _, _, vt = np.linalg.svd(M)
    return vt[-k:].T


def _crossing_signature(form: np.ndarray, at_start: bool, scale: float, rel_tol: float = 1e-6) -> int:
    """Oriented contribution of a crossing with form ``form``.

    ``scale`` bounds the form over unit kernel vectors; eigenvalues below
    ``rel_tol * scale`` mean two crossings have (nearly) merged.
    """
    form = (form + form.T) / 2
    ev = np.linalg.eigvalsh(form)
    scale = max(1e-300, scale, float(np.max(np.abs(ev))))
    if np.min(np.abs(ev)) <= rel_tol * scale:
        raise NonRegularCrossing(f"degenerate crossing form with eigenvalues {ev}")
    pos = int(np.sum(ev > 0))
    neg = int(np.sum(ev < 0))
    # an eigenvalue of A - B - sD moves with derivative -<D x, x>;
    # at the start only those becoming negative change the count
    return pos if at_start else pos - neg


def _weighted_gram(base: CoefficientPath, direction: CoefficientPath, tol: float) -> np.ndarray:
    """``int_0^T gamma^T D gamma dt`` for ``gamma`` the solution of ``base``."""
    gamma = fundamental_solution(base, tol)
    M1 = iterated_integrals(gamma, direction, 1, tol)[1]
    return -standard_j(base.n) @ M1


# endpoint-preserving detours tried when the straight path has a merged crossing
_BENDS = (0.0, 0.173, -0.291, 0.417)


def _bent_paths(base: CoefficientPath, direction: CoefficientPath):
    """Yield ``(path, velocity)`` for ``base + s direction + c s^2 (1 - s) E``.

    All detours share both endpoints and the initial velocity, so the
    oriented crossing count (a homotopy invariant) is unchanged.
    """
    m = 2 * base.n
    A = np.random.default_rng(20240611).normal(size=(m, m))
    E = (A + A.T) / 2
    E *= max(1.0, _coefficient_bound(direction)) / np.linalg.norm(E, 2)
    E = CoefficientPath.constant(E, base.T)
    for c in _BENDS:
        if c == 0.0:
            yield (lambda s: base + direction.scaled(s)), (lambda s: direction)
        else:
            yield ((lambda s, c=c: base + direction.scaled(s) + E.scaled(c * s * s * (1 - s))),
                   (lambda s, c=c: direction + E.scaled(c * (2 * s - 3 * s * s))))


def _count_along_bends(count, base, direction):
    err = None
    for path, velocity in _bent_paths(base, direction):
        try:
            return count(path, velocity)
        except (NonRegularCrossing, SuspectedEvenOrderRoot) as exc:
            err = exc
    raise err


def relative_morse_index(B: CoefficientPath, D: CoefficientPath, boundary: BoundaryPair,
                         grid: int = 200, tol: float = 1e-11, eig_tol: float = EIG_TOL) -> int:
    """``I(A - B, A - B - D)`` as the oriented count of kernels along ``B + s D``.

    Each crossing ``s0 in (0, 1)`` contributes the signature of the crossing
    form ``<D x, x>`` on the kernel; a kernel at ``s0 = 0`` contributes its
    positive inertia only. When two crossings merge (singular crossing form)
    the count is repeated along an endpoint-preserving detour.

    Raises
    ------
    DegenerateEndpoint
        ``A - B - D`` is degenerate.
    NonRegularCrossing
        Every detour met a singular crossing form.
    """
    raw1, nrm1 = _lagrangian_family(lambda s: B + D, boundary, tol)(1.0)
    if _smallest_singular_values(nrm1)[0] < eig_tol:
        raise DegenerateEndpoint("A - B - D is degenerate (crossing at s = 1)")
    Z0 = boundary.Z0
    n = boundary.n

    def count(path, velocity):
        family = _lagrangian_family(path, boundary, tol)
        pts = find_singular_points(family, 0.0, 1.0, grid, eig_tol, skip_hi=True)
        k0 = int(np.sum(_smallest_singular_values(family(0.0)[1]) < eig_tol))
        if k0 and not any(p.param <= 1e-12 for p in pts):
            pts.insert(0, SingularPoint(0.0, k0, 0.0))
        total = 0
        for pt in pts:
            null = _kernel_vectors(family(pt.param)[0], pt.multiplicity)
            Zk = Z0 @ null[:n]
            W = _weighted_gram(path(pt.param), velocity(pt.param), tol)
            total += _crossing_signature(Zk.T @ W @ Zk, pt.param <= 1e-12, float(np.linalg.norm(W, 2)))
        return total

    return _count_along_bends(count, B, D)


class PeriodicIndex(NamedTuple):
    relative_index: int
    maslov_index: int


def periodic_morse_index(B: CoefficientPath, S, grid: int = 200, tol: float = 1e-11,
                         eig_tol: float = EIG_TOL) -> PeriodicIndex:
    """``I(A|E_S, A|E_S - B)`` by crossings of ``det(S gamma_{sB}(T) - I)``.

    Also returns the Maslov-type index: ``i_1 = I - n`` for ``S = I`` and
    ``i_{-1} = I`` for ``S = -I`` (``None`` for other ``S``). Merged
    crossings are handled by detours as in :func:`relative_morse_index`.
    """
    S = np.asarray(S, dtype=float)
    n = half_dim(S)
    if n != B.n:
        raise DimensionError("S and B have different dimensions")
    eye = np.eye(2 * n)

    def count(path, velocity):
        def family(s):
            G = monodromy(path(s), tol)
            raw = S @ G - eye
            return raw, raw / max(1.0, float(np.linalg.norm(G, 2)))

        # near s = 0 the determinant may vanish to high order; handle s = 0 exactly
        k0 = int(np.sum(_smallest_singular_values(S - eye) < eig_tol))
        start = 1.0 / grid if k0 else 0.0
        pts = find_singular_points(family, start, 1.0, grid, eig_tol, skip_lo=bool(k0), skip_hi=True)
        if k0:
            pts.insert(0, SingularPoint(0.0, k0, 0.0))
        total = 0
        for pt in pts:
            null = _kernel_vectors(family(pt.param)[0], pt.multiplicity)
            W = _weighted_gram(path(pt.param), velocity(pt.param), tol)
            total += _crossing_signature(null.T @ W @ null, pt.param <= 1e-12, float(np.linalg.norm(W, 2)))
        return total

    G1 = monodromy(B, tol)
    if _smallest_singular_values((S @ G1 - eye) / max(1.0, float(np.linalg.norm(G1, 2))))[0] < eig_tol:
        raise DegenerateEndpoint("S-periodic problem for B is degenerate (crossing at s = 1)")
    total = _count_along_bends(count, CoefficientPath.zero(n, B.T), B)
    if np.allclose(S, eye):
        maslov = total - n
    elif np.allclose(S, -eye):
        maslov = total
    else:
        maslov = None
    return PeriodicIndex(total, maslov)
