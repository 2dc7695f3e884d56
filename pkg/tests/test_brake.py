import math

import numpy as np
import pytest

from conftest import random_symmetric
from hamstab import ere
from hamstab.brake import check_brake_symmetry, decomposition_check, split_boundaries
from hamstab.errors import DegenerateFactor, DimensionError
from hamstab.hill import frame_matrix
from hamstab.propagator import CoefficientPath, monodromy
from hamstab.symplectic import BrakeSymmetryData, complex_to_real, rotation, subspace_distance

N1 = np.diag([1.0, -1.0])


def _random_unitary(rng, n):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return complex_to_real(Q)


def _random_brake(rng, n, T=2.0, scale=0.6):
    """Symmetrized random smooth coefficients and conjugated normal-form symmetry."""
    U = _random_unitary(rng, n)
    N = U @ np.diag(np.r_[np.ones(n), -np.ones(n)]) @ U.T
    S = U @ rotation(rng.uniform(-math.pi, math.pi, n)) @ U.T
    C0, C1, C2, E0 = (random_symmetric(rng, 2 * n, scale) for _ in range(4))

    def raw(t, C=(C0, C1, C2)):
        return C[0] + math.cos(3.0 * t) * C[1] + t * C[2]

    B = CoefficientPath(n, T, lambda t: (raw(t) + N @ raw(T - t) @ N) / 2)
    D = CoefficientPath(n, T, lambda t: (1 + math.cos(t - T / 2) ** 2) * (E0 + N @ E0 @ N) / 2)
    return B, D, BrakeSymmetryData(N, S)


def test_ere_coefficients_are_brake_symmetric():
    cfg = ere.EREKind("lagrange", 1.0, 0.3)
    sym = ere.brake_data(-1)
    assert check_brake_symmetry(ere.meyer_schmidt_system(cfg), ere.perturbation(cfg), sym)


def test_zero_perturbation_is_brake_symmetric():
    B = CoefficientPath.constant(np.diag([1.0, 2.0]), 1.0)
    assert check_brake_symmetry(B, CoefficientPath.zero(1, 1.0), BrakeSymmetryData(N1, np.eye(2)))


def test_time_linear_coefficients_are_not_brake_symmetric():
    B = CoefficientPath(1, 1.0, lambda t: t * np.eye(2))
    assert not check_brake_symmetry(B, CoefficientPath.zero(1, 1.0), BrakeSymmetryData(N1, np.eye(2)))


def test_brake_symmetry_dimension_mismatch():
    with pytest.raises(DimensionError):
        check_brake_symmetry(CoefficientPath.zero(2, 1.0), CoefficientPath.zero(2, 1.0),
                             BrakeSymmetryData(N1, np.eye(2)))


def test_split_boundaries_identity():
    split = split_boundaries(BrakeSymmetryData(N1, np.eye(2)), 2.0)
    assert split.T_half == 1.0
    e1, e2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    assert subspace_distance(split.plus.Z0, e1) < 1e-12
    assert subspace_distance(split.plus.Z1, e1) < 1e-12
    assert subspace_distance(split.minus.Z0, e2) < 1e-12
    assert subspace_distance(split.minus.Z1, e2) < 1e-12


def test_split_boundaries_quarter_turn():
    split = split_boundaries(BrakeSymmetryData(N1, rotation(math.pi / 2)), 1.0)
    assert subspace_distance(split.plus.Z0, rotation(math.pi / 4) @ np.array([[1.0], [0.0]])) < 1e-12
    assert subspace_distance(split.plus.Z1, np.array([[1.0], [0.0]])) < 1e-12


def test_split_boundaries_are_symmetry_eigenspaces(rng):
    for n in (1, 2, 3):
        U = _random_unitary(rng, n)
        N = U @ np.diag(np.r_[np.ones(n), -np.ones(n)]) @ U.T
        S = U @ rotation(rng.uniform(-3, 3, n)) @ U.T
        split = split_boundaries(BrakeSymmetryData(N, S), 1.0)
        for sign, pair in ((1, split.plus), (-1, split.minus)):
            assert np.allclose(S @ N @ pair.Z0, sign * pair.Z0, atol=1e-10)
            assert np.allclose(N @ pair.Z1, sign * pair.Z1, atol=1e-10)


def test_decomposition_zero_perturbation():
    cfg = ere.EREKind("lagrange", 1.0, 0.0)
    B = ere.meyer_schmidt_system(cfg)
    rep = decomposition_check(B, CoefficientPath.zero(2, B.T), ere.brake_data(-1))
    assert rep.periodic_ratio == pytest.approx(1.0, abs=1e-12)
    assert rep.plus_ratio == pytest.approx(1.0, abs=1e-12)
    assert rep.minus_ratio == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("S", [1, -1])
def test_decomposition_ere(S):
    cfg = ere.EREKind("lagrange", 1.0, 0.1)
    rep = decomposition_check(ere.meyer_schmidt_system(cfg.with_e(0.0)), ere.perturbation(cfg), ere.brake_data(S))
    assert rep.max_residual <= 1e-7


def test_decomposition_random_systems(rng):
    checked = 0
    for k in range(10):
        n = 1 + k % 3
        B, D, sym = _random_brake(rng, n)
        assert check_brake_symmetry(B, D, sym)
        try:
            rep = decomposition_check(B, D, sym)
        except DegenerateFactor:
            continue
        assert rep.max_residual <= 1e-7
        checked += 1
    assert checked >= 8


def test_kernel_splits_over_halves():
    # beta = 3/4 carries a double -1 eigenvalue of the circular monodromy
    B = ere.meyer_schmidt_system(ere.EREKind("lagrange", 0.75, 0.0))
    G, H = monodromy(B), monodromy(B, at=math.pi)
    eye = np.eye(4)

    def nullity(M):
        s = np.linalg.svd(M, compute_uv=False)
        return int(np.sum(s < 1e-9 * s[0]))

    split = ere.half_period_boundaries(-1)
    halves = [nullity(frame_matrix(H, p)) for p in (split.plus, split.minus)]
    assert nullity(-G - eye) == sum(halves) == 2
    assert halves == [1, 1]
    for S in (1, -1):
        split = ere.half_period_boundaries(S)
        halves = [nullity(frame_matrix(H, p)) for p in (split.plus, split.minus)]
        assert nullity(S * G - eye) == sum(halves)


def test_degenerate_factor_reported():
    B = ere.meyer_schmidt_system(ere.EREKind("lagrange", 0.75, 0.0))
    with pytest.raises(DegenerateFactor) as info:
        decomposition_check(B, CoefficientPath.zero(2, B.T), ere.brake_data(-1))
    assert info.value.factor == "periodic"
