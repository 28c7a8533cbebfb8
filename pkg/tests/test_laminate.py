"""Closed-form laminate homogenization.

A laminate admits an exact two-variable reduction: the corrector gradient is
piecewise constant, c_i (x) nhat per phase with theta*c1 + (1-theta)*c2 = 0,
and M.L*M is the minimum of the two-point energy over the jump vector.  The
tests below re-derive that minimum by brute force (exact quadratic
minimization assembled from energy evaluations) and compare.
"""
import importlib

import numpy as np
import pytest

from ellipthom.tensors import make_gutierrez

lamod = importlib.import_module("ellipthom.laminate")

BASIS = [np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[0.0, 1.0], [0.0, 0.0]]),
         np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[0.0, 0.0], [0.0, 1.0]])]


def form_matrix(L):
    return np.array([[L.bilinear(A, B) for B in BASIS] for A in BASIS])


def two_point_energy(pair, theta, nhat, M, a):
    q1, q2 = pair.forms()
    A1 = M + (1 - theta) * np.outer(a, nhat)
    A2 = M - theta * np.outer(a, nhat)
    return theta * q1(A1) + (1 - theta) * q2(A2)


def brute_force_value(pair, theta, nhat, M):
    """Exact minimization of the quadratic jump energy: assemble gradient and
    Hessian from function values, solve the 2x2 stationarity system."""
    E = lambda a: two_point_energy(pair, theta, nhat, M, np.asarray(a, float))
    e0 = E([0, 0])
    g = np.array([0.5 * (E([1, 0]) - E([-1, 0])), 0.5 * (E([0, 1]) - E([0, -1]))])
    H = np.zeros((2, 2))
    H[0, 0] = E([1, 0]) + E([-1, 0]) - 2 * e0
    H[1, 1] = E([0, 1]) + E([0, -1]) - 2 * e0
    H[0, 1] = H[1, 0] = E([1, 1]) - E([1, 0]) - E([0, 1]) + e0
    a_star = np.linalg.solve(H, -g)
    return E(a_star)


@pytest.fixture(scope="module")
def pair():
    return make_gutierrez(1.0, 1.0, 2.0, -3.0)


def test_half_laminate_frozen_tensor(pair):
    """The borderline half-half laminate tensor, exactly:
    diag blocks 3/2 and 0 in the normal/tangent axis pair, shear block 4/3,
    cross entry -2.  The (e2 x e2) diagonal vanishing is the headline."""
    L = lamod.laminate_lstar(lamod.LaminateSpec(theta=0.5, normal_axis=1, pair=pair))
    expect = np.array([
        [1.5, 0.0, 0.0, -2.0],
        [0.0, 4.0 / 3.0, 4.0 / 3.0, 0.0],
        [0.0, 4.0 / 3.0, 4.0 / 3.0, 0.0],
        [-2.0, 0.0, 0.0, 0.0],
    ])
    assert np.max(np.abs(form_matrix(L) - expect)) < 1e-12


def test_brute_force_cross_check(pair):
    rng = np.random.default_rng(31)
    for theta in (0.25, 0.5, 0.75):
        for axis, nhat in ((1, np.array([1.0, 0.0])), (2, np.array([0.0, 1.0]))):
            spec = lamod.LaminateSpec(theta=theta, normal_axis=axis, pair=pair)
            L = lamod.laminate_lstar(spec)
            for _ in range(8):
                M = rng.normal(size=(2, 2))
                want = brute_force_value(pair, theta, nhat, M)
                assert abs(L(M) - want) < 1e-10 * max(1.0, abs(want))


def test_corrector_optimality(pair):
    """No admissible jump perturbation lowers the two-point energy."""
    rng = np.random.default_rng(37)
    nhat = np.array([1.0, 0.0])
    for theta in (0.25, 0.5):
        spec = lamod.LaminateSpec(theta=theta, normal_axis=1, pair=pair)
        L = lamod.laminate_lstar(spec)
        for _ in range(10):
            M = rng.normal(size=(2, 2))
            c1, c2 = lamod.laminate_corrector(spec, M)
            assert np.max(np.abs(theta * c1 + (1 - theta) * c2)) < 1e-10
            # reconstruct the jump vector a from c1 = (1-theta) a
            a = c1 / (1 - theta)
            e_opt = two_point_energy(pair, theta, nhat, M, a)
            assert abs(e_opt - L(M)) < 1e-10 * max(1.0, abs(e_opt))
            for _ in range(5):
                b = rng.normal(size=2)
                assert two_point_energy(pair, theta, nhat, M, a + b) >= e_opt - 1e-10


def test_axis_covariance(pair):
    """Swapping the lamination normal permutes tensor indices 1<->2."""
    L1 = form_matrix(lamod.laminate_lstar(
        lamod.LaminateSpec(theta=0.25, normal_axis=1, pair=pair)))
    L2 = form_matrix(lamod.laminate_lstar(
        lamod.LaminateSpec(theta=0.25, normal_axis=2, pair=pair)))
    swap = [3, 2, 1, 0]  # (11,12,21,22) -> (22,21,12,11)
    assert np.max(np.abs(L1 - L2[np.ix_(swap, swap)])) < 1e-12


def test_theta_validation(pair):
    with pytest.raises(ValueError):
        lamod.LaminateSpec(theta=0.0, normal_axis=1, pair=pair)
    with pytest.raises(ValueError):
        lamod.LaminateSpec(theta=1.0, normal_axis=1, pair=pair)
