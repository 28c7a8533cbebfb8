"""Closed-form homogenization of a two-phase simple laminate.

For layers normal to a unit vector e, the corrector gradient is piecewise
constant of the form c_i (x) e with the jump set by the layer interface
conditions.  Eliminating the per-phase vectors c_1, c_2 (mean-zero
constraint theta c_1 + (1-theta) c_2 = 0) reduces the cell formula to a
2x2 linear system in c_1 per loading, so the homogenized form is exact
up to linear algebra rounding.  This is the reference the FEM is tested
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularSystem
from .fem import _resolve_forms
from .tensors import QuadraticForm4, vec

__all__ = ["LaminateSpec", "laminate_lstar", "laminate_corrector"]

# vec indices that couple c to c (x) e1: vec(c (x) e1) = (c1, 0, c2, 0).
_R_AXIS1 = np.array(
    [
        [1.0, 0.0],
        [0.0, 0.0],
        [0.0, 1.0],
        [0.0, 0.0],
    ]
)
# Permutation of vec(A) under conjugation by the coordinate swap x1 <-> x2.
_SWAP_PERM = np.array([3, 2, 1, 0])


@dataclass(frozen=True)
class LaminateSpec:
    """Strong-phase fraction, layer-normal axis (1 or 2), and the phase pair."""

    theta: float
    normal_axis: int
    pair: object  # GutierrezPair or (QuadraticForm4, QuadraticForm4)

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must be strictly inside (0, 1), got {self.theta}")
        if self.normal_axis not in (1, 2):
            raise ValueError(f"normal_axis must be 1 or 2, got {self.normal_axis}")


def _swap_form(C: np.ndarray) -> np.ndarray:
    """Coefficients of A -> Q(S A S) with S the coordinate swap."""
    return C[np.ix_(_SWAP_PERM, _SWAP_PERM)]


def _layer_system(theta: float, C1: np.ndarray, C2: np.ndarray):
    """Reduced 2x2 system matrix H and the map M -> right-hand side g(M).

    Minimizing theta Q1(M + c1 (x) e1) + (1-theta) Q2(M + c2 (x) e1) under
    theta c1 + (1-theta) c2 = 0 gives H c1 = -g(M) with

        H = theta Gamma1(e1) + theta^2/(1-theta) Gamma2(e1),
        g(M) = theta R^T (C1 - C2) vec(M),

    where Gamma_i(e1) = R^T C_i R is the acoustic tensor of phase i in the
    layer normal and R maps c to vec(c (x) e1).
    """
    R = _R_AXIS1
    G1 = R.T @ C1 @ R
    G2 = R.T @ C2 @ R
    H = theta * G1 + (theta * theta / (1.0 - theta)) * G2
    Gmap = theta * (R.T @ (C1 - C2))  # (2, 4), applied to vec(M)
    return H, Gmap


def _solve_layers(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """c1 = -H^+ g, with a zero-energy certificate when H is singular.

    A singular H is legal only when g has no component along the null space
    (the energy then still attains its infimum along layers); otherwise the
    layer system genuinely has no minimizer and SingularSystem is raised.
    """
    w, V = np.linalg.eigh(H)
    wmax = max(abs(w[0]), abs(w[-1]), 1e-300)
    keep = np.abs(w) > 1e-12 * wmax
    if not np.all(keep):
        null = V[:, ~keep]
        resid = null.T @ g
        if np.any(np.abs(resid) > 1e-9 * max(1.0, float(np.linalg.norm(g)))):
            raise SingularSystem(null[:, 0])
    inv_w = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    return -(V @ (inv_w * (V.T @ g)))


def laminate_corrector(spec: LaminateSpec, M) -> tuple[np.ndarray, np.ndarray]:
    """Per-phase corrector vectors (c1, c2) with gradient c_i (x) normal."""
    theta = spec.theta
    C1, C2 = (f.coeffs for f in _resolve_forms(spec.pair))
    if spec.normal_axis == 2:
        # Conjugate by the coordinate swap S: loading becomes S M S.
        C1, C2 = _swap_form(C1), _swap_form(C2)
        M = np.asarray(M, dtype=float)[::-1, ::-1]
    H, Gmap = _layer_system(theta, C1, C2)
    c1 = _solve_layers(H, Gmap @ vec(M))
    c2 = -(theta / (1.0 - theta)) * c1
    if spec.normal_axis == 2:
        # Correctors were computed in swapped coordinates; map back.  The
        # gradient there is c (x) e1, which swaps to (S c) (x) e2.
        c1 = c1[::-1].copy()
        c2 = c2[::-1].copy()
    return c1, c2


def laminate_lstar(spec: LaminateSpec) -> QuadraticForm4:
    """Exact homogenized 4x4 form of the laminate.

    L* = mean(C) - Gmap^T H^+ Gmap, assembled in the axis-1 frame and
    conjugated back for axis 2.
    """
    theta = spec.theta
    C1, C2 = (f.coeffs for f in _resolve_forms(spec.pair))
    if spec.normal_axis == 2:
        C1, C2 = _swap_form(C1), _swap_form(C2)
    Cbar = theta * C1 + (1.0 - theta) * C2
    H, Gmap = _layer_system(theta, C1, C2)
    # Column-by-column pseudo-solve keeps the singular-H certificate.
    # _solve_layers returns c = -H^+ g, so L = Cbar + Gmap^T c columns.
    sols = np.empty((2, 4))
    for j in range(4):
        sols[:, j] = _solve_layers(H, Gmap[:, j])
    L = Cbar + Gmap.T @ sols
    if spec.normal_axis == 2:
        L = _swap_form(L)
    return QuadraticForm4(L)
