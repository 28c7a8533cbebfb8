"""Quadratic forms of planar elasticity tensors and their ellipticity scans.

A stiffness tensor L acts on 2x2 gradient matrices A through the energy
density A . L A.  We store L as a symmetric 4x4 matrix on
vec(A) = (a11, a12, a21, a22).  This is deliberately NOT Voigt notation:
the solvers shift L by multiples of the full-matrix identity, and that
shift acts on the antisymmetric part of A as well, which a symmetric-only
3x3 storage cannot represent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolation, NonPositiveMu

__all__ = [
    "LameParams",
    "QuadraticForm4",
    "GutierrezPair",
    "vec",
    "unvec",
    "identity_form",
    "iso_tensor",
    "underline_tensor",
    "make_gutierrez",
    "lower_bound_residual",
    "acoustic_tensor",
    "rank_one_min",
    "sym_min",
]

# Enforced relative tolerance on the mu1 = -(lambda2 + mu2) equality.
_GUTIERREZ_EQ_RTOL = 1e-12


def vec(A) -> np.ndarray:
    """Flatten a 2x2 matrix to (a11, a12, a21, a22)."""
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {A.shape}")
    return A.reshape(4).copy()


def unvec(v) -> np.ndarray:
    """Inverse of vec()."""
    v = np.asarray(v, dtype=float)
    if v.shape != (4,):
        raise ValueError(f"expected a 4-vector, got shape {v.shape}")
    return v.reshape(2, 2).copy()


@dataclass(frozen=True)
class LameParams:
    """Lame constants (lam, mu) of one isotropic phase.

    No sign restrictions here: weak phases with negative lam (even
    lam + 2*mu <= 0) are legal inputs for the composites studied.
    """

    lam: float
    mu: float

    def strictly_strong_elliptic(self) -> bool:
        """Pointwise strict strong ellipticity: mu > 0 and lam + 2*mu > 0."""
        return self.mu > 0.0 and self.lam + 2.0 * self.mu > 0.0

    def very_strong_elliptic(self) -> bool:
        """Positive definiteness on symmetric matrices: mu > 0 and lam + mu > 0."""
        return self.mu > 0.0 and self.lam + self.mu > 0.0


@dataclass(frozen=True)
class QuadraticForm4:
    """Symmetric 4x4 coefficient matrix of a quadratic form on 2x2 matrices.

    Construction symmetrizes exactly ((C + C^T)/2 is bitwise symmetric) and
    freezes the array, so instances can be shared without defensive copies.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        C = np.array(self.coeffs, dtype=float)
        if C.shape != (4, 4):
            raise ValueError(f"expected 4x4 coefficients, got shape {C.shape}")
        C = 0.5 * (C + C.T)
        C.setflags(write=False)
        object.__setattr__(self, "coeffs", C)

    def __call__(self, A) -> float:
        """Energy density A . L A for a single 2x2 matrix A."""
        v = vec(A)
        return float(v @ self.coeffs @ v)

    def value_vec(self, V: np.ndarray) -> np.ndarray:
        """Quadratic form on a batch of vectorized matrices, shape (..., 4)."""
        V = np.asarray(V, dtype=float)
        return np.einsum("...i,ij,...j->...", V, self.coeffs, V)

    def bilinear(self, A, B) -> float:
        """Symmetric bilinear form A . L B."""
        return float(vec(A) @ self.coeffs @ vec(B))

    def shifted(self, t: float) -> "QuadraticForm4":
        """The form of L - t*Id4 (identity acting on all of vec(A))."""
        return QuadraticForm4(self.coeffs - float(t) * np.eye(4))

    def __add__(self, other: "QuadraticForm4") -> "QuadraticForm4":
        return QuadraticForm4(self.coeffs + other.coeffs)

    def __sub__(self, other: "QuadraticForm4") -> "QuadraticForm4":
        return QuadraticForm4(self.coeffs - other.coeffs)

    def __mul__(self, s: float) -> "QuadraticForm4":
        return QuadraticForm4(self.coeffs * float(s))

    __rmul__ = __mul__


def identity_form() -> QuadraticForm4:
    """The form |A|^2 (Frobenius), i.e. Id4 on vec(A)."""
    return QuadraticForm4(np.eye(4))


def iso_tensor(p: LameParams) -> QuadraticForm4:
    """Isotropic stiffness acting on full (non-symmetrized) gradients.

    Q(A) = (lam+2mu)(a11^2 + a22^2) + 2*lam*a11*a22 + mu*(a12+a21)^2.
    Vanishes on skew matrices (frame indifference), so rigid rotations carry
    no energy even though the form takes the full gradient.
    """
    lam, mu = p.lam, p.mu
    C = np.zeros((4, 4))
    C[0, 0] = C[3, 3] = lam + 2.0 * mu
    C[0, 3] = C[3, 0] = lam
    C[1, 1] = C[2, 2] = mu
    C[1, 2] = C[2, 1] = mu
    return QuadraticForm4(C)


def underline_tensor(mu1: float) -> QuadraticForm4:
    """The borderline comparison tensor with mu = mu1, lam = -2*mu1.

    Two algebraically equal closed forms:

        Q(A) = -4*mu1*a11*a22 + mu1*(a12+a21)^2
        Q(A) = -4*mu1*det(A)  + mu1*(a12-a21)^2

    (expand det(A) = a11*a22 - a12*a21 to see the cross terms cancel).  Its
    rank-one minimum is exactly 0: the form is nonnegative on rank-one
    matrices yet not positive there, which is what makes it the pivot of the
    ellipticity analysis.
    """
    if mu1 <= 0.0:
        raise NonPositiveMu(f"mu1 must be > 0, got {mu1}")
    return iso_tensor(LameParams(lam=-2.0 * mu1, mu=mu1))


def underline_value_product_form(mu1: float, A) -> float:
    """First closed form: -4*mu1*a11*a22 + mu1*(a12+a21)^2."""
    A = np.asarray(A, dtype=float)
    return -4.0 * mu1 * A[0, 0] * A[1, 1] + mu1 * (A[0, 1] + A[1, 0]) ** 2


def underline_value_det_form(mu1: float, A) -> float:
    """Second closed form: -4*mu1*det(A) + mu1*(a12-a21)^2."""
    A = np.asarray(A, dtype=float)
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    return -4.0 * mu1 * det + mu1 * (A[0, 1] - A[1, 0]) ** 2


@dataclass(frozen=True)
class GutierrezPair:
    """A strong/weak isotropic phase pair on the degeneracy surface.

    phase1 is the strong (very strongly elliptic) phase; phase2 is the weak
    one, strongly but not very strongly elliptic because lambda2 + mu2 < 0.
    The moduli satisfy 0 < mu1 = -(lambda2 + mu2) < mu2 and lambda1 + mu1 > 0.
    Use make_gutierrez() to construct with validation.
    """

    phase1: LameParams
    phase2: LameParams

    @property
    def alpha(self) -> float:
        """Coercivity margin min(mu1, mu2 - mu1) of the pointwise lower bound."""
        return min(self.phase1.mu, self.phase2.mu - self.phase1.mu)

    def form1(self) -> QuadraticForm4:
        return iso_tensor(self.phase1)

    def form2(self) -> QuadraticForm4:
        return iso_tensor(self.phase2)

    def forms(self) -> tuple[QuadraticForm4, QuadraticForm4]:
        return self.form1(), self.form2()


def make_gutierrez(mu1: float, lambda1: float, mu2: float, lambda2: float) -> GutierrezPair:
    """Validate and build a GutierrezPair; collects all failures before raising.

    Constraints: mu1 > 0, mu2 > mu1, lambda1 + mu1 > 0, and the exact balance
    mu1 = -(lambda2 + mu2) up to relative 1e-12.
    """
    failures = []
    if not mu1 > 0.0:
        failures.append(f"mu1 must be > 0 (got {mu1})")
    if not mu2 > mu1:
        failures.append(f"mu2 must exceed mu1 (got mu2={mu2}, mu1={mu1})")
    if not lambda1 + mu1 > 0.0:
        failures.append(f"lambda1 + mu1 must be > 0 (got {lambda1 + mu1})")
    scale = max(1.0, abs(mu1), abs(mu2), abs(lambda2))
    if abs(mu1 + lambda2 + mu2) > _GUTIERREZ_EQ_RTOL * scale:
        failures.append(
            f"mu1 must equal -(lambda2 + mu2) to rel. 1e-12 "
            f"(got mu1={mu1}, -(lambda2+mu2)={-(lambda2 + mu2)})"
        )
    if failures:
        raise ConstraintViolation(failures)
    return GutierrezPair(LameParams(lambda1, mu1), LameParams(lambda2, mu2))


def lower_bound_residual(pair: GutierrezPair, A, phase: int) -> float:
    """Q_phase(A) minus its pointwise lower bound; nonnegative for valid pairs.

    The bound is -4*mu1*det(A) plus alpha times a phase-dependent seminorm:
    phase 1 uses (a11+a22)^2 + (a12-a21)^2, phase 2 uses
    (a11-a22)^2 + a12^2 + a21^2, with alpha = min(mu1, mu2-mu1).
    """
    A = np.asarray(A, dtype=float)
    mu1 = pair.phase1.mu
    alpha = pair.alpha
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if phase == 1:
        q = pair.form1()(A)
        semi = (A[0, 0] + A[1, 1]) ** 2 + (A[0, 1] - A[1, 0]) ** 2
    elif phase == 2:
        q = pair.form2()(A)
        semi = (A[0, 0] - A[1, 1]) ** 2 + A[0, 1] ** 2 + A[1, 0] ** 2
    else:
        raise ValueError(f"phase must be 1 or 2, got {phase}")
    return q - (-4.0 * mu1 * det + alpha * semi)


def acoustic_tensor(L: QuadraticForm4, b) -> np.ndarray:
    """Acoustic tensor Gamma(b)_ik = sum_jl L[(i,j),(k,l)] b_j b_l (symmetric 2x2)."""
    b = np.asarray(b, dtype=float)
    C = L.coeffs.reshape(2, 2, 2, 2)
    return np.einsum("ijkl,j,l->ik", C, b, b)


def _eigmin_sym2(p: np.ndarray, q: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of [[p, q], [q, r]], vectorized."""
    half_sum = 0.5 * (p + r)
    half_diff = 0.5 * (p - r)
    return half_sum - np.sqrt(half_diff * half_diff + q * q)


def _gamma_eigmin_at(L: QuadraticForm4, phis: np.ndarray) -> np.ndarray:
    """Smallest acoustic-tensor eigenvalue for b = (cos phi, sin phi), vectorized."""
    C = L.coeffs.reshape(2, 2, 2, 2)
    bs = np.stack([np.cos(phis), np.sin(phis)], axis=-1)  # (..., 2)
    G = np.einsum("ijkl,...j,...l->...ik", C, bs, bs)
    return _eigmin_sym2(G[..., 0, 0], G[..., 0, 1], G[..., 1, 1])


def rank_one_min(L: QuadraticForm4, samples: int = 720) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Minimum of A.LA over unit rank-one matrices A = a (x) b.

    For unit a, b the minimum over a at fixed b is the smallest eigenvalue of
    the acoustic tensor Gamma(b), so only the direction b needs a search: a
    dense scan over [0, pi) followed by golden-section refinement to 1e-10 in
    angle.  Returns (value, (a, b)) with unit vectors.
    """
    if samples < 8:
        raise ValueError("need at least 8 angular samples")
    phis = np.linspace(0.0, math.pi, samples, endpoint=False)
    vals = _gamma_eigmin_at(L, phis)
    k = int(np.argmin(vals))
    step = math.pi / samples
    lo, hi = phis[k] - step, phis[k] + step

    # Golden-section: the eigenvalue may have kinks at branch crossings, but a
    # unimodal bracket around the scan minimum refines fine in practice.
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a_pt, b_pt = lo, hi
    c_pt = b_pt - invphi * (b_pt - a_pt)
    d_pt = a_pt + invphi * (b_pt - a_pt)
    fc = float(_gamma_eigmin_at(L, np.array([c_pt]))[0])
    fd = float(_gamma_eigmin_at(L, np.array([d_pt]))[0])
    while b_pt - a_pt > 1e-10:
        if fc <= fd:
            b_pt, d_pt, fd = d_pt, c_pt, fc
            c_pt = b_pt - invphi * (b_pt - a_pt)
            fc = float(_gamma_eigmin_at(L, np.array([c_pt]))[0])
        else:
            a_pt, c_pt, fc = c_pt, d_pt, fd
            d_pt = a_pt + invphi * (b_pt - a_pt)
            fd = float(_gamma_eigmin_at(L, np.array([d_pt]))[0])
    phi = 0.5 * (a_pt + b_pt)
    b_vec = np.array([math.cos(phi), math.sin(phi)])
    G = acoustic_tensor(L, b_vec)
    w, V = np.linalg.eigh(G)
    value = min(float(w[0]), float(vals[k]))
    if float(w[0]) <= float(vals[k]):
        a_vec = V[:, 0]
    else:  # refinement did not beat the scan point; fall back to it
        b_vec = np.array([math.cos(phis[k]), math.sin(phis[k])])
        w2, V2 = np.linalg.eigh(acoustic_tensor(L, b_vec))
        a_vec = V2[:, 0]
    return value, (a_vec.copy(), b_vec)


# Orthonormal basis of symmetric matrices: e11, e22, (e12+e21)/sqrt(2).
_SYM_BASIS = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), 0.0],
    ]
).T  # shape (4, 3)


def sym_min(L: QuadraticForm4) -> float:
    """Minimum of A.LA over unit *symmetric* matrices A.

    Restriction of the 4x4 form to the 3-dimensional symmetric subspace in an
    orthonormal basis; for isotropic L the eigenvalues are {2(lam+mu), 2mu, 2mu}.
    """
    S = _SYM_BASIS.T @ L.coeffs @ _SYM_BASIS
    return float(np.linalg.eigvalsh(S)[0])
