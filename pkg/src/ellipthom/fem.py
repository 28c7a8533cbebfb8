"""Periodic Q1 pixel FEM for the corrector cell problem.

Nodal displacement fields live on the n x n torus as arrays of shape
(n, n, 2): axis 0 is x1, axis 1 is x2, last axis the component.  Each pixel
is one bilinear element with 2x2 Gauss quadrature, which integrates every
energy term here exactly (the integrands are at most quadratic per variable).

The solvers work in a whitened variable: the gradient Gram operator G
assembles into (scalar Q1 Laplacian) tensor I2, a periodic convolution whose
Fourier symbol is real, nonnegative, and zero only at the mean mode.  With
S = F^-1 symbol^(-1/2) F, the pencil (K, G) becomes the bounded standard
operator S K S whose spectrum does not degrade with grid refinement, so CG
and LOBPCG iteration counts stay flat in n.  A spectral shift t enters as
S (K - t G) S = S K S - t P with P the mean-free projector -- exact up to
rounding, no re-assembly per shift.

Bloch problems (phase-twisted boundary conditions) use the periodic-amplitude
representation: conjugating each element matrix by the per-node phases
diag(exp(i gamma . x_a)) makes plain periodic assembly exact for every gamma.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateCell,
    DimensionMismatch,
    IndefinitenessDetected,
    NotConverged,
)
from .microstructure import PixelGrid
from .tensors import GutierrezPair, QuadraticForm4, vec

__all__ = [
    "CellProblem",
    "CorrectorSolution",
    "HomogenizedResult",
    "CellOperator",
    "element_form",
    "element_laplacian",
    "apply_operator",
    "solve_corrector",
    "homogenized_tensor",
    "det_integral",
]

log = logging.getLogger("ellipthom.fem")

# Local nodes of one element, in shape-function order: offsets in (x1, x2).
_OFFSETS = ((0, 0), (1, 0), (0, 1), (1, 1))

_G0 = (3.0 - math.sqrt(3.0)) / 6.0
_GAUSS = ((_G0, _G0), (1.0 - _G0, _G0), (_G0, 1.0 - _G0), (1.0 - _G0, 1.0 - _G0))
_W = 0.25  # uniform 2x2 Gauss weights on the unit square


def _shape_grads(xi: float, eta: float) -> np.ndarray:
    """d phi_a / d(xi, eta) for the four bilinear shape functions, (4, 2)."""
    return np.array(
        [
            [-(1.0 - eta), -(1.0 - xi)],
            [(1.0 - eta), -xi],
            [-eta, (1.0 - xi)],
            [eta, xi],
        ]
    )


def _bmat(xi: float, eta: float) -> np.ndarray:
    """(4, 8) map from element dofs to vec(grad v) on the unit square.

    Dof order is node-major, component-minor; gradient rows follow
    vec(A) = (dv1/dx1, dv1/dx2, dv2/dx1, dv2/dx2).
    """
    dphi = _shape_grads(xi, eta)
    B = np.zeros((4, 8))
    for a in range(4):
        B[0, 2 * a] = dphi[a, 0]
        B[1, 2 * a] = dphi[a, 1]
        B[2, 2 * a + 1] = dphi[a, 0]
        B[3, 2 * a + 1] = dphi[a, 1]
    return B


_BQ = [_bmat(xi, eta) for xi, eta in _GAUSS]
_B_CENTER = _bmat(0.5, 0.5)


def element_form(C) -> np.ndarray:
    """8x8 element matrix of the form with 4x4 coefficients C (h-independent in 2D)."""
    C = C.coeffs if isinstance(C, QuadraticForm4) else np.asarray(C, dtype=float)
    K = np.zeros((8, 8))
    for B in _BQ:
        K += _W * (B.T @ C @ B)
    return K


def element_laplacian() -> np.ndarray:
    """4x4 scalar Q1 element Laplacian (the per-component block of the gradient Gram)."""
    return element_form(np.eye(4))[0::2, 0::2].copy()


def _resolve_forms(pair) -> tuple[QuadraticForm4, QuadraticForm4]:
    """Accept a GutierrezPair or an explicit (form1, form2) of QuadraticForm4."""
    if isinstance(pair, GutierrezPair):
        return pair.forms()
    f1, f2 = pair
    if not (isinstance(f1, QuadraticForm4) and isinstance(f2, QuadraticForm4)):
        raise TypeError("pair must be a GutierrezPair or a (QuadraticForm4, QuadraticForm4) tuple")
    return f1, f2


@dataclass(frozen=True)
class CellProblem:
    """A periodic cell problem: microstructure, phase forms, spectral shift."""

    grid: PixelGrid
    pair: object  # GutierrezPair or (QuadraticForm4, QuadraticForm4)
    shift: float = 0.0

    def forms(self) -> tuple[QuadraticForm4, QuadraticForm4]:
        return _resolve_forms(self.pair)


@dataclass
class CorrectorSolution:
    """Solution of one cell solve, plus convergence bookkeeping."""

    nodal_displacement: np.ndarray  # (n, n, 2)
    energy: float
    residual: float
    iterations: int
    grad_norm_sq: float = 0.0
    near_singular: bool = False
    # Whitened coordinates of the solution; lets follow-up solves warm-start.
    whitened: np.ndarray | None = None


class CellOperator:
    """Matrix-free assembled operator for one grid/pair (and one Bloch vector).

    Exposes the stiffness apply, the gradient-Gram apply, the whitening
    transform, loads, and the scalar integrals the solvers need.  gamma=None
    (or the zero vector) is the purely periodic, real-arithmetic case.
    """

    def __init__(self, grid: PixelGrid, pair, gamma=None):
        if grid.n < 2:
            raise ValueError("grid must have n >= 2")
        self.n = grid.n
        self.grid = grid
        self.chi = grid.chi
        f1, f2 = _resolve_forms(pair)
        self.C1 = f1.coeffs
        self.C2 = f2.coeffs
        self.h = 1.0 / self.n

        if gamma is not None:
            gamma = np.asarray(gamma, dtype=float).reshape(2)
            if np.all(gamma == 0.0):
                gamma = None
        self.gamma = gamma
        self.complex_mode = gamma is not None
        dtype = complex if self.complex_mode else float

        K1 = element_form(self.C1)
        K2 = element_form(self.C2)
        Ge = element_form(np.eye(4))
        if self.complex_mode:
            # Periodic-amplitude representation: dof phases exp(i gamma . x_a)
            # relative to the element origin make wrap-around invisible.
            ph = np.empty(8, dtype=complex)
            for a, (dx, dy) in enumerate(_OFFSETS):
                ph[2 * a] = ph[2 * a + 1] = np.exp(
                    1j * (gamma[0] * dx + gamma[1] * dy) * self.h
                )
            conj = ph.conj()[:, None] * ph[None, :]
            K1 = K1 * conj
            K2 = K2 * conj
            Ge = Ge * conj
        self.K1e = K1.astype(dtype)
        self.K2e = K2.astype(dtype)
        self.Ge = Ge.astype(dtype)

        # Spectral scale of the pencil (K, G): max |eig| of the phase forms.
        self.scale = max(
            float(np.max(np.abs(np.linalg.eigvalsh(self.C1)))),
            float(np.max(np.abs(np.linalg.eigvalsh(self.C2)))),
            1e-300,
        )

        self._symbol = self._gram_symbol()
        self._inv_sqrt = self._inv_sqrt_symbol(self._symbol)
        self._chi_flat = self.chi.reshape(-1)

    # ---- assembly primitives -------------------------------------------------

    def _gather(self, u: np.ndarray) -> np.ndarray:
        """(n, n, 2) nodal field -> (n*n, 8) element dof table."""
        n = self.n
        E = np.empty((n, n, 8), dtype=u.dtype)
        for a, (dx, dy) in enumerate(_OFFSETS):
            E[:, :, 2 * a : 2 * a + 2] = np.roll(u, shift=(-dx, -dy), axis=(0, 1))
        return E.reshape(n * n, 8)

    def _scatter(self, Y: np.ndarray) -> np.ndarray:
        """Adjoint of _gather: (n*n, 8) element table -> (n, n, 2) nodal field."""
        n = self.n
        Yr = Y.reshape(n, n, 8)
        out = np.zeros((n, n, 2), dtype=Y.dtype)
        for a, (dx, dy) in enumerate(_OFFSETS):
            out += np.roll(Yr[:, :, 2 * a : 2 * a + 2], shift=(dx, dy), axis=(0, 1))
        return out

    def _check_field(self, u: np.ndarray):
        if u.shape != (self.n, self.n, 2):
            raise DimensionMismatch(
                f"field shape {u.shape} does not match grid (n={self.n})"
            )

    def _apply_elementwise(self, u: np.ndarray, M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
        E = self._gather(u)
        Y = np.where(self._chi_flat[:, None], E @ M1.T, E @ M2.T)
        return self._scatter(Y)

    def apply_K(self, u: np.ndarray) -> np.ndarray:
        """Unshifted stiffness apply (energy Hessian /2)."""
        self._check_field(u)
        return self._apply_elementwise(u, self.K1e, self.K2e)

    def apply_G(self, u: np.ndarray) -> np.ndarray:
        """Gradient Gram apply: u -> G u with u^H G u = integral |grad u|^2."""
        self._check_field(u)
        return self._apply_elementwise(u, self.Ge, self.Ge)

    def gram(self, u: np.ndarray, w: np.ndarray) -> float:
        """Integral of grad u . grad w over the cell (real part in Bloch mode)."""
        return float(np.real(np.vdot(u, self.apply_G(w))))

    # ---- whitening -----------------------------------------------------------

    def _gram_symbol(self) -> np.ndarray:
        """Fourier symbol of the assembled scalar Laplacian stencil, shape (n, n).

        Built from the same element matrix the apply uses, so the whitening is
        consistent with the operator to rounding.
        """
        lap = element_laplacian()
        st = np.zeros((3, 3))
        for a, (ax, ay) in enumerate(_OFFSETS):
            for b, (bx, by) in enumerate(_OFFSETS):
                st[bx - ax + 1, by - ay + 1] += lap[a, b]
        n = self.n
        g1, g2 = (self.gamma if self.complex_mode else (0.0, 0.0))
        k1 = (2.0 * np.pi * np.arange(n) + g1) / n
        k2 = (2.0 * np.pi * np.arange(n) + g2) / n
        # The stencil rows sum to zero (constants are in the kernel), so
        # sum st cos(k.d) = sum st (cos(k.d) - 1) = sum st (-2 sin^2(k.d/2)).
        # The sin^2 form has no 1-cos cancellation, which keeps the symbol
        # accurate at the tiny gamma the lambda1 descent visits.
        sym = np.zeros((n, n))
        for d1 in (-1, 0, 1):
            for d2 in (-1, 0, 1):
                w = st[d1 + 1, d2 + 1]
                if w == 0.0:
                    continue
                half = 0.5 * (d1 * k1[:, None] + d2 * k2[None, :])
                sym -= 2.0 * w * np.square(np.sin(half))
        return np.maximum(sym, 0.0)

    def _inv_sqrt_symbol(self, sym: np.ndarray) -> np.ndarray:
        if self.complex_mode:
            # No exact null mode away from gamma = 0; floor only guards against
            # catastrophic cancellation at extremely small gamma.
            return 1.0 / np.sqrt(np.maximum(sym, 1e-300))
        inv = np.zeros_like(sym)
        nonzero = np.ones_like(sym, dtype=bool)
        nonzero[0, 0] = False  # the mean mode is the only structural null
        if sym[nonzero].min() <= 0.0:
            raise DegenerateCell("gradient Gram symbol vanished off the mean mode")
        inv[nonzero] = 1.0 / np.sqrt(sym[nonzero])
        return inv

    def whiten(self, u: np.ndarray) -> np.ndarray:
        """Apply S = F^-1 symbol^(-1/2) F componentwise (pseudo-inverse at the mean)."""
        self._check_field(u)
        U = np.fft.fft2(u, axes=(0, 1)) * self._inv_sqrt[:, :, None]
        out = np.fft.ifft2(U, axes=(0, 1))
        if not self.complex_mode and not np.iscomplexobj(u):
            return out.real
        return out

    def project_mean_free(self, u: np.ndarray) -> np.ndarray:
        """P u: remove the componentwise mean (identity in Bloch mode)."""
        if self.complex_mode:
            return u
        return u - u.mean(axis=(0, 1))

    def whitened_apply(self, y: np.ndarray, t: float = 0.0) -> np.ndarray:
        """(S K S - t P) y: the shifted pencil in whitened coordinates."""
        out = self.whiten(self.apply_K(self.whiten(y)))
        if t != 0.0:
            out = out - t * self.project_mean_free(y)
        return out

    # ---- loads and integrals ---------------------------------------------------

    def load(self, M) -> np.ndarray:
        """Linear term f with E(v) = c0 + 2 f.v + v.Kv for mean loading M; (n,n,2)."""
        m = vec(M)
        fe1 = self.h * (_B_CENTER.T @ (self.C1 @ m))
        fe2 = self.h * (_B_CENTER.T @ (self.C2 @ m))
        n = self.n
        F = np.where(self._chi_flat[:, None], fe1[None, :], fe2[None, :])
        return self._scatter(F.astype(float))

    def constant_term(self, M, t: float = 0.0) -> float:
        """Mean-field energy c0 = theta Q1(M) + (1-theta) Q2(M) - t |M|^2."""
        m = vec(M)
        theta = self.grid.theta
        q1 = float(m @ self.C1 @ m)
        q2 = float(m @ self.C2 @ m)
        return theta * q1 + (1.0 - theta) * q2 - t * float(m @ m)

    def energy(self, v: np.ndarray, M, t: float = 0.0) -> float:
        """Full shifted energy of an arbitrary periodic field v at loading M."""
        self._check_field(v)
        f = self.load(M)
        kv = float(np.real(np.vdot(v, self.apply_K(v))))
        gv = float(np.real(np.vdot(v, self.apply_G(v))))
        return self.constant_term(M, t) + 2.0 * float(np.real(np.vdot(f, v))) + kv - t * gv

    def grad_at_centers(self, v: np.ndarray) -> np.ndarray:
        """Physical gradient of the Q1 field at element centers, (n, n, 2, 2)."""
        self._check_field(v)
        E = self._gather(v)
        A = (E @ _B_CENTER.T) * self.n  # 1/h scaling
        return A.reshape(self.n, self.n, 2, 2)


def apply_operator(problem: CellProblem, v: np.ndarray) -> np.ndarray:
    """(K - t G) v for the problem's shift t, in nodal coordinates."""
    op = CellOperator(problem.grid, problem.pair)
    out = op.apply_K(v)
    if problem.shift != 0.0:
        out = out - problem.shift * op.apply_G(v)
    return out


def det_integral(v: np.ndarray) -> float:
    """Integral of det(grad v) over the cell; a null Lagrangian, so it vanishes
    (to rounding) for every periodic Q1 field -- the quadrature is exact."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 3 or v.shape[0] != v.shape[1] or v.shape[2] != 2:
        raise DimensionMismatch(f"expected nodal field of shape (n, n, 2), got {v.shape}")
    n = v.shape[0]
    cols = [
        np.roll(v, shift=(-dx, -dy), axis=(0, 1)).reshape(n * n, 2)
        for dx, dy in _OFFSETS
    ]
    E = np.concatenate(cols, axis=1)  # (n*n, 8) element dof vectors
    total = 0.0
    for B in _BQ:
        A = E @ B.T  # (n*n, 4) = vec(grad) per element, unit-square scale
        total += _W * float(np.sum(A[:, 0] * A[:, 3] - A[:, 1] * A[:, 2]))
    return total


def _whitened_cg(
    op: CellOperator,
    b: np.ndarray,
    t: float,
    tol: float,
    max_iter: int,
    y0: np.ndarray | None = None,
):
    """CG on (S K S - t P) y = b over mean-free fields.

    Returns (y, rel_residual, iterations, near_singular).  Raises
    IndefinitenessDetected on negative curvature (shift at or above the
    discrete lambda_6) and NotConverged when the budget runs out.
    """
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return np.zeros_like(b), 0.0, 0, False
    if y0 is not None:
        y = y0.copy()
        r = b - op.whitened_apply(y, t)
    else:
        y = np.zeros_like(b)
        r = b.copy()
    r = op.project_mean_free(r)
    d = r.copy()
    rr = float(np.real(np.vdot(r, r)))
    near_singular = False
    it = 0
    curv_scale = op.scale + abs(t)
    while math.sqrt(rr) > tol * norm_b:
        if it >= max_iter:
            raise NotConverged(math.sqrt(rr) / norm_b, it, what="cell CG")
        Ad = op.whitened_apply(d, t)
        dd = float(np.real(np.vdot(d, d)))
        curv = float(np.real(np.vdot(d, Ad)))
        if curv <= -1e-12 * curv_scale * dd:
            raise IndefinitenessDetected(t, curv / dd)
        if curv <= 1e-12 * curv_scale * dd:
            # Numerically zero curvature: the shift sits at the discrete
            # spectrum's edge.  Stop here; the energy is still well defined.
            near_singular = True
            break
        alpha = rr / curv
        y += alpha * d
        r -= alpha * Ad
        r = op.project_mean_free(r)
        rr_new = float(np.real(np.vdot(r, r)))
        beta = rr_new / rr
        d = r + beta * d
        rr = rr_new
        it += 1
    return y, math.sqrt(rr) / norm_b, it, near_singular


def _solve_dense(op: CellOperator, b: np.ndarray, t: float):
    """Dense fallback: assemble S K S - t P column by column and least-squares solve."""
    n = op.n
    dim = 2 * n * n
    if n > 16:
        log.info("dense solve requested at n=%d (dim %d); this is slow", n, dim)
    A = np.empty((dim, dim))
    e = np.zeros(dim)
    for j in range(dim):
        e[j] = 1.0
        A[:, j] = op.whitened_apply(e.reshape(n, n, 2), t).reshape(-1)
        e[j] = 0.0
    y, *_ = np.linalg.lstsq(A, b.reshape(-1), rcond=1e-12)
    y = y.reshape(n, n, 2)
    res = float(np.linalg.norm(A @ y.reshape(-1) - b.reshape(-1)) / np.linalg.norm(b))
    return y, res, dim, False


def solve_corrector(
    problem: CellProblem,
    M,
    tol: float = 1e-10,
    max_iter: int = 20000,
    method: str = "matrix_free",
    _op: CellOperator | None = None,
    _y0: np.ndarray | None = None,
) -> CorrectorSolution:
    """Minimize the shifted cell energy over periodic fields for mean loading M.

    Returns the mean-free minimizer and the minimum energy
    c0 + f.v = min_v (M + grad v).(L - t Id)(M + grad v).
    """
    op = _op if _op is not None else CellOperator(problem.grid, problem.pair)
    t = problem.shift
    f = op.load(M)
    b = -op.whiten(f)
    if method == "dense":
        y, rel, iters, near = _solve_dense(op, b, t)
    elif method == "matrix_free":
        y, rel, iters, near = _whitened_cg(op, b, t, tol, max_iter, y0=_y0)
    else:
        raise ValueError(f"unknown method {method!r}")
    v = op.whiten(y)
    energy = op.constant_term(M, t) + float(np.real(np.vdot(f, v)))
    grad_sq = float(np.real(np.vdot(y, op.project_mean_free(y))))
    return CorrectorSolution(
        nodal_displacement=v,
        energy=energy,
        residual=rel,
        iterations=iters,
        grad_norm_sq=grad_sq,
        near_singular=near,
        whitened=y,
    )


_BASIS_KEYS = ("11", "12", "21", "22")
_BASIS_MATS = {
    "11": np.array([[1.0, 0.0], [0.0, 0.0]]),
    "12": np.array([[0.0, 1.0], [0.0, 0.0]]),
    "21": np.array([[0.0, 0.0], [1.0, 0.0]]),
    "22": np.array([[0.0, 0.0], [0.0, 1.0]]),
}


@dataclass
class HomogenizedResult:
    """Homogenized quadratic form with the data that produced it."""

    lstar: QuadraticForm4
    per_direction_energy: dict
    corrector_gradients: dict
    diagnostics: dict
    theta: float
    # Nodal basis correctors, keyed like per_direction_energy.  Kept on the
    # result (not serialized) so spectral screens can reuse them.
    nodal_correctors: dict = field(default_factory=dict)


def homogenized_tensor(
    grid: PixelGrid,
    pair,
    tol: float = 1e-10,
    max_iter: int = 20000,
    method: str = "matrix_free",
) -> HomogenizedResult:
    """Assemble the homogenized 4x4 form from 10 cell solves.

    Four basis loadings give the diagonal; the six symmetric pairs give the
    off-diagonal entries by polarization.  Linearity of the corrector map
    makes the pair solves redundant in exact arithmetic; solving them anyway
    keeps every reported entry a directly computed minimum (tests cross-check
    the polarization identity).
    """
    op = CellOperator(grid, pair)
    try:
        sols: dict[str, CorrectorSolution] = {}
        for key in _BASIS_KEYS:
            sols[key] = solve_corrector(
                CellProblem(grid, pair), _BASIS_MATS[key], tol, max_iter, method, _op=op
            )
        L = np.zeros((4, 4))
        for i, key in enumerate(_BASIS_KEYS):
            L[i, i] = sols[key].energy
        pair_energy: dict[str, float] = {}
        for i in range(4):
            for j in range(i + 1, 4):
                ki, kj = _BASIS_KEYS[i], _BASIS_KEYS[j]
                M = _BASIS_MATS[ki] + _BASIS_MATS[kj]
                s = solve_corrector(
                    CellProblem(grid, pair), M, tol, max_iter, method, _op=op
                )
                pair_energy[f"{ki}+{kj}"] = s.energy
                L[i, j] = L[j, i] = 0.5 * (s.energy - L[i, i] - L[j, j])
    except IndefinitenessDetected as exc:
        raise DegenerateCell(f"cell problem not coercive: {exc}") from exc

    per_dir = {k: sols[k].energy for k in _BASIS_KEYS}
    grads = {k: op.grad_at_centers(sols[k].nodal_displacement) for k in _BASIS_KEYS}
    nodal = {k: sols[k].nodal_displacement for k in _BASIS_KEYS}
    diag = {
        "iterations": {k: sols[k].iterations for k in _BASIS_KEYS},
        "residuals": {k: sols[k].residual for k in _BASIS_KEYS},
        "pair_energies": pair_energy,
        "method": method,
        "tol": tol,
    }
    return HomogenizedResult(
        lstar=QuadraticForm4(L),
        per_direction_energy=per_dir,
        corrector_gradients=grads,
        diagnostics=diag,
        theta=grid.theta,
        nodal_correctors=nodal,
    )
