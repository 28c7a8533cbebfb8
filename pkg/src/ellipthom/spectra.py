"""Coercivity and ellipticity constants of the discrete cell problem.

Six related constants are computed, all as minima of discrete Rayleigh
quotients (energy over gradient mass), so each is a rigorous upper bound for
its continuum counterpart:

* lambda6 -- min over mean-free periodic fields (the coercivity constant of
  the purely periodic problem);
* lambda1 -- min over Bloch vectors gamma of the phase-twisted problem,
  located by coarse grid + descending pattern search;
* lambda3 -- the periodic constant of a k x k supercell (identical to the
  min of the Bloch constants over the k-th roots of unity);
* lambda4 -- min over rank-one mean loadings a (x) b of the largest shift t
  keeping the shifted cell energy nonnegative (root of a concave decreasing
  scalar function, found by bisection plus Newton polish);
* lambda5 -- the gamma -> 0 limit of the Bloch constant along fixed
  directions, Richardson-extrapolated from a dyadic magnitude ladder;
* the rank-one minimum of the homogenized form, the macroscopic check.

All eigenproblems run in the whitened coordinates provided by fem.CellOperator,
where the gradient Gram is the identity (mean-free projector at gamma = 0), so
LOBPCG/dense eigensolvers see a bounded, grid-size-independent spectrum and
"G-orthonormal" start blocks are plain orthonormal ones.

Each public constant has an internal *_details sibling returning a
{value, tolerance, method, iterations} dict used for report serialization.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, lobpcg

from .errors import (
    DegenerateCell,
    EllipthomError,
    IndefinitenessDetected,
    NotConverged,
    ShiftExceedsLambda6,
)
from .fem import (
    _OFFSETS,
    CellOperator,
    CellProblem,
    HomogenizedResult,
    element_laplacian,
    homogenized_tensor,
    solve_corrector,
)
from .microstructure import PixelGrid
from .tensors import rank_one_min

__all__ = [
    "BlochField",
    "lambda6",
    "bloch_min",
    "lambda1",
    "lambda3_supercell",
    "lambda4",
    "Lambda4Result",
    "lambda5",
    "SpectralReport",
    "compute_spectral_report",
]

log = logging.getLogger("ellipthom.spectra")

# Grids up to this n use the dense eigensolver; above it, blocked LOBPCG.
_DENSE_N = 16
_LOBPCG_BLOCK = 4
_LOBPCG_ROUNDS = 8
_LOBPCG_MAXITER = 400
# Hard ceiling on Bloch evaluations inside the lambda1 search.
_LAMBDA1_MAX_EVALS = 4000


@dataclass
class BlochField:
    """A twisted field v(x) = e^{i gamma.x} p(x) in its (gamma, amplitude) split."""

    gamma: np.ndarray  # 2-vector quasi-momentum
    nodal_p: np.ndarray  # (n, n, 2) complex periodic amplitude at the nodes


def _wrap_gamma(gamma) -> np.ndarray:
    """Map a Bloch vector into the centered zone [-pi, pi)^2 (same spectrum,
    best-conditioned discrete representation)."""
    g = np.asarray(gamma, dtype=float).reshape(2)
    return (g + math.pi) % (2.0 * math.pi) - math.pi


@dataclass
class _EigResult:
    value: float
    iterations: int
    method: str
    tolerance: float
    vector: np.ndarray | None = None  # whitened eigenvector (flat)
    block: np.ndarray | None = None  # final iterate block, for warm starts


def _shifted_matvec(op: CellOperator, sigma: float):
    n = op.n

    def matvec(x):
        y = x.reshape(n, n, 2)
        out = op.whitened_apply(y)
        if sigma != 0.0:
            out = out + sigma * (y - op.project_mean_free(y))
        return out.reshape(-1)

    return matvec


def _dense_eig_min(op: CellOperator, sigma: float, want_vector: bool) -> _EigResult:
    n = op.n
    dim = 2 * n * n
    dtype = complex if op.complex_mode else float
    matvec = _shifted_matvec(op, sigma)
    A = np.empty((dim, dim), dtype=dtype)
    e = np.zeros(dim, dtype=dtype)
    for j in range(dim):
        e[j] = 1.0
        A[:, j] = matvec(e)
        e[j] = 0.0
    tol_eff = 100.0 * np.finfo(float).eps * max(1.0, op.scale)
    if want_vector:
        w, V = np.linalg.eigh(A)
        return _EigResult(float(w[0]), dim, "dense", tol_eff, vector=V[:, 0])
    w = np.linalg.eigvalsh(A)
    return _EigResult(float(w[0]), dim, "dense", tol_eff)


def _seeded_block(rng: np.random.Generator, dim: int, complex_mode: bool) -> np.ndarray:
    X = rng.standard_normal((dim, _LOBPCG_BLOCK))
    if complex_mode:
        X = X + 1j * rng.standard_normal((dim, _LOBPCG_BLOCK))
    # Whitened coordinates make the G-inner product Euclidean, so a QR pass
    # gives the G-orthonormal start block the iteration wants.
    Q, _ = np.linalg.qr(X)
    return Q


def _lobpcg_eig_min(
    op: CellOperator, sigma: float, tol: float, seed: int, x0: np.ndarray | None
) -> _EigResult:
    n = op.n
    dim = 2 * n * n
    dtype = complex if op.complex_mode else float
    matvec = _shifted_matvec(op, sigma)
    A = LinearOperator((dim, dim), matvec=matvec, dtype=dtype)

    rng = np.random.default_rng(seed)
    X = _seeded_block(rng, dim, op.complex_mode)
    if x0 is not None:
        # Warm starts carry over only the previous minimal eigenvector; a full
        # previous block is a correlated subspace the iteration can lock onto,
        # converging to an excited invariant subspace of the new operator.
        # Fresh random columns keep an escape route to the true minimum.
        col = np.asarray(x0)
        if col.ndim == 2:
            col = col[:, 0]
        if col.shape == (dim,):
            X[:, 0] = col.astype(dtype, copy=False)
            X = np.linalg.qr(X)[0]

    res_tol = max(tol, 1e-11) * max(1.0, op.scale)
    total_iters = 0
    best = None  # (resid, lam, x, V)
    for round_idx in range(_LOBPCG_ROUNDS):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out = lobpcg(
                    A, X, tol=res_tol, maxiter=_LOBPCG_MAXITER,
                    largest=False, retResidualNormsHistory=True,
                )
            w, V, hist = out[0], out[1], out[-1]
            total_iters += len(hist)
        except (np.linalg.LinAlgError, ValueError):
            X = _seeded_block(rng, dim, op.complex_mode)
            total_iters += 1
            continue
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(V))):
            X = _seeded_block(rng, dim, op.complex_mode)
            continue
        k = int(np.argmin(w))
        x = V[:, k]
        x = x / np.linalg.norm(x)
        ax = matvec(x)
        lam = float(np.real(np.vdot(x, ax)))
        resid = float(np.linalg.norm(ax - lam * x))
        if resid <= res_tol:
            return _EigResult(lam, total_iters, "lobpcg", res_tol, vector=x, block=V)
        if best is None or resid < best[0]:
            best = (resid, lam, x, V)
        # Stalled rounds keep the best Ritz vector but refresh the rest of
        # the block to escape a bad invariant-subspace approximation.
        if round_idx >= 3:
            fresh = _seeded_block(rng, dim, op.complex_mode)
            fresh[:, 0] = best[2]
            X = np.linalg.qr(fresh)[0]
        else:
            X = V
    # Stalled.  A residual within a small factor of the target still pins the
    # eigenvalue far tighter than any tolerance we report (the eigenvalue
    # error is ~ resid^2 / spectral gap), so accept it rather than fail.
    if best is not None and best[0] <= 50.0 * res_tol:
        log.info(
            "lobpcg stalled at residual %.3e (target %.3e); accepting", best[0], res_tol
        )
        return _EigResult(best[1], total_iters, "lobpcg", best[0], vector=best[2], block=best[3])
    if dim <= 2700:
        log.info("lobpcg failed to converge on a small problem; densifying")
        return _dense_eig_min(op, sigma, True)
    raise NotConverged(best[0] if best else math.inf, total_iters, what="lobpcg eigensolver")


def _eig_min(
    op: CellOperator,
    sigma: float,
    tol: float,
    seed: int,
    method: str,
    x0: np.ndarray | None = None,
    want_vector: bool = False,
) -> _EigResult:
    if method not in ("auto", "dense", "matrix_free"):
        raise ValueError(f"unknown eigensolver method {method!r}")
    use_dense = method == "dense" or (method == "auto" and op.n <= _DENSE_N)
    if use_dense:
        return _dense_eig_min(op, sigma, want_vector)
    return _lobpcg_eig_min(op, sigma, tol, seed, x0)


def _assert_hermitian(op: CellOperator, seed: int) -> None:
    """Spot-check the assembled stiffness and gradient Gram forms for
    Hermitian symmetry, <x, Ay> = <Ax, y>, at 1e-12 relative.

    The check runs on the assembled operators, not the whitened composite:
    the inverse-sqrt multiplier has a huge dynamic range at small momenta and
    amplifies fft roundoff far past any honest symmetry tolerance, while K
    and G themselves are phase-conjugated element sums whose symmetry is
    structural.
    """
    rng = np.random.default_rng(seed + 987654321)
    n = op.n
    shape = (n, n, 2)
    x = rng.standard_normal(shape)
    y = rng.standard_normal(shape)
    if op.complex_mode:
        x = x + 1j * rng.standard_normal(shape)
        y = y + 1j * rng.standard_normal(shape)
    for name, apply in (("stiffness", op.apply_K), ("gradient Gram", op.apply_G)):
        ax = apply(x)
        ay = apply(y)
        lhs = np.vdot(x, ay)
        rhs = np.vdot(ax, y)
        scale = float(
            np.linalg.norm(ax) * np.linalg.norm(y)
            + np.linalg.norm(x) * np.linalg.norm(ay)
        )
        bound = 1e-12 * max(scale, max(1.0, op.scale))
        if abs(lhs - rhs) > bound:
            raise EllipthomError(
                f"assembled {name} form is not Hermitian: "
                f"|<x,Ay>-<Ax,y>| = {abs(lhs - rhs):.3e}"
            )


def _lambda6_details(
    grid: PixelGrid,
    pair,
    tol: float = 1e-10,
    seed: int = 0,
    method: str = "auto",
) -> _EigResult:
    op = CellOperator(grid, pair)
    # Constants are the pencil's null space; shifting them by sigma > lambda6
    # (any sigma above the spectral scale works) pushes them past the minimum.
    sigma = op.scale + 1.0
    return _eig_min(op, sigma, tol, seed, method)


def lambda6(
    grid: PixelGrid,
    pair,
    tol: float = 1e-10,
    seed: int = 0,
    method: str = "auto",
) -> float:
    """Coercivity constant of the periodic problem: the smallest Rayleigh
    quotient energy / gradient mass over mean-free periodic fields."""
    return _lambda6_details(grid, pair, tol=tol, seed=seed, method=method).value


def _bloch_details(
    grid: PixelGrid,
    pair,
    gamma,
    tol: float = 1e-10,
    seed: int = 0,
    method: str = "auto",
    x0: np.ndarray | None = None,
    want_vector: bool = False,
) -> tuple[_EigResult, CellOperator | None]:
    g = _wrap_gamma(gamma)
    if g[0] == 0.0 and g[1] == 0.0:
        return _lambda6_details(grid, pair, tol=tol, seed=seed, method=method), None
    op = CellOperator(grid, pair, gamma=g)
    _assert_hermitian(op, seed)
    return _eig_min(op, 0.0, tol, seed, method, x0=x0, want_vector=want_vector), op


def bloch_min(
    grid: PixelGrid,
    pair,
    gamma,
    tol: float = 1e-10,
    seed: int = 0,
    method: str = "auto",
    return_field: bool = False,
):
    """Smallest Rayleigh quotient of the phase-twisted (Bloch) problem at gamma.

    Any gamma is accepted and folded into the centered zone (the spectrum is
    2*pi-periodic in each component); gamma = 0 falls back to the periodic
    constant on mean-free fields.  Hermitian symmetry of the assembled
    operator is spot-checked at 1e-12 on every call.  Values are nonnegative
    whenever the cell problem is (discrete fields are conforming trial
    fields).  With return_field=True the minimizing amplitude comes back
    alongside as a BlochField.
    """
    res, op = _bloch_details(
        grid, pair, gamma, tol=tol, seed=seed, method=method, want_vector=return_field
    )
    if not return_field:
        return res.value
    g = _wrap_gamma(gamma)
    if op is None:
        # gamma = 0: redo with the eigenvector exposed.
        op0 = CellOperator(grid, pair)
        res0 = _eig_min(
            op0, op0.scale + 1.0, tol, seed,
            "dense" if op0.n <= _DENSE_N else "matrix_free",
            want_vector=True,
        )
        vec = res0.vector
        if vec is None:
            raise NotConverged(math.nan, res0.iterations, what="bloch eigenvector")
        p = op0.whiten(vec.reshape(op0.n, op0.n, 2))
        return res.value, BlochField(gamma=g, nodal_p=np.asarray(p, dtype=complex))
    vec = res.vector
    if vec is None:
        raise NotConverged(math.nan, res.iterations, what="bloch eigenvector")
    p = op.whiten(vec.reshape(op.n, op.n, 2))
    return res.value, BlochField(gamma=g, nodal_p=np.asarray(p, dtype=complex))


def _mean_mode_symbol(n: int, gamma) -> float:
    """Gradient-Gram Fourier symbol of the near-null mean mode at Bloch gamma.

    This is the assembled scalar-Laplacian stencil symbol at the per-pixel
    frequency gamma / n -- the smallest entry the whitening divides by, hence
    the quantity that controls how strongly fft roundoff is amplified in the
    whitened composite when gamma is small.
    """
    lap = element_laplacian()
    s = 0.0
    for a, (ax, ay) in enumerate(_OFFSETS):
        for b, (bx, by) in enumerate(_OFFSETS):
            half = 0.5 * ((bx - ax) * float(gamma[0]) + (by - ay) * float(gamma[1])) / n
            s -= 2.0 * lap[a, b] * math.sin(half) ** 2
    return max(s, 0.0)


# Pattern-search candidates closer to gamma = 0 than this (but not exactly 0,
# which has its own well-conditioned mean-free solver) are skipped outright:
# there the whitening amplification swamps the quotient with roundoff and the
# eigensolvers start to stall.
_LAMBDA1_GAMMA_FLOOR = 1e-3
# Multiplier on the roundoff estimate eps * scale / mean_symbol used to gate
# descent steps.
_LAMBDA1_NOISE_GATE = 4.0


def _lambda1_details(
    grid: PixelGrid,
    pair,
    coarse_grid_size: int = 8,
    tol: float = 1e-10,
    seed: int = 0,
    method: str = "auto",
    refine_bracket: float = 1e-3,
) -> tuple[float, np.ndarray, dict]:
    """Run the Bloch-minimum search; return (value, gamma_argmin, details).

    Coarse uniform grid over the zone (gamma = 0 included, served by the
    mean-free periodic solver), then compass search with step halving down to
    refine_bracket.  Two guards keep the descent out of the roundoff regime
    near gamma = 0, where the whitening weight 1/sqrt(mean symbol) blows up
    and evaluated quotients can dip below the true minimum:

    * candidates with 0 < |gamma| < 1e-3 are never evaluated;
    * a step is accepted only if it improves on the incumbent by more than
      eps * scale / mean_symbol(gamma), a bound on the amplified fft roundoff
      at the candidate.  For honestly degenerate cells the quotient falls like
      C |gamma|^2 with C far above that bound, so real descent passes the gate.
    """
    if coarse_grid_size < 4:
        raise ValueError(f"coarse_grid_size must be >= 4, got {coarse_grid_size}")
    cache: dict[tuple[float, float], float] = {}
    warm = {"X": None, "scale": 1.0}

    def ev(g) -> float:
        g = _wrap_gamma(g)
        key = (round(float(g[0]), 12), round(float(g[1]), 12))
        if key not in cache:
            if len(cache) >= _LAMBDA1_MAX_EVALS:
                raise NotConverged(
                    math.nan, len(cache), what="lambda1 gamma-search evaluation budget"
                )
            res, op = _bloch_details(
                grid, pair, g, tol=tol, seed=seed, method=method, x0=warm["X"]
            )
            if op is not None:
                warm["scale"] = max(warm["scale"], op.scale)
                if res.vector is not None:
                    warm["X"] = res.vector
            cache[key] = res.value
        return cache[key]

    eps = float(np.finfo(float).eps)

    def noise_gate(g) -> float:
        if g[0] == 0.0 and g[1] == 0.0:
            return 0.0
        sym0 = _mean_mode_symbol(grid.n, g)
        return _LAMBDA1_NOISE_GATE * eps * warm["scale"] / max(sym0, eps)

    best_g = np.zeros(2)
    best_v = math.inf
    for i in range(coarse_grid_size):
        for j in range(coarse_grid_size):
            g = _wrap_gamma(2.0 * math.pi * np.array([i, j]) / coarse_grid_size)
            v = ev(g)
            if v < best_v - noise_gate(g):
                best_v, best_g = v, g

    step = math.pi / coarse_grid_size
    while True:
        improved = False
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                g = _wrap_gamma(best_g + step * np.array([dx, dy]))
                r = math.hypot(float(g[0]), float(g[1]))
                if 0.0 < r < _LAMBDA1_GAMMA_FLOOR:
                    continue
                v = ev(g)
                if v < best_v - noise_gate(g):
                    best_v, best_g = v, g
                    improved = True
        if improved:
            continue
        if step <= refine_bracket:
            break
        step *= 0.5
    eig_kind = "dense" if method == "dense" or (method == "auto" and grid.n <= _DENSE_N) else "lobpcg"
    details = {
        "value": best_v,
        "tolerance": step,
        "method": f"grid+pattern/{eig_kind}",
        "iterations": len(cache),
    }
    return best_v, best_g, details


def lambda1(
    grid: PixelGrid,
    pair,
    coarse_grid_size: int = 8,
    tol: float = 1e-10,
    seed: int = 0,
    method: str = "auto",
    refine_bracket: float = 1e-3,
) -> tuple[float, np.ndarray]:
    """Infimum of the Bloch constants over gamma: (value, gamma_argmin).

    Coarse uniform grid over the Brillouin zone, then a compass (pattern)
    search with step halving down to the requested bracket width.  The
    returned value is the Bloch constant actually evaluated at the returned
    gamma, hence an upper bound for the infimum over all gamma of the
    discrete problem; descent steps are gated against the whitening roundoff
    bound near gamma = 0 so the reported minimum never chases fft noise
    below the true quotient.
    """
    value, gamma, _ = _lambda1_details(
        grid,
        pair,
        coarse_grid_size=coarse_grid_size,
        tol=tol,
        seed=seed,
        method=method,
        refine_bracket=refine_bracket,
    )
    return value, gamma


def _lambda3_details(
    grid: PixelGrid,
    pair,
    k: int,
    tol: float = 1e-10,
    seed: int = 0,
    method: str = "auto",
) -> _EigResult:
    if k < 1:
        raise ValueError(f"supercell factor must be >= 1, got {k}")
    if k == 1:
        return _lambda6_details(grid, pair, tol=tol, seed=seed, method=method)
    tiled = PixelGrid(
        grid.n * k,
        np.tile(grid.chi, (k, k)),
        {"kind": "supercell", "k": k, "base": dict(grid.provenance)},
    )
    return _lambda6_details(tiled, pair, tol=tol, seed=seed, method=method)


def lambda3_supercell(
    grid: PixelGrid,
    pair,
    k: int,
    tol: float = 1e-10,
    seed: int = 0,
    method: str = "auto",
) -> float:
    """Periodic coercivity constant of the k x k tiled supercell.

    Equals the minimum of bloch_min over gamma in 2*pi*(j1, j2)/k (the
    translation characters of the tiling), which tests exploit.
    """
    return _lambda3_details(grid, pair, k, tol=tol, seed=seed, method=method).value


@dataclass
class Lambda4Result:
    """Shift constant over rank-one loadings, with its minimizing direction.

    Unpacks as (value, (a, b)) for call sites that only want the argmin.
    phi_a and phi_b are the angles of a and b in [0, pi).
    """

    value: float
    a: np.ndarray
    b: np.ndarray
    phi_a: float
    phi_b: float
    bracket: tuple[float, float]
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.value
        yield (self.a, self.b)


def _rank_one_vec(phi_a: float, phi_b: float) -> np.ndarray:
    ca, sa = math.cos(phi_a), math.sin(phi_a)
    cb, sb = math.cos(phi_b), math.sin(phi_b)
    return np.array([ca * cb, ca * sb, sa * cb, sa * sb])


class _ShiftRootFinder:
    """Finds t*(M): the root of t -> min_v shifted cell energy at loading M.

    The map is concave and strictly decreasing (slope <= -|M|^2), so a
    certified bisection bracket [g >= 0, g < 0] plus two Newton polish steps
    using the exact envelope slope -(|M|^2 + |grad v|^2) lands within
    rounding of the root.  Nonpositive CG curvature just means the shift
    reached the discrete spectrum, i.e. g(t) < 0.
    """

    # The upper bracket stays this fraction below the discrete lambda6 --
    # tight enough that a root is only reported as capped when it genuinely
    # crowds the spectrum (within 0.01% of lambda6).
    _CAP_MARGIN = 1e-4

    def __init__(self, grid, pair, op, lam6: float, bisect_tol: float, tol: float, max_iter: int):
        self.grid = grid
        self.pair = pair
        self.op = op
        self.lam6 = lam6
        self.btol = bisect_tol
        self.tol = tol
        self.max_iter = max_iter
        self.solves = 0

    def _g(self, M, t: float, y0):
        """(energy, solution) of the shifted problem; (None, None) if indefinite."""
        self.solves += 1
        try:
            sol = solve_corrector(
                CellProblem(self.grid, self.pair, shift=t),
                M,
                tol=self.tol,
                max_iter=self.max_iter,
                _op=self.op,
                _y0=y0,
            )
        except IndefinitenessDetected:
            return None, None
        return sol.energy, sol

    def root(self, M) -> tuple[float, tuple[float, float], bool]:
        g0, sol = self._g(M, 0.0, None)
        if g0 is None:
            raise DegenerateCell("cell energy indefinite at zero shift")
        y0 = sol.whitened
        lo = 0.0
        if g0 < 0.0:
            lo = -max(1.0, self.lam6)
            for _ in range(60):
                glo, _sol_lo = self._g(M, lo, y0)
                if glo is not None and glo >= 0.0:
                    break
                lo *= 2.0
            else:
                raise ShiftExceedsLambda6("could not bracket the shift root from below")
        hi = self.lam6 * (1.0 - self._CAP_MARGIN)
        ghi, _sol_hi = self._g(M, hi, y0)
        if ghi is not None and ghi >= 0.0:
            # g stays nonnegative right up to the cap, so the root sits in
            # (hi, lambda6]: any shift above lambda6 makes the quadratic part
            # indefinite and sends the infimum to -inf.  Report lambda6, the
            # top of the certified bracket -- exact for a homogeneous cell,
            # where the envelope root equals lambda6, and at worst one margin
            # too high otherwise.
            return self.lam6, (hi, self.lam6), True
        while hi - lo > self.btol:
            mid = 0.5 * (lo + hi)
            gm, sol_m = self._g(M, mid, y0)
            if gm is None or gm < 0.0:
                hi = mid
            else:
                lo = mid
                if sol_m is not None:
                    y0 = sol_m.whitened
        t = 0.5 * (lo + hi)
        for _ in range(2):
            gt, sol_t = self._g(M, t, y0)
            if gt is None:
                t = lo
                break
            y0 = sol_t.whitened
            slope = 1.0 + sol_t.grad_norm_sq  # |M| = 1 for unit rank-one loadings
            t = t + gt / slope
            t = min(max(t, lo - self.btol), hi + self.btol)
        return t, (lo, hi), False


def lambda4(
    grid: PixelGrid,
    pair,
    angle_samples: int = 64,
    bisect_tol: float = 1e-6,
    tol: float = 1e-10,
    max_iter: int = 20000,
    seed: int = 0,
    lambda6_value: float | None = None,
    hom: HomogenizedResult | None = None,
    method: str = "auto",
) -> Lambda4Result:
    """Largest uniform shift keeping every rank-one-loaded cell energy
    nonnegative: min over unit a, b of the root t*(a (x) b).

    The angle square [0, pi)^2 is screened by the homogenized quotient
    M.L*M, sharpened at no extra solves into the Rayleigh quotient of the
    zero-shift corrector (by linearity it only needs the basis correctors'
    gradient Gram matrix).  The best few screened directions get the full
    root find, and a pattern search refines the angles around the winner
    down to a 2e-3 step.
    """
    if angle_samples < 16:
        raise ValueError(f"angle_samples must be >= 16, got {angle_samples}")
    lam6 = lambda6_value if lambda6_value is not None else lambda6(
        grid, pair, tol=tol, seed=seed, method=method
    )
    if lam6 <= 10.0 * bisect_tol:
        # The periodic problem already has a (near-)zero-energy field, so any
        # positive shift is indefinite on some direction and every rank-one
        # root is squeezed into [0, lambda6]: report the top of that bracket.
        # Cells whose weak phase can trade energy against the strong one in
        # two independent axes (block checkerboards of a borderline pair) hit
        # this with an exactly representable zero mode, while their
        # homogenized tensor stays strongly elliptic.
        e1 = np.array([1.0, 0.0])
        return Lambda4Result(
            value=lam6,
            a=e1,
            b=e1,
            phi_a=0.0,
            phi_b=0.0,
            bracket=(min(0.0, lam6), lam6),
            diagnostics={
                "solves": 0,
                "candidates": 0,
                "capped": True,
                "degenerate_lambda6": True,
                "lambda6": lam6,
                "bisect_tol": bisect_tol,
            },
        )
    if hom is None:
        hom = homogenized_tensor(grid, pair, tol=tol, max_iter=max_iter)
    op = CellOperator(grid, pair)

    # Gram matrix of the four basis correctors: corrector of M is the linear
    # combination with vec(M) coefficients, so |grad v_M|^2 = vec(M).N.vec(M).
    keys = ("11", "12", "21", "22")
    vs = [hom.nodal_correctors[k] for k in keys]
    N = np.empty((4, 4))
    Gv = [op.apply_G(v) for v in vs]
    for i in range(4):
        for j in range(i, 4):
            N[i, j] = N[j, i] = float(np.real(np.vdot(vs[i], Gv[j])))

    phis = np.arange(angle_samples) * (math.pi / angle_samples)
    ca, sa = np.cos(phis), np.sin(phis)
    cb, sb = np.cos(phis), np.sin(phis)
    V = np.empty((angle_samples, angle_samples, 4))
    V[:, :, 0] = ca[:, None] * cb[None, :]
    V[:, :, 1] = ca[:, None] * sb[None, :]
    V[:, :, 2] = sa[:, None] * cb[None, :]
    V[:, :, 3] = sa[:, None] * sb[None, :]
    s_screen = np.einsum("xyi,ij,xyj->xy", V, hom.lstar.coeffs, V)
    n_screen = np.einsum("xyi,ij,xyj->xy", V, N, V)
    t_hat = s_screen / (1.0 + n_screen)

    order = np.argsort(t_hat, axis=None)
    candidates: list[tuple[int, int]] = []
    min_sep = 3
    for flat in order:
        i, j = divmod(int(flat), angle_samples)
        ok = True
        for (ci, cj) in candidates:
            di = min(abs(i - ci), angle_samples - abs(i - ci))
            dj = min(abs(j - cj), angle_samples - abs(j - cj))
            if max(di, dj) < min_sep:
                ok = False
                break
        if ok:
            candidates.append((i, j))
        if len(candidates) >= 6:
            break

    finder = _ShiftRootFinder(grid, pair, op, lam6, bisect_tol, tol, max_iter)
    cache: dict[tuple[float, float], tuple[float, tuple[float, float], bool]] = {}

    def eval_angles(pa: float, pb: float):
        key = (round(pa % math.pi, 10), round(pb % math.pi, 10))
        if key not in cache:
            M = _rank_one_vec(key[0], key[1]).reshape(2, 2)
            cache[key] = finder.root(M)
        return cache[key]

    step0 = math.pi / angle_samples
    best = None  # (value, pa, pb, bracket, capped)
    for (i, j) in candidates:
        val, bracket, capped = eval_angles(phis[i], phis[j])
        if best is None or val < best[0]:
            best = (val, phis[i], phis[j], bracket, capped)

    step = step0
    while step > 2e-3:
        improved = False
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                pa = best[1] + di * step
                pb = best[2] + dj * step
                val, bracket, capped = eval_angles(pa, pb)
                if val < best[0]:
                    best = (val, pa % math.pi, pb % math.pi, bracket, capped)
                    improved = True
        if not improved:
            step *= 0.5

    value, pa, pb, bracket, capped = best
    a = np.array([math.cos(pa), math.sin(pa)])
    b = np.array([math.cos(pb), math.sin(pb)])
    return Lambda4Result(
        value=value,
        a=a,
        b=b,
        phi_a=pa,
        phi_b=pb,
        bracket=bracket,
        diagnostics={
            "solves": finder.solves,
            "candidates": len(candidates),
            "capped": capped,
            "screen_min": float(t_hat.min()),
            "lambda6": lam6,
            "bisect_tol": bisect_tol,
        },
    )


# Dyadic magnitude ladder for the directional gamma -> 0 extrapolation.  The
# window starts at 2*pi/8 (large magnitudes carry strong higher-order terms
# that poison the low columns) and stops at 2*pi/1024, above the whitening
# roundoff floor, with eight rungs so the power cancellation has room to work.
_DEFAULT_GAMMA_SEQUENCE = tuple(2.0 * math.pi * 0.5**j for j in range(3, 11))


def _lambda5_details(
    grid: PixelGrid,
    pair,
    gamma_sequence=None,
    tol: float = 1e-10,
    directions: int = 8,
    seed: int = 0,
    method: str = "auto",
) -> tuple[float, float, dict]:
    if directions < 8:
        raise ValueError(f"need at least 8 scan directions, got {directions}")
    if gamma_sequence is None:
        gamma_sequence = _DEFAULT_GAMMA_SEQUENCE
    mags = np.asarray(list(gamma_sequence), dtype=float)
    if mags.ndim != 1 or len(mags) < 2:
        raise ValueError("gamma_sequence must hold at least two magnitudes")
    if np.any(mags <= 0.0) or np.any(np.diff(mags) >= 0.0):
        raise ValueError("gamma_sequence must be positive and strictly decreasing")

    per_dir: dict[float, dict] = {}
    best_val, best_resid = math.inf, 0.0
    evals = 0
    for d in range(directions):
        phi = math.pi * d / directions
        b = np.array([math.cos(phi), math.sin(phi)])
        vals = []
        for mag in mags:
            vals.append(bloch_min(grid, pair, mag * b, tol=tol, seed=seed, method=method))
            evals += 1
        # On a halving ladder the column with factor 2^m cancels the t^m term
        # of a general power expansion in t = |gamma|.  The general (not
        # even-only) form matters: along directions where a mean-free branch
        # and a rank-one branch nearly cross, the minimal eigenvalue behaves
        # like limit - c*t above the tiny gap, and an even-power scheme would
        # extrapolate that cone to a confidently wrong limit.  The residual
        # (last column vs the previous one) reports what the chosen sequence
        # actually achieved.
        R = [list(vals)]
        for m in range(1, len(vals)):
            prev = R[-1]
            fac = 2.0**m
            R.append([(fac * prev[i] - prev[i - 1]) / (fac - 1.0) for i in range(1, len(prev))])
        limit = R[-1][-1]
        resid = abs(R[-1][-1] - R[-2][-1])
        per_dir[phi] = {"limit": limit, "residual": resid, "values": vals}
        if limit < best_val:
            best_val, best_resid = limit, resid
    details = {
        "value": best_val,
        "tolerance": best_resid,
        "method": "richardson",
        "iterations": evals,
        "per_direction": per_dir,
    }
    return best_val, best_resid, details


def lambda5(
    grid: PixelGrid,
    pair,
    gamma_sequence=None,
    tol: float = 1e-10,
    directions: int = 8,
    seed: int = 0,
    method: str = "auto",
) -> float:
    """gamma -> 0 limit of the Bloch constant, Richardson-extrapolated.

    gamma_sequence is a strictly decreasing ladder of magnitudes (default
    2*pi*2^-j, j = 3..10); each of the scanned directions (>= 8, spread over
    [0, pi)) is extrapolated separately and the minimum over directions is
    returned.  The extrapolation residual is reported through the spectral
    report's diagnostics.
    """
    value, _, _ = _lambda5_details(
        grid,
        pair,
        gamma_sequence=gamma_sequence,
        tol=tol,
        directions=directions,
        seed=seed,
        method=method,
    )
    return value


@dataclass
class SpectralReport:
    """All constants of one grid/pair, with cross-order checks and diagnostics.

    lambda4_angles is (phi_b, phi_a) -- layer normal first -- matching the
    argmin convention of the rank-one loading a (x) b.
    """

    lambda6: float
    lambda4: float
    lambda4_angles: tuple
    lambda4_direction: tuple
    lambda1: float
    lambda1_gamma: tuple
    lambda5: float
    lambda5_residual: float
    lambda3: dict
    lstar_rank_one_min: float
    orderings: dict
    diagnostics: dict


def compute_spectral_report(
    grid: PixelGrid,
    pair,
    tol: float = 1e-10,
    max_iter: int = 20000,
    angle_samples: int = 64,
    bisect_tol: float = 1e-6,
    gamma_grid: int = 8,
    supercells: tuple = (2, 3),
    seed: int = 0,
    method: str = "auto",
) -> SpectralReport:
    """Compute every constant once, sharing the homogenized solve, and record
    whether the expected orderings hold at the standard slacks."""
    lam6_res = _lambda6_details(grid, pair, tol=tol, seed=seed, method=method)
    lam6 = lam6_res.value
    hom = homogenized_tensor(grid, pair, tol=tol, max_iter=max_iter)
    l4 = lambda4(
        grid,
        pair,
        angle_samples=angle_samples,
        bisect_tol=bisect_tol,
        tol=tol,
        max_iter=max_iter,
        seed=seed,
        lambda6_value=lam6,
        hom=hom,
        method=method,
    )
    lam1, gam1, lam1_details = _lambda1_details(
        grid, pair, coarse_grid_size=gamma_grid, tol=tol, seed=seed, method=method
    )
    lam5, resid5, lam5_details = _lambda5_details(
        grid, pair, tol=tol, seed=seed, method=method
    )
    lam3_details = {
        int(k): _lambda3_details(grid, pair, int(k), tol=tol, seed=seed, method=method)
        for k in supercells
    }
    lam3 = {k: d.value for k, d in lam3_details.items()}
    r1min, (_ra, _rb) = rank_one_min(hom.lstar)

    orderings = {
        "lambda6_ge_lambda4": lam6 >= l4.value - 1e-8,
        "lambda4_ge_lambda1": l4.value >= lam1 - 1e-6,
        "lambda1_le_lambda6": lam1 <= lam6 + 1e-10,
        "lambda3_between_lambda1_lambda6": all(
            lam1 - 1e-6 <= v <= lam6 + 1e-8 for v in lam3.values()
        ),
        "lambda5_ge_lambda1": lam5 >= lam1 - 1e-4,
        "lambda4_le_lstar_rank_one": l4.value <= r1min + 1e-6,
    }
    constants = {
        "lambda6": {
            "value": lam6,
            "tolerance": lam6_res.tolerance,
            "method": lam6_res.method,
            "iterations": lam6_res.iterations,
        },
        "lambda4": {
            "value": l4.value,
            "tolerance": bisect_tol,
            "method": "screen+bisect+newton",
            "iterations": l4.diagnostics["solves"],
        },
        "lambda1": {k: lam1_details[k] for k in ("value", "tolerance", "method", "iterations")},
        "lambda5": {k: lam5_details[k] for k in ("value", "tolerance", "method", "iterations")},
        "lambda3": {
            str(k): {
                "value": d.value,
                "tolerance": d.tolerance,
                "method": d.method,
                "iterations": d.iterations,
            }
            for k, d in lam3_details.items()
        },
        "lstar_rank_one_min": {
            "value": r1min,
            "tolerance": 1e-10,
            "method": "angle-scan+golden",
            "iterations": 720,
        },
    }
    diagnostics = {
        "constants": constants,
        "lambda4": l4.diagnostics,
        "lambda4_bracket": l4.bracket,
        "lambda5_per_direction": {
            f"{k:.6f}": {"limit": v["limit"], "residual": v["residual"]}
            for k, v in lam5_details["per_direction"].items()
        },
        "hom": hom.diagnostics,
        "tol": tol,
        "method": method,
        "seed": seed,
    }
    return SpectralReport(
        lambda6=lam6,
        lambda4=l4.value,
        lambda4_angles=(l4.phi_b, l4.phi_a),
        lambda4_direction=(l4.a.tolist(), l4.b.tolist()),
        lambda1=lam1,
        lambda1_gamma=tuple(gam1.tolist()),
        lambda5=lam5,
        lambda5_residual=resid5,
        lambda3=lam3,
        lstar_rank_one_min=r1min,
        orderings=orderings,
        diagnostics=diagnostics,
    )
