"""Solvers for the gauge-constrained saddle-point system."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import coeffs as cf
from .grid import MacGrid, SaddleSystem, StaggeredField, assemble, assemble_rhs, gradient, divergence

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DIRECT_MAX_CELLS = 256


class SolverError(RuntimeError):
    pass


class NonConvergenceError(SolverError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class SingularSystemError(SolverError):
    pass


def residual(sys: SaddleSystem, x: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(sys.matrix @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def _check_compatible(sys: SaddleSystem, b: np.ndarray):
    cont = b[sys.n_u:sys.n_u + sys.n_p]
    scale = max(np.abs(cont).sum(), np.abs(b).max(), 1e-300)
    if abs(cont.sum()) > 1e-10 * scale:
        raise SingularSystemError(
            f"continuity data has nonzero total {cont.sum():.3e}; the divergence "
            "constraint admits only mean-zero data on this domain")


def _split(sys: SaddleSystem, x: np.ndarray) -> StaggeredField:
    return StaggeredField(sys.grid, x[:sys.n_u].copy(), x[sys.n_u:sys.n_u + sys.n_p].copy(),
                          x[sys.n_u + sys.n_p:].copy())


REG_EPS = 1e-6


def _viscosity_scale(sys: SaddleSystem) -> np.ndarray:
    d = sys.grid.d
    return np.einsum("naaii->n", sys.cell_A) / (d * d)


def _core(sys: SaddleSystem):
    core = sys._cache.get("core")
    if core is None:
        core = sp.bmat([[sys.K, sys.Bw.T], [sys.Bw, None]], format="csr")
        sys._cache["core"] = core
    return core


def _reduce_data(sys: SaddleSystem, b: np.ndarray):
    """Split the bordered data into consistent core data and multipliers.

    The pressure multiplier absorbs the mean of the continuity data, the
    velocity multipliers (periodic boxes) absorb the mean force per component.
    """
    n_u, n_p = sys.n_u, sys.n_p
    rhs = b[:n_u + n_p].copy()
    hd = sys.grid.h ** sys.grid.d
    lam = np.zeros(sys.n_gauge)
    cont = rhs[n_u:]
    lam[0] = cont.sum() / (hd * n_p)
    cont -= lam[0] * hd
    if sys.grid.needs_velocity_gauge:
        for j, sl in enumerate(sys.grid.component_slices()):
            mean_force = rhs[sl].mean()
            lam[1 + j] = mean_force / hd
            rhs[sl] -= mean_force
    return rhs, lam


def _factor(sys: SaddleSystem):
    """Symmetric LDL^T of the quasi-definite regularization
    ``[[K + e_u I, B^T], [B, -e_p I]]``; any symmetric ordering is stable
    for such matrices, so no pivoting is needed."""
    lu = sys._cache.get("lu")
    if lu is None:
        hd = sys.grid.h ** sys.grid.d
        nu = float(_viscosity_scale(sys).mean())
        reg = sp.bmat([[sys.K + REG_EPS * nu * hd * sp.identity(sys.n_u), sys.Bw.T],
                       [sys.Bw, -(REG_EPS * hd / nu) * sp.identity(sys.n_p)]], format="csc")
        try:
            lu = spla.splu(reg, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise SingularSystemError(f"sparse factorization failed: {exc}") from exc
        sys._cache["lu"] = lu
    return lu


def _solve_direct(sys, b, tol, max_iter):
    """Factor the regularized core once, then refine against the exact
    system; the regularization error contracts by ~1e-6 per step."""
    rhs, lam = _reduce_data(sys, b)
    lu = _factor(sys)
    core = _core(sys)
    x = np.zeros(sys.n_u + sys.n_p)
    nr = np.linalg.norm(rhs)
    prev = np.inf
    for _ in range(min(max_iter, 10)):
        r = rhs - core @ x
        rn = np.linalg.norm(r)
        if rn <= 0.01 * tol * nr or rn >= 0.9 * prev:
            break
        prev = rn
        x = x + lu.solve(r)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("factorization produced non-finite values")
    x = _project_gauge(sys, np.concatenate([x, lam]))
    return x, residual(sys, x, b)


def _preconditioner(sys: SaddleSystem):
    pre = sys._cache.get("pre")
    if pre is not None:
        return pre
    hd = sys.grid.h ** sys.grid.d
    # viscosity scale per cell: mean of the diagonal entries A^{aa}_{ii}
    diag = _viscosity_scale(sys)
    nu_bar = float(diag.mean())
    Kreg = (sys.K + nu_bar * hd * sp.identity(sys.n_u, format="csr")).tocsc()
    lu = spla.splu(Kreg, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options=dict(SymmetricMode=True))
    p_scale = diag / hd
    n_u, n_p = sys.n_u, sys.n_p

    def apply(r):
        z = np.empty_like(r)
        z[:n_u] = lu.solve(r[:n_u])
        z[n_u:n_u + n_p] = p_scale * r[n_u:n_u + n_p]
        return z

    pre = spla.LinearOperator((n_u + n_p, n_u + n_p), matvec=apply, dtype=float)
    sys._cache["pre"] = pre
    return pre


def _project_gauge(sys: SaddleSystem, x: np.ndarray) -> np.ndarray:
    x = x.copy()
    p = x[sys.n_u:sys.n_u + sys.n_p]
    p -= p.mean()
    if sys.grid.needs_velocity_gauge:
        for sl in sys.grid.component_slices():
            x[sl] -= x[sl].mean()
    return x


def _solve_minres(sys, b, tol, max_iter):
    """Preconditioned MINRES on the unbordered block system.

    Gauge modes are removed from the data beforehand and from the iterate
    afterwards; multipliers are recovered from the projections.
    """
    rhs, lam = _reduce_data(sys, b)
    core = _core(sys)
    M = _preconditioner(sys)
    norm_b = np.linalg.norm(rhs)
    x = np.zeros(sys.n_u + sys.n_p)
    if norm_b == 0:
        return np.concatenate([x, lam]), 0.0
    # restarts: MINRES monitors the preconditioned residual, not the true one
    for _ in range(10):
        r = rhs - core @ x
        rn = np.linalg.norm(r)
        if rn <= 0.1 * tol * norm_b:
            break
        dx, _info = spla.minres(core, r, M=M, rtol=min(0.01 * tol * norm_b / rn, 0.5),
                                maxiter=max_iter)
        x = x + dx
    x = _project_gauge(sys, np.concatenate([x, lam]))
    res = residual(sys, x, b)
    if res > tol:
        raise NonConvergenceError(f"MINRES stopped at relative residual {res:.3e} > {tol:.1e}",
                                  res)
    return x, res


def solve(sys: SaddleSystem, rhs, tol: float = DEFAULT_TOL, max_iter: int = 2000,
          method: str = "auto") -> StaggeredField:
    """Solve for the gauge-fixed (u, p); ``rhs`` is a vector or an ``RHS``.

    ``method``: ``direct`` (sparse factorization plus refinement), ``minres``
    (block-preconditioned MINRES), or ``auto`` (direct up to 256 cells per
    axis).
    """
    b = np.asarray(getattr(rhs, "vector", rhs), dtype=float)
    if b.shape != (sys.n_total,):
        raise ValueError(f"rhs has length {b.size}, system has {sys.n_total} unknowns")
    if not 1e-14 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-14, 1e-6]")
    _check_compatible(sys, b)
    if not np.any(b):
        return _split(sys, np.zeros(sys.n_total))
    if method == "auto":
        method = "direct" if max(sys.grid.shape) <= DIRECT_MAX_CELLS else "minres"
    if method == "direct":
        x, res = _solve_direct(sys, b, tol, max_iter)
    elif method == "minres":
        x, res = _solve_minres(sys, b, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    if res > tol:
        raise NonConvergenceError(f"relative residual {res:.3e} exceeds {tol:.1e}", res)
    log.debug("solved %d unknowns (%s), residual %.2e", sys.n_total, method, res)
    return _split(sys, x)


def energy_identity(sys: SaddleSystem, field: StaggeredField, rhs) -> tuple:
    """Both sides of a(u, u) + sum h^d p g = F(u), F the momentum data."""
    hd = sys.grid.h ** sys.grid.d
    lhs = sys.energy(field.u) + hd * float(field.p @ rhs.g_effective)
    rhs_val = float(field.u @ rhs.vector[:sys.n_u])
    return lhs, rhs_val


@dataclass
class DivergenceResult:
    field: StaggeredField
    K1: float
    residual: float


def solve_divergence(grid: MacGrid, g, tol: float = DEFAULT_TOL, method: str = "auto"
                     ) -> DivergenceResult:
    """Velocity with zero boundary values and discrete divergence ``g``.

    Realized as the identity-coefficient Stokes solve with continuity data
    ``g``; reports ``K1 = ||D psi||_2 / ||g||_2`` (NaN for ``g = 0``).
    """
    g = np.asarray(g, dtype=float)
    gin = g[grid.dom.inside]
    scale = max(np.abs(gin).max(), 1.0)
    if abs(gin.mean()) > 1e-12 * scale:
        raise ValueError(f"g must have zero mean over the domain (mean {gin.mean():.3e})")
    A = cf.make_constant(grid.d, cf.identity_tensor(grid.d), 0.5)
    sys = assemble(A, grid, check=False)
    rhs = assemble_rhs(grid, g=g)
    field = solve(sys, rhs, tol=tol, method=method)
    hd = grid.h ** grid.d
    g_norm = np.sqrt(hd * (gin ** 2).sum())
    Du = gradient(field)[grid.dom.inside]
    d_norm = np.sqrt(hd * (Du ** 2).sum())
    if g_norm == 0:
        return DivergenceResult(field, float("nan"), 0.0)
    div = divergence(field)[grid.dom.inside]
    res = float(np.sqrt(hd * ((div - gin) ** 2).sum()) / g_norm)
    return DivergenceResult(field, float(d_norm / g_norm), res)
