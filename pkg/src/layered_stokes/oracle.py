"""Independent ground truth: dense solves and closed-form solutions.

Sign convention throughout: ``L u + grad p = f + D_a f_a``, ``div u = g``
with ``L u = D_a (A^{ab} D_b u)``.  For ``A = I`` this is
``Delta u + grad p = f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import SaddleSystem, StaggeredField
from .linsolve import SingularSystemError, SolverError

DENSE_MAX_DOFS = 5000


def dense_solve(sys: SaddleSystem, rhs) -> StaggeredField:
    """Dense LU solve of the full gauge-constrained block matrix."""
    b = np.asarray(getattr(rhs, "vector", rhs), dtype=float)
    if sys.n_total > DENSE_MAX_DOFS:
        raise SolverError(f"{sys.n_total} unknowns exceed the dense budget {DENSE_MAX_DOFS}")
    M = sys.matrix.toarray()
    try:
        x = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    nb = np.linalg.norm(b)
    res = np.linalg.norm(M @ x - b) / nb if nb > 0 else np.linalg.norm(x)
    if res > 1e-12:
        raise SingularSystemError(f"dense solve residual {res:.2e}: matrix numerically singular")
    n_u, n_p = sys.n_u, sys.n_p
    return StaggeredField(sys.grid, x[:n_u], x[n_u:n_u + n_p], x[n_u + n_p:])


def smallest_eigenvalue(sys: SaddleSystem) -> float:
    """Smallest |eigenvalue| of the dense constrained block matrix."""
    if sys.n_total > DENSE_MAX_DOFS:
        raise SolverError("system too large for a dense eigen-decomposition")
    ev = np.linalg.eigvalsh(sys.matrix.toarray())
    return float(np.abs(ev).min())


@dataclass(frozen=True)
class AnalyticSolution:
    """Closed-form (u, p) with the data that produces them.

    Every callable takes an ``(N, d)`` point array.  ``velocity`` returns
    ``(N, d)``, ``pressure`` ``(N,)``, ``forcing`` the zeroth-order ``f``
    ``(N, d)``, ``flux`` the ``f_a`` data ``(N, d, d)`` (``[.., a, i]``), and
    ``viscosity`` the scalar viscosity ``(N,)``.
    """

    velocity: Callable
    pressure: Callable
    forcing: Callable
    flux: Callable
    viscosity: Callable
    d: int


def fourier_solution(k: Sequence[int], f_hat: Sequence[float]) -> AnalyticSolution:
    """Torus solution of ``Delta u + grad p = f_hat sin(2 pi k.x)``, ``div u = 0``.

    ``u = a sin(2 pi k.x)`` with ``a = -(I - k k^T/|k|^2) f_hat / (4 pi^2 |k|^2)``
    and ``p = b cos(2 pi k.x)`` with ``b = -k.f_hat / (2 pi |k|^2)``.
    """
    k = np.asarray(k, dtype=float)
    f_hat = np.asarray(f_hat, dtype=float)
    if k.shape != f_hat.shape:
        raise ValueError("wave vector and amplitude must have the same length")
    k2 = float(k @ k)
    if k2 == 0:
        raise ValueError("wave vector must be nonzero")
    d = k.size
    proj = np.eye(d) - np.outer(k, k) / k2
    a = -proj @ f_hat / (4 * np.pi ** 2 * k2)
    b = -float(k @ f_hat) / (2 * np.pi * k2)

    def phase(x):
        return 2 * np.pi * (np.atleast_2d(x) @ k)

    return AnalyticSolution(
        velocity=lambda x: np.sin(phase(x))[:, None] * a,
        pressure=lambda x: b * np.cos(phase(x)),
        forcing=lambda x: np.sin(phase(x))[:, None] * f_hat,
        flux=lambda x: np.zeros((len(np.atleast_2d(x)), d, d)),
        viscosity=lambda x: np.ones(len(np.atleast_2d(x))),
        d=d,
    )


@dataclass(frozen=True)
class LayeredShear:
    """u = (0, u2(x1), 0...) with nu(x1) u2'(x1) = sigma, u2(0) = 0, p = 0."""

    viscosities: np.ndarray
    breakpoints: np.ndarray
    sigma: float
    d: int = 2

    def layer(self, x1):
        return np.searchsorted(self.breakpoints, np.asarray(x1), side="left")

    def nu(self, x1):
        return self.viscosities[self.layer(x1)]

    def slope(self, x1):
        return self.sigma / self.nu(x1)

    def u2(self, x1):
        x1 = np.asarray(x1, dtype=float)
        edges = np.concatenate([[0.0], self.breakpoints])
        slopes = self.sigma / self.viscosities
        base = np.concatenate([[0.0], np.cumsum(slopes[:-1] * np.diff(edges))])
        k = self.layer(x1)
        return base[k] + slopes[k] * (x1 - edges[k])

    def velocity(self, x):
        x = np.atleast_2d(x)
        out = np.zeros_like(x, dtype=float)
        out[:, 1] = self.u2(x[:, 0])
        return out

    def pressure(self, x):
        return np.zeros(len(np.atleast_2d(x)))

    def U(self, x):
        """The flux combination: U_2 = nu D_1 u_2, all other entries 0."""
        x = np.atleast_2d(x)
        out = np.zeros_like(x, dtype=float)
        out[:, 1] = self.nu(x[:, 0]) * self.slope(x[:, 0])
        return out

    def jump_D1u2(self, at: float) -> float:
        eps = 1e-9
        return float(abs(self.slope(at + eps) - self.slope(at - eps)))


def layered_shear_solution(viscosities, breakpoints, sigma: float, d: int = 2) -> LayeredShear:
    nu = np.asarray(viscosities, dtype=float).reshape(-1)
    bp = np.asarray(breakpoints, dtype=float).reshape(-1)
    if nu.size != bp.size + 1:
        raise ValueError("need one viscosity per layer")
    if np.any(nu <= 0):
        raise ValueError("viscosities must be positive")
    if bp.size > 1 and np.any(np.diff(bp) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    return LayeredShear(nu, bp, float(sigma), d)


# ---------------------------------------------------------------------------
# self-validation by high-order finite differences
# ---------------------------------------------------------------------------

_D1 = (np.array([-3, -2, -1, 1, 2, 3]), np.array([-1, 9, -45, 45, -9, 1]) / 60.0)
_D2 = (np.array([-3, -2, -1, 0, 1, 2, 3]),
       np.array([2, -27, 270, -490, 270, -27, 2]) / 180.0)


def _fd(fn, x, axis, stencil, step, order):
    offs, w = stencil
    out = 0.0
    for o, c in zip(offs, w):
        y = x.copy()
        y[:, axis] += o * step
        out = out + c * fn(y)
    return out / step ** order


def stokes_residual(sol: AnalyticSolution, points, step: float = 1e-3) -> float:
    """Max residual of ``div(nu grad u) + grad p - f`` and ``div u`` at points
    (scalar viscosity, ``f_a = 0``), by 6th-order central differences."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    d = sol.d
    mom = np.zeros((len(x), d))
    div = np.zeros(len(x))
    for a in range(d):
        # D_a(nu D_a u) = nu D_aa u + (D_a nu)(D_a u)
        mom += sol.viscosity(x)[:, None] * _fd(sol.velocity, x, a, _D2, step, 2)
        mom += (_fd(sol.viscosity, x, a, _D1, step, 1)[:, None]
                * _fd(sol.velocity, x, a, _D1, step, 1))
        mom[:, a] += _fd(sol.pressure, x, a, _D1, step, 1)
        div += _fd(sol.velocity, x, a, _D1, step, 1)[:, a]
    mom -= sol.forcing(x)
    return float(max(np.abs(mom).max(), np.abs(div).max()))


def shear_residual(sol: LayeredShear, points, step: float = 1e-3) -> float:
    """Residual of ``D_1(nu D_1 u_2) = 0`` and ``nu D_1 u_2 = sigma`` at interior
    points at least ``4 step`` away from every breakpoint."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    x1 = x[:, 0]
    if sol.breakpoints.size:
        gap = np.abs(x1[:, None] - sol.breakpoints[None, :]).min(axis=1)
        if np.any(gap < 4 * step):
            raise ValueError("points too close to a breakpoint for the stencil")
    u2 = lambda y: sol.u2(y[:, 0])
    second = _fd(u2, x, 0, _D2, step, 2)
    flux = sol.nu(x1) * _fd(u2, x, 0, _D1, step, 1)
    return float(max(np.abs(second).max(), np.abs(flux - sol.sigma).max()))


def shear_flux_continuity(sol: LayeredShear) -> float:
    """Largest mismatch of nu u2' between the two sides of every breakpoint."""
    eps = 1e-9
    worst = 0.0
    for b in sol.breakpoints:
        lo = sol.nu(b - eps) * (sol.u2(b) - sol.u2(b - eps)) / eps
        hi = sol.nu(b + eps) * (sol.u2(b + eps) - sol.u2(b)) / eps
        worst = max(worst, abs(hi - lo))
    return float(worst)
