"""Coefficient tensor fields A^{ab}_{ij}(x) for the generalized Stokes operator.

A tensor is evaluated on an ``(N, d)`` array of points and returns an
``(N, d, d, d, d)`` array indexed ``[point, alpha, beta, i, j]``, where
``alpha, beta`` are derivative directions and ``i, j`` are velocity
components.  The bilinear form is ``sum xi[a, i] A[a, b, i, j] xi[b, j]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

CONSTANT = "constant"
LAYERED = "layered_e1"
LAYERED_PERTURBED = "layered_plus_perturbation"


def identity_tensor(d: int) -> np.ndarray:
    """A^{ab}_{ij} = delta_ab delta_ij (the vector Laplacian)."""
    eye = np.eye(d)
    return np.einsum("ab,ij->abij", eye, eye)


def scalar_viscosity(d: int, nu: float) -> np.ndarray:
    return nu * identity_tensor(d)


def as_matrix(A: np.ndarray) -> np.ndarray:
    """Flatten ``(..., d, d, d, d)`` to the ``(..., d*d, d*d)`` form matrix.

    Rows are indexed by ``(alpha, i)`` and columns by ``(beta, j)``.
    """
    d = A.shape[-1]
    return np.swapaxes(A, -3, -2).reshape(A.shape[:-4] + (d * d, d * d))


def from_matrix(M: np.ndarray, d: int) -> np.ndarray:
    return np.swapaxes(M.reshape(M.shape[:-2] + (d, d, d, d)), -3, -2)


@dataclass(frozen=True)
class EllipticTensor:
    d: int
    delta: float
    structure: str
    constant: Optional[np.ndarray] = None
    breakpoints: np.ndarray = field(default_factory=lambda: np.zeros(0))
    layers: Optional[np.ndarray] = None
    perturbation: Optional[Callable[[np.ndarray], np.ndarray]] = None
    amplitude: float = 0.0

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        for arr in (self.constant, self.breakpoints, self.layers):
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)

    @property
    def is_layered(self) -> bool:
        return self.structure in (LAYERED, LAYERED_PERTURBED)

    def layer_index(self, x1: np.ndarray) -> np.ndarray:
        """Index of the layer containing ``x1``; a point on a breakpoint
        belongs to the lower layer."""
        return np.searchsorted(self.breakpoints, np.asarray(x1), side="left")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[-1] != self.d:
            raise ValueError(f"points must have trailing dimension {self.d}")
        if self.structure == CONSTANT:
            return np.broadcast_to(self.constant, (len(pts),) + self.constant.shape).copy()
        out = self.layers[self.layer_index(pts[:, 0])]
        if self.structure == LAYERED_PERTURBED:
            out = out + self.amplitude * self.perturbation(pts)
        return out

    def with_amplitude(self, eps: float) -> "EllipticTensor":
        if self.structure != LAYERED_PERTURBED:
            raise ValueError("amplitude only applies to perturbed layered tensors")
        return EllipticTensor(self.d, self.delta, self.structure, None,
                              self.breakpoints, self.layers, self.perturbation, eps)

    def shifted(self, C: np.ndarray) -> "EllipticTensor":
        """The same family with a constant tensor ``C`` added everywhere."""
        C = np.asarray(C, dtype=float)
        if self.structure == CONSTANT:
            return EllipticTensor(self.d, self.delta, CONSTANT, self.constant + C)
        return EllipticTensor(self.d, self.delta, self.structure, None, self.breakpoints,
                              self.layers + C, self.perturbation, self.amplitude)


def make_constant(d: int, tensor: np.ndarray, delta: float) -> EllipticTensor:
    tensor = np.array(tensor, dtype=float)
    if tensor.shape != (d, d, d, d):
        raise ValueError(f"tensor must have shape {(d,) * 4}, got {tensor.shape}")
    return EllipticTensor(d, delta, CONSTANT, tensor)


def make_layered(d: int, breakpoints: Sequence[float], layer_tensors, delta: float = 0.25
                 ) -> EllipticTensor:
    """Piecewise-constant tensor in x1: ``layer_tensors[k]`` on the k-th interval.

    A layer tensor may be given as a scalar viscosity, which expands to
    ``nu * I``.
    """
    bp = np.array(breakpoints, dtype=float).reshape(-1)
    if bp.size > 1 and not np.all(np.diff(bp) > 0):
        raise ValueError("breakpoints must be strictly increasing")
    layers = []
    for t in layer_tensors:
        t = np.asarray(t, dtype=float)
        layers.append(scalar_viscosity(d, float(t)) if t.ndim == 0 else t)
    if len(layers) != bp.size + 1:
        raise ValueError(f"need {bp.size + 1} layer tensors for {bp.size} breakpoints, "
                         f"got {len(layers)}")
    layers = np.array(layers)
    if layers.shape[1:] != (d, d, d, d):
        raise ValueError(f"layer tensors must have shape {(d,) * 4}")
    return EllipticTensor(d, delta, LAYERED, None, bp, layers)


def make_perturbed(base: EllipticTensor, perturbation: Callable[[np.ndarray], np.ndarray],
                   amplitude: float) -> EllipticTensor:
    if base.structure != LAYERED:
        raise ValueError("base must be a layered tensor")
    return EllipticTensor(base.d, base.delta, LAYERED_PERTURBED, None, base.breakpoints,
                          base.layers, perturbation, float(amplitude))


def sine_perturbation(d: int, entry=(0, 1, 1, 0), axis: int = 1, wavenumber: float = 1.0,
                      symmetric: bool = True):
    """``sin(2 pi k x_axis)`` times a unit entry matrix (symmetrized by default)."""
    E = np.zeros((d,) * 4)
    a, b, i, j = entry
    E[a, b, i, j] = 1.0
    if symmetric:
        E[b, a, j, i] = 1.0

    def pert(pts):
        s = np.sin(2 * np.pi * wavenumber * pts[:, axis])
        return s[:, None, None, None, None] * E

    return pert


def alternating_layers(d: int, n_jumps: int, low: float, high: float, length: float = 1.0,
                       n_cells: Optional[int] = None, delta: float = 0.25) -> EllipticTensor:
    """Scalar viscosity alternating between ``low`` and ``high`` with ``n_jumps``
    interior breakpoints at ``m L / (n_jumps + 1)``.

    With ``n_cells`` the breakpoints are snapped to the nearest cell face.
    """
    bp = length * np.arange(1, n_jumps + 1) / (n_jumps + 1)
    if n_cells is not None:
        h = length / n_cells
        bp = np.unique(np.clip(np.round(bp / h), 1, n_cells - 1)) * h
        if bp.size != n_jumps:
            raise ValueError(f"{n_jumps} jumps do not fit on {n_cells} cells")
    nus = [low if k % 2 == 0 else high for k in range(n_jumps + 1)]
    return make_layered(d, bp, nus, delta)


@dataclass
class EllipticityReport:
    passed: bool
    worst_form: float
    worst_bound_violation: float
    max_entry: float


def check_ellipticity(A: EllipticTensor, probe_points, probe_directions: Optional[int] = None,
                      seed: int = 0, rtol: float = 1e-12) -> EllipticityReport:
    """Probe both strong-ellipticity inequalities.

    Directions are the ``d*d`` canonical matrices ``e_a e_i^T`` plus
    ``probe_directions - d*d`` random unit directions (64 by default).  For
    layered tensors the smallest eigenvalue of each layer's symmetric part
    is included, which makes the check exact on the unperturbed family.
    """
    pts = np.atleast_2d(np.asarray(probe_points, dtype=float))
    if pts.size == 0:
        raise ValueError("probe set is empty")
    d = A.d
    n_dir = d * d + 64 if probe_directions is None else int(probe_directions)
    if n_dir < d * d:
        raise ValueError(f"probe_directions must be at least {d * d}")
    rng = np.random.default_rng(seed)
    rand = rng.standard_normal((n_dir - d * d, d * d))
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    xi = np.vstack([np.eye(d * d), rand])

    M = as_matrix(A(pts))
    forms = np.einsum("kr,nrs,ks->nk", xi, M, xi)
    worst = float(forms.min())
    if A.structure == LAYERED:
        Ml = as_matrix(A.layers)
        sym = 0.5 * (Ml + np.swapaxes(Ml, -1, -2))
        worst = min(worst, float(np.linalg.eigvalsh(sym)[:, 0].min()))
    max_entry = float(np.abs(M).max())
    if A.structure == LAYERED:
        max_entry = max(max_entry, float(np.abs(A.layers).max()))
    violation = max(0.0, A.delta - worst, max_entry - 1.0 / A.delta)
    tol = rtol * max(1.0, 1.0 / A.delta)
    passed = worst >= A.delta - tol and max_entry <= 1.0 / A.delta + tol
    return EllipticityReport(bool(passed), worst, violation, max_entry)


@dataclass
class OscillationMeasurement:
    center: np.ndarray
    radius: float
    gamma: float


def oscillation_gamma(A: EllipticTensor, x0, r: float, quadrature_n: int = 32
                      ) -> OscillationMeasurement:
    """Mean over B_r(x0) of max_entry |A(y1, y') - avg_{z' in B'_r(x0')} A(y1, z')|.

    Midpoint rule on a ``quadrature_n``-per-axis lattice covering the cube
    around the ball; the x'-average at height y1 uses the same x'-lattice.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if quadrature_n < 8:
        raise ValueError("quadrature_n must be at least 8")
    d = A.d
    x0 = np.asarray(x0, dtype=float)
    t = -r + (np.arange(quadrature_n) + 0.5) * (2 * r / quadrature_n)
    grids = np.meshgrid(*([t] * d), indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    in_ball = (offs ** 2).sum(axis=1) <= r * r
    # the x'-ball B'_r is the same for every y1 row
    in_xball = (offs[:, 1:] ** 2).sum(axis=1) <= r * r

    vals = A(x0 + offs).reshape((quadrature_n,) * d + (d,) * 4)
    flat = vals.reshape(quadrature_n, -1, d, d, d, d)
    mask_x = in_xball.reshape(quadrature_n, -1)[0]
    avg = flat[:, mask_x].mean(axis=1, keepdims=True)
    dev = np.abs(flat - avg).reshape(quadrature_n, flat.shape[1], -1).max(axis=2)
    gamma = float(dev.ravel()[in_ball].mean())
    return OscillationMeasurement(x0, float(r), gamma)


def tensor_from_entries(d: int, entries) -> np.ndarray:
    """Row-major (alpha, beta, i, j) entry list to a tensor."""
    arr = np.asarray(entries, dtype=float)
    if arr.size != d ** 4:
        raise ValueError(f"expected {d ** 4} entries, got {arr.size}")
    return arr.reshape((d,) * 4)
