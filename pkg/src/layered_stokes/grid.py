"""MAC (staggered) discretization of the generalized Stokes operator.

Velocity component ``j`` lives on faces normal to ``e_j``, pressure at cell
centers.  The gradient operator ``G`` maps face values to per-octant samples:
every domain cell is split into ``2^d`` octants, and in each octant the full
``d x d`` gradient is formed from

* ``D_j u_j`` -- the centered difference across the cell, and
* ``D_b u_j`` (``b != j``) -- the difference across the node/edge at the
  octant's corner (``2 u / h`` one-sided against a wall).

With octant weight ``h^d / 2^d`` and the coefficient block ``A_hat`` sampled
per octant, the momentum block is ``K = G^T W A_hat G``.  Off-diagonal samples
thereby get the arithmetic average of the surrounding cells; across a layer
breakpoint in x1 the tangential block ``[A^{11}_{ij}]_{i,j>=2}`` of the two
facing octants is replaced by the harmonic mean of the two cells' blocks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import coeffs as cf
from .domain import DomainSpec, PERIODIC_BOX

FIELD_MAGIC = "layered-stokes-field"
FIELD_VERSION = 1


class AssemblyError(ValueError):
    pass


def _octants(d: int):
    return list(itertools.product((0, 1), repeat=d))


class MacGrid:
    """Degree-of-freedom maps and the geometric operators G and B."""

    def __init__(self, dom: DomainSpec):
        self.dom = dom
        self.d = dom.d
        self.h = dom.h
        self.shape = dom.shape
        inside = dom.inside
        self.face_shapes = []
        self.face_ids = []
        offset = 0
        for j in range(self.d):
            fshape = list(self.shape)
            if not dom.periodic[j]:
                fshape[j] += 1
            fshape = tuple(fshape)
            active = np.ones(fshape, dtype=bool)
            # face k along j separates cells k-1 and k
            lo = self._shift_cells(inside, j, -1, fshape)
            hi = self._shift_cells(inside, j, 0, fshape)
            active &= lo & hi
            ids = np.full(fshape, -1, dtype=np.int64)
            count = int(active.sum())
            ids[active] = offset + np.arange(count)
            offset += count
            self.face_shapes.append(fshape)
            self.face_ids.append(ids)
        self.n_u = offset
        cell_ids = np.full(self.shape, -1, dtype=np.int64)
        self.n_p = dom.n_inside
        cell_ids[inside] = np.arange(self.n_p)
        self.cell_ids = cell_ids
        self.inside_idx = np.array(np.nonzero(inside))

    def _shift_cells(self, inside, axis, shift, fshape):
        """Inside-flag of cell ``k + shift`` at each face index ``k`` along axis."""
        n = self.shape[axis]
        k = np.arange(fshape[axis]) + shift
        if self.dom.periodic[axis]:
            vals = np.take(inside, np.mod(k, n), axis=axis)
        else:
            valid = (k >= 0) & (k < n)
            vals = np.take(inside, np.clip(k, 0, n - 1), axis=axis)
            shape = [1] * self.d
            shape[axis] = -1
            vals = vals & valid.reshape(shape)
        return vals

    @property
    def n_octants(self) -> int:
        return 2 ** self.d

    @property
    def sample_weight(self) -> float:
        return self.h ** self.d / self.n_octants

    @property
    def needs_velocity_gauge(self) -> bool:
        return self.dom.variant == PERIODIC_BOX

    def _face_id(self, j, idx):
        """Unknown id (or -1) of component-j faces at multi-index ``idx``."""
        idx = list(idx)
        for a in range(self.d):
            if self.dom.periodic[a]:
                idx[a] = np.mod(idx[a], self.face_shapes[j][a])
        return self.face_ids[j][tuple(idx)]

    def _neighbor(self, c, axis, step):
        """Index of the neighbouring cell and whether it lies in the domain."""
        nb = [ci.copy() for ci in c]
        nb[axis] = nb[axis] + step
        n = self.shape[axis]
        if self.dom.periodic[axis]:
            nb[axis] = np.mod(nb[axis], n)
            ok = np.ones(nb[axis].shape, dtype=bool)
        else:
            ok = (nb[axis] >= 0) & (nb[axis] < n)
        safe = [np.clip(x, 0, s - 1) for x, s in zip(nb, self.shape)]
        ok = ok & self.dom.inside[tuple(safe)]
        return nb, ok

    @cached_property
    def G(self) -> sp.csr_matrix:
        """Per-octant gradient samples; row ``((c * 2^d + s) * d + b) * d + j``."""
        d, h = self.d, self.h
        c = [ci for ci in self.inside_idx]
        n_in = c[0].size
        rows, cols, vals = [], [], []
        cell_pos = np.arange(n_in)

        def add(row, fid, v):
            keep = fid >= 0
            rows.append(row[keep])
            cols.append(fid[keep])
            vals.append(np.broadcast_to(np.asarray(v, dtype=float), fid.shape)[keep])

        for s_idx, s in enumerate(_octants(d)):
            for b in range(d):
                for j in range(d):
                    row = ((cell_pos * self.n_octants + s_idx) * d + b) * d + j
                    if b == j:
                        left = self._face_id(j, c)
                        right_idx = list(c)
                        right_idx[j] = c[j] + 1
                        right = self._face_id(j, right_idx)
                        add(row, right, 1.0 / h)
                        add(row, left, -1.0 / h)
                        continue
                    sign = 2 * s[b] - 1
                    fidx = list(c)
                    fidx[j] = c[j] + s[j]
                    own = self._face_id(j, fidx)
                    nb, ok = self._neighbor(c, b, sign)
                    nidx = list(fidx)
                    nidx[b] = nb[b]
                    nidx = [x if self.dom.periodic[a] else np.clip(x, 0, fs - 1)
                            for a, (x, fs) in enumerate(zip(nidx, self.face_shapes[j]))]
                    other = np.where(ok, self._face_id(j, nidx), -1)
                    coef_own = np.where(ok, -sign / h, -2.0 * sign / h)
                    add(row, own, coef_own)
                    add(row, other, sign / h)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        n_rows = n_in * self.n_octants * d * d
        return sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, self.n_u))

    @cached_property
    def B(self) -> sp.csr_matrix:
        """Cell divergence: sum over axes of face differences / h."""
        d, h = self.d, self.h
        c = list(self.inside_idx)
        pid = self.cell_ids[tuple(c)]
        rows, cols, vals = [], [], []
        for j in range(d):
            left = self._face_id(j, c)
            ridx = list(c)
            ridx[j] = c[j] + 1
            right = self._face_id(j, ridx)
            for fid, v in ((right, 1.0 / h), (left, -1.0 / h)):
                keep = fid >= 0
                rows.append(pid[keep])
                cols.append(fid[keep])
                vals.append(np.full(int(keep.sum()), v))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_p, self.n_u))

    @cached_property
    def octant_to_center(self) -> sp.csr_matrix:
        """Averages octant samples to cell-centered samples (rows: cell*d*d + b*d + j)."""
        d2 = self.d * self.d
        n_in = self.n_p
        no = self.n_octants
        cell = np.repeat(np.arange(n_in), no * d2)
        s = np.tile(np.repeat(np.arange(no), d2), n_in)
        k = np.tile(np.arange(d2), n_in * no)
        rows = cell * d2 + k
        cols = (cell * no + s) * d2 + k
        return sp.csr_matrix((np.full(rows.size, 1.0 / no), (rows, cols)),
                             shape=(n_in * d2, n_in * no * d2))

    def face_positions(self, j: int) -> np.ndarray:
        """Coordinates of all component-j faces, shape ``face_shape + (d,)``."""
        axes = []
        for a in range(self.d):
            m = self.face_shapes[j][a]
            axes.append(np.arange(m) * self.h if a == j else (np.arange(m) + 0.5) * self.h)
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def unknown_positions(self, j: int) -> np.ndarray:
        ids = self.face_ids[j]
        return self.face_positions(j)[ids >= 0]

    def component_slices(self):
        out, start = [], 0
        for ids in self.face_ids:
            m = int((ids >= 0).sum())
            out.append(slice(start, start + m))
            start += m
        return out

    def face_arrays(self, u: np.ndarray) -> list:
        """Full face arrays (pinned faces = 0) for each component."""
        out = []
        for ids in self.face_ids:
            arr = np.zeros(ids.shape)
            arr[ids >= 0] = u[ids[ids >= 0]]
            out.append(arr)
        return out

    def interpolate_velocity(self, fn) -> np.ndarray:
        """Sample ``fn(points) -> (N, d)`` at the unknown faces."""
        u = np.zeros(self.n_u)
        for j, ids in enumerate(self.face_ids):
            m = ids >= 0
            u[ids[m]] = fn(self.face_positions(j)[m])[:, j]
        return u

    def interpolate_pressure(self, fn) -> np.ndarray:
        pts = self.dom.centers()[self.dom.inside]
        return np.asarray(fn(pts), dtype=float).reshape(-1)

    def cell_array(self, values: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Scatter per-inside-cell values (first axis) onto the full cell grid."""
        values = np.asarray(values)
        out = np.full(self.shape + values.shape[1:], fill, dtype=float)
        out[self.dom.inside] = values
        return out


# ---------------------------------------------------------------------------
# coefficient sampling
# ---------------------------------------------------------------------------


def _harmonic(Ta, Tb):
    return 2.0 * np.linalg.inv(np.linalg.inv(Ta) + np.linalg.inv(Tb))


def interface_octants(grid: MacGrid, A: cf.EllipticTensor):
    """Octants facing an x1-neighbour in a different layer.

    Returns ``(cell_pos, octant, neighbour_pos)`` arrays (inside-cell
    positions).
    """
    empty = (np.zeros(0, int),) * 3
    if not A.is_layered or A.breakpoints.size == 0:
        return empty
    c = list(grid.inside_idx)
    x1 = grid.dom.axis_centers(0)
    layer = A.layer_index(x1)
    cells, octs, nbs = [], [], []
    for s_idx, s in enumerate(_octants(grid.d)):
        step = 2 * s[0] - 1
        nb, ok = grid._neighbor(c, 0, step)
        differ = ok & (layer[np.clip(nb[0], 0, grid.shape[0] - 1)] != layer[c[0]])
        pos = np.flatnonzero(differ)
        cells.append(pos)
        octs.append(np.full(pos.size, s_idx))
        nb_idx = tuple(x[pos] for x in nb)
        nbs.append(grid.cell_ids[nb_idx])
    return tuple(np.concatenate(v) for v in (cells, octs, nbs))


def sample_coefficients(grid: MacGrid, A: cf.EllipticTensor):
    """Per-octant form matrices (n_cells, 2^d, d*d, d*d) and cell-center tensors."""
    d = grid.d
    centers = grid.dom.centers()[grid.dom.inside]
    cell_A = A(centers)
    M = cf.as_matrix(cell_A)
    blocks = np.repeat(M[:, None], grid.n_octants, axis=1)
    cells, octs, nbs = interface_octants(grid, A)
    if cells.size:
        t = slice(1, d)
        Ta = M[cells][:, t, t]
        Tb = M[nbs][:, t, t]
        blocks[cells, octs, t, t] = _harmonic(Ta, Tb)
    return blocks, cell_A


@dataclass
class SaddleSystem:
    """Assembled block system with gauge constraints.

    Unknown ordering: velocity faces, pressure cells, the pressure-mean
    multiplier, then (periodic boxes only) one velocity-mean multiplier per
    component.
    """

    grid: MacGrid
    A: cf.EllipticTensor
    K: sp.csr_matrix
    Bw: sp.csr_matrix
    blocks: np.ndarray
    cell_A: np.ndarray
    matrix: sp.csc_matrix
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_u(self):
        return self.grid.n_u

    @property
    def n_p(self):
        return self.grid.n_p

    @property
    def n_total(self):
        return self.matrix.shape[0]

    @property
    def n_gauge(self):
        return self.n_total - self.n_u - self.n_p

    def energy(self, u: np.ndarray, v: Optional[np.ndarray] = None) -> float:
        """sum over samples of w (G v) . A_hat (G u)."""
        v = u if v is None else v
        d2 = self.grid.d ** 2
        Gu = (self.grid.G @ u).reshape(self.blocks.shape[:2] + (d2,))
        Gv = (self.grid.G @ v).reshape(self.blocks.shape[:2] + (d2,))
        return float(self.grid.sample_weight * np.einsum("cor,cors,cos->", Gv, self.blocks, Gu))


def assemble(A: cf.EllipticTensor, grid: MacGrid, check: bool = True) -> SaddleSystem:
    if A.d != grid.d:
        raise AssemblyError("tensor and grid dimensions differ")
    if check:
        pts = grid.dom.centers()[grid.dom.inside]
        if A.structure == cf.CONSTANT:
            pts = pts[:1]
        report = cf.check_ellipticity(A, pts)
        if not report.passed:
            raise AssemblyError(f"coefficients fail strong ellipticity (worst form "
                                f"{report.worst_form:.4g}, max entry {report.max_entry:.4g}, "
                                f"delta {A.delta})")
    blocks, cell_A = sample_coefficients(grid, A)
    d2 = grid.d ** 2
    nb = blocks.shape[0] * blocks.shape[1]
    Ahat = sp.bsr_matrix((blocks.reshape(nb, d2, d2) * grid.sample_weight,
                          np.arange(nb), np.arange(nb + 1)), shape=(nb * d2, nb * d2))
    G = grid.G
    K = (G.T @ Ahat.tocsr() @ G).tocsr()
    K.sum_duplicates()
    Bw = (grid.B * grid.h ** grid.d).tocsr()
    matrix = _bordered(grid, K, Bw)
    return SaddleSystem(grid, A, K, Bw, blocks, cell_A, matrix)


def _bordered(grid: MacGrid, K, Bw) -> sp.csc_matrix:
    hd = grid.h ** grid.d
    e = sp.csr_matrix(np.full((1, grid.n_p), hd))
    blocks = [[K, Bw.T, None], [Bw, None, e.T], [None, e, None]]
    if grid.needs_velocity_gauge:
        C = np.zeros((grid.d, grid.n_u))
        for j, sl in enumerate(grid.component_slices()):
            C[j, sl] = hd
        C = sp.csr_matrix(C)
        blocks = [row + [None] for row in blocks]
        blocks[0][3] = C.T
        blocks.append([C, None, None, None])
    return sp.bmat(blocks, format="csc")


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------


@dataclass
class RHS:
    vector: np.ndarray
    g_effective: np.ndarray
    g_shift: float
    f_faces: np.ndarray
    f_alpha_samples: np.ndarray
    f_shift: np.ndarray


def assemble_rhs(grid: MacGrid, f=None, f_alpha=None, g=None, f_faces=None) -> RHS:
    """Right-hand side of the discrete weak form.

    ``f``: cell field ``shape + (d,)``; ``f_alpha``: cell field
    ``shape + (d, d)`` with ``f_alpha[..., a, i]`` the i-th component of
    ``f_a``; ``g``: cell field.  The momentum part is
    ``-M f + G^T W F`` (so that ``L u + grad p = f + D_a f_a``), the continuity
    part ``h^d (g - (g)_Omega)``.  ``f_faces`` overrides the cell-to-face
    interpolation of ``f`` with values at the unknown faces.
    """
    d, h = grid.d, grid.h
    hd = h ** d
    inside = grid.dom.inside
    mom = np.zeros(grid.n_u)
    if f_faces is None:
        f_faces = np.zeros(grid.n_u)
        if f is not None:
            f = np.asarray(f, dtype=float)
            for j in range(d):
                avg = _cell_to_face(grid, f[..., j], j)
                ids = grid.face_ids[j]
                f_faces[ids[ids >= 0]] = avg[ids >= 0]
    f_shift = np.zeros(d)
    if grid.needs_velocity_gauge:
        for j, sl in enumerate(grid.component_slices()):
            f_shift[j] = f_faces[sl].mean() if sl.stop > sl.start else 0.0
    mom -= hd * f_faces
    samples = np.zeros(grid.G.shape[0])
    if f_alpha is not None:
        fa = np.asarray(f_alpha, dtype=float)[inside]  # (n_in, a, i)
        per = np.repeat(fa.reshape(fa.shape[0], 1, d * d), grid.n_octants, axis=1)
        samples = per.reshape(-1)
        mom += grid.sample_weight * (grid.G.T @ samples)
    cont = np.zeros(grid.n_p)
    shift = 0.0
    if g is not None:
        gv = np.asarray(g, dtype=float)[inside]
        shift = float(gv.mean())
        cont = gv - shift
    vec = np.concatenate([mom, hd * cont, np.zeros(1 + (d if grid.needs_velocity_gauge else 0))])
    return RHS(vec, cont, shift, f_faces, samples, f_shift)


def _cell_to_face(grid: MacGrid, fc: np.ndarray, j: int) -> np.ndarray:
    fshape = grid.face_shapes[j]
    n = grid.shape[j]
    k = np.arange(fshape[j])
    if grid.dom.periodic[j]:
        lo = np.take(fc, np.mod(k - 1, n), axis=j)
        hi = np.take(fc, np.mod(k, n), axis=j)
    else:
        lo = np.take(fc, np.clip(k - 1, 0, n - 1), axis=j)
        hi = np.take(fc, np.clip(k, 0, n - 1), axis=j)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# fields and derived quantities
# ---------------------------------------------------------------------------


@dataclass
class StaggeredField:
    grid: MacGrid
    u: np.ndarray
    p: np.ndarray
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def velocity_faces(self) -> list:
        return self.grid.face_arrays(self.u)

    def pressure_cells(self, fill: float = 0.0) -> np.ndarray:
        return self.grid.cell_array(self.p, fill)

    def pressure_mean(self) -> float:
        return float(self.p.mean()) if self.p.size else 0.0


def cell_velocity(field: StaggeredField) -> np.ndarray:
    """Face-to-center average of the velocity, shape ``grid.shape + (d,)``."""
    grid = field.grid
    out = []
    for j, F in enumerate(field.velocity_faces()):
        n = grid.shape[j]
        lo = np.take(F, np.arange(n), axis=j)
        hi = np.take(F, np.mod(np.arange(1, n + 1), F.shape[j]), axis=j)
        out.append(0.5 * (lo + hi))
    return np.where(grid.dom.inside[..., None], np.stack(out, axis=-1), 0.0)


def octant_gradient(field: StaggeredField, A: Optional[cf.EllipticTensor] = None) -> np.ndarray:
    """Per-octant samples ``(n_cells, 2^d, d, d)`` indexed ``[cell, octant, b, j]``.

    With a layered ``A``, the x1-samples of tangential components on
    interface octants are replaced by their one-sided values
    ``T_c^{-1} H D``, which keep the flux ``H D`` continuous.
    """
    grid = field.grid
    d = grid.d
    S = (grid.G @ field.u).reshape(grid.n_p, grid.n_octants, d, d)
    if A is not None:
        cells, octs, nbs = interface_octants(grid, A)
        if cells.size:
            centers = grid.dom.centers()[grid.dom.inside]
            M = cf.as_matrix(A(centers))
            t = slice(1, d)
            Ta, Tb = M[cells][:, t, t], M[nbs][:, t, t]
            H = _harmonic(Ta, Tb)
            D = S[cells, octs, 0, 1:]
            flux = np.einsum("nij,nj->ni", H, D)
            S[cells, octs, 0, 1:] = np.linalg.solve(Ta, flux[..., None])[..., 0]
    return S


def gradient(field: StaggeredField, A: Optional[cf.EllipticTensor] = None) -> np.ndarray:
    """Cell-centered Du, shape ``grid.shape + (d, d)`` with ``Du[..., i, b] = D_b u_i``.

    Cells outside the domain carry 0.
    """
    S = octant_gradient(field, A).mean(axis=1)  # [cell, b, j]
    return field.grid.cell_array(np.swapaxes(S, 1, 2))


def divergence(field: StaggeredField) -> np.ndarray:
    return field.grid.cell_array(field.grid.B @ field.u)


def tangential_gradient(Du: np.ndarray) -> np.ndarray:
    """D_{x'}u: the columns b >= 2 of Du, flattened to (d-1)*d entries per cell."""
    d = Du.shape[-1]
    return Du[..., :, 1:].reshape(Du.shape[:-2] + (d * (d - 1),))


def compute_U(field: StaggeredField, A: cf.EllipticTensor, Du: Optional[np.ndarray] = None):
    """U = A^{1b} D_b u + (p, 0, ..., 0) and the extended vector
    (D_{x'}u, div u, U_2, ..., U_d), both on the full cell grid."""
    grid = field.grid
    if Du is None:
        Du = gradient(field, A)
    inside = grid.dom.inside
    centers = grid.dom.centers()[inside]
    cell_A = A(centers)
    Dc = Du[inside]  # [cell, j, b]
    U = np.einsum("nbij,njb->ni", cell_A[:, 0], Dc)
    U[:, 0] += field.p
    div = np.trace(Dc, axis1=1, axis2=2)
    ext = np.concatenate([tangential_gradient(Dc), div[:, None], U[:, 1:]], axis=1)
    return grid.cell_array(U), grid.cell_array(ext)


def extended_map(cell_A: np.ndarray) -> np.ndarray:
    """Linear map from Du (flattened ``[i, b]``) to the extended vector, per cell."""
    n, d = cell_A.shape[0], cell_A.shape[-1]
    d2 = d * d
    L = np.zeros((n, d2, d2))
    row = 0
    for i in range(d):
        for b in range(1, d):
            L[:, row, i * d + b] = 1.0
            row += 1
    for i in range(d):
        L[:, row, i * d + i] = 1.0
    row += 1
    for i in range(1, d):
        for j in range(d):
            for b in range(d):
                L[:, row, j * d + b] = cell_A[:, 0, b, i, j]
        row += 1
    return L


def comparability_constant(A: cf.EllipticTensor, points) -> float:
    """Smallest N with N^-1 |Du| <= |ext| <= N |Du| at the given points."""
    sv = np.linalg.svd(extended_map(A(points)), compute_uv=False)
    return float(max(sv[:, 0].max(), (1.0 / sv[:, -1]).max()))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_field(path, field: StaggeredField) -> None:
    """Text container: header lines, then velocity per component, then pressure.

    Each data section starts with ``velocity <j> <dims...>`` or
    ``pressure <dims...>`` followed by one value per line in C order over the
    full face (cell) array; pinned faces and cells outside the domain hold 0.
    """
    grid = field.grid
    dom = grid.dom
    lines = [f"{FIELD_MAGIC} {FIELD_VERSION}", f"d {dom.d}",
             "dims " + " ".join(str(s) for s in grid.shape), f"h {grid.h!r}",
             f"variant {dom.variant}", f"L {dom.L!r}", f"n {dom.n}"]
    if dom.H is not None:
        lines.append(f"H {dom.H!r}")
    if dom.rho is not None:
        lines.append(f"rho {dom.rho!r}")
    if dom.phi is not None:
        lines.append("phi " + " ".join(repr(float(v)) for v in dom.phi.ravel()))
    for j, arr in enumerate(grid.face_arrays(field.u)):
        lines.append(f"velocity {j} " + " ".join(str(s) for s in arr.shape))
        lines.extend(repr(float(v)) for v in arr.ravel())
    pc = field.pressure_cells()
    lines.append("pressure " + " ".join(str(s) for s in pc.shape))
    lines.extend(repr(float(v)) for v in pc.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def load_field(path) -> StaggeredField:
    text = Path(path).read_text().splitlines()
    head = text[0].split()
    if head[0] != FIELD_MAGIC or int(head[1]) != FIELD_VERSION:
        raise ValueError(f"{path} is not a version-{FIELD_VERSION} field file")
    meta = {}
    pos = 1
    while not text[pos].startswith(("velocity", "pressure")):
        key, _, rest = text[pos].partition(" ")
        meta[key] = rest
        pos += 1
    d = int(meta["d"])
    phi = None
    if "phi" in meta:
        phi = np.array([float(v) for v in meta["phi"].split()]).reshape((int(meta["n"]),) * (d - 1))
    dom = DomainSpec(meta["variant"], d, float(meta["L"]), int(meta["n"]),
                      H=float(meta["H"]) if "H" in meta else None, phi=phi,
                      rho=float(meta["rho"]) if "rho" in meta else None)
    grid = MacGrid(dom)
    u = np.zeros(grid.n_u)
    pc = None
    while pos < len(text):
        parts = text[pos].split()
        if parts[0] == "velocity":
            j = int(parts[1])
            shape = tuple(int(s) for s in parts[2:])
            size = int(np.prod(shape))
            arr = np.array([float(v) for v in text[pos + 1:pos + 1 + size]]).reshape(shape)
            ids = grid.face_ids[j]
            u[ids[ids >= 0]] = arr[ids >= 0]
            pos += 1 + size
        elif parts[0] == "pressure":
            shape = tuple(int(s) for s in parts[1:])
            size = int(np.prod(shape))
            pc = np.array([float(v) for v in text[pos + 1:pos + 1 + size]]).reshape(shape)
            pos += 1 + size
        else:
            raise ValueError(f"unexpected section {parts[0]!r} in {path}")
    p = pc[dom.inside] if pc is not None else np.zeros(grid.n_p)
    return StaggeredField(grid, u, p)
