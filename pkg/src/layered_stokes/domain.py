"""Computational geometries, Lipschitz flatness, and dyadic filtrations.

All geometries live on a uniform cell lattice with mesh width ``h``.  A cell
belongs to the domain iff its center does.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

PERIODIC_BOX = "periodic_box"
DIRICHLET_BOX = "dirichlet_box"
HALF_STRIP = "half_strip"
LIPSCHITZ_GRAPH = "lipschitz_graph"
VARIANTS = (PERIODIC_BOX, DIRICHLET_BOX, HALF_STRIP, LIPSCHITZ_GRAPH)

RHO_MAX = 1.0 / 16.0


MIN_CELLS = 4


class FiltrationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """One of the four geometries.

    ``shape`` is the cell count per axis.  The half strip has ``n1 = H / h``
    cells in x1 (Dirichlet at both ends) and is periodic in x'.  The
    Lipschitz graph domain is ``{x1 > phi(x')}`` inside a Dirichlet box, with
    ``phi`` sampled at the x'-cell centers.
    """

    variant: str
    d: int
    L: float
    n: int
    H: Optional[float] = None
    phi: Optional[np.ndarray] = None
    rho: Optional[float] = None
    shape: tuple = field(init=False)
    h: float = field(init=False)
    inside: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown domain variant {self.variant!r}")
        if self.d not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if self.n < MIN_CELLS:
            raise ValueError(f"need at least {MIN_CELLS} cells per axis")
        if self.L <= 0:
            raise ValueError("side length must be positive")
        h = self.L / self.n
        shape = (self.n,) * self.d
        inside = np.ones(shape, dtype=bool)
        if self.variant == HALF_STRIP:
            if self.H is None or self.H <= 0:
                raise ValueError("half strip needs a positive height H")
            n1 = self.H / h
            if abs(n1 - round(n1)) > 1e-9 or round(n1) < MIN_CELLS:
                raise ValueError(f"H must be a multiple of h with at least {MIN_CELLS} cells")
            shape = (int(round(n1)),) + (self.n,) * (self.d - 1)
            inside = np.ones(shape, dtype=bool)
        elif self.variant == LIPSCHITZ_GRAPH:
            phi = np.asarray(self.phi, dtype=float)
            if phi.shape != (self.n,) * (self.d - 1):
                raise ValueError(f"phi must be sampled on the {(self.n,) * (self.d - 1)} "
                                 f"x'-lattice, got {phi.shape}")
            if self.rho is None:
                raise ValueError("Lipschitz graph domain needs a flatness bound rho")
            if not 0 <= self.rho < RHO_MAX:
                raise ValueError("flatness bound rho must lie in [0, 1/16)")
            xs = (np.arange(self.n) + 0.5) * h
            measured = lipschitz_constant(phi, h)
            if measured > self.rho * (1 + 1e-12) + 1e-15:
                raise ValueError(f"measured Lipschitz constant {measured:.4g} exceeds "
                                 f"declared rho {self.rho}")
            phi.setflags(write=False)
            object.__setattr__(self, "phi", phi)
            inside = xs.reshape((-1,) + (1,) * (self.d - 1)) > phi[None]
        inside.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "inside", inside)

    @property
    def periodic(self) -> tuple:
        if self.variant == PERIODIC_BOX:
            return (True,) * self.d
        if self.variant == HALF_STRIP:
            return (False,) + (True,) * (self.d - 1)
        return (False,) * self.d

    @property
    def extent(self) -> np.ndarray:
        return np.array(self.shape) * self.h

    @property
    def n_inside(self) -> int:
        return int(self.inside.sum())

    @property
    def measure(self) -> float:
        return self.n_inside * self.h ** self.d

    def axis_centers(self, axis: int) -> np.ndarray:
        return (np.arange(self.shape[axis]) + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """Cell centers as an array of shape ``shape + (d,)``."""
        grids = np.meshgrid(*[self.axis_centers(a) for a in range(self.d)], indexing="ij")
        return np.stack(grids, axis=-1)

    def inside_flat(self) -> np.ndarray:
        return np.flatnonzero(self.inside.ravel())

    def describe(self) -> dict:
        out = {"variant": self.variant, "d": self.d, "L": self.L, "n": self.n}
        if self.H is not None:
            out["H"] = self.H
        if self.rho is not None:
            out["rho"] = self.rho
        return out


def periodic_box(n: int, d: int = 2, L: float = 1.0) -> DomainSpec:
    return DomainSpec(PERIODIC_BOX, d, L, n)


def dirichlet_box(n: int, d: int = 2, L: float = 1.0) -> DomainSpec:
    return DomainSpec(DIRICHLET_BOX, d, L, n)


def half_strip(n: int, d: int = 2, L: float = 1.0, H: Optional[float] = None) -> DomainSpec:
    return DomainSpec(HALF_STRIP, d, L, n, H=L if H is None else H)


def lipschitz_graph(n: int, phi_fn, rho: float, d: int = 2, L: float = 1.0) -> DomainSpec:
    """Graph domain with ``phi = phi_fn(x')`` sampled at x'-cell centers.

    ``phi_fn`` takes an ``(..., d-1)`` array of x' points.
    """
    h = L / n
    xs = (np.arange(n) + 0.5) * h
    grids = np.meshgrid(*([xs] * (d - 1)), indexing="ij")
    xp = np.stack(grids, axis=-1)
    phi = np.asarray(phi_fn(xp), dtype=float).reshape((n,) * (d - 1))
    return DomainSpec(LIPSCHITZ_GRAPH, d, L, n, phi=phi, rho=rho)


def affine_graph(n: int, slope: float, d: int = 2, L: float = 1.0, offset: float = 0.0,
                 rho: Optional[float] = None) -> DomainSpec:
    """phi(x') = offset + slope * x'_2 (the last x' coordinate)."""
    return lipschitz_graph(n, lambda xp: offset + slope * xp[..., -1],
                           abs(slope) if rho is None else rho, d, L)


def sine_graph(n: int, rho: float, d: int = 2, L: float = 1.0, offset: float = 0.25
               ) -> DomainSpec:
    """phi(x') = offset L + rho L / (2 pi) sin(2 pi x'_last / L): Lipschitz constant rho."""
    return lipschitz_graph(n, lambda xp: offset * L + rho * L / (2 * np.pi)
                           * np.sin(2 * np.pi * xp[..., -1] / L), rho, d, L)


def load_phi(path, n: int, d: int = 2, L: float = 1.0) -> np.ndarray:
    """Read boundary samples (x'-coordinates then phi, one sample per line) and
    interpolate them onto the x'-cell-center lattice."""
    data = np.loadtxt(Path(path), ndmin=2)
    if data.shape[1] != d:
        raise ValueError(f"expected {d} columns (x' coordinates and phi), got {data.shape[1]}")
    xs = (np.arange(n) + 0.5) * (L / n)
    if d == 2:
        order = np.argsort(data[:, 0])
        return np.interp(xs, data[order, 0], data[order, 1])
    from scipy.interpolate import griddata

    grids = np.meshgrid(*([xs] * (d - 1)), indexing="ij")
    xp = np.stack([g.ravel() for g in grids], axis=1)
    vals = griddata(data[:, :-1], data[:, -1], xp, method="linear")
    if np.isnan(vals).any():
        vals = np.where(np.isnan(vals), griddata(data[:, :-1], data[:, -1], xp,
                                                  method="nearest"), vals)
    return vals.reshape((n,) * (d - 1))


def lipschitz_constant(phi, h: float = None, coords: Optional[np.ndarray] = None,
                       chunk: int = 2048) -> float:
    """max over distinct lattice pairs of |phi(y') - phi(x')| / |y' - x'|.

    ``phi`` is sampled on a regular x'-lattice of spacing ``h`` (any
    dimension), or at explicit ``coords``.
    """
    phi = np.asarray(phi, dtype=float)
    if coords is None:
        if h is None:
            raise ValueError("need the lattice spacing h or explicit coordinates")
        idx = np.indices(phi.shape).reshape(phi.ndim, -1).T
        coords = idx * h
    coords = np.asarray(coords, dtype=float).reshape(phi.size, -1)
    vals = phi.ravel()
    if vals.size < 2:
        raise ValueError("need at least two samples")
    best = 0.0
    for start in range(0, vals.size, chunk):
        c = coords[start:start + chunk]
        v = vals[start:start + chunk]
        dist = np.sqrt(((c[:, None, :] - coords[None, :, :]) ** 2).sum(-1))
        diff = np.abs(v[:, None] - vals[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, diff / np.where(dist > 0, dist, 1.0), 0.0)
        best = max(best, float(ratio.max()))
    return best


def _offsets(dom: DomainSpec, x0) -> np.ndarray:
    """Per-axis center-to-point offsets (torus metric on periodic axes)."""
    x0 = np.asarray(x0, dtype=float)
    out = []
    for a in range(dom.d):
        dx = dom.axis_centers(a) - x0[a]
        if dom.periodic[a]:
            ext = dom.extent[a]
            dx = dx - ext * np.round(dx / ext)
        out.append(dx)
    return out


def distance_field(dom: DomainSpec, x0) -> np.ndarray:
    offs = _offsets(dom, x0)
    sq = np.zeros(dom.shape)
    for a, dx in enumerate(offs):
        sq = sq + (dx ** 2).reshape([-1 if b == a else 1 for b in range(dom.d)])
    return np.sqrt(sq)


def ball_cells(dom: DomainSpec, x0, r: float) -> np.ndarray:
    """Flat indices of domain cells with center within distance ``r`` of ``x0``."""
    if r <= 0:
        raise ValueError("radius must be positive")
    mask = (distance_field(dom, x0) <= r * (1 + 1e-12)) & dom.inside
    return np.flatnonzero(mask.ravel())


def ball_mask(dom: DomainSpec, x0, r: float) -> np.ndarray:
    return (distance_field(dom, x0) <= r * (1 + 1e-12)) & dom.inside


# ---------------------------------------------------------------------------
# dyadic filtration
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Cube:
    level: int
    anchor: tuple
    cells: np.ndarray
    parent: Optional[int]
    measure: float


@dataclass(frozen=True, eq=False)
class DyadicFiltration:
    """Nested partitions of the domain cells.

    ``labels[k]`` maps every cell to its cube id at level ``n_min + k``
    (-1 outside the domain); ``cubes[k]`` lists the cubes of that level.
    """

    n_min: int
    n_max: int
    labels: list
    cubes: list
    delta0: float
    eps0: float
    N0: float
    side: float
    merges: int

    @property
    def levels(self) -> range:
        return range(self.n_min, self.n_max + 1)

    def level_labels(self, n: int) -> np.ndarray:
        return self.labels[n - self.n_min]

    def level_cubes(self, n: int) -> list:
        return self.cubes[n - self.n_min]


def _cube_ids(dom: DomainSpec, cells_per_side: int):
    """Dyadic multi-index of every cell and its flat id over the cube lattice."""
    idx = np.indices(dom.shape)
    multi = idx // cells_per_side
    dims = tuple(int(-(-s // cells_per_side)) for s in dom.shape)
    flat = np.ravel_multi_index(tuple(multi), dims)
    return flat, dims


def dyadic_filtration(dom: DomainSpec, n_min: int = 0, n_max: int = 3, c: float = 0.25,
                      eps0: Optional[float] = None) -> DyadicFiltration:
    """Dyadic cubes of side ``S 2^-n`` intersected with the domain.

    ``S`` is the x'-extent ``L``.  A piece with fewer than ``c |Q|`` domain
    cells joins the smallest-index qualifying sibling, preferring face
    neighbours; siblings share the (already merged) parent.
    """
    if not 0 < c <= 0.5:
        raise ValueError("retention fraction c must lie in (0, 1/2]")
    if n_min < 0 or n_max < n_min:
        raise ValueError("need 0 <= n_min <= n_max")
    if 2 ** n_max > dom.n or dom.n % (2 ** n_max):
        raise ValueError(f"2^{n_max} must divide the {dom.n} cells per axis")
    inside = dom.inside
    side = dom.L
    labels, cubes = [], []
    parent_labels = None
    merges = 0
    for n in range(n_min, n_max + 1):
        cps = dom.n // 2 ** n
        raw, dims = _cube_ids(dom, cps)
        raw = np.where(inside, raw, -1)
        full = cps ** dom.d
        counts = np.bincount(raw[inside], minlength=int(np.prod(dims)))
        present = np.flatnonzero(counts)
        if parent_labels is None:
            parent_of = {int(q): -1 for q in present}
        else:
            parent_of = {}
            for q in present:
                sel = raw == q
                parent_of[int(q)] = int(parent_labels[sel][0])
        by_parent = {}
        for q in present:
            by_parent.setdefault(parent_of[int(q)], []).append(int(q))
        target = {}
        for par, kids in by_parent.items():
            good = [q for q in kids if counts[q] >= c * full]
            if not good:
                raise FiltrationError(f"level {n}: no sibling retains at least c|Q| "
                                      f"of its cube (parent {par})")
            for q in kids:
                if counts[q] >= c * full:
                    target[q] = q
                    continue
                qm = np.array(np.unravel_index(q, dims))
                adjacent = [g for g in good
                            if np.abs(np.array(np.unravel_index(g, dims)) - qm).sum() == 1]
                target[q] = min(adjacent) if adjacent else min(good)
                merges += 1
        retained = sorted(set(target.values()))
        relabel = {q: k for k, q in enumerate(retained)}
        lut = np.full(int(np.prod(dims)), -1)
        for q, t in target.items():
            lut[q] = relabel[t]
        lab = np.where(inside, lut[np.where(raw >= 0, raw, 0)], -1)
        level_cubes = []
        flat_lab = lab.ravel()
        order = np.argsort(flat_lab, kind="stable")
        sorted_lab = flat_lab[order]
        bounds = np.searchsorted(sorted_lab, np.arange(len(retained) + 1))
        for k, q in enumerate(retained):
            cells = order[bounds[k]:bounds[k + 1]]
            par = None if parent_labels is None else int(parent_labels.ravel()[cells[0]])
            level_cubes.append(Cube(n, tuple(int(v) for v in np.unravel_index(q, dims)),
                                    cells, par, cells.size * dom.h ** dom.d))
        lab.setflags(write=False)
        labels.append(lab)
        cubes.append(level_cubes)
        parent_labels = lab
    N0 = np.sqrt(dom.d) * side * (2.0 if merges else 1.0)
    if eps0 is None:
        eps0 = c * side / 8.0
    return DyadicFiltration(n_min, n_max, labels, cubes, 0.5, eps0, N0, side, merges)


def cube_diameter(dom: DomainSpec, cells: np.ndarray) -> float:
    """Bounding-box diagonal of the cells' closed extents."""
    idx = np.array(np.unravel_index(cells, dom.shape))
    ext = (idx.max(axis=1) - idx.min(axis=1) + 1) * dom.h
    return float(np.sqrt((ext ** 2).sum()))


def inscribed_radius(dom: DomainSpec, labels: np.ndarray, cells: np.ndarray,
                     label: int, margin: int) -> float:
    """Largest r such that some center z in the cube has Omega_r(z) inside it.

    Distance from cube cells to the nearest domain cell carrying another
    label, searched in a window ``margin`` cells beyond the cube.
    """
    idx = np.array(np.unravel_index(cells, dom.shape))
    lo = idx.min(axis=1) - margin
    hi = idx.max(axis=1) + margin + 1
    take = []
    for a in range(dom.d):
        r = np.arange(lo[a], hi[a])
        if dom.periodic[a]:
            r = np.mod(r, dom.shape[a])
        else:
            r = r[(r >= 0) & (r < dom.shape[a])]
        take.append(r)
    win_lab = labels[np.ix_(*take)]
    foreign = (win_lab >= 0) & (win_lab != label)
    if not foreign.any():
        return np.inf
    dist = ndimage.distance_transform_edt(~foreign, sampling=dom.h)
    own = win_lab == label
    return float(dist[own].max())


def verify_filtration(dom: DomainSpec, filt: DyadicFiltration) -> dict:
    """Exhaustive check of the four filtration properties.

    Returns a dict with one boolean per property plus the smallest measured
    inner-ball constant ``eps0_measured`` (inscribed radius / delta0^n).
    """
    inside_flat = set(dom.inside_flat().tolist())
    p1 = p2 = p3 = p4 = True
    eps_measured = np.inf
    worst_diam_ratio = 0.0
    for k, n in enumerate(filt.levels):
        cubes = filt.cubes[k]
        seen = np.concatenate([q.cells for q in cubes]) if cubes else np.zeros(0, int)
        if seen.size != len(inside_flat) or set(seen.tolist()) != inside_flat:
            p1 = False
        lab = filt.labels[k]
        scale = filt.delta0 ** n
        margin = max(2, int(np.ceil(filt.side * scale / dom.h)))
        for cid, q in enumerate(cubes):
            if k > 0:
                par_lab = filt.labels[k - 1].ravel()[q.cells]
                if np.any(par_lab != par_lab[0]) or q.parent != par_lab[0]:
                    p2 = False
            diam = cube_diameter(dom, q.cells)
            worst_diam_ratio = max(worst_diam_ratio, diam / (filt.N0 * scale))
            if diam > filt.N0 * scale * (1 + 1e-12):
                p3 = False
            r_in = inscribed_radius(dom, lab, q.cells, cid, margin)
            eps_measured = min(eps_measured, r_in / scale)
            if not r_in > filt.eps0 * scale:
                p4 = False
    return {"disjoint_cover": p1, "nested": p2, "diameter": p3, "inner_ball": p4,
            "eps0_measured": eps_measured, "diameter_ratio": worst_diam_ratio}


def level_cube_counts(filt: DyadicFiltration) -> list:
    return [len(c) for c in filt.cubes]
