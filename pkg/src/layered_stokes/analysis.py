"""Measurement functionals: L_q norms, mean oscillations, Hölder seminorms,
maximal and sharp functions, and interface-jump scans.

Fields live on the full cell grid of a domain, either scalar (``shape``) or
vector valued (``shape + (k,)``); vector fields enter through their
pointwise Euclidean norm.  Cell sets are boolean masks over ``shape`` or
flat cell indices.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import ndimage, signal

from .domain import DomainSpec, DyadicFiltration


def _cell_values(field, cells, d: Optional[int] = None):
    """Values on the chosen cells as an ``(N, k)`` array, plus the grid shape."""
    f = np.asarray(field, dtype=float)
    cells = np.asarray(cells)
    if cells.dtype == bool:
        shape = cells.shape
        if f.shape[:cells.ndim] != shape:
            raise ValueError("mask shape does not match the field")
        vals = f[cells]
    else:
        ndim = f.ndim if d is None else d
        shape = f.shape[:ndim]
        vals = f.reshape((-1,) + f.shape[ndim:])[cells.reshape(-1)]
    if vals.shape[0] == 0:
        raise ValueError("cell set is empty")
    return vals.reshape(vals.shape[0], -1), shape


def _magnitude(vals: np.ndarray) -> np.ndarray:
    return np.abs(vals[:, 0]) if vals.shape[1] == 1 else np.linalg.norm(vals, axis=1)


def lq_norm(field, cells, q: float, h: float, d: Optional[int] = None) -> float:
    """``(sum |f|^q h^d)^(1/q)`` over the cells; ``q = inf`` gives the max.

    ``d`` is needed only for vector fields with index-array cell sets.
    """
    if not q >= 1:
        raise ValueError(f"exponent must be at least 1, got {q}")
    vals, shape = _cell_values(field, cells, d)
    a = _magnitude(vals)
    if np.isinf(q):
        return float(a.max())
    hd = h ** len(shape)
    top = a.max()
    if top == 0:
        return 0.0
    # scale out the maximum to keep large q finite
    return float(top * (hd * ((a / top) ** q).sum()) ** (1.0 / q))


@dataclass(frozen=True)
class OscillationReport:
    region: object
    value: float
    count: int
    mean: np.ndarray


def mean_oscillation(field, cells, h: float, region=0, d: Optional[int] = None
                     ) -> OscillationReport:
    """Average of ``|f - (f)_region|`` over the region (uniform cell weights)."""
    vals, _ = _cell_values(field, cells, d)
    mean = vals.mean(axis=0)
    dev = _magnitude(vals - mean)
    value = float(dev.mean())
    scale = max(float(np.abs(vals).max()), 1.0)
    if value < 1e-14 * scale:
        value = 0.0
    return OscillationReport(region, value, int(vals.shape[0]),
                             mean if mean.size > 1 else mean[0])


def sharp_function(field, filtration: DyadicFiltration, vector: bool = False) -> np.ndarray:
    """``f#(x)``: max over levels of the mean oscillation on the level cube
    containing ``x``.  Cells outside the domain carry 0.

    Scalar fields may carry leading batch axes ``(m,) + shape``;
    ``vector=True`` marks a trailing component axis instead.
    """
    labels0 = filtration.labels[0]
    shape = labels0.shape
    n_cells = int(np.prod(shape))
    f = np.asarray(field, dtype=float)
    if vector:
        batch_shape, comps = (), f.shape[-1]
        if f.shape[:-1] != shape:
            raise ValueError("field does not match the filtration grid")
    else:
        batch_shape, comps = f.shape[:f.ndim - len(shape)], 1
        if f.shape[len(batch_shape):] != shape:
            raise ValueError("field does not match the filtration grid")
    m = int(np.prod(batch_shape))
    vals = f.reshape(m, n_cells, comps) if not vector else f.reshape(1, n_cells, comps)
    inside = labels0.reshape(-1) >= 0
    v = vals[:, inside]
    out = np.zeros((vals.shape[0], n_cells))
    best = np.zeros(v.shape[:2])
    for lab in filtration.labels:
        lab = lab.reshape(-1)
        if np.any((lab < 0) & inside):
            raise RuntimeError("filtration does not cover every domain cell")
        ids = lab[inside]
        n_cubes = int(ids.max()) + 1
        cnt = np.maximum(np.bincount(ids, minlength=n_cubes), 1).astype(float)
        # one bincount over (batch, cube) pairs
        key = (np.arange(v.shape[0])[:, None] * n_cubes + ids[None, :]).ravel()
        size = v.shape[0] * n_cubes
        means = np.stack([np.bincount(key, v[..., k].ravel(), size) for k in range(comps)], -1)
        means = means.reshape(v.shape[0], n_cubes, comps) / cnt[None, :, None]
        dev = v - means[:, ids]
        dev = np.abs(dev[..., 0]) if comps == 1 else np.linalg.norm(dev, axis=-1)
        osc = np.bincount(key, dev.ravel(), size).reshape(v.shape[0], n_cubes) / cnt
        best = np.maximum(best, osc[:, ids])
    out[:, inside] = best
    return out.reshape(batch_shape + shape) if not vector else out.reshape(shape)


# ---------------------------------------------------------------------------
# maximal function
# ---------------------------------------------------------------------------


def default_radii(dom: DomainSpec) -> np.ndarray:
    """``h/2`` (the single-cell ball) and ``h 2^k`` up to the domain diameter.

    On periodic axes radii stay below half the period so that torus balls
    do not wrap onto themselves.
    """
    h = dom.h
    ext = dom.extent
    cap = float(np.sqrt((ext ** 2).sum()))
    per = [e for e, p in zip(ext, dom.periodic) if p]
    if per:
        cap = min(cap, 0.5 * min(per) - 0.5 * h)
    radii = [0.5 * h]
    r = h
    while r <= cap:
        radii.append(r)
        r *= 2
    return np.array(radii)


def _ball_offsets(r_cells: float, d: int) -> np.ndarray:
    k = int(np.floor(r_cells * (1 + 1e-12)))
    rng = np.arange(-k, k + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    return (sum(g.astype(float) ** 2 for g in grids) <= (r_cells * (1 + 1e-12)) ** 2)


def _pad(arr, k: int, periodic, batch: int):
    out = arr
    for a, p in enumerate(periodic):
        w = [(0, 0)] * out.ndim
        w[batch + a] = (k, k)
        out = np.pad(out, w, mode="wrap" if p else "constant")
    return out


def _ball_average(a, inside, kern, periodic, batch: int):
    """Average of ``a`` over ``ball ∩ domain`` for every lattice center."""
    if kern.size == 1:
        return a * inside
    k = kern.shape[0] // 2
    axes = tuple(range(batch, batch + len(periodic)))
    num = signal.fftconvolve(_pad(a * inside, k, periodic, batch),
                             kern.reshape((1,) * batch + kern.shape), mode="valid", axes=axes)
    den = signal.fftconvolve(_pad(inside.astype(float), k, periodic, 0), kern, mode="valid")
    den = np.rint(den)
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return np.maximum(avg, 0.0)


def _disk_dilate(avg, kern, periodic, batch: int):
    """Max of ``avg`` over the ball footprint around every cell."""
    d = len(periodic)
    k = kern.shape[0] // 2
    if kern.size == 1:
        return avg
    modes = ["nearest"] * batch + ["wrap" if p else "constant" for p in periodic]
    if d != 2:
        fp = kern.astype(bool).reshape((1,) * batch + kern.shape)
        return ndimage.maximum_filter(avg, footprint=fp, mode=modes, cval=0.0)
    # 2d: union of horizontal segments, one per row offset
    out = np.zeros_like(avg)
    ax0, ax1 = batch, batch + 1
    for dy in range(-k, k + 1):
        w = int(kern[dy + k].sum()) // 2
        if kern[dy + k].sum() == 0 or (not periodic[0] and abs(dy) >= avg.shape[ax0]):
            continue
        seg = ndimage.maximum_filter1d(avg, 2 * w + 1, axis=ax1,
                                       mode="wrap" if periodic[1] else "constant", cval=0.0)
        if periodic[0]:
            shifted = np.roll(seg, dy, axis=ax0)
        else:
            shifted = np.zeros_like(seg)
            n0 = seg.shape[ax0]
            src = [slice(None)] * seg.ndim
            dst = [slice(None)] * seg.ndim
            if dy >= 0:
                src[ax0], dst[ax0] = slice(0, n0 - dy), slice(dy, n0)
            else:
                src[ax0], dst[ax0] = slice(-dy, n0), slice(0, n0 + dy)
            shifted[tuple(dst)] = seg[tuple(src)]
        out = np.maximum(out, shifted)
    return out


def maximal_function(field, dom: DomainSpec, radii: Optional[Sequence[float]] = None,
                     vector: bool = False) -> np.ndarray:
    """Discrete Hardy-Littlewood maximal function.

    ``Mf(x)`` is the max over ``r`` in ``radii`` and over lattice centers
    ``x0`` with ``|x - x0| <= r`` of the average of ``|f|`` over
    ``ball_cells(dom, x0, r)``.  A stack of scalar fields ``(m,) + shape``
    is processed in one pass; ``vector=True`` marks a trailing component axis.
    Cells outside the domain carry 0.
    """
    f = np.asarray(field, dtype=float)
    a = np.linalg.norm(f, axis=-1) if vector else np.abs(f)
    batch = a.ndim - dom.d
    if batch < 0 or a.shape[batch:] != dom.shape:
        raise ValueError("field does not match the domain grid")
    radii = default_radii(dom) if radii is None else np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0):
        raise ValueError("radii must be positive")
    inside = dom.inside
    periodic = dom.periodic
    out = np.zeros_like(a)
    for r in radii:
        kern = _ball_offsets(r / dom.h, dom.d).astype(float)
        avg = _ball_average(a, inside, kern, periodic, batch)
        out = np.maximum(out, _disk_dilate(avg, kern, periodic, batch))
    return np.where(inside, out, 0.0)


# ---------------------------------------------------------------------------
# Hölder seminorm and interface traces
# ---------------------------------------------------------------------------


def holder_seminorm(field, cells, tau: float, h: float, d: Optional[int] = None,
                    chunk: int = 1024) -> float:
    """Max over distinct cell-center pairs of ``|f(x) - f(y)| / |x - y|^tau``."""
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    f = np.asarray(field, dtype=float)
    cells = np.asarray(cells)
    if cells.dtype == bool:
        shape = cells.shape
        flat = np.flatnonzero(cells.reshape(-1))
    else:
        shape = f.shape[:(f.ndim if d is None else d)]
        flat = cells.reshape(-1)
    if flat.size < 2:
        raise ValueError("need at least two cells")
    vals = f.reshape((int(np.prod(shape)), -1))[flat]
    pos = np.stack(np.unravel_index(flat, shape), axis=1) * h
    best = 0.0
    for s in range(0, flat.size, chunk):
        dist = np.sqrt(((pos[s:s + chunk, None, :] - pos[None, :, :]) ** 2).sum(-1))
        diff = np.linalg.norm(vals[s:s + chunk, None, :] - vals[None, :, :], axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, diff / np.where(dist > 0, dist, 1.0) ** tau, 0.0)
        best = max(best, float(ratio.max()))
    return best


def _extrapolate(x: np.ndarray, y: np.ndarray, c: float) -> np.ndarray:
    """Lagrange extrapolation of samples ``y[k]`` at ``x[k]`` to ``c``."""
    out = np.zeros(y.shape[1:])
    for k in range(len(x)):
        w = np.prod([(c - x[m]) / (x[k] - x[m]) for m in range(len(x)) if m != k])
        out = out + w * y[k]
    return out


def interface_jump(field, dom: DomainSpec, c: float, layers: int = 3) -> float:
    """Max over ``x'`` of ``|f(c+, x') - f(c-, x')|`` with one-sided traces
    extrapolated from the ``layers`` nearest cell layers on each side
    (quadratic for 3).  Only columns whose sampled cells are all inside the
    domain are scanned."""
    f = np.asarray(field, dtype=float)
    if f.shape[:dom.d] != dom.shape:
        raise ValueError("field does not match the domain grid")
    x1 = dom.axis_centers(0)
    below = np.flatnonzero(x1 < c)
    above = np.flatnonzero(x1 > c)
    if below.size < 2 or above.size < 2:
        raise ValueError(f"interface at {c} needs at least two cell layers on each side")
    m = min(layers, below.size, above.size)
    lo, hi = below[-m:][::-1], above[:m]
    cols = dom.inside[lo].all(axis=0) & dom.inside[hi].all(axis=0)
    if not cols.any():
        raise ValueError("no column crosses the interface inside the domain")
    minus = _extrapolate(x1[lo], f[lo], c)
    plus = _extrapolate(x1[hi], f[hi], c)
    diff = plus - minus
    if diff.ndim > dom.d - 1:
        diff = np.linalg.norm(diff.reshape(diff.shape[:dom.d - 1] + (-1,)), axis=-1)
    return float(np.abs(diff)[cols].max())


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

CSV_FIELDS = ("functional", "region", "value", "params")


def report_row(functional: str, region, value: float, **params) -> dict:
    text = ";".join(f"{k}={v}" for k, v in sorted(params.items()))
    return {"functional": functional, "region": region, "value": float(value), "params": text}


def oscillation_row(rep: OscillationReport, **params) -> dict:
    return report_row("mean_oscillation", rep.region, rep.value, count=rep.count, **params)


def write_rows(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def read_rows(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["value"] = float(row["value"])
    return rows
