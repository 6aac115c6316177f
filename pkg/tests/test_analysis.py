import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layered_stokes import analysis as an
from layered_stokes import domain as dm
from layered_stokes.oracle import layered_shear_solution


def centers(dom):
    return dom.centers()


def test_lq_norm_of_sine():
    dom = dm.periodic_box(64)
    f = np.sin(2 * np.pi * centers(dom)[..., 0])
    assert an.lq_norm(f, dom.inside, 2, dom.h) == pytest.approx(1 / np.sqrt(2), abs=1e-4)
    assert an.lq_norm(f, dom.inside, 4, dom.h) == pytest.approx((3 / 8) ** 0.25, abs=1e-4)
    assert an.lq_norm(f, dom.inside, np.inf, dom.h) == pytest.approx(np.abs(f).max())


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.1, 10), q=st.floats(1.0, 16.0))
def test_lq_norm_of_constant(c, q):
    dom = dm.half_strip(8, H=2.0)
    f = np.full(dom.shape, c)
    assert an.lq_norm(f, dom.inside, q, dom.h) == pytest.approx(c * dom.measure ** (1 / q),
                                                                rel=1e-12)


def test_lq_norm_vector_and_index_sets():
    dom = dm.periodic_box(8)
    f = np.zeros(dom.shape + (2,))
    f[..., 0], f[..., 1] = 3.0, 4.0
    idx = np.arange(10)
    assert an.lq_norm(f, idx, 2, dom.h, d=2) == pytest.approx(5.0 * np.sqrt(10 * dom.h ** 2))
    with pytest.raises(ValueError):
        an.lq_norm(f, dom.inside, 0.5, dom.h)
    with pytest.raises(ValueError):
        an.lq_norm(f, np.zeros(dom.shape, bool), 2, dom.h)


def test_oscillation_of_two_halves():
    f = np.ones((16, 16))
    f[:8] = -1.0
    rep = an.mean_oscillation(f, np.ones((16, 16), bool), 1 / 16)
    assert rep.value == 1.0 and rep.count == 256 and rep.mean == 0.0


def test_oscillation_of_linear_field_on_disk():
    dom = dm.periodic_box(256)
    r = 0.25
    mask = dm.ball_mask(dom, [0.5, 0.5], r)
    rep = an.mean_oscillation(centers(dom)[..., 0], mask, dom.h)
    # disk average of |x1 - 1/2| is 4 r / (3 pi)
    assert rep.value == pytest.approx(4 * r / (3 * np.pi), rel=0.01)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), c=st.floats(-100, 100))
def test_oscillation_properties(seed, c):
    f = np.random.default_rng(seed).standard_normal((6, 6))
    mask = np.ones((6, 6), bool)
    v = an.mean_oscillation(f, mask, 1 / 6).value
    # invariant under constants and at most twice the median deviation
    assert an.mean_oscillation(f + c, mask, 1 / 6).value == pytest.approx(v, rel=1e-9, abs=1e-9)
    assert v <= 2 * np.abs(f - np.median(f)).mean() + 1e-12
    assert an.mean_oscillation(np.full((6, 6), c), mask, 1 / 6).value == 0.0


def test_sharp_function_of_indicator():
    dom = dm.periodic_box(16)
    filt = dm.dyadic_filtration(dom, 0, 4)
    f = (centers(dom)[..., 0] < 0.5).astype(float)
    assert np.allclose(an.sharp_function(f, filt), 0.5)


def test_sharp_function_of_spike():
    dom = dm.periodic_box(8)
    filt = dm.dyadic_filtration(dom, 0, 3)
    f = np.zeros((8, 8))
    f[0, 0] = 1.0
    osc = lambda m: 2 * (m - 1) / m ** 2
    expect = np.full((8, 8), osc(64))
    expect[:4, :4] = osc(16)
    expect[:2, :2] = osc(4)
    assert np.allclose(an.sharp_function(f, filt), expect)


def test_sharp_function_batched_and_monotone(rng):
    dom = dm.affine_graph(16, 0.05, offset=0.1)
    f = rng.standard_normal((3,) + dom.shape)
    full = dm.dyadic_filtration(dom, 0, 3)
    coarse = dm.dyadic_filtration(dom, 0, 2)
    batched = an.sharp_function(f, full)
    for k in range(3):
        single = an.sharp_function(f[k], full)
        assert np.allclose(batched[k], single)
        assert np.all(single >= an.sharp_function(f[k], coarse) - 1e-14)
    assert np.all(batched[:, ~dom.inside] == 0)


def test_maximal_function_of_constant():
    for dom in (dm.periodic_box(16), dm.half_strip(16, H=1.0), dm.affine_graph(16, 0.05)):
        f = np.full(dom.shape, 2.5)
        Mf = an.maximal_function(f, dom)
        assert np.allclose(Mf[dom.inside], 2.5)


def test_maximal_function_of_spike():
    dom = dm.periodic_box(16)
    f = np.zeros((16, 16))
    f[0, 0] = 1.0
    Mf = an.maximal_function(f, dom, radii=[dom.h])
    for cell in [(0, 0), (1, 0), (15, 0), (1, 1), (2, 0)]:
        assert Mf[cell] == pytest.approx(0.2)
    assert abs(Mf[2, 1]) < 1e-14 and abs(Mf[8, 8]) < 1e-14


def brute_maximal(f, dom, radii):
    cells = np.flatnonzero(dom.inside.ravel())
    cen = dom.centers().reshape(-1, dom.d)
    out = np.zeros(f.size)
    for r in radii:
        avg = {}
        for c in cells:
            ball = dm.ball_cells(dom, cen[c], r)
            avg[c] = np.abs(f.ravel()[ball]).mean()
        for x in cells:
            dist = dm.distance_field(dom, cen[x]).ravel()
            near = [c for c in cells if dist[c] <= r * (1 + 1e-12)]
            out[x] = max(out[x], max(avg[c] for c in near))
    return out.reshape(dom.shape)


@pytest.mark.parametrize("make", [lambda: dm.periodic_box(8), lambda: dm.dirichlet_box(8),
                                  lambda: dm.affine_graph(8, 0.05, offset=0.1)])
def test_maximal_function_matches_brute_force(make, rng):
    dom = make()
    f = rng.standard_normal(dom.shape)
    radii = an.default_radii(dom)
    assert np.allclose(an.maximal_function(f, dom, radii), brute_maximal(f, dom, radii),
                       atol=1e-13)


@pytest.mark.parametrize("make", [lambda: dm.periodic_box(16), lambda: dm.half_strip(16, H=1.0),
                                  lambda: dm.sine_graph(16, 0.05)])
def test_maximal_function_dominates_field(make, rng):
    dom = make()
    f = rng.standard_normal((2,) + dom.shape)
    Mf = an.maximal_function(f, dom)
    assert np.all(Mf[:, dom.inside] >= np.abs(f[:, dom.inside]) - 1e-14)
    v = rng.standard_normal(dom.shape + (2,))
    Mv = an.maximal_function(v, dom, vector=True)
    assert np.all(Mv[dom.inside] >= np.linalg.norm(v, axis=-1)[dom.inside] - 1e-14)


def test_holder_seminorm():
    dom = dm.dirichlet_box(8)
    x1 = centers(dom)[..., 0]
    mask = dom.inside
    assert an.holder_seminorm(np.full(dom.shape, 3.0), mask, 0.5, dom.h) == 0.0
    assert an.holder_seminorm(x1, mask, 1.0, dom.h) == pytest.approx(1.0)
    # |dx1| / |dx|^(1/2) peaks on the longest x1-aligned pair
    assert an.holder_seminorm(x1, mask, 0.5, dom.h) == pytest.approx(np.sqrt(7 / 8))
    with pytest.raises(ValueError):
        an.holder_seminorm(x1, mask, 1.5, dom.h)


def test_holder_matches_pairwise_loop(rng):
    f = rng.standard_normal((5, 5))
    h = 0.2
    best = 0.0
    for a, b in itertools.combinations(itertools.product(range(5), repeat=2), 2):
        dist = h * np.hypot(a[0] - b[0], a[1] - b[1])
        best = max(best, abs(f[a] - f[b]) / dist ** 0.3)
    got = an.holder_seminorm(f, np.ones((5, 5), bool), 0.3, h, chunk=7)
    assert got == pytest.approx(best, rel=1e-12)


def test_interface_jump_of_indicator_and_smooth():
    dom = dm.half_strip(16, H=1.0)
    x1 = centers(dom)[..., 0]
    assert an.interface_jump((x1 > 0.5).astype(float), dom, 0.5) == pytest.approx(1.0)
    errs = [an.interface_jump(np.sin(3 * dm.half_strip(n, H=1.0).centers()[..., 0]),
                              dm.half_strip(n, H=1.0), 0.5) for n in (16, 32)]
    assert errs[0] < 1e-3 and errs[1] < errs[0] / 4


def test_interface_jump_of_shear_slope():
    dom = dm.half_strip(16, H=1.0)
    sol = layered_shear_solution([1.0, 10.0], [0.5], 1.0)
    slope = sol.slope(centers(dom)[..., 0])
    assert an.interface_jump(slope, dom, 0.5) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        an.interface_jump(slope, dom, 0.05)


def test_csv_round_trip(tmp_path):
    f = np.ones((8, 8))
    f[:4] = 0
    rep = an.mean_oscillation(f, np.ones((8, 8), bool), 1 / 8, region="box")
    rows = [an.oscillation_row(rep, n=8), an.report_row("lq", "all", 1.25, q=4)]
    an.write_rows(tmp_path / "r.csv", rows)
    back = an.read_rows(tmp_path / "r.csv")
    assert [r["functional"] for r in back] == ["mean_oscillation", "lq"]
    assert back[0]["value"] == 0.5 and back[1]["value"] == 1.25
    assert back[0]["params"] == "count=64;n=8"
