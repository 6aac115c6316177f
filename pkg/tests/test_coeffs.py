import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from layered_stokes import coeffs as cf


def probe(n=7, d=2):
    t = (np.arange(n) + 0.5) / n
    return np.stack(np.meshgrid(*([t] * d), indexing="ij"), -1).reshape(-1, d)


@pytest.mark.parametrize("d", [2, 3])
def test_identity_is_elliptic_with_unit_form(d):
    A = cf.make_constant(d, cf.identity_tensor(d), 0.5)
    rep = cf.check_ellipticity(A, probe(4, d))
    assert rep.passed
    assert rep.worst_form == pytest.approx(1.0, abs=1e-14)
    assert rep.max_entry == 1.0


def test_negative_diagonal_entry_fails():
    T = cf.identity_tensor(2)
    T[0, 0, 0, 0] = -1.0
    rep = cf.check_ellipticity(cf.make_constant(2, T, 0.5), probe(3))
    assert not rep.passed
    assert rep.worst_form <= -1.0 + 1e-12
    assert rep.worst_bound_violation > 0


def test_entry_bound_violation_fails():
    A = cf.make_constant(2, 5.0 * cf.identity_tensor(2), 0.5)
    assert not cf.check_ellipticity(A, probe(3)).passed


def test_layered_form_matches_per_layer_eigenvalues():
    A = cf.make_layered(2, [0.5], [0.3, 3.0], delta=0.3)
    rep = cf.check_ellipticity(A, probe(8))
    assert rep.passed
    # scalar viscosity nu I has every eigenvalue equal to nu
    assert rep.worst_form == pytest.approx(0.3, abs=1e-12)
    assert rep.max_entry == pytest.approx(3.0)


def test_general_layer_tensor_uses_symmetric_part(rng):
    d = 2
    M = rng.standard_normal((4, 4))
    M = M @ M.T + 0.5 * np.eye(4)
    skew = rng.standard_normal((4, 4))
    skew = 0.1 * (skew - skew.T)
    T = cf.from_matrix(M + skew, d)
    scale = 0.9 / np.abs(T).max()
    T = T * scale
    lam = np.linalg.eigvalsh(M * scale)[0]
    A = cf.make_layered(d, [0.4], [cf.identity_tensor(d), T], delta=min(lam, 0.5) * 0.99)
    rep = cf.check_ellipticity(A, probe(5))
    assert rep.worst_form == pytest.approx(min(lam, 1.0), rel=1e-10)
    assert rep.passed


def test_matrix_round_trip(rng):
    T = rng.standard_normal((3, 3, 3, 3))
    assert np.array_equal(cf.from_matrix(cf.as_matrix(T), 3), T)
    M = cf.as_matrix(T)
    # row (alpha, i), column (beta, j)
    assert M[1 * 3 + 2, 0 * 3 + 1] == T[1, 0, 2, 1]


def test_layers_are_equal_on_each_interval():
    A = cf.make_layered(2, [0.25, 0.75], [1.0, 10.0, 1.0])
    x1 = np.linspace(0.01, 0.99, 50)
    pts = np.stack([x1, np.full_like(x1, 0.3)], 1)
    vals = A(pts)[:, 0, 0, 0, 0]
    expect = np.where((x1 > 0.25) & (x1 <= 0.75), 10.0, 1.0)
    assert np.array_equal(vals, expect)
    # a point on a breakpoint belongs to the lower layer
    assert A(np.array([[0.25, 0.0]]))[0, 0, 0, 0, 0] == 1.0


def test_many_breakpoints_match_linear_scan(rng):
    bp = np.sort(rng.uniform(0, 1, 64))
    nus = rng.uniform(0.3, 3.0, 65)
    A = cf.make_layered(2, bp, nus)
    x1 = rng.uniform(0, 1, 500)
    pts = np.stack([x1, rng.uniform(0, 1, 500)], 1)
    got = A(pts)[:, 1, 1, 0, 0]
    expect = np.array([nus[sum(1 for b in bp if b < x)] for x in x1])
    assert np.array_equal(got, expect)


def test_unsorted_breakpoints_raise():
    with pytest.raises(ValueError):
        cf.make_layered(2, [0.6, 0.4], [1.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        cf.make_layered(2, [0.5], [1.0])


def test_alternating_layers_snap_and_count():
    A = cf.alternating_layers(2, 3, 0.3, 3.0, n_cells=16)
    assert np.allclose(A.breakpoints, [4 / 16, 8 / 16, 12 / 16])
    assert [float(t[0, 0, 0, 0]) for t in A.layers] == [0.3, 3.0, 0.3, 3.0]
    with pytest.raises(ValueError):
        cf.alternating_layers(2, 8, 0.3, 3.0, n_cells=8)


@pytest.mark.parametrize("make", [
    lambda: cf.make_constant(2, 2.0 * cf.identity_tensor(2), 0.25),
    lambda: cf.make_layered(2, [0.3, 0.6], [1.0, 3.0, 0.5]),
])
def test_gamma_vanishes_without_x_prime_dependence(make):
    A = make()
    for x0 in ([0.5, 0.5], [0.3, 0.7]):
        assert cf.oscillation_gamma(A, x0, 0.2).gamma == 0.0


def test_gamma_invariant_under_constant_shift(rng):
    base = cf.make_layered(2, [0.5], [1.0, 2.0])
    A = cf.make_perturbed(base, cf.sine_perturbation(2), 0.1)
    C = 0.05 * rng.standard_normal((2, 2, 2, 2))
    g0 = cf.oscillation_gamma(A, [0.5, 0.4], 0.2).gamma
    g1 = cf.oscillation_gamma(A.shifted(C), [0.5, 0.4], 0.2).gamma
    assert g1 == pytest.approx(g0, rel=1e-12)


def _gamma_exact(eps, a, r):
    # mean over the disk of eps |sin(2 pi y2) - m|, m the x'-interval average
    m = (np.cos(2 * np.pi * (a - r)) - np.cos(2 * np.pi * (a + r))) / (4 * np.pi * r)
    fn = lambda t: 2 * np.sqrt(r * r - t * t) * abs(np.sin(2 * np.pi * (a + t)) - m)
    val, _ = integrate.quad(fn, -r, r, limit=200)
    return eps * val / (np.pi * r * r)


@pytest.mark.parametrize("x0,r", [([0.5, 0.5], 0.2), ([0.4, 0.1], 0.15)])
def test_gamma_of_sine_perturbation_matches_quadrature(x0, r):
    base = cf.make_layered(2, [0.5], [1.0, 2.0])
    eps = 0.1
    A = cf.make_perturbed(base, cf.sine_perturbation(2), eps)
    got = cf.oscillation_gamma(A, x0, r, quadrature_n=128).gamma
    assert got == pytest.approx(_gamma_exact(eps, x0[1], r), rel=0.01)


def test_gamma_is_linear_in_amplitude():
    base = cf.make_layered(2, [0.5], [1.0, 2.0])
    A = cf.make_perturbed(base, cf.sine_perturbation(2), 0.01)
    g1 = cf.oscillation_gamma(A, [0.5, 0.5], 0.2).gamma
    g2 = cf.oscillation_gamma(A.with_amplitude(0.02), [0.5, 0.5], 0.2).gamma
    assert g2 == pytest.approx(2 * g1, rel=0.02)


def test_gamma_argument_checks():
    A = cf.make_constant(2, cf.identity_tensor(2), 0.5)
    with pytest.raises(ValueError):
        cf.oscillation_gamma(A, [0.5, 0.5], 0.0)
    with pytest.raises(ValueError):
        cf.oscillation_gamma(A, [0.5, 0.5], 0.1, quadrature_n=4)


@settings(max_examples=30, deadline=None)
@given(nu=st.floats(0.3, 3.0), d=st.sampled_from([2, 3]))
def test_scalar_viscosity_form_is_nu(nu, d):
    A = cf.make_constant(d, cf.scalar_viscosity(d, nu), 0.25)
    rep = cf.check_ellipticity(A, np.zeros((1, d)))
    assert rep.worst_form == pytest.approx(nu, rel=1e-12)
    assert rep.passed


def test_tensor_shape_checks():
    with pytest.raises(ValueError):
        cf.make_constant(2, np.eye(2), 0.5)
    with pytest.raises(ValueError):
        cf.EllipticTensor(4, 0.5, cf.CONSTANT)
    with pytest.raises(ValueError):
        cf.EllipticTensor(2, 1.5, cf.CONSTANT)
    with pytest.raises(ValueError):
        cf.tensor_from_entries(2, [1.0] * 15)
