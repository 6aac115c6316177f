import numpy as np
import pytest

from layered_stokes import coeffs as cf
from layered_stokes import domain as dm
from layered_stokes import grid as gr
from layered_stokes import oracle as orc
from layered_stokes.linsolve import SingularSystemError, SolverError


def points(n=40, seed=3):
    return np.random.default_rng(seed).uniform(0, 1, (n, 2))


def test_fourier_parallel_forcing_is_pure_pressure():
    sol = orc.fourier_solution((1, 1), (2.0, 2.0))
    x = points()
    assert np.abs(sol.velocity(x)).max() == 0.0
    # grad p = f exactly: p = -(k.f)/(2 pi |k|^2) cos(2 pi k.x)
    expect = -4.0 / (2 * np.pi * 2) * np.cos(2 * np.pi * x.sum(1))
    assert np.allclose(sol.pressure(x), expect)
    assert orc.stokes_residual(sol, x) <= 1e-8


def test_fourier_perpendicular_forcing_is_divergence_free():
    sol = orc.fourier_solution((1, 1), (1.0, -1.0))
    x = points()
    assert np.abs(sol.pressure(x)).max() == 0.0
    amp = -np.array([1.0, -1.0]) / (4 * np.pi ** 2 * 2)
    assert np.allclose(sol.velocity(x), np.sin(2 * np.pi * x.sum(1))[:, None] * amp)
    assert orc.stokes_residual(sol, x) <= 1e-8


def test_fourier_axis_mode():
    sol = orc.fourier_solution((1, 0), (0.0, 1.0))
    x = points()
    assert np.allclose(sol.velocity(x)[:, 1], -np.sin(2 * np.pi * x[:, 0]) / (4 * np.pi ** 2))
    assert orc.stokes_residual(sol, x) <= 1e-8
    with pytest.raises(ValueError):
        orc.fourier_solution((0, 0), (1.0, 0.0))


def test_single_layer_shear_is_linear():
    sol = orc.layered_shear_solution([2.0], [], 3.0)
    x1 = np.linspace(0, 1, 11)
    assert np.allclose(sol.u2(x1), 1.5 * x1)
    assert sol.jump_D1u2(0.5) == 0.0


def test_two_layer_shear():
    sol = orc.layered_shear_solution([1.0, 10.0], [0.5], 1.0)
    assert sol.slope(0.25) == 1.0 and sol.slope(0.75) == 0.1
    assert sol.u2(1.0) == pytest.approx(0.5 + 0.05)
    assert sol.jump_D1u2(0.5) == pytest.approx(0.9, abs=1e-12)
    assert orc.shear_flux_continuity(sol) < 1e-6
    x = np.stack([np.array([0.1, 0.3, 0.7, 0.9]), np.zeros(4)], 1)
    assert orc.shear_residual(sol, x) < 1e-8


def test_three_layer_slopes():
    sol = orc.layered_shear_solution([0.3, 3.0, 0.3], [1 / 3, 2 / 3], 2.0)
    slopes = [sol.slope(x) for x in (0.1, 0.5, 0.9)]
    assert np.allclose(slopes, [20 / 3, 2 / 3, 20 / 3])
    U = sol.U(np.array([[0.1, 0.0], [0.5, 0.0], [0.9, 0.0]]))
    assert np.allclose(U[:, 1], 2.0) and np.allclose(U[:, 0], 0.0)
    with pytest.raises(ValueError):
        orc.shear_residual(sol, np.array([[1 / 3 + 1e-4, 0.0]]))


def test_shear_argument_checks():
    with pytest.raises(ValueError):
        orc.layered_shear_solution([0.0, 1.0], [0.5], 1.0)
    with pytest.raises(ValueError):
        orc.layered_shear_solution([1.0, 1.0], [], 1.0)
    with pytest.raises(ValueError):
        orc.layered_shear_solution([1.0, 1.0, 1.0], [0.6, 0.4], 1.0)


def test_dense_budget_and_singularity():
    big = gr.assemble(cf.make_constant(2, cf.identity_tensor(2), 0.5),
                      gr.MacGrid(dm.periodic_box(64)))
    with pytest.raises(SolverError):
        orc.dense_solve(big, np.zeros(big.n_total))
    with pytest.raises(SolverError):
        orc.smallest_eigenvalue(big)
    small = gr.assemble(cf.make_constant(2, cf.identity_tensor(2), 0.5),
                        gr.MacGrid(dm.periodic_box(4)))
    # dropping the gauge rows leaves a singular matrix
    small.matrix = small.matrix[:-3, :-3].tocsc()
    with pytest.raises(SingularSystemError):
        orc.dense_solve(small, np.ones(small.matrix.shape[0]))


def test_smallest_eigenvalue_positive_with_gauges():
    sys = gr.assemble(cf.make_constant(2, cf.identity_tensor(2), 0.5),
                      gr.MacGrid(dm.periodic_box(6)))
    assert orc.smallest_eigenvalue(sys) > 1e-6
