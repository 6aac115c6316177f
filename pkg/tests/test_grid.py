import numpy as np
import pytest

from layered_stokes import coeffs as cf
from layered_stokes import domain as dm
from layered_stokes import grid as gr
from layered_stokes.oracle import layered_shear_solution


def identity(d=2):
    return cf.make_constant(d, cf.identity_tensor(d), 0.5)


def hand_laplacian(n):
    """Five-point periodic stencil with unit diagonal scale 4 (h^d / h^2 = 1 in 2D)."""
    K = np.zeros((n * n, n * n))
    for i in range(n):
        for k in range(n):
            r = i * n + k
            K[r, r] = 4.0
            for di, dk in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                K[r, ((i + di) % n) * n + (k + dk) % n] -= 1.0
    return K


def test_identity_stiffness_on_periodic_4x4():
    grid = gr.MacGrid(dm.periodic_box(4))
    sys = gr.assemble(identity(), grid)
    L = hand_laplacian(4)
    expect = np.block([[L, np.zeros_like(L)], [np.zeros_like(L), L]])
    assert np.allclose(sys.K.toarray(), expect, atol=1e-13)


def test_divergence_operator_on_periodic_4x4():
    grid = gr.MacGrid(dm.periodic_box(4))
    u = np.random.default_rng(0).standard_normal(grid.n_u)
    U0, U1 = grid.face_arrays(u)
    expect = (np.roll(U0, -1, 0) - U0 + np.roll(U1, -1, 1) - U1) * 4
    assert np.allclose(grid.B @ u, expect.ravel())


def test_constants_in_kernel_on_torus():
    grid = gr.MacGrid(dm.periodic_box(8))
    A = cf.make_layered(2, [0.5], [0.3, 3.0])
    sys = gr.assemble(A, grid)
    for sl in grid.component_slices():
        e = np.zeros(grid.n_u)
        e[sl] = 1.0
        assert np.abs(sys.K @ e).max() < 1e-12
        assert np.abs(grid.B @ e).max() < 1e-12


def test_layered_stiffness_symmetric_and_coercive():
    dom = dm.half_strip(8, H=1.0)
    A = cf.make_layered(2, [0.5], [1.0, 10.0], delta=0.1)
    sys = gr.assemble(A, gr.MacGrid(dom))
    K = sys.K.toarray()
    assert np.abs(K - K.T).max() < 1e-12
    assert np.linalg.eigvalsh(K)[0] > 1e-3


def test_nonsymmetric_tensor_gives_nonsymmetric_stiffness():
    T = cf.identity_tensor(2)
    T[0, 1, 0, 0] += 0.2
    A = cf.make_constant(2, T, 0.5)
    K = gr.assemble(A, gr.MacGrid(dm.dirichlet_box(6))).K.toarray()
    assert np.abs(K - K.T).max() > 1e-3


def test_assembly_rejects_non_elliptic():
    T = cf.identity_tensor(2)
    T[0, 0, 0, 0] = -1.0
    with pytest.raises(gr.AssemblyError):
        gr.assemble(cf.make_constant(2, T, 0.5), gr.MacGrid(dm.periodic_box(4)))


def test_energy_is_the_stiffness_form(rng):
    grid = gr.MacGrid(dm.dirichlet_box(6))
    A = cf.make_layered(2, [1 / 3, 2 / 3], [0.5, 2.0, 1.0])
    sys = gr.assemble(A, grid)
    u, v = rng.standard_normal((2, grid.n_u))
    assert sys.energy(u, v) == pytest.approx(v @ sys.K @ u, rel=1e-12)
    p = rng.standard_normal(grid.n_p)
    assert p @ sys.Bw @ u == pytest.approx(grid.h ** 2 * p @ (grid.B @ u), rel=1e-12)


def test_rhs_zero_and_constant_divergence():
    grid = gr.MacGrid(dm.periodic_box(8))
    r = gr.assemble_rhs(grid)
    assert not np.any(r.vector)
    r = gr.assemble_rhs(grid, g=np.ones(grid.shape))
    assert r.g_shift == 1.0
    assert not np.any(r.g_effective)


def test_rhs_momentum_sign():
    grid = gr.MacGrid(dm.dirichlet_box(6))
    f = np.zeros(grid.shape + (2,))
    f[..., 0] = 1.0
    r = gr.assemble_rhs(grid, f=f)
    sl = grid.component_slices()
    # every interior x-face sees -h^2 f_1
    assert np.allclose(r.vector[sl[0]], -grid.h ** 2)
    assert not np.any(r.vector[sl[1]])


def test_gradient_exact_on_linear_profile():
    dom = dm.half_strip(8, H=1.0)
    grid = gr.MacGrid(dom)
    u = grid.interpolate_velocity(lambda x: np.stack([0 * x[:, 0], 3.0 * x[:, 0]], 1))
    Du = gr.gradient(gr.StaggeredField(grid, u, np.zeros(grid.n_p)))
    expect = np.array([[0.0, 0.0], [3.0, 0.0]])
    assert np.allclose(Du[:-1], expect, atol=1e-12)


def test_gradient_second_order():
    def err(n):
        grid = gr.MacGrid(dm.periodic_box(n))
        fn = lambda x: np.stack([np.sin(2 * np.pi * x[:, 1]), np.cos(2 * np.pi * x[:, 0])], 1)
        u = grid.interpolate_velocity(fn)
        Du = gr.gradient(gr.StaggeredField(grid, u, np.zeros(grid.n_p)))
        c = grid.dom.centers()
        exact = np.zeros(grid.shape + (2, 2))
        exact[..., 0, 1] = 2 * np.pi * np.cos(2 * np.pi * c[..., 1])
        exact[..., 1, 0] = -2 * np.pi * np.sin(2 * np.pi * c[..., 0])
        return np.abs(Du - exact).max()

    errs = [err(n) for n in (16, 32, 64)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() > 1.9


def test_trace_of_gradient_is_divergence(rng):
    grid = gr.MacGrid(dm.affine_graph(8, 0.05, offset=0.1))
    field = gr.StaggeredField(grid, rng.standard_normal(grid.n_u), np.zeros(grid.n_p))
    Du = gr.gradient(field)
    assert np.allclose(np.trace(Du, axis1=-2, axis2=-1), gr.divergence(field), atol=1e-12)


def test_shear_flux_is_exact_across_interface():
    dom = dm.half_strip(16, H=1.0)
    grid = gr.MacGrid(dom)
    A = cf.make_layered(2, [0.5], [1.0, 10.0], delta=0.1)
    sol = layered_shear_solution([1.0, 10.0], [0.5], 2.0)
    u = grid.interpolate_velocity(sol.velocity)
    field = gr.StaggeredField(grid, u, np.zeros(grid.n_p))
    U, ext = gr.compute_U(field, A)
    rows = slice(0, grid.shape[0] - 1)  # the top row sees the wall
    assert np.allclose(U[rows, :, 1], 2.0, atol=1e-12)
    assert np.allclose(U[rows, :, 0], 0.0, atol=1e-12)
    # extended vector (D_x' u, div u, U_2)
    assert np.allclose(ext[rows, :, :-1], 0.0, atol=1e-12)
    assert np.allclose(ext[rows, :, -1], 2.0, atol=1e-12)
    # without the coefficient the raw gradient smears the jump
    raw = gr.gradient(field)
    assert not np.allclose(raw[7, :, 1, 0], 2.0)


def test_compute_U_adds_pressure():
    grid = gr.MacGrid(dm.periodic_box(4))
    field = gr.StaggeredField(grid, np.zeros(grid.n_u), np.arange(16.0))
    U, _ = gr.compute_U(field, identity())
    assert np.array_equal(U[..., 0].ravel(), np.arange(16.0))


def test_comparability_constant_identity():
    N = gr.comparability_constant(identity(), np.zeros((1, 2)))
    assert 1.0 <= N < 3.0


def test_cell_velocity_average():
    grid = gr.MacGrid(dm.periodic_box(4))
    u = grid.interpolate_velocity(lambda x: np.stack([np.ones(len(x)), 2 * np.ones(len(x))], 1))
    cv = gr.cell_velocity(gr.StaggeredField(grid, u, np.zeros(grid.n_p)))
    assert np.allclose(cv[..., 0], 1.0) and np.allclose(cv[..., 1], 2.0)


@pytest.mark.parametrize("make", [
    lambda: dm.periodic_box(6),
    lambda: dm.half_strip(6, H=1.0),
    lambda: dm.affine_graph(8, 0.05, offset=0.1),
])
def test_field_round_trip(tmp_path, rng, make):
    grid = gr.MacGrid(make())
    field = gr.StaggeredField(grid, rng.standard_normal(grid.n_u), rng.standard_normal(grid.n_p))
    gr.save_field(tmp_path / "f.txt", field)
    back = gr.load_field(tmp_path / "f.txt")
    assert back.grid.shape == grid.shape
    assert np.array_equal(back.u, field.u)
    assert np.array_equal(back.p, field.p)


def test_load_field_rejects_foreign_file(tmp_path):
    (tmp_path / "x.txt").write_text("something else\n")
    with pytest.raises(ValueError):
        gr.load_field(tmp_path / "x.txt")
