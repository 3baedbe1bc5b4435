"""P1 assembly and Dirichlet solve checks against closed forms."""

import math

import numpy as np
import pytest

from spikelab import fem, geometry
from spikelab.geometry import build_mesh


@pytest.fixture(scope="module")
def disk_mesh():
    return build_mesh(geometry.unit_disk(), 0.05)


def test_stiffness_symmetry_and_kernel(disk_mesh):
    K = fem.assemble_stiffness(disk_mesh)
    assert abs(K - K.T).max() < 1e-12
    ones = np.ones(disk_mesh.n_vertices)
    assert np.abs(K @ ones).max() < 1e-10  # constants are in the kernel
    # positive semidefinite: random Rayleigh quotients are nonnegative
    rng = np.random.default_rng(0)
    for _ in range(5):
        v = rng.standard_normal(disk_mesh.n_vertices)
        assert v @ (K @ v) >= -1e-10


def test_mass_matrix_integrates_area(disk_mesh):
    M = fem.assemble_mass(disk_mesh)
    ones = np.ones(disk_mesh.n_vertices)
    assert ones @ (M @ ones) == pytest.approx(
        disk_mesh.signed_areas().sum(), rel=1e-12)


def test_mass_quadrature_exactness():
    # the 6-point rule is order 4: x^2 y^2 integrates exactly per triangle
    mesh = build_mesh(geometry.unit_square(), 0.25)
    xq = fem.quad_points(mesh)
    w = (xq[..., 0] ** 2) * (xq[..., 1] ** 2)
    area, _ = fem._geometry(mesh)
    val = float(area @ (w @ fem._QW))
    assert val == pytest.approx(1.0 / 9.0, abs=1e-14)


def test_poisson_disk_closed_form(disk_mesh):
    # -Delta u = 1 on the unit disk: u = (1 - |x|^2)/4
    K = fem.assemble_stiffness(disk_mesh)
    M = fem.assemble_mass(disk_mesh)
    rhs = M @ np.ones(disk_mesh.n_vertices)
    u = fem.solve_dirichlet(K, rhs, disk_mesh)
    exact = (1.0 - (disk_mesh.vertices ** 2).sum(axis=1)) / 4.0
    assert np.abs(u - exact).max() < 2e-3


def test_poisson_convergence_rate():
    # O(h^2) in the max norm on the square with u = sin(pi x) sin(pi y)
    errs = []
    for h in (0.1, 0.05):
        mesh = build_mesh(geometry.unit_square(), h)
        x, y = mesh.vertices.T
        exact = np.sin(np.pi * x) * np.sin(np.pi * y)
        K = fem.assemble_stiffness(mesh)
        M = fem.assemble_mass(mesh)
        rhs = 2 * np.pi ** 2 * (M @ exact)
        u = fem.solve_dirichlet(K, rhs, mesh)
        errs.append(np.abs(u - exact).max())
    assert errs[0] / errs[1] > 3.0


def test_power_load_and_weighted_mass_consistency(disk_mesh):
    # directional derivative of the load F(u) = int u^p phi is B(u) = p u^(p-1)
    rng = np.random.default_rng(1)
    u = 1.0 + 0.1 * rng.random(disk_mesh.n_vertices)
    v = rng.standard_normal(disk_mesh.n_vertices)
    p = 3.0
    t = 1e-6
    F_plus = fem.assemble_power_load(disk_mesh, u + t * v, p)
    F_minus = fem.assemble_power_load(disk_mesh, u - t * v, p)
    fd = (F_plus - F_minus) / (2 * t)
    B = fem.assemble_weighted_mass_power(disk_mesh, u, p)
    assert np.abs(fd - B @ v).max() < 1e-6 * np.abs(fd).max()


def test_power_weight_clips_negative_part(disk_mesh):
    u = np.full(disk_mesh.n_vertices, -1.0)
    wq = fem.power_weight_at_quad(disk_mesh, u, 2.5)
    assert (wq == 0.0).all()


def test_dirichlet_solver_boundary_values(disk_mesh):
    K = fem.assemble_stiffness(disk_mesh)
    ds = fem.DirichletSolver(K, disk_mesh)
    # harmonic extension of g(x) = x1: the solution is x1 itself
    g = disk_mesh.vertices[:, 0].copy()
    u = ds.solve(np.zeros(disk_mesh.n_vertices),
                 boundary_values=g[disk_mesh.boundary_vertex])
    assert np.abs(u - g).max() < 1e-10


def test_eigen_lowest_dirichlet_mode():
    # smallest eigenvalue of -Delta on the unit square is 2 pi^2
    import scipy.sparse.linalg as spla

    mesh = build_mesh(geometry.unit_square(), 0.05)
    K = fem.assemble_stiffness(mesh).tocsc()
    M = fem.assemble_mass(mesh).tocsc()
    i = np.nonzero(~mesh.boundary_vertex)[0]
    lam = spla.eigsh(K[np.ix_(i, i)], k=1, M=M[np.ix_(i, i)],
                     sigma=0.0, which="LM", return_eigenvectors=False)
    assert lam[0] == pytest.approx(2 * math.pi ** 2, rel=1e-2)
    assert lam[0] >= 2 * math.pi ** 2  # conforming Galerkin bounds from above
