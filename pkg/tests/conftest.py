"""Shared fixtures: expensive solves, spectra and Robin data, cached per session."""

import numpy as np
import pytest

from spikelab import geometry, green_robin, lane_emden, radial_oracle, spectral

DOMAINS = {
    "disk": geometry.unit_disk(),
    "square": geometry.unit_square(),
    "ellipse": geometry.ellipse(2.0, 1.0),
}


@pytest.fixture(scope="session")
def fem_solution():
    """Factory (domain_name, p) -> converged Solution, cached."""
    cache = {}

    def get(name, p):
        key = (name, float(p))
        if key not in cache:
            cache[key] = lane_emden.solve_at(DOMAINS[name], float(p))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def fine_shoulder_pair(fem_solution):
    """(Solution, SpectrumReport) on the disk at p = 40 with shoulder
    grading 0.08 instead of the default 0.25.

    The Pohozaev right-hand sides integrate u^(p-1) v_i grad(u), which
    amplifies eigenvector error accumulated on the bubble shoulder; the
    default grading leaves a y-dependent defect of a few percent there,
    the finer shoulder brings it to ~3e-3.
    """
    sol = fem_solution("disk", 40.0)
    mesh, _ = lane_emden.refine_spike(sol.mesh, sol.x_n, sol.eps_n,
                                          grading=0.08)
    guess = lane_emden.rescale_seed(sol, mesh, 40.0)
    fine = lane_emden.newton_solve_frame(mesh, 40.0, guess, sol.x_n)
    return fine, spectral.linearized_spectrum(fine, k_count=6)


@pytest.fixture(scope="session")
def fem_spectrum(fem_solution):
    """Factory (domain_name, p) -> SpectrumReport with k_count=6, cached."""
    cache = {}

    def get(name, p):
        key = (name, float(p))
        if key not in cache:
            cache[key] = spectral.linearized_spectrum(
                fem_solution(name, p), k_count=6)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def robin_data():
    """Factory (domain_name, h) -> RobinData, cached."""
    cache = {}

    def get(name, h=0.02):
        key = (name, float(h))
        if key not in cache:
            cache[key] = green_robin.robin_critical_point(DOMAINS[name], h=h)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def radial_profile():
    """Factory p -> RadialProfile, cached."""
    cache = {}

    def get(p):
        p = float(p)
        if p not in cache:
            cache[p] = radial_oracle.shoot_radial(p)
        return cache[p]

    return get


@pytest.fixture(scope="session")
def radial_eigs(radial_profile):
    """Factory p -> merged sorted oracle eigenvalue list, cached."""
    cache = {}

    def get(p):
        p = float(p)
        if p not in cache:
            lam, _ = radial_oracle.radial_spectrum(radial_profile(p))
            cache[p] = np.asarray(lam)
        return cache[p]

    return get


@pytest.fixture(scope="session")
def disk_sweep():
    """Continuation branch on the disk through p = 5, 10, 20."""
    return lane_emden.continuation_sweep(DOMAINS["disk"], [5.0, 10.0, 20.0])


@pytest.fixture(scope="session")
def square_sweep():
    """Continuation branch on the unit square through p = 5, 10, 20."""
    return lane_emden.continuation_sweep(DOMAINS["square"], [5.0, 10.0, 20.0])


def rescale_field(sol, field, R=8.0, grid_n=65):
    """Sample a nodal field at x_n + eps_n * y on a [-R, R]^2 grid.

    Returns (axis, samples) with samples[i, j] at y = (axis[j], axis[i]),
    matching the convention of lane_emden.rescale_solution.
    """
    import matplotlib.tri as mtri

    mesh = sol.mesh
    tri = mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1],
                             mesh.triangles)
    interp = mtri.LinearTriInterpolator(tri, field)
    axis = np.linspace(-R, R, grid_n)
    X, Y = np.meshgrid(axis, axis)
    W = interp(sol.x_n[0] + sol.eps_n * X, sol.x_n[1] + sol.eps_n * Y)
    return axis, np.ma.filled(W, np.nan)
