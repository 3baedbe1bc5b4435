"""Nonlinear solver, continuation and spike descriptors."""

import math

import numpy as np
import pytest

from spikelab import fem, geometry, lane_emden
from spikelab.errors import PositivityLost
from spikelab.geometry import build_mesh
from spikelab.lane_emden import (continuation_sweep, detect_peaks,
                                 energy_functional, liouville_guess,
                                 newton_solve, rescale_solution, spike_scale)

SQRT_E = math.sqrt(math.e)


@pytest.fixture(scope="module")
def coarse_disk():
    return build_mesh(geometry.unit_disk(), 0.08)


@pytest.fixture(scope="module")
def sol_p3(coarse_disk):
    guess = liouville_guess(coarse_disk, 3.0, np.zeros(2))
    return newton_solve(coarse_disk, 3.0, guess)


def test_newton_p3_converges(sol_p3):
    assert sol_p3.residual_norm < 1e-9
    assert sol_p3.u_max > 1.0
    assert (sol_p3.u >= 0).all()
    assert (sol_p3.u[sol_p3.mesh.boundary_vertex] == 0).all()


def test_solution_is_discrete_fixed_point(sol_p3):
    # re-solving from the solution itself returns it unchanged
    again = newton_solve(sol_p3.mesh, 3.0, sol_p3.u.copy())
    assert np.abs(again.u - sol_p3.u).max() < 1e-9
    assert again.newton_iters <= 2


def test_variational_gradient(sol_p3):
    # the discrete residual K u - F(u) vanishes on interior nodes
    mesh = sol_p3.mesh
    K = fem.assemble_stiffness(mesh)
    F = fem.assemble_power_load(mesh, sol_p3.u, 3.0)
    r = (K @ sol_p3.u - F)[~mesh.boundary_vertex]
    assert np.abs(r).max() < 1e-9


def test_energy_identity(sol_p3):
    # p ||grad u||^2 = p int u^(p+1) at a discrete critical point
    mesh = sol_p3.mesh
    K = fem.assemble_stiffness(mesh)
    dirichlet = sol_p3.p * float(sol_p3.u @ (K @ sol_p3.u))
    F = fem.assemble_power_load(mesh, sol_p3.u, 3.0)
    mass = sol_p3.p * float(sol_p3.u @ F)
    assert abs(dirichlet - mass) <= 1e-8 * abs(dirichlet)
    assert sol_p3.energy == pytest.approx(dirichlet, rel=1e-12)
    # at a critical point J(u) = (1/2 - 1/(p+1)) int |grad u|^2
    J = energy_functional(mesh, sol_p3.u, 3.0)
    assert J == pytest.approx((0.5 - 0.25) * dirichlet / sol_p3.p, rel=1e-9)


def test_eps_consistency(sol_p3):
    assert sol_p3.eps_n == pytest.approx(
        spike_scale(sol_p3.p, sol_p3.u_max), rel=1e-12)


def test_zero_guess_loses_positivity(coarse_disk):
    with pytest.raises(PositivityLost):
        newton_solve(coarse_disk, 3.0, np.zeros(coarse_disk.n_vertices))


def test_liouville_guess_shape(coarse_disk):
    g = liouville_guess(coarse_disk, 10.0, np.zeros(2))
    assert g.max() == pytest.approx(SQRT_E, rel=1e-2)
    assert (g[coarse_disk.boundary_vertex] == 0).all()
    assert g.min() >= 0


def test_solve_at_matches_oracle(fem_solution, radial_profile):
    sol = fem_solution("disk", 20.0)
    prof = radial_profile(20.0)
    assert abs(sol.u_max - prof.u0) <= 0.01 * prof.u0
    assert np.linalg.norm(sol.x_n) < 0.05
    assert sol.residual_norm < 1e-9


def test_detect_peaks_single_spike(fem_solution):
    sol = fem_solution("disk", 20.0)
    peaks = detect_peaks(sol)
    assert len(peaks) == 1
    assert np.linalg.norm(np.asarray(peaks[0]) - sol.x_n) < 1e-12


def test_rescale_solution_bubble(fem_solution):
    sol = fem_solution("disk", 40.0)
    axis, W = rescale_solution(sol, R=8.0, grid_n=65)
    X, Y = np.meshgrid(axis, axis)
    U = -2.0 * np.log1p((X ** 2 + Y ** 2) / 8.0)
    mask = X ** 2 + Y ** 2 <= 25.0
    assert abs(W[32, 32]) < 1e-8  # w(0) = 0 by construction
    assert np.abs(W - U)[mask].max() <= 0.25


def test_continuation_disk(disk_sweep, radial_profile):
    sols = disk_sweep.solutions
    assert [s.p for s in sols] == [5.0, 10.0, 20.0]
    # u_max tracks the radial oracle and approaches sqrt(e) monotonically
    for s in sols:
        assert abs(s.u_max - radial_profile(s.p).u0) <= 0.01 * s.u_max
    gaps = [abs(s.u_max - SQRT_E) for s in sols]
    assert gaps == sorted(gaps, reverse=True)
    assert all(s.residual_norm < 1e-9 for s in sols)
    assert all(len(detect_peaks(s)) == 1 for s in sols)
    # internal steps never exceed the 30% eps-drop cap
    assert max(disk_sweep.steps) <= -4.0 * math.log(0.7) + 1e-12


def test_continuation_square(square_sweep):
    for s in square_sweep.solutions:
        assert np.linalg.norm(s.x_n - [0.5, 0.5]) <= 0.2  # within 2 h
        assert s.residual_norm < 1e-9


def test_continuation_input_validation():
    disk = geometry.unit_disk()
    assert continuation_sweep(disk, []).solutions == []
    with pytest.raises(ValueError):
        continuation_sweep(disk, [5.0, 5.0])
    with pytest.raises(ValueError):
        continuation_sweep(disk, [10.0, 5.0])


def test_solution_json(sol_p3):
    import json

    d = json.loads(sol_p3.to_json())
    assert d["p"] == 3.0
    assert len(d["u"]) == sol_p3.mesh.n_vertices
