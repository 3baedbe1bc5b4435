"""1-D shooting oracle: closed forms, Cauchy grid tests, eigenvalue laws."""

import math

import numpy as np
import pytest

from spikelab import radial_oracle
from spikelab.errors import OutsideDisk
from spikelab.radial_oracle import (disk_green, disk_robin,
                                    mode1_ground_shift, radial_spectrum,
                                    shoot_radial)

SQRT_E = math.sqrt(math.e)


def test_profile_basic(radial_profile):
    prof = radial_profile(20.0)
    assert prof.u0 == prof.sup_norm
    assert prof.u[0] == pytest.approx(prof.u0, rel=1e-10)
    assert abs(prof.interp_u(np.array([1.0]))[0]) < 1e-8
    assert (np.diff(prof.u) <= 1e-12).all()  # radially decreasing
    # eps consistency with the definition [p u0^(p-1)]^(-1/2)
    assert prof.eps == pytest.approx(
        (prof.p * prof.u0 ** (prof.p - 1)) ** -0.5, rel=1e-12)


def test_small_p_energy_identity(radial_profile):
    # p |grad u|^2 = p int u^(p+1) for the exact solution (Dirichlet pairing)
    prof = radial_profile(5.0)
    r = prof.r
    mass = prof.p * 2 * math.pi * np.trapezoid(
        prof.interp_u(r) ** (prof.p + 1) * r, r)
    assert prof.energy == pytest.approx(mass, rel=1e-5)


def test_grid_cauchy_u0(radial_profile):
    prof = radial_profile(40.0)
    prof_fine = shoot_radial(40.0, grid_n=16000)
    assert abs(prof.u0 - prof_fine.u0) <= 1e-8


def test_grid_cauchy_eigenvalues(radial_profile):
    lam_c, _ = radial_spectrum(radial_profile(20.0), grid_n=3000)
    lam_f, _ = radial_spectrum(radial_profile(20.0), grid_n=6000)
    assert np.abs(np.asarray(lam_c[:4]) - np.asarray(lam_f[:4])).max() <= 1e-7


@pytest.mark.parametrize("p", [20.0, 40.0, 80.0, 160.0])
def test_lambda1_is_inverse_p(radial_profile, radial_eigs, p):
    lam = radial_eigs(p)
    assert lam[0] * p == pytest.approx(1.0, abs=1e-8)


def test_lambda2_equals_lambda3(radial_eigs):
    lam = radial_eigs(40.0)
    assert lam[1] == lam[2]  # m = 1 reported with multiplicity two


def test_lambda4_law_at_160(radial_eigs):
    lam = radial_eigs(160.0)
    assert 160.0 * (lam[3] - 1.0) == pytest.approx(6.0, rel=0.10)


def test_mode1_shift_positive_and_small(radial_profile):
    prof = radial_profile(40.0)
    shift = mode1_ground_shift(prof)
    assert 0 < shift < 1e-6
    # the normalized shift sits near the limit constant 24
    assert shift / prof.eps ** 2 == pytest.approx(24.0, rel=0.15)


def test_umax_approaches_sqrt_e(radial_profile):
    gaps = [abs(radial_profile(p).u0 - SQRT_E) for p in (20.0, 160.0)]
    assert gaps[1] < gaps[0]
    assert gaps[1] < 2e-2


def test_rescaled_profile_near_bubble(radial_profile):
    prof = radial_profile(80.0)
    y = np.linspace(0.0, 5.0, 200)
    w = prof.rescaled(y)
    U = -2.0 * np.log1p(y ** 2 / 8.0)
    assert np.abs(w - U).max() <= 0.2


def test_disk_robin_closed_forms():
    R, g, H = disk_robin(np.zeros(2))
    assert R == 0.0
    assert np.allclose(g, 0.0)
    assert np.allclose(H, np.eye(2) / math.pi, atol=1e-12)
    R6, _, _ = disk_robin(np.array([0.6, 0.0]))
    assert R6 == pytest.approx(-math.log(0.64) / (2 * math.pi), rel=1e-12)
    with pytest.raises(OutsideDisk):
        disk_robin(np.array([1.1, 0.0]))


def test_disk_green_symmetry_and_boundary():
    x = np.array([0.3, 0.2])
    y = np.array([-0.4, 0.1])
    assert disk_green(x, y) == pytest.approx(disk_green(y, x), rel=1e-12)
    b = np.array([1.0, 0.0])
    assert abs(disk_green(b, y)) < 1e-12
