"""High-accuracy radial oracle on the unit disk.

The positive solution of -u'' - u'/r = u^p, u'(0)=0, u(1)=0 is radial and
unique; it is computed here by shooting on the peak height u0.  All
integration is done in the log-radius variable t = log r, where the spike
occupies an O(1) window around log(eps) and adaptive stepping is cheap:

    u_tt = -exp(2t) * max(u, 0)^p,    t in (-inf, 0].

The angular-mode spectrum of the linearized operator is obtained from a
finite-difference generalized eigensolve on a uniform t grid, with one
Richardson level in the grid spacing.  The m=1 ground eigenvalue sits a
distance O(eps^2) above 1 and is additionally available through a
cancellation-free quasi-mode quotient that stays accurate long after
eps^2 underflows the eigensolver's resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import EigenFailure, OutsideDisk, ShootingFailed

SQRT_E = math.sqrt(math.e)


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------

def _pow_pos(u: float, p: float) -> float:
    return math.exp(p * math.log(u)) if u > 0 else 0.0


def _integrate(u0: float, p: float, rtol: float, n_samples: int | None = None):
    """Integrate from the r=0 series to r=1; returns (u(1), solution or samples).

    State: [u, u_t, int u_t^2 dt] so the Dirichlet energy accumulates with
    the same accuracy as the profile.
    """
    eps0 = 1.0 / math.sqrt(p * _pow_pos(u0, p - 1.0))
    r_min = 1e-5 * eps0
    t0, t1 = math.log(r_min), 0.0
    a = -_pow_pos(u0, p) / 4.0
    u_start = u0 + a * r_min ** 2
    ut_start = 2 * a * r_min ** 2
    e_start = a * a * r_min ** 4  # int_{-inf}^{t0} (2 a r^2)^2 dt

    def rhs(t, y):
        u, ut, _ = y
        return (ut, -math.exp(2 * t) * _pow_pos(u, p), ut * ut)

    t_eval = np.linspace(t0, t1, n_samples) if n_samples else None
    sol = solve_ivp(rhs, (t0, t1), [u_start, ut_start, e_start],
                    method="DOP853", rtol=rtol, atol=1e-14, t_eval=t_eval,
                    dense_output=False)
    if not sol.success:  # pragma: no cover - integrator failure
        raise ShootingFailed(sol.message)
    return sol.y[0, -1], sol


@dataclass
class RadialProfile:
    """Shooting solution of the radial problem at exponent p."""

    p: float
    u0: float
    t: np.ndarray          # log-radius sample grid
    u: np.ndarray          # u(e^t)
    u_t: np.ndarray        # du/dt (= r u'(r))
    energy: float          # p * int |grad u|^2 = 2 pi p int u_t^2 dt
    shoot_residual: float

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.t)

    @property
    def sup_norm(self) -> float:
        return self.u0

    @property
    def eps(self) -> float:
        return 1.0 / math.sqrt(self.p * _pow_pos(self.u0, self.p - 1.0))

    def u_prime(self) -> np.ndarray:
        return self.u_t / self.r

    def interp_u(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, float)
        out = np.interp(np.log(np.maximum(r, np.exp(self.t[0]))), self.t, self.u)
        return np.where(r < np.exp(self.t[0]), self.u0, out)

    def rescaled(self, y: np.ndarray) -> np.ndarray:
        """w(y) = p (u(eps |y|)/u0 - 1) on radii |y| (the spike profile)."""
        return self.p * (self.interp_u(self.eps * np.abs(y)) / self.u0 - 1.0)


def shoot_radial(p: float, tol: float = 1e-10, grid_n: int = 8000,
                 rtol: float = 1e-12) -> RadialProfile:
    """Shooting solve; bracket u0 in (1, 2), bisection via brentq.

    ``grid_n`` controls only the sample grid handed to downstream
    consumers; the shooting itself is controlled by ``rtol``.
    """
    if p <= 1:
        raise ValueError("exponent must exceed 1")
    if p > 200:
        raise ValueError("oracle capped at p = 200 (eps underflows beyond)")

    def resid(u0):
        return _integrate(u0, p, rtol)[0]

    # default bracket (1, 2) covers the large-p spike regime; for small p
    # the peak is higher and the bracket is widened geometrically
    lo, hi = 1.0 + 1e-9, 2.0
    flo, fhi = resid(lo), resid(hi)
    while flo > 0 and fhi > 0 and hi < 1e3:
        lo, flo = hi, fhi
        hi *= 2.0
        fhi = resid(hi)
    if not (flo > 0 > fhi):
        raise ShootingFailed(
            f"no bracket for p={p}: resid({lo})={flo}, resid({hi})={fhi}")
    u0 = brentq(resid, lo, hi, xtol=1e-15, rtol=8.9e-16)
    u1, sol = _integrate(u0, p, rtol, n_samples=grid_n)
    if abs(u1) > tol:
        raise ShootingFailed(f"|u(1)| = {abs(u1)} exceeds tol {tol}")
    u = np.maximum(sol.y[0], 0.0)
    u[-1] = 0.0
    return RadialProfile(p=p, u0=u0, t=sol.t, u=u, u_t=sol.y[1],
                         energy=2 * math.pi * p * sol.y[2, -1],
                         shoot_residual=abs(u1))


# ---------------------------------------------------------------------------
# angular-mode spectrum
# ---------------------------------------------------------------------------

def _mode_matrices(profile: RadialProfile, m: int, n: int):
    """FD pencil (A, B) for mode m on a uniform t grid with n interior pts.

    In t = log r the mode-m operator is -d^2/dt^2 + m^2 with weight
    p u^{p-1} e^{2t}; boundary conditions: u ~ r^m regularity at the left
    end (phi_t = m phi), Dirichlet at t = 0.
    """
    p = profile.p
    t0 = profile.t[0]
    # unknowns at t_0 .. t_{n-1}; t_n = 0 is the Dirichlet end
    t = np.linspace(t0, 0.0, n + 1)
    h = t[1] - t[0]
    ti = t[:-1]
    u = np.maximum(CubicSpline(profile.t, profile.u)(ti), 0.0)
    with np.errstate(divide="ignore"):
        logu = np.where(u > 0, np.log(np.maximum(u, 1e-300)), -np.inf)
    w = p * np.exp(np.clip((p - 1) * logu, -745, 700)) * np.exp(2 * ti)
    w[u <= 0] = 0.0
    main = np.full(n, 2.0 / h ** 2 + m * m)
    off = np.full(n - 1, -1.0 / h ** 2)
    # left closure: regular solution behaves like e^{m t}; eliminate the
    # ghost node via phi_{-1} = phi_1 - 2 h m phi_0 and scale row 0 by 1/2
    # to keep the pencil symmetric.
    main[0] = (1.0 + h * m) / h ** 2 + m * m / 2.0
    wts = np.ones(n)
    wts[0] = 0.5
    A = sp.diags([off, main, off], [-1, 0, 1], format="csc")
    B = sp.diags(wts * w, format="csc")
    return A, B


def _mode_eigs(profile: RadialProfile, m: int, count: int, n: int) -> np.ndarray:
    A, B = _mode_matrices(profile, m, n)
    try:
        mu = spla.eigsh(B, k=count, M=A.tocsc(), which="LM",
                        return_eigenvectors=False, tol=0)
    except Exception as exc:
        raise EigenFailure(f"mode {m} eigensolve failed: {exc}") from exc
    lam = np.sort(1.0 / mu[mu > 0])
    if len(lam) < count:
        raise EigenFailure(f"mode {m}: fewer than {count} positive eigenvalues")
    return lam[:count]


def radial_spectrum(profile: RadialProfile, modes=(0, 1, 2),
                    count_per_mode: int = 2, grid_n: int = 6000):
    """Merged sorted eigenvalue list; m>=1 eigenvalues appear twice.

    One Richardson level in the grid spacing removes the O(h^2) FD error.
    Returns (merged eigenvalues, dict mode -> eigenvalues).
    """
    per_mode = {}
    merged = []
    for m in modes:
        lam_c = _mode_eigs(profile, m, count_per_mode, grid_n // 2)
        lam_f = _mode_eigs(profile, m, count_per_mode, grid_n)
        lam = (4 * lam_f - lam_c) / 3
        per_mode[m] = lam
        mult = 1 if m == 0 else 2
        for v in lam:
            merged.extend([v] * mult)
    return np.sort(np.array(merged)), per_mode


def mode1_ground_shift(profile: RadialProfile) -> float:
    """lambda_2 - 1 via a cancellation-free quasi-mode Rayleigh quotient.

    g = -u' satisfies the m=1 equation with lambda = 1 but not the
    boundary condition; the corrected trial phi = g - g(1) r gives

        lambda - 1 = g(1) * int w phi r^2 dr / int w phi^2 r dr,

    (w = p u^{p-1}) with no subtractive cancellation, so the O(eps^2)
    shift is computable far below eigensolver resolution.
    """
    p = profile.p
    r = profile.r
    g = -profile.u_prime()
    g1 = g[-1]
    phi = g - g1 * r
    with np.errstate(divide="ignore"):
        logu = np.where(profile.u > 0, np.log(np.maximum(profile.u, 1e-300)),
                        -np.inf)
    w = p * np.exp(np.clip((p - 1) * logu, -745, 700))
    w[profile.u <= 0] = 0.0
    # integrate in t: dr = r dt
    dt = np.gradient(profile.t)
    num = g1 * np.sum(w * phi * r ** 3 * dt)
    den = np.sum(w * phi ** 2 * r ** 2 * dt)
    return num / den


# ---------------------------------------------------------------------------
# closed-form Robin data on the unit disk
# ---------------------------------------------------------------------------

def disk_robin(x):
    """Closed-form (R, grad R, Hessian) at x for the unit disk.

    R(x) = -(1/2pi) log(1 - |x|^2).
    """
    x = np.asarray(x, float)
    r2 = float(x @ x)
    if r2 >= 1.0:
        raise OutsideDisk(f"|x| = {math.sqrt(r2)} >= 1")
    s = 1.0 - r2
    R = -math.log(s) / (2 * math.pi)
    grad = x / (math.pi * s)
    hess = (np.eye(2) / s + 2.0 * np.outer(x, x) / s ** 2) / math.pi
    return R, grad, hess


def disk_green(x, y):
    """Closed-form Dirichlet Green function of the unit disk."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = np.linalg.norm(x - y)
    ry = np.linalg.norm(y)
    if ry < 1e-14:
        img = 1.0
    else:
        img = ry * np.linalg.norm(x - y / ry ** 2)
    return -math.log(d / img) / (2 * math.pi)
