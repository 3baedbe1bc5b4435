"""Liouville closed forms, asymptotic predictions, and far-field checks.

Everything the limit p -> infinity pins down gets a quantitative check
here: the bubble profile U(y) = -2 log(1 + |y|^2/8) and its mass 8 pi,
the eigenvalue laws lambda_{2,3} = 1 + 24 pi eps^2 mu_{1,2} and
lambda_4 = 1 + 6/p, the energy/max-norm limits 8 pi e and sqrt(e), the
far field p u -> 8 pi sqrt(e) G(., x_inf), and the kernel structure of
the rescaled eigenfunctions (combinations of y_k/(8+|y|^2) and
(8-|y|^2)/(8+|y|^2)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import AnnulusEscapesDomain, InsufficientData, RankDeficient
from .green_robin import GreenSolver, RobinData
from .lane_emden import SQRT_E, Solution
from .spectral import SpectrumReport

EIGHT_PI_E = 8.0 * math.pi * math.e


def liouville_U(y) -> np.ndarray:
    """U(y) = -2 log(1 + |y|^2 / 8), the entire Liouville profile."""
    y = np.asarray(y, float)
    r2 = (y * y).sum(axis=-1)
    return -2.0 * np.log1p(r2 / 8.0)


def e_U_ball_integral(R: float) -> float:
    """int_{|y|<R} e^U dy = 8 pi R^2 / (8 + R^2); tends to 8 pi."""
    return 8.0 * math.pi * R * R / (8.0 + R * R)


# ---------------------------------------------------------------------------
# prediction report
# ---------------------------------------------------------------------------

@dataclass
class PredictionReport:
    """Asymptotic-law predictions at one p, next to computed values."""

    p: float
    lambda2_hat: float
    lambda3_hat: float
    lambda4_hat: float
    lambda2: float
    lambda3: float
    lambda4: float
    gap2: float
    gap3: float
    gap4: float
    energy_gap: float     # |p E - 8 pi e| / 8 pi e
    umax_gap: float       # |u_max - sqrt(e)|
    far_field_deviation: float | None = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def predict(sol: Solution, robin: RobinData,
            spectrum: SpectrumReport | None = None) -> PredictionReport:
    """lambda_{2,3} = 1 + 24 pi eps^2 mu_{1,2}, lambda_4 = 1 + 6/p.

    The computed counterparts (and relative gaps) are filled in when a
    spectrum is supplied, NaN otherwise.
    """
    eps2 = sol.eps_n ** 2
    hats = (1.0 + 24.0 * math.pi * eps2 * robin.mu1,
            1.0 + 24.0 * math.pi * eps2 * robin.mu2,
            1.0 + 6.0 / sol.p)
    lam = [math.nan] * 3
    if spectrum is not None:
        lam = [float(spectrum.eigenvalues[i]) for i in (1, 2, 3)]
    gaps = [abs(l - h) / abs(h) for l, h in zip(lam, hats)]
    return PredictionReport(
        p=sol.p,
        lambda2_hat=hats[0], lambda3_hat=hats[1], lambda4_hat=hats[2],
        lambda2=lam[0], lambda3=lam[1], lambda4=lam[2],
        gap2=gaps[0], gap3=gaps[1], gap4=gaps[2],
        energy_gap=abs(sol.energy - EIGHT_PI_E) / EIGHT_PI_E,
        umax_gap=abs(sol.u_max - SQRT_E))


# ---------------------------------------------------------------------------
# kernel fits of rescaled eigenfunctions
# ---------------------------------------------------------------------------

@dataclass
class KernelFit:
    """Least-squares coefficients on the 3-dim kernel of the limit problem."""

    a1: float
    a2: float
    b: float
    rel_residual: float


def kernel_basis(y: np.ndarray) -> np.ndarray:
    """Columns y_1/(8+|y|^2), y_2/(8+|y|^2), (8-|y|^2)/(8+|y|^2)."""
    y = np.asarray(y, float).reshape(-1, 2)
    r2 = (y * y).sum(axis=1)
    den = 8.0 + r2
    return np.column_stack([y[:, 0] / den, y[:, 1] / den, (8.0 - r2) / den])


def fit_kernel(axis: np.ndarray, samples: np.ndarray,
               R_fit: float = 5.0) -> KernelFit:
    """Project grid samples w(y) onto the kernel basis over |y| <= R_fit.

    ``axis`` is the 1-d grid of the samples (samples[i, j] taken at
    y = (axis[j], axis[i]), the convention of ``rescale_solution``).
    """
    axis = np.asarray(axis, float)
    samples = np.asarray(samples, float)
    X, Y = np.meshgrid(axis, axis)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    vals = samples.ravel()
    keep = ((pts * pts).sum(axis=1) <= R_fit * R_fit) & np.isfinite(vals)
    if keep.sum() < 12:
        raise RankDeficient(f"only {keep.sum()} samples inside |y|<={R_fit}")
    A = kernel_basis(pts[keep])
    w = vals[keep]
    coef, _, rank, _ = np.linalg.lstsq(A, w, rcond=None)
    if rank < 3:
        raise RankDeficient("kernel basis is rank deficient on this grid")
    resid = np.linalg.norm(A @ coef - w)
    denom = max(np.linalg.norm(w), 1e-300)
    return KernelFit(a1=float(coef[0]), a2=float(coef[1]), b=float(coef[2]),
                     rel_residual=float(min(resid / denom, 1.0)))


# ---------------------------------------------------------------------------
# far field
# ---------------------------------------------------------------------------

@dataclass
class FarFieldReport:
    p: float
    r_inner: float
    r_outer: float
    u_deviation: float
    v4_deviation: float | None = None
    v23_deviation: float | None = None


def far_field_check(sol: Solution, x_inf=None,
                    spectrum: SpectrumReport | None = None,
                    inner: float = 0.25, outer: float = 0.45,
                    solver: GreenSolver | None = None) -> FarFieldReport:
    """Compare p u / (8 pi sqrt(e)) with G(., x_inf) on an annulus.

    The annulus (inner, outer) * diam around x_inf dodges the spike on
    one side and the boundary-layer flux error on the other.  With a
    spectrum, the far fields of v_4 (against G, scalar fitted) and of
    v_2 (against a . grad_y G, 2-vector fitted) are also reported as
    shape deviations: sup |field - fit| / sup |fit| over the annulus.
    """
    mesh = sol.mesh
    x_inf = sol.x_n if x_inf is None else np.asarray(x_inf, float)
    diam = mesh.domain.diameter if mesh.domain is not None else (
        np.ptp(mesh.vertices, axis=0).max())
    r_in, r_out = inner * diam, outer * diam
    b_dist = np.linalg.norm(mesh.vertices[mesh.boundary_vertex] - x_inf,
                            axis=1).min()
    if r_out >= b_dist:
        raise AnnulusEscapesDomain(
            f"outer radius {r_out:.3f} exceeds distance {b_dist:.3f} "
            "from x_inf to the boundary")

    gs = GreenSolver(mesh) if solver is None else solver
    G = gs.green_field(x_inf)
    r = np.linalg.norm(mesh.vertices - x_inf, axis=1)
    ring = (r >= r_in) & (r <= r_out)
    G_sup = np.abs(G[ring]).max()
    u_dev = float(np.abs(sol.p * sol.u[ring] / (8 * math.pi * SQRT_E)
                         - G[ring]).max() / G_sup)

    v4_dev = v23_dev = None
    if spectrum is not None and spectrum.eigenfields_max.shape[1] >= 4:
        v4 = spectrum.eigenfields_max[ring, 3]
        c = float(G[ring] @ v4 / (G[ring] @ G[ring]))
        v4_dev = float(np.abs(v4 - c * G[ring]).max() / (abs(c) * G_sup))
        # v2 against the dipole field: d/dy G(x, y) at y = x_inf, by
        # central differences in the source point
        h = 1e-3 * diam
        dG = np.column_stack([
            (gs.green_field(x_inf + [h, 0]) - gs.green_field(x_inf - [h, 0]))
            / (2 * h),
            (gs.green_field(x_inf + [0, h]) - gs.green_field(x_inf - [0, h]))
            / (2 * h)])[ring]
        v2 = spectrum.eigenfields_max[ring, 1]
        a, *_ = np.linalg.lstsq(dG, v2, rcond=None)
        fit = dG @ a
        v23_dev = float(np.abs(v2 - fit).max() / np.abs(fit).max())
    return FarFieldReport(p=sol.p, r_inner=r_in, r_outer=r_out,
                          u_deviation=u_dev, v4_deviation=v4_dev,
                          v23_deviation=v23_dev)


# ---------------------------------------------------------------------------
# extrapolation and the Morse sandwich
# ---------------------------------------------------------------------------

def extrapolate(p_values, values, model: str = "1/p") -> tuple[float, float]:
    """Fit values(p) and return (limit c0, rms fit residual).

    model "1/p":  c0 + c1/p, plus c2/p^2 when >= 4 points;
    model "log":  c0 + c1 log(p)/p + c2/p -- the p u_max and p E
    sequences carry a log(p)/p correction that a pure power fit
    misreads, so limits quoted against sqrt(e) / 8 pi e use this one.
    """
    p = np.asarray(list(p_values), float)
    v = np.asarray(list(values), float)
    if len(p) != len(v) or len(np.unique(p)) < 3:
        raise InsufficientData("need >= 3 values at distinct p")
    if model == "1/p":
        cols = [np.ones_like(p), 1.0 / p]
        if len(p) >= 4:
            cols.append(1.0 / p ** 2)
    elif model == "log":
        cols = [np.ones_like(p), np.log(p) / p, 1.0 / p]
    else:
        raise ValueError(f"unknown extrapolation model {model!r}")
    A = np.column_stack(cols)
    coef, _, rank, _ = np.linalg.lstsq(A, v, rcond=None)
    if rank < A.shape[1]:
        raise InsufficientData("degenerate p-grid for the requested model")
    resid = float(np.sqrt(np.mean((A @ coef - v) ** 2)))
    return float(coef[0]), resid


@dataclass
class SandwichVerdict:
    m_x: int          # Morse index of x_inf as a Robin critical point
    m0_x: int
    m: int            # discrete Morse numbers of the solution
    m0: int
    holds: bool

    def __str__(self):
        chain = (f"1+{self.m_x} <= {self.m} <= {self.m0} "
                 f"<= 1+{self.m0_x} <= 2")
        return f"sandwich {'holds' if self.holds else 'VIOLATED'}: {chain}"


def morse_sandwich_check(spectrum: SpectrumReport,
                         robin: RobinData) -> SandwichVerdict:
    """1 + m(x_inf) <= m <= m0 <= 1 + m0(x_inf) <= 2, with FD zero band."""
    tol = 1e-8 * abs(robin.mu2)
    mu = (robin.mu1, robin.mu2)
    m_x = sum(1 for v in mu if v < -tol)
    m0_x = sum(1 for v in mu if v <= tol)
    m, m0 = spectrum.morse, spectrum.augmented
    holds = (1 + m_x <= m <= m0 <= 1 + m0_x <= 2)
    return SandwichVerdict(m_x=m_x, m0_x=m0_x, m=m, m0=m0, holds=holds)
