"""Spectrum of the linearized operator: K v = lambda B v, B = p u^(p-1) mass.

The pencil is symmetric with K positive definite (after Dirichlet
elimination) and B semidefinite -- the weight p u^(p-1) is tiny away
from the spike and vanishes at the boundary.  Shift-invert on B is
therefore ill-posed; instead the *largest* eigenvalues mu of K^-1 B are
computed by Lanczos in the K-inner product and inverted, lambda = 1/mu.

Because B and the Newton load use the same quadrature, u itself is a
discrete eigenfield: K u = F(u) = (1/p) B u exactly, so lambda_1 = 1/p
to solver precision -- a sharp internal consistency check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import EigenFailure, WeightDegenerate
from .fem import (_QW, _geometry, assemble_stiffness,
                  assemble_weighted_mass_power, interpolate_at_quad,
                  power_weight_at_quad, quad_points)
from .lane_emden import Solution

_DENSE_LIMIT = 800


@dataclass
class SpectrumReport:
    """First eigenvalues/eigenfields of the linearized pencil at one p."""

    p: float
    eigenvalues: np.ndarray          # (k,) ascending
    eigenfields: np.ndarray          # (n, k), B-orthonormal, zero on boundary
    eigenfields_max: np.ndarray      # (n, k), max-norm 1 (for profile fits)
    degeneracy_band: float
    morse: int                       # count lambda < 1 - band
    augmented: int                   # count lambda <= 1 + band
    near_degenerate: np.ndarray      # (k,) bool, |lambda - 1| <= band
    residuals: np.ndarray            # (k,) relative pencil residuals
    mesh_id: str

    def to_json(self) -> str:
        return json.dumps({
            "p": self.p,
            "eigenvalues": self.eigenvalues.tolist(),
            "degeneracy_band": self.degeneracy_band,
            "morse": self.morse,
            "augmented": self.augmented,
            "near_degenerate": self.near_degenerate.tolist(),
            "residuals": self.residuals.tolist(),
            "mesh_id": self.mesh_id,
        }, indent=2)


def _weight_degeneracy_check(mesh, u, p):
    wq = power_weight_at_quad(mesh, u, p - 1.0)
    area, _ = _geometry(mesh)
    zero_frac = float(((wq == 0.0) * _QW).sum(axis=1) @ area / area.sum())
    if zero_frac > 0.999:
        raise WeightDegenerate(
            f"p u^(p-1) underflows on {100 * zero_frac:.2f}% of the domain; "
            "mesh too coarse near the spike")


def linearized_spectrum(sol: Solution, k_count: int = 6,
                        delta: float | None = None,
                        dense: bool | None = None) -> SpectrumReport:
    """Smallest k_count eigenvalues of K v = lambda B v on sol's mesh.

    ``dense`` forces (or forbids) a full generalized eigensolve; by
    default dense is used below 800 interior dofs, Lanczos above.  The
    band delta defaults to 10/p^2, wide enough to contain the
    exponentially small splitting lambda_{2,3} - 1 ~ eps^2 and narrow
    enough to exclude lambda_4 - 1 ~ 6/p.
    """
    mesh = sol.mesh
    p = sol.p
    if delta is None:
        delta = 10.0 / p ** 2
    _weight_degeneracy_check(mesh, sol.u, p)

    K = assemble_stiffness(mesh)
    B = assemble_weighted_mass_power(mesh, sol.u, p)
    interior = np.nonzero(~mesh.boundary_vertex)[0]
    K_ii = K.tocsc()[interior][:, interior]
    B_ii = B.tocsc()[interior][:, interior]
    n_i = len(interior)
    if k_count >= n_i:
        raise EigenFailure(f"k_count={k_count} >= {n_i} interior dofs")
    if dense is None:
        dense = n_i <= _DENSE_LIMIT

    if dense:
        mu, W = scipy.linalg.eigh(B_ii.toarray(), K_ii.toarray())
        mu, W = mu[::-1][:k_count], W[:, ::-1][:, :k_count]
    else:
        lu = spla.splu(K_ii)
        Minv = spla.LinearOperator((n_i, n_i), matvec=lu.solve)
        try:
            mu, W = spla.eigsh(B_ii, k=k_count, M=K_ii, Minv=Minv,
                               which="LM", v0=np.ones(n_i))
        except spla.ArpackNoConvergence as exc:
            raise EigenFailure(f"Lanczos stagnated: {exc}") from exc
        mu, W = mu[::-1], W[:, ::-1]
    if np.any(mu <= 0):
        raise EigenFailure("non-positive Rayleigh quotient in leading block; "
                           "weight likely degenerate")
    lam = 1.0 / mu

    # B-orthonormalize (K-orthonormal vectors give V^t B V = diag(1/lambda);
    # the symmetric inverse square root also cleans degenerate clusters)
    G = W.T @ (B_ii @ W)
    d, Q = np.linalg.eigh(G)
    if d.min() <= 0:
        raise EigenFailure("B-Gram matrix not positive definite")
    W = W @ (Q / np.sqrt(d)) @ Q.T

    res = np.empty(k_count)
    for j in range(k_count):
        kv = K_ii @ W[:, j]
        res[j] = (np.linalg.norm(kv - lam[j] * (B_ii @ W[:, j]))
                  / np.linalg.norm(kv))
    if res.max() > 1e-8:
        raise EigenFailure(f"pencil residual {res.max():.2e} exceeds 1e-8")

    V = np.zeros((mesh.n_vertices, k_count))
    V[interior] = W
    Vmax = V.copy()
    for j in range(k_count):
        i_pk = int(np.argmax(np.abs(V[:, j])))
        Vmax[:, j] /= V[i_pk, j]

    near = np.abs(lam - 1.0) <= delta
    m = int(np.count_nonzero(lam < 1.0 - delta))
    m0 = int(np.count_nonzero(lam <= 1.0 + delta))
    return SpectrumReport(p=p, eigenvalues=lam, eigenfields=V,
                          eigenfields_max=Vmax, degeneracy_band=delta,
                          morse=m, augmented=m0, near_degenerate=near,
                          residuals=res, mesh_id=sol.mesh_id)


def morse_index(report: SpectrumReport) -> tuple[int, int]:
    """(m, m0): eigenvalues below 1 - band, and at or below 1 + band."""
    lam = np.asarray(report.eigenvalues)
    band = report.degeneracy_band
    return (int(np.count_nonzero(lam < 1.0 - band)),
            int(np.count_nonzero(lam <= 1.0 + band)))


def _boundary_flux(mesh, defect: np.ndarray):
    """Nodal normal derivative on the boundary from the discrete defect.

    For a field w with K w - rhs = defect supported on boundary rows,
    defect_b approximates int dw/dnu phi_b dsigma, so dividing by the
    lumped edge length recovers dw/dnu at the boundary nodes.
    """
    edges, _, lengths = mesh.boundary_edges()
    n_b = int(mesh.boundary_vertex.sum())
    ell = np.zeros(mesh.n_vertices)
    np.add.at(ell, edges.ravel(), np.repeat(lengths, 2) / 2)
    bidx = np.nonzero(mesh.boundary_vertex)[0]
    return bidx, defect[bidx] / ell[bidx], n_b


def pohozaev_residual(sol: Solution, report: SpectrumReport, i: int,
                      y) -> tuple[float, float, float]:
    """Check the Pohozaev-type identity for the i-th eigenpair (1-based).

    boundary side:  int_bdry (x - y).grad(u) dv_i/dnu dsigma
    interior side:  (1 - lambda_i) p int u^(p-1) v_i
                    ((x - y).grad(u) + 2 u/(p-1)) dx

    Both boundary fluxes come from the discrete defects (K u - F and
    K v - lambda B v restricted to boundary rows), which is the natural
    flux the Galerkin solution conserves; the interior side uses the
    order-4 quadrature of the assembly.  Returns (lhs, rhs, rel) with
    rel = |lhs - rhs| / (|lhs| + |rhs| + machine epsilon).
    """
    if not 1 <= i <= len(report.eigenvalues):
        raise IndexError(f"eigenpair index {i} out of range")
    y = np.asarray(y, float)
    mesh = sol.mesh
    p, u = sol.p, sol.u
    lam = float(report.eigenvalues[i - 1])
    v = report.eigenfields[:, i - 1]

    from .fem import assemble_power_load, assemble_weighted_mass_power as awm
    K = assemble_stiffness(mesh)
    F = assemble_power_load(mesh, u, p)
    B = awm(mesh, u, p)
    bidx, flux_u, _ = _boundary_flux(mesh, K @ u - F)
    _, flux_v, _ = _boundary_flux(mesh, K @ v - lam * (B @ v))

    edges, normals, lengths = mesh.boundary_edges()
    # nodal outward normals (edge-length weighted) and trapezoid weights
    nrm = np.zeros((mesh.n_vertices, 2))
    np.add.at(nrm, edges.ravel(),
              np.repeat(normals * lengths[:, None], 2, axis=0))
    nrm = nrm[bidx]
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    ell = np.zeros(mesh.n_vertices)
    np.add.at(ell, edges.ravel(), np.repeat(lengths, 2) / 2)
    # on the boundary grad(u) = (du/dnu) nu, since u vanishes there
    moment = ((mesh.vertices[bidx] - y) * nrm).sum(axis=1)
    lhs = float((moment * flux_u * flux_v * ell[bidx]).sum())

    area, g = _geometry(mesh)
    wq = power_weight_at_quad(mesh, u, p - 1.0)     # (m, 6)
    vq = interpolate_at_quad(mesh, v)
    uq = interpolate_at_quad(mesh, u)
    grad_u = np.einsum("tkd,tk->td", g, u[mesh.triangles])
    xq = quad_points(mesh)                           # (m, 6, 2)
    pull = np.einsum("tqd,td->tq", xq - y, grad_u)
    integrand = wq * vq * (pull + 2.0 / (p - 1.0) * uq)
    rhs = float((1.0 - lam) * p
                * (area @ (integrand @ _QW)))
    rel = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + np.finfo(float).eps)
    return lhs, rhs, rel
