"""P1 finite elements: assembly, quadrature, Dirichlet solves.

Matrices are scipy CSR; nonlinear loads use a 6-point order-4 triangle
rule so that steep power nonlinearities are integrated consistently with
the weighted mass matrix (this consistency is what makes the first
eigenvalue of the linearized pencil exactly 1/p at the discrete level).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateTriangle, NegativeWeight, Overflow, SolveFailure
from .geometry import TriMesh

# 6-point, degree-4 triangle rule (barycentric points and weights, sum 1)
_QW = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_QB = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])


def _geometry(mesh: TriMesh):
    """Per-triangle areas and P1 gradients; raises on degenerate triangles."""
    c = mesh.tri_coords()
    d1 = c[:, 1] - c[:, 0]
    d2 = c[:, 2] - c[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = det / 2
    hmax2 = mesh.edge_lengths().max(axis=1) ** 2
    if (area <= 1e-14 * hmax2).any():
        raise DegenerateTriangle("triangle area below 1e-14 * h^2")
    # gradients of the three hat functions, shape (m, 3, 2)
    g = np.empty((len(c), 3, 2))
    g[:, 1, 0] = d2[:, 1] / det
    g[:, 1, 1] = -d2[:, 0] / det
    g[:, 2, 0] = -d1[:, 1] / det
    g[:, 2, 1] = d1[:, 0] / det
    g[:, 0] = -g[:, 1] - g[:, 2]
    return area, g


def _accumulate(mesh: TriMesh, local: np.ndarray) -> sp.csr_matrix:
    """Scatter (m, 3, 3) element matrices into a global CSR matrix."""
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)),
                      shape=(mesh.n_vertices, mesh.n_vertices))
    return A.tocsr()


def assemble_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    """Stiffness matrix of the Dirichlet Laplacian (no BCs applied yet)."""
    area, g = _geometry(mesh)
    local = np.einsum("tid,tjd,t->tij", g, g, area)
    return _accumulate(mesh, local)


def quad_points(mesh: TriMesh) -> np.ndarray:
    """(m, 6, 2) physical coordinates of the quadrature nodes."""
    return np.einsum("qk,tkd->tqd", _QB, mesh.tri_coords())


def interpolate_at_quad(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    """(m, 6) P1 interpolation of nodal values at quadrature nodes."""
    return np.einsum("qk,tk->tq", _QB, u[mesh.triangles])


def assemble_mass(mesh: TriMesh, weight: np.ndarray | None = None,
                  lumped: bool = False) -> sp.csr_matrix:
    """(Weighted) mass matrix; nodal weight interpolated at quad nodes."""
    area, _ = _geometry(mesh)
    if weight is None:
        wq = np.ones((mesh.n_triangles, len(_QW)))
    else:
        weight = np.asarray(weight, float)
        if (weight < 0).any():
            raise NegativeWeight("mass weight must be nonnegative")
        wq = interpolate_at_quad(mesh, weight)
    return _mass_from_quad_weight(mesh, area, wq, lumped)


def _mass_from_quad_weight(mesh, area, wq, lumped=False) -> sp.csr_matrix:
    # local_ij = sum_q w_q qw_q phi_i(q) phi_j(q) * area
    scaled = wq * _QW  # (m, 6)
    local = np.einsum("tq,qi,qj->tij", scaled, _QB, _QB) * area[:, None, None]
    if lumped:
        diag = local.sum(axis=2)
        local = np.zeros_like(local)
        local[:, np.arange(3), np.arange(3)] = diag
    return _accumulate(mesh, local)


def power_weight_at_quad(mesh: TriMesh, u: np.ndarray, expo: float) -> np.ndarray:
    """(m, 6) values of max(u, 0)^expo at quadrature nodes, in log space.

    The power is taken of the interpolated value; underflow below e^-700
    is flushed to zero so u -> 0 near the boundary never produces NaN.
    """
    uq = interpolate_at_quad(mesh, u)
    out = np.zeros_like(uq)
    pos = uq > 0
    logv = expo * np.log(uq[pos])
    vals = np.where(logv < -700, 0.0, np.exp(np.minimum(logv, 700.0)))
    if not np.isfinite(vals).all():
        raise Overflow("power nonlinearity overflowed")
    out[pos] = vals
    return out


def assemble_weighted_mass_power(mesh: TriMesh, u: np.ndarray,
                                 p: float) -> sp.csr_matrix:
    """Mass matrix weighted by p * u_+^(p-1), quadrature-consistent with
    :func:`assemble_power_load`."""
    area, _ = _geometry(mesh)
    wq = p * power_weight_at_quad(mesh, u, p - 1.0)
    return _mass_from_quad_weight(mesh, area, wq)


def assemble_power_load(mesh: TriMesh, u: np.ndarray, p: float) -> np.ndarray:
    """Load vector with entries int u_+^p phi_i dx (order-4 quadrature)."""
    if p <= 1:
        raise ValueError("exponent must exceed 1")
    area, _ = _geometry(mesh)
    fq = power_weight_at_quad(mesh, u, p)
    local = np.einsum("tq,q,qi->ti", fq, _QW, _QB) * area[:, None]
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.triangles.ravel(), local.ravel())
    return out


# ---------------------------------------------------------------------------
# Dirichlet elimination and solves
# ---------------------------------------------------------------------------

class DirichletSolver:
    """Holds the interior-block factorization of a symmetric operator."""

    def __init__(self, A: sp.spmatrix, mesh: TriMesh):
        self.mesh = mesh
        self.interior = np.nonzero(~mesh.boundary_vertex)[0]
        self.boundary = np.nonzero(mesh.boundary_vertex)[0]
        Ac = A.tocsc()
        self.A_ii = Ac[self.interior][:, self.interior]
        self.A_ib = Ac[self.interior][:, self.boundary]
        try:
            self.lu = spla.splu(self.A_ii.tocsc())
        except RuntimeError as exc:  # pragma: no cover - rare breakdown
            raise SolveFailure(str(exc)) from exc

    def solve(self, rhs_full: np.ndarray,
              boundary_values: np.ndarray | None = None) -> np.ndarray:
        """Solve with zero (or given) boundary values; returns a full field."""
        rhs = rhs_full[self.interior].astype(float)
        out = np.zeros(self.mesh.n_vertices)
        if boundary_values is not None:
            g = boundary_values
            rhs = rhs - self.A_ib @ g
            out[self.boundary] = g
        x = self.lu.solve(rhs)
        if not np.isfinite(x).all():
            raise SolveFailure("factorized solve returned non-finite values")
        out[self.interior] = x
        return out


def solve_dirichlet(K: sp.spmatrix, rhs: np.ndarray, mesh: TriMesh) -> np.ndarray:
    """One-shot homogeneous Dirichlet solve (boundary values exactly zero)."""
    return DirichletSolver(K, mesh).solve(rhs)
