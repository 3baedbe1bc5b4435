"""Green function, regular part, and the Robin-function landscape.

The Green function of -Delta with Dirichlet conditions splits as

    G(x, y) = -(1/2 pi) log|x - y| - H(x, y),

where H(., y) is harmonic with boundary data matching the log term.  The
Robin function R(x) = H(x, x) is the object of interest: its critical
point is where single-spike solutions concentrate, and the eigenvalues of
its Hessian enter the second/third eigenvalue expansion.

Everything here funnels through one stiffness factorization per mesh
(:class:`GreenSolver`); a Robin evaluation costs a single backsubstitution.
Normal derivatives of G on the boundary are computed as the analytic
normal derivative of the log term minus the recovered natural flux of the
discrete harmonic part, so the singularity never meets the linear solver.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import matplotlib.tri as mtri
from scipy.stats import qmc

from .errors import (MultipleCriticalPoints, NewtonDiverged,
                     PointTooCloseToBoundary)
from .fem import DirichletSolver, assemble_stiffness
from .geometry import DomainSpec, TriMesh, build_mesh

TWO_PI = 2.0 * np.pi


def _segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Distance from each point to the nearest of the segments [a_i, b_i]."""
    pts = np.atleast_2d(points)
    d = b - a                                    # (m, 2)
    l2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    w = pts[:, None, :] - a[None, :, :]          # (n, m, 2)
    s = np.clip(np.einsum("nmj,mj->nm", w, d) / l2, 0.0, 1.0)
    proj = a[None] + s[..., None] * d[None]
    return np.min(np.linalg.norm(pts[:, None, :] - proj, axis=2), axis=1)


class GreenSolver:
    """Factorized Dirichlet Laplacian on one mesh, Green/Robin evaluations.

    Parameters
    ----------
    mesh : TriMesh
        Mesh of the target domain.

    Notes
    -----
    ``regular_part`` solves the discrete harmonic extension of the log
    boundary data.  The boundary flux of any discrete field v is recovered
    from the stiffness residual: for a boundary node b, (K v - f)_b equals
    the integral of dv/dnu against the hat function of b, so dividing by
    half the length of the two adjacent boundary edges gives a nodal,
    second-order flux value.
    """

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        self.K = assemble_stiffness(mesh)
        self.solver = DirichletSolver(self.K, mesh)
        self.boundary = self.solver.boundary

        edges, normals, lengths = mesh.boundary_edges()
        self.bedges, self.bnormals, self.blengths = edges, normals, lengths
        nv = mesh.n_vertices
        ell = np.zeros(nv)
        nrm = np.zeros((nv, 2))
        for (a, b), n, l in zip(edges, normals, lengths):
            ell[a] += 0.5 * l
            ell[b] += 0.5 * l
            nrm[a] += l * n
            nrm[b] += l * n
        self.node_weight = ell
        with np.errstate(invalid="ignore", divide="ignore"):
            norms = np.linalg.norm(nrm, axis=1)
            self.node_normal = np.where(norms[:, None] > 0,
                                        nrm / np.maximum(norms, 1e-300)[:, None],
                                        0.0)
        self.h_boundary = float(np.max(lengths))
        self._tri = mtri.Triangulation(mesh.vertices[:, 0],
                                       mesh.vertices[:, 1], mesh.triangles)

    # -- basic fields -----------------------------------------------------

    def _check_interior(self, y: np.ndarray, margin: float | None = None):
        y = np.asarray(y, float)
        a = self.mesh.vertices[self.bedges[:, 0]]
        b = self.mesh.vertices[self.bedges[:, 1]]
        dist = _segment_distances(y[None], a, b)[0]
        need = 2.0 * self.h_boundary if margin is None else margin
        if dist < need:
            raise PointTooCloseToBoundary(
                f"point {y.tolist()} is {dist:.3g} from the boundary; "
                f"need at least {need:.3g}")
        return y

    def regular_part(self, y) -> np.ndarray:
        """Nodal values of H(., y), the harmonic regular part."""
        y = self._check_interior(y)
        xb = self.mesh.vertices[self.boundary]
        g = -np.log(np.linalg.norm(xb - y, axis=1)) / TWO_PI
        return self.solver.solve(np.zeros(self.mesh.n_vertices),
                                 boundary_values=g)

    def green_field(self, y) -> np.ndarray:
        """Nodal G(., y); singular if y coincides with a mesh vertex."""
        y = np.asarray(y, float)
        H = self.regular_part(y)
        r = np.linalg.norm(self.mesh.vertices - y, axis=1)
        with np.errstate(divide="ignore"):
            phi = -np.log(r) / TWO_PI
        return phi - H

    def interpolate(self, field: np.ndarray, x) -> float:
        x = np.asarray(x, float)
        val = mtri.LinearTriInterpolator(self._tri, field)(x[0], x[1])
        if np.ma.is_masked(val):
            raise PointTooCloseToBoundary(
                f"point {x.tolist()} is outside the mesh")
        return float(val)

    def robin(self, x) -> float:
        """R(x) = H(x, x).

        Evaluated with a C1 (cubic Hermite) interpolant: the piecewise-
        linear one has O(h^2) kinks across element edges, which finite
        differences of R amplify into spurious stationary points on
        domains with a flat Robin valley.
        """
        x = np.asarray(x, float)
        H = self.regular_part(x)
        val = mtri.CubicTriInterpolator(self._tri, H, kind="geom")(x[0], x[1])
        if np.ma.is_masked(val):
            raise PointTooCloseToBoundary(
                f"point {x.tolist()} is outside the mesh")
        return float(val)

    def boundary_flux(self, field: np.ndarray,
                      load: np.ndarray | None = None) -> np.ndarray:
        """Nodal outward normal derivative on the boundary (natural recovery)."""
        r = self.K @ field
        if load is not None:
            r = r - load
        return r[self.boundary] / self.node_weight[self.boundary]

    def green_normal_derivative(self, y) -> np.ndarray:
        """dG/dnu(., y) at the boundary nodes (analytic log part - H flux)."""
        y = np.asarray(y, float)
        H = self.regular_part(y)
        xb = self.mesh.vertices[self.boundary]
        d = xb - y
        grad_phi = -d / (TWO_PI * np.einsum("ij,ij->i", d, d))[:, None]
        dphi = np.einsum("ij,ij->i", grad_phi, self.node_normal[self.boundary])
        return dphi - self.boundary_flux(H)


def robin_value(mesh: TriMesh, x) -> float:
    """One-shot Robin-function evaluation (factorizes; prefer GreenSolver)."""
    return GreenSolver(mesh).robin(x)


# ---------------------------------------------------------------------------
# derivatives of R and the critical point
# ---------------------------------------------------------------------------

class _RobinSampler:
    """Caches R evaluations keyed by rounded coordinates."""

    def __init__(self, solver: GreenSolver):
        self.solver = solver
        self._cache: dict[tuple, float] = {}

    def __call__(self, x) -> float:
        key = (round(float(x[0]), 12), round(float(x[1]), 12))
        if key not in self._cache:
            self._cache[key] = self.solver.robin(np.asarray(key))
        return self._cache[key]


def _fd_grad(R, x, d):
    return np.array([(R(x + d * e) - R(x - d * e)) / (2 * d)
                     for e in (np.array([1.0, 0.0]), np.array([0.0, 1.0]))])


def _fd_hess(R, x, d):
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    r0 = R(x)
    h11 = (R(x + d * e1) - 2 * r0 + R(x - d * e1)) / d ** 2
    h22 = (R(x + d * e2) - 2 * r0 + R(x - d * e2)) / d ** 2
    h12 = (R(x + d * (e1 + e2)) - R(x + d * (e1 - e2))
           - R(x - d * (e1 - e2)) + R(x - d * (e1 + e2))) / (4 * d ** 2)
    return np.array([[h11, h12], [h12, h22]])


def robin_gradient(solver: GreenSolver, y, step: float | None = None,
                   richardson: bool = True) -> np.ndarray:
    """Central-difference gradient of R, one Richardson level by default."""
    R = _RobinSampler(solver)
    d = 1e-3 * solver.mesh.domain.diameter if step is None else step
    g = _fd_grad(R, np.asarray(y, float), d)
    if not richardson:
        return g
    g2 = _fd_grad(R, np.asarray(y, float), 2 * d)
    return (4 * g - g2) / 3


def robin_hessian(solver: GreenSolver, y, step: float | None = None,
                  richardson: bool = True) -> np.ndarray:
    d = 1e-3 * solver.mesh.domain.diameter if step is None else step
    R = _RobinSampler(solver)
    H = _fd_hess(R, np.asarray(y, float), d)
    if not richardson:
        return 0.5 * (H + H.T)
    H2 = _fd_hess(R, np.asarray(y, float), 2 * d)
    H = (4 * H - H2) / 3
    return 0.5 * (H + H.T)


@dataclass
class RobinData:
    """Robin-function landscape of a domain.

    mu1 <= mu2 are the eigenvalues of the Hessian of R at the critical
    point x_inf; for convex domains the critical point is the unique
    strict minimum and mu1 > 0.
    """

    domain: DomainSpec
    base_h: float
    grid: np.ndarray
    R_grid: np.ndarray
    x_inf: np.ndarray
    grad_R: np.ndarray
    hessian: np.ndarray
    mu1: float
    mu2: float
    laplacian_R: float
    R_at_x_inf: float
    seeds: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def to_json(self) -> str:
        d = {
            "domain": asdict(self.domain),
            "base_h": self.base_h,
            "grid": self.grid.tolist(),
            "R_grid": self.R_grid.tolist(),
            "x_inf": self.x_inf.tolist(),
            "grad_R": self.grad_R.tolist(),
            "hessian": self.hessian.tolist(),
            "mu1": self.mu1,
            "mu2": self.mu2,
            "laplacian_R": self.laplacian_R,
            "R_at_x_inf": self.R_at_x_inf,
            "seeds": self.seeds.tolist(),
        }
        return json.dumps(d, indent=1)

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["x", "y", "R"])
            for (x, y), r in zip(self.grid, self.R_grid):
                w.writerow([f"{x:.12g}", f"{y:.12g}", f"{r:.12g}"])


def _interior_grid(domain: DomainSpec, mesh: TriMesh, n: int = 21,
                   margin_frac: float = 0.1) -> np.ndarray:
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    pts = np.array([(x, y) for x in xs for y in ys])
    inside = domain.contains(pts)
    edges, _, _ = mesh.boundary_edges()
    a, b = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    dist = _segment_distances(pts, a, b)
    keep = inside & (dist >= margin_frac * domain.diameter)
    return pts[keep]


def _newton_critical(sampler_solver: GreenSolver, x0: np.ndarray,
                     step: float, tol: float, safe_dist: float,
                     max_iter: int = 40) -> np.ndarray:
    x = np.asarray(x0, float).copy()
    a = sampler_solver.mesh.vertices[sampler_solver.bedges[:, 0]]
    b = sampler_solver.mesh.vertices[sampler_solver.bedges[:, 1]]
    R = _RobinSampler(sampler_solver)

    def grad(x):
        # same Richardson-refined gradient that the report carries
        return (4 * _fd_grad(R, x, step) - _fd_grad(R, x, 2 * step)) / 3

    for _ in range(max_iter):
        g = grad(x)
        if np.linalg.norm(g) <= tol:
            return x
        H = _fd_hess(R, x, step)
        try:
            dx = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            dx = -g
        # keep the iterate safely inside; halve until it is
        for _ in range(30):
            xn = x + dx
            if (sampler_solver.mesh.domain.contains(xn[None])[0]
                    and _segment_distances(xn[None], a, b)[0] >= safe_dist):
                break
            dx *= 0.5
        else:
            raise NewtonDiverged("critical-point iterate pinned at boundary")
        if np.linalg.norm(dx) < 1e-14:
            return x
        x = xn
    g = grad(x)
    if np.linalg.norm(g) <= tol:
        return x
    raise NewtonDiverged(
        f"no critical point from seed {np.asarray(x0).tolist()}; "
        f"|grad R| = {np.linalg.norm(g):.3g}")


def _default_seeds(domain: DomainSpec, mesh: TriMesh, rng_seed: int):
    """Centroid plus four quasi-random interior points."""
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    sampler = qmc.Halton(d=2, seed=rng_seed)
    edges, _, _ = mesh.boundary_edges()
    a, b = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    picked = [domain.centroid]
    need = 0.15 * domain.diameter
    while len(picked) < 5:
        cand = lo + sampler.random(32) * (hi - lo)
        ok = domain.contains(cand) & (_segment_distances(cand, a, b) >= need)
        for c in cand[ok]:
            picked.append(c)
            if len(picked) == 5:
                break
    return np.array(picked)


def robin_critical_point(domain: DomainSpec, h: float = 0.02,
                         seeds=None, newton_tol: float = 1e-7,
                         rng_seed: int = 0, grid_n: int = 21,
                         mesh: TriMesh | None = None) -> RobinData:
    """Locate the critical point of R by Newton on its FD gradient.

    All seeds must converge; distinct limits raise MultipleCriticalPoints
    on convex domains and are reported (first limit kept, warning issued)
    otherwise.  The Hessian at the critical point is refined with one
    Richardson level.
    """
    if mesh is None:
        mesh = build_mesh(domain, h)
    solver = GreenSolver(mesh)
    if seeds is None:
        seeds = _default_seeds(domain, mesh, rng_seed)
    else:
        seeds = np.atleast_2d(np.asarray(seeds, float))
    step = 1e-3 * domain.diameter
    safe = max(2.5 * solver.h_boundary, 4 * step)

    limits = [_newton_critical(solver, s, step, newton_tol, safe)
              for s in seeds]
    x_inf = limits[0]
    spread = max(np.linalg.norm(l - x_inf) for l in limits)
    if spread > 1e-4 * domain.diameter:
        msg = (f"seeds converged to distinct critical points "
               f"(spread {spread:.3g})")
        if domain.convex:
            raise MultipleCriticalPoints(msg)
        warnings.warn(msg)

    grad = robin_gradient(solver, x_inf, step)
    hess = robin_hessian(solver, x_inf, step)
    mu = np.sort(np.linalg.eigvalsh(hess))
    grid = _interior_grid(domain, mesh, n=grid_n)
    R = _RobinSampler(solver)
    R_grid = np.array([R(p) for p in grid])
    return RobinData(domain=domain, base_h=h, grid=grid, R_grid=R_grid,
                     x_inf=x_inf, grad_R=grad, hessian=hess,
                     mu1=float(mu[0]), mu2=float(mu[1]),
                     laplacian_R=float(mu[0] + mu[1]),
                     R_at_x_inf=R(x_inf), seeds=seeds)


# ---------------------------------------------------------------------------
# boundary integral identities
# ---------------------------------------------------------------------------

def _edge_trapezoid(solver: GreenSolver, nodal_integrand) -> float:
    """Integrate a per-(edge, endpoint) integrand over the boundary.

    ``nodal_integrand(node_idx_in_boundary_list, edge_normal, position)``
    returns the integrand value; each edge contributes its length times
    the endpoint average.
    """
    pos = {b: i for i, b in enumerate(solver.boundary)}
    total = 0.0
    for (a, b), n, l in zip(solver.bedges, solver.bnormals, solver.blengths):
        fa = nodal_integrand(pos[a], n, solver.mesh.vertices[a])
        fb = nodal_integrand(pos[b], n, solver.mesh.vertices[b])
        total += 0.5 * l * (fa + fb)
    return total


def boundary_identity(solver: GreenSolver, y, which: str,
                      j: int = 0, k: int = 0,
                      fd_step: float | None = None):
    """Evaluate one boundary integral identity; returns (lhs, rhs, rel).

    which:
      G1  int (x-y).nu (dG/dnu)^2            = 1/(2 pi)
      G2  2 int (x-y).nu dG/dnu d_yj(dG/dnu) = dR/dy_j
      R1  int nu_j (dG/dnu)^2                = dR/dy_j
      R2  int nu_j dG/dnu d_yk(dG/dnu)       = 1/2 d^2R/dy_j dy_k
    (on the boundary grad G = (dG/dnu) nu, so dG/dx_j = nu_j dG/dnu).
    """
    y = np.asarray(y, float)
    dG = solver.green_normal_derivative(y)
    d = 1e-3 * solver.mesh.domain.diameter if fd_step is None else fd_step

    def flux_y_derivative(axis: int) -> np.ndarray:
        e = np.zeros(2)
        e[axis] = d
        return (solver.green_normal_derivative(y + e)
                - solver.green_normal_derivative(y - e)) / (2 * d)

    if which == "G1":
        lhs = _edge_trapezoid(
            solver, lambda i, n, x: np.dot(x - y, n) * dG[i] ** 2)
        rhs = 1.0 / TWO_PI
    elif which == "G2":
        ddG = flux_y_derivative(j)
        lhs = _edge_trapezoid(
            solver, lambda i, n, x: 2 * np.dot(x - y, n) * dG[i] * ddG[i])
        rhs = float(robin_gradient(solver, y)[j])
    elif which == "R1":
        lhs = _edge_trapezoid(solver, lambda i, n, x: n[j] * dG[i] ** 2)
        rhs = float(robin_gradient(solver, y)[j])
    elif which == "R2":
        ddG = flux_y_derivative(k)
        lhs = _edge_trapezoid(solver, lambda i, n, x: n[j] * dG[i] * ddG[i])
        rhs = 0.5 * float(robin_hessian(solver, y)[j, k])
    else:
        raise ValueError(f"unknown identity {which!r}")
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-12)
    return lhs, rhs, rel
