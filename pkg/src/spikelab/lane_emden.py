"""Damped Newton solver and p-continuation for -Delta u = u^p, u|_bdry = 0.

The positive solutions concentrate as p grows: u develops a single spike
of height approaching sqrt(e) at a critical point of the Robin function,
with spatial scale

    eps = [p u_max^(p-1)]^(-1/2)  ~  e^(-(p-1)/4),

so the mesh is regraded near the peak (local element size <= eps/4) and
the p-steps are kept small enough that eps shrinks by at most ~30% per
step.  Seeding uses the explicit Liouville bubble, which is an excellent
initial guess at any p once the peak location is known.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import matplotlib.tri as mtri
import scipy.sparse.linalg as spla

from .errors import (BallEscapesDomain, MaxIterations, NewtonDiverged,
                     PositivityLost)
from .fem import (DirichletSolver, assemble_power_load, assemble_stiffness,
                  assemble_weighted_mass_power, interpolate_at_quad)
from .geometry import DomainSpec, TriMesh, bisect_marked, build_mesh
from .green_robin import robin_critical_point

SQRT_E = math.sqrt(math.e)


def mesh_id(mesh: TriMesh) -> str:
    h = hashlib.md5()
    h.update(np.ascontiguousarray(mesh.vertices).tobytes())
    h.update(np.ascontiguousarray(mesh.triangles).tobytes())
    return h.hexdigest()[:12]


def spike_scale(p: float, u_max: float) -> float:
    """eps = [p u_max^(p-1)]^(-1/2), evaluated in logs to dodge overflow."""
    return math.exp(-0.5 * (math.log(p) + (p - 1) * math.log(u_max)))


def _triangulation(mesh: TriMesh) -> mtri.Triangulation:
    return mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1],
                              mesh.triangles)


@dataclass
class Solution:
    """A converged positive solution at one exponent."""

    p: float
    u: np.ndarray
    x_n: np.ndarray
    u_max: float
    eps_n: float
    energy: float
    residual_norm: float
    mesh_id: str
    mesh: TriMesh
    newton_iters: int = 0
    quadratic_tail: bool = True

    def to_json(self) -> str:
        return json.dumps({
            "p": self.p, "u_max": self.u_max, "x_n": self.x_n.tolist(),
            "eps_n": self.eps_n, "energy": self.energy,
            "residual_norm": self.residual_norm, "mesh_id": self.mesh_id,
            "newton_iters": int(self.newton_iters),
            "quadratic_tail": bool(self.quadratic_tail),
            "u": self.u.tolist(),
        })

    def interpolator(self):
        return mtri.LinearTriInterpolator(_triangulation(self.mesh), self.u)


@dataclass
class Branch:
    """Continuation history: solutions at increasing p plus step metadata."""

    solutions: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    remesh_events: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

def liouville_guess(mesh: TriMesh, p: float, x0) -> np.ndarray:
    """Bubble ansatz t (1 + U((x-x0)/eps)/p)_+ with t = sqrt(e).

    The peak is snapped to the mesh vertex nearest x0 so the guess
    attains its maximum exactly at a node.
    """
    x0 = np.asarray(x0, float)
    iv = int(np.argmin(np.linalg.norm(mesh.vertices - x0, axis=1)))
    xpk = mesh.vertices[iv]
    t = SQRT_E
    eps = spike_scale(p, t)
    r2 = np.sum((mesh.vertices - xpk) ** 2, axis=1)
    U = -2.0 * np.log1p(r2 / (8.0 * eps * eps))
    u = t * np.maximum(0.0, 1.0 + U / p)
    u[mesh.boundary_vertex] = 0.0
    return u


def rescale_seed(sol: Solution, mesh: TriMesh, p_new: float) -> np.ndarray:
    """Seed for p_new by shrinking the previous bubble per the eps ratio."""
    eps_new = spike_scale(p_new, sol.u_max)
    scale = sol.eps_n / eps_new
    interp = sol.interpolator()
    pts = sol.x_n + scale * (mesh.vertices - sol.x_n)
    vals = interp(pts[:, 0], pts[:, 1])
    w = sol.p * (np.ma.filled(vals, 0.0) - sol.u_max) / sol.u_max
    u = sol.u_max * np.maximum(0.0, 1.0 + w / p_new)
    u[mesh.boundary_vertex] = 0.0
    return u


# ---------------------------------------------------------------------------
# Newton iteration
# ---------------------------------------------------------------------------

def newton_solve(mesh: TriMesh, p: float, guess: np.ndarray,
                 tol: float = 1e-10, max_iter: int = 60) -> Solution:
    """Damped Newton on K u = F(u), F the u_+^p load.

    Backtracking halves the step (up to 20 times) whenever the residual
    norm does not decrease.  Convergence means ||K u - F|| <= tol ||F||.
    The positive branch is selected by one-sided powers u_+; the zero
    field solves the equation but is rejected (PositivityLost).

    For large p the plain iteration can stall: the spike translates
    almost freely, and the residual floor is the mesh's symmetry-breaking
    force on the peak position.  ``newton_solve_frame`` removes that
    degeneracy and is what the drivers use.
    """
    K = assemble_stiffness(mesh)
    interior = ~mesh.boundary_vertex
    u = np.asarray(guess, float).copy()
    u[mesh.boundary_vertex] = 0.0

    def residual(v):
        F = assemble_power_load(mesh, v, p)
        r = (K @ v - F)[interior]
        return r, F

    r, F = residual(u)
    rnorm = np.linalg.norm(r)
    ratios = []
    for it in range(max_iter):
        fnorm = np.linalg.norm(F[interior])
        if rnorm <= tol * max(fnorm, 1e-300):
            break
        J = K - assemble_weighted_mass_power(mesh, u, p)
        step = DirichletSolver(J, mesh).solve(
            np.where(interior, -(K @ u - F), 0.0))
        alpha = 1.0
        for _ in range(20):
            un = u + alpha * step
            un[mesh.boundary_vertex] = 0.0
            rn, Fn = residual(un)
            rn_norm = np.linalg.norm(rn)
            if rn_norm < rnorm:
                break
            alpha *= 0.5
        else:
            raise NewtonDiverged(
                f"p={p}: residual stuck at {rnorm:.3e} after max damping")
        ratios.append(rn_norm / rnorm)
        u, r, F, rnorm = un, rn, Fn, rn_norm
    else:
        raise MaxIterations(f"p={p}: {max_iter} Newton steps, "
                            f"residual {rnorm:.3e}")

    if u.max() <= 1e-8 or np.any(u[interior] <= 0.0):
        raise PositivityLost(
            f"p={p}: converged iterate is not strictly positive inside")
    iv = int(np.argmax(u))
    u_max = float(u[iv])
    energy = float(p * (u @ (K @ u)))
    quad_tail = len(ratios) < 2 or (ratios[-1] <= 0.3 and ratios[-2] <= 0.3)
    return Solution(p=float(p), u=u, x_n=mesh.vertices[iv].copy(),
                    u_max=u_max, eps_n=spike_scale(p, u_max),
                    energy=energy, residual_norm=float(rnorm),
                    mesh_id=mesh_id(mesh), mesh=mesh,
                    newton_iters=len(ratios), quadratic_tail=quad_tail)


def _bubble_templates(mesh: TriMesh, p: float, x0: np.ndarray,
                      eps: float) -> np.ndarray:
    """Nodal x/y-derivatives of the Liouville ansatz, (n, 2).

    These span the spike-translation modes and serve as phase conditions:
    t_j . (u - u_ref) = 0 forbids the iterate from drifting along the
    near-null translation directions.
    """
    d = mesh.vertices - x0
    r2 = np.einsum("ij,ij->i", d, d)
    supp = 1.0 + (-2.0 * np.log1p(r2 / (8 * eps * eps))) / p > 0.0
    grad = (-4.0 * SQRT_E / p) * d / (8 * eps * eps + r2)[:, None]
    grad[~supp] = 0.0
    grad[mesh.boundary_vertex] = 0.0
    return grad / np.linalg.norm(grad, axis=0)  # unit columns


def newton_solve_frame(mesh0: TriMesh, p: float, guess: np.ndarray, x0,
                       tol: float = 1e-10, max_iter: int = 80,
                       rigid: float = 12.0, taper: float = 4.0) -> Solution:
    """Moving-frame Newton: solve for (u, s) with a translating mesh patch.

    Plain Newton stalls at large p: the translation modes of the
    linearized operator are near-null, and the residual floor along them
    is the symmetry-breaking force exerted by the irregular bisection
    pattern on the spike.  That force cannot be removed by moving u alone
    -- but it vanishes for some small rigid offset s of the fine patch.
    So s becomes an unknown: vertices move as X(s) = X0 + bump(|X0-x0|) s
    with bump = 1 for r <= R1 = rigid * eps (the whole core translates
    rigidly, keeping its micro-landscape frozen) tapering smoothly to 0
    at R2 = taper * R1.  Two phase conditions t_j . (u - guess) = 0 close
    the square bordered system, solved by block elimination on the 2x2
    Schur complement (the border columns are dense, so a direct sparse LU
    of the full system fills in badly).  One pass of iterative refinement
    compensates the accuracy the near-singular field block costs the
    elimination.  The converged u is an exact discrete solution of the
    plain problem on the returned (deformed) mesh.
    """

    x0 = np.asarray(x0, float)
    # work in spike-local coordinates: with the peak at O(1) coordinates,
    # the eps-size triangles near it lose ~10 digits to cancellation in
    # every assembly, which floors the residual and corrupts the FD
    # mesh-velocity columns
    shift = x0.copy()
    X0 = mesh0.vertices - shift
    x0 = np.zeros(2)
    interior = ~mesh0.boundary_vertex
    u_max0 = float(np.max(guess))
    eps = spike_scale(p, max(u_max0, 1.0))
    # cap the patch by the distance to the boundary (relevant at small p)
    b_dist = float(np.min(np.linalg.norm(
        X0[mesh0.boundary_vertex] - x0, axis=1)))
    R2 = min(taper * rigid * eps, 0.8 * b_dist)
    R1 = min(rigid * eps, R2 / 2)

    r = np.linalg.norm(X0 - x0, axis=1)
    t_par = np.clip((r - R1) / (R2 - R1), 0.0, 1.0)
    bump = np.cos(0.5 * np.pi * t_par) ** 2
    bump[mesh0.boundary_vertex] = 0.0

    def mesh_at(s):
        # shifted coordinates; the domain tag is omitted on purpose (it
        # would disagree with the vertex positions)
        return TriMesh(X0 + bump[:, None] * s, mesh0.triangles,
                       mesh0.boundary_vertex)

    u_ref = np.asarray(guess, float).copy()
    u_ref[mesh0.boundary_vertex] = 0.0
    T = _bubble_templates(mesh0, p, shift, eps)[interior]       # (n_i, 2)

    def bordered_solve(ds: DirichletSolver, Js, rhs1, rhs2):
        # [[J, Js], [T^t, 0]] (x, y) = (rhs1, rhs2) via the 2x2 Schur
        # complement, with one refinement pass.
        def once(f, g):
            Z = np.column_stack([ds.lu.solve(Js[:, j]) for j in range(2)])
            w = ds.lu.solve(f)
            y = np.linalg.solve(T.T @ Z, T.T @ w - g)
            return w - Z @ y, y
        x, y = once(rhs1, rhs2)
        r1 = rhs1 - (ds.A_ii @ x + Js @ y)
        r2 = rhs2 - T.T @ x
        ex, ey = once(r1, r2)
        return x + ex, y + ey

    def field_residual(v, mesh_s, K=None):
        if K is None:
            K = assemble_stiffness(mesh_s)
        F = assemble_power_load(mesh_s, v, p)
        return (K @ v - F)[interior], K, F

    u = u_ref.copy()
    s = np.zeros(2)
    mesh_s = mesh_at(s)
    g1, K, F = field_residual(u, mesh_s)
    g2 = T.T @ (u - u_ref)[interior]
    gnorm = math.hypot(np.linalg.norm(g1), np.linalg.norm(g2))
    ratios = []
    ds_fd = 1e-3 * eps
    for it in range(max_iter):
        fnorm = np.linalg.norm(F[interior])
        if gnorm <= tol * max(fnorm, 1e-300):
            break
        J = K - assemble_weighted_mass_power(mesh_s, u, p)
        ds = DirichletSolver(J, mesh_s)
        cols = []
        for j in range(2):
            e = np.zeros(2)
            e[j] = ds_fd
            gp, _, _ = field_residual(u, mesh_at(s + e))
            gm, _, _ = field_residual(u, mesh_at(s - e))
            cols.append((gp - gm) / (2 * ds_fd))
        Js = np.column_stack(cols)
        dx, dsv = bordered_solve(ds, Js, -g1, -g2)
        if os.environ.get("SPIKELAB_DEBUG"):
            lin_res = np.linalg.norm(ds.A_ii @ dx + Js @ dsv + g1)
            print(f"  it={it} |dx|={np.linalg.norm(dx):.3e} "
                  f"|ds|={np.linalg.norm(dsv):.3e} linres={lin_res:.3e} "
                  f"gnorm={gnorm:.3e}")
        du = np.zeros(mesh0.n_vertices)
        du[interior] = dx
        alpha = 1.0
        for _ in range(25):
            sn = s + alpha * dsv
            mesh_n = mesh_at(sn)
            if np.min(mesh_n.signed_areas()) <= 0.0:
                alpha *= 0.5
                continue
            un = u + alpha * du
            g1n, Kn, Fn = field_residual(un, mesh_n)
            g2n = T.T @ (un - u_ref)[interior]
            gn = math.hypot(np.linalg.norm(g1n), np.linalg.norm(g2n))
            if gn < gnorm:
                break
            alpha *= 0.5
        else:
            if gnorm <= 1e3 * tol * max(np.linalg.norm(F[interior]), 1e-300):
                break  # stagnated at the rounding floor, just above target
            raise NewtonDiverged(
                f"p={p}: frame residual stuck at {gnorm:.3e}")
        ratios.append(gn / gnorm)
        if os.environ.get("SPIKELAB_DEBUG"):
            print(f"  it={it} gnorm={gn:.3e} alpha={alpha:.3e} "
                  f"s=({sn[0]:.3e},{sn[1]:.3e}) fnorm={np.linalg.norm(Fn[interior]):.3e}")
        u, s, mesh_s = un, sn, mesh_n
        g1, g2, K, F, gnorm = g1n, g2n, Kn, Fn, gn
    else:
        raise MaxIterations(f"p={p}: {max_iter} frame Newton steps, "
                            f"residual {gnorm:.3e}")

    if u.max() <= 1e-8 or np.any(u[interior] <= 0.0):
        raise PositivityLost(
            f"p={p}: converged iterate is not strictly positive inside")
    iv = int(np.argmax(u))
    u_max = float(u[iv])
    quad_tail = len(ratios) < 2 or (ratios[-1] <= 0.3 and ratios[-2] <= 0.3)
    mesh_out = TriMesh(mesh_s.vertices + shift, mesh0.triangles,
                       mesh0.boundary_vertex, domain=mesh0.domain,
                       boundary_param=mesh0.boundary_param)
    return Solution(p=float(p), u=u, x_n=mesh_out.vertices[iv].copy(),
                    u_max=u_max, eps_n=spike_scale(p, u_max),
                    energy=float(p * (u @ (K @ u))),
                    residual_norm=float(np.linalg.norm(g1)),
                    mesh_id=mesh_id(mesh_out), mesh=mesh_out,
                    newton_iters=len(ratios), quadratic_tail=quad_tail)


# ---------------------------------------------------------------------------
# spike-adapted meshing
# ---------------------------------------------------------------------------

def _local_h(mesh: TriMesh, x: np.ndarray) -> float:
    finder = _triangulation(mesh).get_trifinder()
    t = int(finder(x[0], x[1]))
    if t < 0:
        # x marginally outside (curved boundary); use the nearest vertex
        iv = int(np.argmin(np.linalg.norm(mesh.vertices - x, axis=1)))
        tri_hits = np.nonzero(np.any(mesh.triangles == iv, axis=1))[0]
        return float(mesh.circumdiameters()[tri_hits].max())
    return float(mesh.circumdiameters()[t])


def refine_spike(mesh: TriMesh, x, eps: float, ratio: float = 4.0,
                 core: float = 8.0, grading: float = 0.25):
    """Regrade around x: uniformly fine core, then geometric grading.

    Element size is held at eps/ratio throughout the bubble core
    (dist <= core * eps) and grows like grading * dist beyond it, so the
    count stays logarithmic in 1/eps.  The wide uniform core matters:
    under-resolving the bubble's shoulder leaves a rough discrete energy
    landscape along the spike-translation modes and stalls Newton.
    Returns (mesh, n_passes).
    """
    x = np.asarray(x, float)
    passes = 0
    while True:
        c = mesh.tri_coords()
        dist = np.min(np.linalg.norm(c - x, axis=2), axis=1)
        allowed = np.maximum(eps / ratio,
                             grading * (dist - core * eps))
        marked = np.nonzero(mesh.circumdiameters() > allowed)[0]
        if len(marked) == 0:
            return mesh, passes
        mesh = bisect_marked(mesh, marked, depth=1)
        passes += 1
        if passes > 500:  # pragma: no cover - cap is generous
            raise MaxIterations("spike regrading did not reach target size")


def transfer_field(mesh_old: TriMesh, mesh_new: TriMesh,
                   u: np.ndarray) -> np.ndarray:
    """Nodal interpolation of a field onto another mesh of the same domain."""
    interp = mtri.LinearTriInterpolator(_triangulation(mesh_old), u)
    vals = interp(mesh_new.vertices[:, 0], mesh_new.vertices[:, 1])
    out = np.ma.filled(vals, 0.0)
    out[mesh_new.boundary_vertex] = 0.0
    return out


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

_FRAME_P = 8.0  # above this, the translation valley is flat enough to border


def _driver_solve(mesh: TriMesh, p: float, guess: np.ndarray, x0,
                  tol: float) -> Solution:
    if p >= _FRAME_P:
        return newton_solve_frame(mesh, p, guess, x0, tol=tol)
    return newton_solve(mesh, p, guess, tol=tol)


def seed_point(domain: DomainSpec, h: float = 0.05) -> np.ndarray:
    """Peak seed: Robin-function minimum for convex domains, else centroid."""
    if domain.convex:
        rd = robin_critical_point(domain, h=h, seeds=[domain.centroid])
        return rd.x_inf
    return domain.centroid


def solve_at(domain: DomainSpec, p: float, base_h: float = 0.1,
             x0=None, tol: float = 1e-10) -> Solution:
    """Solve directly at one exponent from the Liouville ansatz.

    The mesh is regraded around the (possibly moving) peak and the solve
    repeated until the converged peak sits on a properly graded patch.
    If the Liouville start lands in a stiff residual valley (the Newton
    direction blows up along a spike-concentrated mode with curvature too
    large for any useful damping -- observed on the unit square near
    p = 40), the solve falls back to a short continuation in p, where each
    intermediate exponent gets its own graded mesh and an interpolated
    seed.
    """
    x0 = seed_point(domain) if x0 is None else np.asarray(x0, float)
    mesh = build_mesh(domain, base_h)
    eps = spike_scale(p, SQRT_E)
    try:
        for _ in range(8):
            mesh, _ = refine_spike(mesh, x0, eps)
            sol = _driver_solve(mesh, p, liouville_guess(mesh, p, x0),
                                x0, tol)
            if (np.linalg.norm(sol.x_n - x0) <= 3 * eps
                    and _local_h(mesh, sol.x_n) <= sol.eps_n / 4):
                return sol
            x0 = sol.x_n
            mesh = sol.mesh   # regrade around the converged peak
        return sol
    except NewtonDiverged:
        if p <= 8.0:
            raise
        branch = continuation_sweep(domain, [max(5.0, 0.75 * p), p],
                                    base_h, tol)
        return branch.solutions[-1]


def continuation_sweep(domain: DomainSpec, p_values, base_h: float = 0.1,
                       tol: float = 1e-10, eps_drop: float = 0.3) -> Branch:
    """March a branch through the given exponents.

    Internal steps are inserted so eps never shrinks by more than
    ``eps_drop`` per Newton solve (eps ~ e^{-(p-1)/4}, so dp is capped at
    -4 log(1 - eps_drop)); the step grows 1.5x after fast solves and is
    halved on failure.  The mesh is regraded whenever the local size at
    the peak exceeds eps/4.
    """
    branch = Branch()
    p_values = list(p_values)
    if not p_values:
        return branch
    if any(b <= a for a, b in zip(p_values, p_values[1:])):
        raise ValueError("p_values must be strictly increasing")

    dp_cap = -4.0 * math.log(1.0 - eps_drop)
    x0 = seed_point(domain)
    mesh = build_mesh(domain, base_h)

    p0 = p_values[0]
    mesh, _ = refine_spike(mesh, x0, spike_scale(p0, SQRT_E))
    sol = _driver_solve(mesh, p0, liouville_guess(mesh, p0, x0), x0, tol)
    branch.solutions.append(sol)
    branch.steps.append(0.0)

    dp = min(dp_cap, 2.0)
    for p_target in p_values[1:]:
        while sol.p < p_target:
            p_next = min(p_target, sol.p + min(dp, dp_cap))
            eps_next = spike_scale(p_next, sol.u_max)
            mesh = sol.mesh
            if _local_h(mesh, sol.x_n) > eps_next / 4:
                mesh, _ = refine_spike(mesh, sol.x_n, eps_next)
                branch.remesh_events.append(
                    (p_next, sol.mesh.n_vertices, mesh.n_vertices))
            guess = rescale_seed(sol, mesh, p_next)
            try:
                nxt = _driver_solve(mesh, p_next, guess, sol.x_n, tol)
            except (NewtonDiverged, MaxIterations, PositivityLost) as exc:
                dp *= 0.5
                if dp < 1e-3:
                    exc.args = (f"continuation stalled at p={sol.p}: "
                                f"{exc}",)
                    raise
                continue
            branch.steps.append(p_next - sol.p)
            sol = nxt
            if sol.newton_iters <= 4:
                dp *= 1.5
        branch.solutions.append(sol)
    return branch


# ---------------------------------------------------------------------------
# spike descriptors
# ---------------------------------------------------------------------------

def rescale_solution(sol: Solution, R: float = 8.0, grid_n: int = 65):
    """Sample w(y) = p (u(x_n + eps y) - u_max)/u_max on [-R, R]^2.

    Returns (axis, W) with W[i, j] = w(axis[j], axis[i]); w(0) = 0 exactly
    because the peak is a mesh vertex.
    """
    axis = np.linspace(-R, R, grid_n)
    X, Y = np.meshgrid(axis, axis)
    pts = sol.x_n + sol.eps_n * np.stack([X.ravel(), Y.ravel()], axis=1)
    if not np.all(sol.mesh.domain.contains(pts, tol=1e-12)):
        raise BallEscapesDomain(
            f"radius {R}·eps ball around the peak leaves the domain")
    vals = sol.interpolator()(pts[:, 0], pts[:, 1])
    u_vals = np.ma.filled(vals, 0.0).reshape(grid_n, grid_n)
    return axis, sol.p * (u_vals - sol.u_max) / sol.u_max


def detect_peaks(sol: Solution, threshold: float | None = None):
    """Local maxima of the nodal field above a threshold, >= 10 eps apart."""
    thr = 0.5 * sol.u_max if threshold is None else threshold
    mesh = sol.mesh
    nbr: dict[int, set] = {}
    for i, j, k in mesh.triangles:
        nbr.setdefault(i, set()).update((j, k))
        nbr.setdefault(j, set()).update((i, k))
        nbr.setdefault(k, set()).update((i, j))
    cand = [v for v in range(mesh.n_vertices)
            if sol.u[v] > thr and not mesh.boundary_vertex[v]
            and all(sol.u[v] >= sol.u[w] for w in nbr.get(v, ()))]
    cand.sort(key=lambda v: -sol.u[v])
    peaks = []
    for v in cand:
        x = mesh.vertices[v]
        if all(np.linalg.norm(x - q) >= 10 * sol.eps_n for q in peaks):
            peaks.append(x)
    return peaks


def energy_functional(mesh: TriMesh, u: np.ndarray, p: float) -> float:
    """J(u) = 1/2 int |grad u|^2 - 1/(p+1) int u_+^{p+1} (quadrature)."""
    K = assemble_stiffness(mesh)
    areas = np.abs(mesh.signed_areas())
    uq = interpolate_at_quad(mesh, u)
    wq = np.maximum(uq, 0.0) ** (p + 1) if p < 20 else np.exp(
        np.clip((p + 1) * np.log(np.maximum(uq, 1e-300)), -745, 700)
    ) * (uq > 0)
    from .fem import _QW  # quadrature weights of the 6-point rule
    integral = float(np.sum(areas[:, None] * _QW[None, :] * wq))
    return 0.5 * float(u @ (K @ u)) - integral / (p + 1)
