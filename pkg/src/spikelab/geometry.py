"""Planar domains and conforming triangular meshes.

Meshes are generated from structured base grids (polar rings for the disk
and ellipse, tensor grids for rectangles, ear-clipped fans for polygons)
and refined by longest-edge bisection with conformity closure.  Boundary
vertices of curved domains carry their boundary parameter so that edge
midpoints can be projected back onto the exact curve at every refinement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CenterOutsideDomain, InvalidDomain, MeshTooFine

DEFAULT_VERTEX_CAP = 400_000


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainSpec:
    """Description of a bounded planar domain.

    ``kind`` is one of ``unit_disk``, ``rectangle``, ``ellipse``,
    ``polygon``.  Rectangles occupy ``[0, width] x [0, height]``; the disk
    and ellipse are centered at the origin.
    """

    kind: str
    width: float = 0.0
    height: float = 0.0
    semi_axis_a: float = 0.0
    semi_axis_b: float = 0.0
    vertices: tuple = ()
    convex: bool = True

    def __post_init__(self):
        if self.kind == "rectangle":
            if self.width <= 0 or self.height <= 0:
                raise InvalidDomain("rectangle sides must be positive")
        elif self.kind == "ellipse":
            if self.semi_axis_a <= 0 or self.semi_axis_b <= 0:
                raise InvalidDomain("ellipse semi-axes must be positive")
        elif self.kind == "polygon":
            _validate_polygon(np.asarray(self.vertices, float), self.convex)
        elif self.kind != "unit_disk":
            raise InvalidDomain(f"unknown domain kind {self.kind!r}")

    # -- geometry queries ---------------------------------------------------

    @property
    def diameter(self) -> float:
        if self.kind == "unit_disk":
            return 2.0
        if self.kind == "rectangle":
            return math.hypot(self.width, self.height)
        if self.kind == "ellipse":
            return 2.0 * max(self.semi_axis_a, self.semi_axis_b)
        v = np.asarray(self.vertices, float)
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    @property
    def centroid(self) -> np.ndarray:
        if self.kind == "unit_disk" or self.kind == "ellipse":
            return np.zeros(2)
        if self.kind == "rectangle":
            return np.array([self.width / 2, self.height / 2])
        v = np.asarray(self.vertices, float)
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cr = x * yn - xn * y
        a = cr.sum() / 2
        cx = ((x + xn) * cr).sum() / (6 * a)
        cy = ((y + yn) * cr).sum() / (6 * a)
        return np.array([cx, cy])

    @property
    def area(self) -> float:
        """Exact area (for curved domains: of the true curve)."""
        if self.kind == "unit_disk":
            return math.pi
        if self.kind == "rectangle":
            return self.width * self.height
        if self.kind == "ellipse":
            return math.pi * self.semi_axis_a * self.semi_axis_b
        v = np.asarray(self.vertices, float)
        x, y = v[:, 0], v[:, 1]
        return float((x * np.roll(y, -1) - np.roll(x, -1) * y).sum() / 2)

    def contains(self, pts, tol: float = 0.0):
        """Boolean containment test; ``pts`` is (2,) or (n, 2)."""
        p = np.atleast_2d(np.asarray(pts, float))
        if self.kind == "unit_disk":
            inside = (p ** 2).sum(1) < (1.0 - tol) ** 2
        elif self.kind == "ellipse":
            inside = ((p[:, 0] / self.semi_axis_a) ** 2
                      + (p[:, 1] / self.semi_axis_b) ** 2) < (1.0 - tol) ** 2
        elif self.kind == "rectangle":
            inside = ((p[:, 0] > tol) & (p[:, 0] < self.width - tol)
                      & (p[:, 1] > tol) & (p[:, 1] < self.height - tol))
        else:
            from matplotlib.path import Path
            inside = Path(np.asarray(self.vertices, float)).contains_points(
                p, radius=-tol)
        return inside if np.ndim(pts) == 2 else bool(inside[0])

    def boundary_point(self, theta):
        """Point on the exact boundary at parameter ``theta`` (curved only)."""
        if self.kind == "unit_disk":
            return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        if self.kind == "ellipse":
            return np.stack([self.semi_axis_a * np.cos(theta),
                             self.semi_axis_b * np.sin(theta)], axis=-1)
        raise InvalidDomain("boundary parameterization only for curved domains")

    @property
    def curved(self) -> bool:
        return self.kind in ("unit_disk", "ellipse")


def unit_disk() -> DomainSpec:
    return DomainSpec("unit_disk")


def rectangle(width: float, height: float) -> DomainSpec:
    return DomainSpec("rectangle", width=width, height=height)


def unit_square() -> DomainSpec:
    return rectangle(1.0, 1.0)


def ellipse(a: float, b: float) -> DomainSpec:
    return DomainSpec("ellipse", semi_axis_a=a, semi_axis_b=b)


def polygon(verts, convex: bool | None = None) -> DomainSpec:
    v = np.asarray(verts, float)
    if convex is None:
        convex = _is_convex(v)
    return DomainSpec("polygon", vertices=tuple(map(tuple, v)), convex=convex)


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return float((x * np.roll(y, -1) - np.roll(x, -1) * y).sum() / 2)


def _is_convex(v: np.ndarray) -> bool:
    d = np.roll(v, -1, axis=0) - v
    e = np.roll(d, -1, axis=0)
    cr = d[:, 0] * e[:, 1] - d[:, 1] * e[:, 0]
    return bool((cr > -1e-12 * np.abs(cr).max()).all())


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


def _validate_polygon(v: np.ndarray, convex_flag: bool) -> None:
    if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
        raise InvalidDomain("polygon needs at least 3 planar vertices")
    if _signed_area(v) <= 0:
        raise InvalidDomain("polygon vertices must be CCW")
    n = len(v)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(i - j) in (1, n - 1):
                continue
            if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                raise InvalidDomain("polygon is self-intersecting")
    if convex_flag and not _is_convex(v):
        raise InvalidDomain("polygon declared convex but has reflex vertices")


# ---------------------------------------------------------------------------
# triangular mesh
# ---------------------------------------------------------------------------

@dataclass
class TriMesh:
    """Conforming P1 triangulation with boundary bookkeeping.

    ``boundary_param`` holds the boundary-curve parameter for boundary
    vertices of curved domains (NaN elsewhere); it lets refinement place
    new boundary vertices exactly on the curve.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex: np.ndarray
    domain: DomainSpec | None = None
    boundary_param: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, float)
        self.triangles = np.asarray(self.triangles, np.int64)
        self.boundary_vertex = np.asarray(self.boundary_vertex, bool)
        if self.boundary_param is None:
            self.boundary_param = np.full(len(self.vertices), np.nan)

    # -- basic quantities ---------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def tri_coords(self) -> np.ndarray:
        """(m, 3, 2) vertex coordinates per triangle."""
        return self.vertices[self.triangles]

    def signed_areas(self) -> np.ndarray:
        c = self.tri_coords()
        d1 = c[:, 1] - c[:, 0]
        d2 = c[:, 2] - c[:, 0]
        return (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / 2

    def edge_lengths(self) -> np.ndarray:
        """(m, 3) lengths of edges opposite to local vertices 0, 1, 2."""
        c = self.tri_coords()
        out = np.empty((len(c), 3))
        for k in range(3):
            d = c[:, (k + 1) % 3] - c[:, (k + 2) % 3]
            out[:, k] = np.hypot(d[:, 0], d[:, 1])
        return out

    def circumdiameters(self) -> np.ndarray:
        e = self.edge_lengths()
        a, b, cc = e[:, 0], e[:, 1], e[:, 2]
        return a * b * cc / (2 * np.abs(self.signed_areas()))

    def min_angles(self) -> np.ndarray:
        """Smallest interior angle per triangle, degrees."""
        e = np.sort(self.edge_lengths(), axis=1)
        a, b, c = e[:, 0], e[:, 1], e[:, 2]
        cosA = np.clip((b ** 2 + c ** 2 - a ** 2) / (2 * b * c), -1, 1)
        return np.degrees(np.arccos(cosA))

    def boundary_edges(self):
        """(edges, normals, lengths): boundary edges with outward unit normals."""
        edges = {}
        for t, (i, j, k) in enumerate(self.triangles):
            for a, b in ((i, j), (j, k), (k, i)):
                key = (min(a, b), max(a, b))
                edges.setdefault(key, []).append((t, a, b))
        bed, nrm = [], []
        for key, owners in edges.items():
            if len(owners) != 1:
                continue
            t, a, b = owners[0]
            pa, pb = self.vertices[a], self.vertices[b]
            tang = pb - pa
            # outward = away from the opposite vertex of the owning triangle
            opp = [v for v in self.triangles[t] if v != a and v != b][0]
            n = np.array([tang[1], -tang[0]])
            if np.dot(n, self.vertices[opp] - (pa + pb) / 2) > 0:
                n = -n
            n /= np.hypot(*n)
            bed.append((a, b))
            nrm.append(n)
        bed = np.array(bed, np.int64)
        nrm = np.array(nrm)
        lens = np.hypot(*(self.vertices[bed[:, 1]] - self.vertices[bed[:, 0]]).T)
        return bed, nrm, lens

    def validate(self) -> None:
        """Raise if structural invariants are violated."""
        sa = self.signed_areas()
        if not (sa > 0).all():
            raise InvalidDomain("mesh contains non-CCW or degenerate triangles")
        counts = {}
        for tri in self.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                counts[key] = counts.get(key, 0) + 1
        if max(counts.values()) > 2:
            raise InvalidDomain("edge shared by more than two triangles")
        bed, _, _ = self.boundary_edges()
        bset = set(bed.ravel().tolist())
        if bset != set(np.nonzero(self.boundary_vertex)[0].tolist()):
            raise InvalidDomain("boundary_vertex flags inconsistent with edges")

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary": self.boundary_vertex.tolist(),
        })

    @classmethod
    def from_json(cls, text: str, domain: DomainSpec | None = None) -> "TriMesh":
        d = json.loads(text)
        return cls(np.array(d["vertices"]), np.array(d["triangles"]),
                   np.array(d["boundary"], bool), domain=domain)


@dataclass(frozen=True)
class QualityStats:
    min_angle_deg: float
    h_max: float
    h_min: float
    n_vertices: int
    n_triangles: int


def mesh_quality(mesh: TriMesh) -> QualityStats:
    e = mesh.edge_lengths()
    return QualityStats(
        min_angle_deg=float(mesh.min_angles().min()),
        h_max=float(e.max()),
        h_min=float(e.min()),
        n_vertices=mesh.n_vertices,
        n_triangles=mesh.n_triangles,
    )


# ---------------------------------------------------------------------------
# base grids
# ---------------------------------------------------------------------------

def _ellipse_arc_param(a: float, b: float, fractions: np.ndarray) -> np.ndarray:
    """Parameter angles theta with the given arc-length fractions."""
    th = np.linspace(0, 2 * math.pi, 4096)
    speed = np.sqrt((a * np.sin(th)) ** 2 + (b * np.cos(th)) ** 2)
    s = np.concatenate([[0], np.cumsum((speed[1:] + speed[:-1]) / 2 * np.diff(th))])
    return np.interp(fractions * s[-1], s, th)


def _disk_base(n_rings: int, a: float = 1.0, b: float = 1.0):
    """Concentric-ring triangulation of the (possibly elliptic) disk.

    Ring j carries points at equal arc-length spacing; point counts grow
    linearly with j so triangles stay near-isotropic.
    """
    L = float(np.sum(np.sqrt((a * np.sin(t := np.linspace(0, 2 * math.pi, 4096))[:-1]) ** 2
                             + (b * np.cos(t[:-1])) ** 2)) * (t[1] - t[0]))
    verts = [(0.0, 0.0)]
    params = [np.nan]
    ring_start = [0]
    counts = [0]
    fracs_per_ring = [None]
    for j in range(1, n_rings + 1):
        r = j / n_rings
        m = max(6, int(round(2 * j * L / (a + b))))
        counts.append(m)
        ring_start.append(len(verts))
        fr = np.arange(m) / m
        th = (2 * math.pi * fr if a == b else _ellipse_arc_param(a, b, fr))
        fracs_per_ring.append(fr)
        for i in range(m):
            verts.append((r * a * math.cos(th[i]), r * b * math.sin(th[i])))
            params.append(th[i] if j == n_rings else np.nan)
    tris = []
    # innermost fan
    m1 = counts[1]
    for i in range(m1):
        tris.append((0, 1 + i, 1 + (i + 1) % m1))
    # strips between ring j-1 and ring j, merged by arc fraction
    for j in range(2, n_rings + 1):
        ni, no = counts[j - 1], counts[j]
        si, so = ring_start[j - 1], ring_start[j]
        ai, ao = fracs_per_ring[j - 1], fracs_per_ring[j]
        i = k = 0
        while i < ni or k < no:
            nexti = ai[(i + 1) % ni] if (i + 1) % ni else 1.0
            nextk = ao[(k + 1) % no] if (k + 1) % no else 1.0
            vi, vk = si + i % ni, so + k % no
            if k < no and (i >= ni or nextk <= nexti):
                tris.append((vi, vk, so + (k + 1) % no))
                k += 1
            else:
                tris.append((vi, vk, si + (i + 1) % ni))
                i += 1
    bnd = np.zeros(len(verts), bool)
    bnd[ring_start[n_rings]:] = True
    return (np.array(verts), np.array(tris, np.int64), bnd,
            np.array(params))


def _rect_base(w: float, h: float, nx: int, ny: int):
    xs = np.linspace(0, w, nx + 1)
    ys = np.linspace(0, h, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            # alternate diagonals for a symmetric criss-cross pattern
            if (i + j) % 2 == 0:
                tris.append((a, b, c))
                tris.append((a, c, d))
            else:
                tris.append((a, b, d))
                tris.append((b, c, d))
    bnd = ((verts[:, 0] == 0) | (verts[:, 0] == w)
           | (verts[:, 1] == 0) | (verts[:, 1] == h))
    return verts, np.array(tris, np.int64), bnd, np.full(len(verts), np.nan)


def _ear_clip(v: np.ndarray):
    """Ear-clipping triangulation of a simple CCW polygon."""
    idx = list(range(len(v)))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10000:
            raise InvalidDomain("ear clipping failed (degenerate polygon?)")
        n = len(idx)
        for pos in range(n):
            a, b, c = idx[pos - 1], idx[pos], idx[(pos + 1) % n]
            pa, pb, pc = v[a], v[b], v[c]
            cr = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
            if cr <= 0:
                continue
            # no other vertex inside the candidate ear
            ok = True
            for o in idx:
                if o in (a, b, c):
                    continue
                if _point_in_tri(v[o], pa, pb, pc):
                    ok = False
                    break
            if ok:
                tris.append((a, b, c))
                idx.pop(pos)
                break
        else:
            raise InvalidDomain("no ear found; polygon may be invalid")
    tris.append(tuple(idx))
    return np.array(tris, np.int64)


def _point_in_tri(p, a, b, c, eps=1e-14):
    def s(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])

    d1, d2, d3 = s(a, b, p), s(b, c, p), s(c, a, p)
    return (d1 >= -eps) and (d2 >= -eps) and (d3 >= -eps)


# ---------------------------------------------------------------------------
# refinement: longest-edge bisection with conformity closure
# ---------------------------------------------------------------------------

class _Refiner:
    """Mutable mesh state for Rivara longest-edge bisection."""

    def __init__(self, mesh: TriMesh, vertex_cap: int):
        self.verts = [tuple(p) for p in mesh.vertices]
        self.params = list(mesh.boundary_param)
        self.bnd = list(mesh.boundary_vertex)
        self.tris = [tuple(t) for t in mesh.triangles]
        self.alive = [True] * len(self.tris)
        self.domain = mesh.domain
        self.cap = vertex_cap
        self.edge2tris: dict[tuple, list] = {}
        for t, tri in enumerate(self.tris):
            for e in self._edges(tri):
                self.edge2tris.setdefault(e, []).append(t)

    @staticmethod
    def _edges(tri):
        i, j, k = tri
        return ((min(i, j), max(i, j)), (min(j, k), max(j, k)),
                (min(k, i), max(k, i)))

    def _longest_edge(self, t):
        tri = self.tris[t]
        best, blen = None, -1.0
        for e in self._edges(tri):
            d = np.subtract(self.verts[e[1]], self.verts[e[0]])
            l2 = float(d[0] * d[0] + d[1] * d[1])
            # deterministic tie-break so neighbors agree on shared edges
            key = (l2, e)
            if best is None or key > (blen, best):
                best, blen = e, l2
        return best

    def _neighbor(self, t, e):
        for o in self.edge2tris.get(e, ()):
            if o != t and self.alive[o]:
                return o
        return None

    def _midpoint(self, e):
        a, b = e
        on_boundary = len([o for o in self.edge2tris.get(e, ()) if self.alive[o]]) == 1
        pa, pb = self.verts[a], self.verts[b]
        if (on_boundary and self.domain is not None and self.domain.curved
                and np.isfinite(self.params[a]) and np.isfinite(self.params[b])):
            ta, tb = self.params[a], self.params[b]
            dt = (tb - ta) % (2 * math.pi)
            if dt > math.pi:
                dt -= 2 * math.pi
            tm = (ta + dt / 2) % (2 * math.pi)
            p = tuple(self.domain.boundary_point(tm))
            param = tm
        else:
            p = ((pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2)
            param = np.nan
        self.verts.append(p)
        self.params.append(param if on_boundary else np.nan)
        self.bnd.append(bool(on_boundary))
        if len(self.verts) > self.cap:
            raise MeshTooFine(f"vertex count exceeded cap {self.cap}")
        return len(self.verts) - 1

    def _add_tri(self, tri):
        self.tris.append(tri)
        self.alive.append(True)
        t = len(self.tris) - 1
        for e in self._edges(tri):
            self.edge2tris.setdefault(e, []).append(t)
        return t

    def _split(self, t, e, mid):
        """Replace triangle t by its two children across edge e; return them."""
        tri = self.tris[t]
        a, b = e
        c = [v for v in tri if v not in e][0]
        # keep orientation: children inherit the parent's vertex order
        order = list(tri)
        ia, ib = order.index(a), order.index(b)
        child1 = list(tri)
        child1[ib] = mid
        child2 = list(tri)
        child2[ia] = mid
        self.alive[t] = False
        return self._add_tri(tuple(child1)), self._add_tri(tuple(child2))

    def bisect(self, t):
        """Bisect triangle t at its longest edge, closing non-conformities."""
        stack = [t]
        children_of_t = None
        while stack:
            cur = stack[-1]
            if not self.alive[cur]:
                stack.pop()
                continue
            e = self._longest_edge(cur)
            nb = self._neighbor(cur, e)
            if nb is not None and self._longest_edge(nb) != e:
                stack.append(nb)
                continue
            mid = self._midpoint(e)
            c1, c2 = self._split(cur, e, mid)
            if nb is not None:
                self._split(nb, e, mid)
            if cur == t:
                children_of_t = (c1, c2)
            stack.pop()
        return children_of_t

    def to_mesh(self) -> TriMesh:
        tris = [tri for tri, ok in zip(self.tris, self.alive) if ok]
        return TriMesh(np.array(self.verts), np.array(tris, np.int64),
                       np.array(self.bnd, bool), domain=self.domain,
                       boundary_param=np.array(self.params))


def bisect_marked(mesh: TriMesh, marked, vertex_cap: int = DEFAULT_VERTEX_CAP,
                  depth: int = 1) -> TriMesh:
    """Bisect each marked triangle ``depth`` generations (with closure)."""
    ref = _Refiner(mesh, vertex_cap)
    frontier = list(marked)
    for _ in range(depth):
        next_frontier = []
        for t in frontier:
            if not ref.alive[t]:
                continue
            children = ref.bisect(t)
            if children:
                next_frontier.extend(children)
        frontier = next_frontier
    return ref.to_mesh()


def _tri_ball_hits(mesh: TriMesh, center, radius) -> np.ndarray:
    """Indices of triangles whose closest point to ``center`` is within radius."""
    c = np.asarray(center, float)
    coords = mesh.tri_coords()
    # distance from c to each triangle: min over the three edges and vertices,
    # zero if c is inside the triangle
    d = np.full(len(coords), np.inf)
    for k in range(3):
        a = coords[:, k]
        b = coords[:, (k + 1) % 3]
        ab = b - a
        tt = np.clip(((c - a) * ab).sum(1) / np.maximum((ab ** 2).sum(1), 1e-300), 0, 1)
        proj = a + tt[:, None] * ab
        d = np.minimum(d, np.hypot(*(proj - c).T))
    def cross2(u, v):
        return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]

    s1 = cross2(coords[:, 1] - coords[:, 0], c - coords[:, 0])
    s2 = cross2(coords[:, 2] - coords[:, 1], c - coords[:, 1])
    s3 = cross2(coords[:, 0] - coords[:, 2], c - coords[:, 2])
    inside = (s1 >= 0) & (s2 >= 0) & (s3 >= 0)
    d[inside] = 0.0
    return np.nonzero(d <= radius)[0]


def refine_near(mesh: TriMesh, center, radius: float, levels: int,
                vertex_cap: int = DEFAULT_VERTEX_CAP) -> TriMesh:
    """Quarter every triangle meeting ``B_radius(center)``, ``levels`` times."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if mesh.domain is not None and not mesh.domain.contains(np.asarray(center)):
        raise CenterOutsideDomain(f"center {center} outside domain")
    out = mesh
    for _ in range(levels):
        marked = _tri_ball_hits(out, center, radius)
        out = bisect_marked(out, marked, vertex_cap=vertex_cap, depth=2)
    return out


def _smooth(mesh: TriMesh, iters: int = 30) -> TriMesh:
    """Laplacian smoothing of interior vertices (boundary held fixed)."""
    import scipy.sparse as sp

    n = mesh.n_vertices
    t = mesh.triangles
    pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    adj.data[:] = 1.0  # dedupe multiplicity
    adj = (adj > 0).astype(float)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    v = mesh.vertices.copy()
    interior = ~mesh.boundary_vertex
    for _ in range(iters):
        avg = adj @ v / deg[:, None]
        v[interior] = avg[interior]
    out = TriMesh(v, mesh.triangles, mesh.boundary_vertex, domain=mesh.domain,
                  boundary_param=mesh.boundary_param)
    # smoothing of a valid mesh can only fail for pathological inputs
    if not (out.signed_areas() > 0).all():
        return mesh
    return out


# ---------------------------------------------------------------------------
# mesh builder
# ---------------------------------------------------------------------------

def build_mesh(domain: DomainSpec, target_h: float,
               vertex_cap: int = DEFAULT_VERTEX_CAP) -> TriMesh:
    """Structured base grid refined until max circumdiameter <= 2*target_h."""
    if not (0 < target_h < domain.diameter):
        raise InvalidDomain("target_h must be in (0, diameter)")
    if domain.kind == "unit_disk" or domain.kind == "ellipse":
        a = b = 1.0
        if domain.kind == "ellipse":
            a, b = domain.semi_axis_a, domain.semi_axis_b
        n_rings = max(4, math.ceil(1.3 * max(a, b) / target_h))
        if 1 + 4 * n_rings * (n_rings + 1) > vertex_cap:
            raise MeshTooFine("disk ring count would exceed vertex cap")
        verts, tris, bnd, params = _disk_base(n_rings, a, b)
        mesh = TriMesh(verts, tris, bnd, domain=domain, boundary_param=params)
    elif domain.kind == "rectangle":
        nx = max(1, math.ceil(domain.width / target_h))
        ny = max(1, math.ceil(domain.height / target_h))
        if (nx + 1) * (ny + 1) > vertex_cap:
            raise MeshTooFine("rectangle grid would exceed vertex cap")
        verts, tris, bnd, params = _rect_base(domain.width, domain.height, nx, ny)
        mesh = TriMesh(verts, tris, bnd, domain=domain, boundary_param=params)
    else:
        v = np.asarray(domain.vertices, float)
        tris = _ear_clip(v)
        bnd = np.ones(len(v), bool)
        mesh = TriMesh(v, tris, bnd, domain=domain)
    # closure loop: bisect whatever still exceeds the circumdiameter target
    for _ in range(200):
        bad = np.nonzero(mesh.circumdiameters() > 2 * target_h)[0]
        if len(bad) == 0:
            break
        mesh = bisect_marked(mesh, bad, vertex_cap=vertex_cap)
    # tensor rectangle grids are already optimal; smoothing the rest
    if domain.kind == "rectangle":
        return mesh
    return _smooth(mesh)
