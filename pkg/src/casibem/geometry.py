"""Triangle surface meshes, RWG basis construction and local surface frames.

Meshes are watertight, consistently outward-oriented triangle soups with an
integer object tag per triangle.  All downstream machinery (impedance
assembly, source placement, pressure integration) works off the connectivity
and frames built here.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .triquad import triangle_rule

__all__ = [
    "Mesh",
    "RwgFunction",
    "BasisSet",
    "Frame",
    "MeshError",
    "load_mesh",
    "generate_sphere",
    "generate_capsule",
    "build_rwg",
    "quadrature_points",
    "merge_meshes",
]

# rejects numerically useless elements before assembly
DEGENERATE_AREA_FACTOR = 1e-12


class MeshError(ValueError):
    """Raised for malformed meshes: non-manifold edges, open surfaces, ..."""


@dataclass(frozen=True)
class Frame:
    """Orthonormal surface frame (u, v, n) with u x v = n."""

    origin: np.ndarray
    n: np.ndarray
    u: np.ndarray
    v: np.ndarray


@dataclass
class Mesh:
    """Watertight triangle mesh.

    vertices : (nv, 3) float array
    triangles : (nt, 3) int array, outward-oriented (right-hand rule)
    object_id : (nt,) int array, one tag per connected component / body
    """

    vertices: np.ndarray
    triangles: np.ndarray
    object_id: np.ndarray

    # derived, filled by __post_init__
    areas: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)
    centroids: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.object_id = np.asarray(self.object_id, dtype=np.int64)
        p0, p1, p2 = (self.vertices[self.triangles[:, i]] for i in range(3))
        cross = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(cross, axis=1)
        self.areas = 0.5 * norm
        self.normals = cross / norm[:, None]
        self.centroids = (p0 + p1 + p2) / 3.0

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def triangle_vertices(self, t: int) -> np.ndarray:
        return self.vertices[self.triangles[t]]

    def edge_lengths(self) -> np.ndarray:
        """Per-triangle mean edge length (the local resolution scale h)."""
        p0, p1, p2 = (self.vertices[self.triangles[:, i]] for i in range(3))
        e = (np.linalg.norm(p1 - p0, axis=1)
             + np.linalg.norm(p2 - p1, axis=1)
             + np.linalg.norm(p0 - p2, axis=1))
        return e / 3.0

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def total_area(self) -> float:
        return float(self.areas.sum())

    def signed_volume(self, object_id: int | None = None) -> float:
        """Signed volume from the divergence theorem; > 0 when outward."""
        tris = self.triangles
        if object_id is not None:
            tris = tris[self.object_id == object_id]
        p0, p1, p2 = (self.vertices[tris[:, i]] for i in range(3))
        return float(np.einsum("ij,ij->", p0, np.cross(p1, p2)) / 6.0)

    def translated(self, offset) -> "Mesh":
        return Mesh(self.vertices + np.asarray(offset, dtype=float),
                    self.triangles.copy(), self.object_id.copy())

    def rotated(self, matrix) -> "Mesh":
        R = np.asarray(matrix, dtype=float)
        return Mesh(self.vertices @ R.T, self.triangles.copy(),
                    self.object_id.copy())

    def scaled(self, s: float) -> "Mesh":
        return Mesh(self.vertices * float(s), self.triangles.copy(),
                    self.object_id.copy())


@dataclass(frozen=True)
class RwgFunction:
    """One RWG function: an interior edge with its two adjacent triangles.

    The surface current is l/(2A+) (r - v+) on the plus triangle and
    -l/(2A-) (r - v-) on the minus one; the normal component l is continuous
    across the edge.
    """

    edge: tuple[int, int]
    plus_triangle: int
    minus_triangle: int
    edge_length: float
    plus_free_vertex: int
    minus_free_vertex: int


@dataclass
class BasisSet:
    """RWG basis over a mesh; one function per interior edge."""

    mesh: Mesh
    functions: list[RwgFunction]

    # per-function index arrays for vectorized assembly
    plus_tri: np.ndarray = field(init=False, repr=False)
    minus_tri: np.ndarray = field(init=False, repr=False)
    plus_free: np.ndarray = field(init=False, repr=False)
    minus_free: np.ndarray = field(init=False, repr=False)
    lengths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.plus_tri = np.array([f.plus_triangle for f in self.functions])
        self.minus_tri = np.array([f.minus_triangle for f in self.functions])
        self.plus_free = np.array([f.plus_free_vertex for f in self.functions])
        self.minus_free = np.array([f.minus_free_vertex for f in self.functions])
        self.lengths = np.array([f.edge_length for f in self.functions])

    @property
    def count(self) -> int:
        return len(self.functions)

    def triangle_supports(self):
        """For each triangle, list of (basis index, sign) supported on it."""
        supports: list[list[tuple[int, int]]] = [
            [] for _ in range(self.mesh.num_triangles)
        ]
        for m, f in enumerate(self.functions):
            supports[f.plus_triangle].append((m, +1))
            supports[f.minus_triangle].append((m, -1))
        return supports

    def object_of_function(self) -> np.ndarray:
        return self.mesh.object_id[self.plus_tri]


def _validate_and_orient(vertices, triangles) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """Check manifoldness, split into components, orient outward.

    Returns (triangles, object_id, components, flipped_any).
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    nt = len(triangles)
    if nt == 0:
        raise MeshError("mesh has no triangles")

    # degenerate-element rejection relative to the bounding box diagonal
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    diag2 = float(np.sum((hi - lo) ** 2))
    p0, p1, p2 = (vertices[triangles[:, i]] for i in range(3))
    areas = 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)
    bad = np.nonzero(areas <= DEGENERATE_AREA_FACTOR * diag2)[0]
    if bad.size:
        raise MeshError(f"degenerate triangle(s): indices {bad.tolist()[:8]}")

    # edge -> incident (triangle, local edge) map
    edge_map: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for t, tri in enumerate(triangles):
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            key = (a, b) if a < b else (b, a)
            edge_map.setdefault(key, []).append((t, k))
    for key, inc in edge_map.items():
        if len(inc) != 2:
            raise MeshError(
                f"edge {key} is shared by {len(inc)} triangle(s); "
                "mesh must be closed and manifold")

    # connected components over shared edges
    comp = np.full(nt, -1, dtype=np.int64)
    n_comp = 0
    adjacency: list[list[int]] = [[] for _ in range(nt)]
    for inc in edge_map.values():
        (t1, _), (t2, _) = inc
        adjacency[t1].append(t2)
        adjacency[t2].append(t1)
    for seed in range(nt):
        if comp[seed] >= 0:
            continue
        stack = [seed]
        comp[seed] = n_comp
        while stack:
            t = stack.pop()
            for t2 in adjacency[t]:
                if comp[t2] < 0:
                    comp[t2] = n_comp
                    stack.append(t2)
        n_comp += 1

    # consistent orientation within each component: each shared edge must be
    # traversed in opposite directions by its two triangles
    oriented = triangles.copy()
    seen = np.zeros(nt, dtype=bool)
    for seed in range(nt):
        if seen[seed]:
            continue
        seen[seed] = True
        stack = [seed]
        while stack:
            t = stack.pop()
            tri_t = oriented[t]
            dirs = {}
            for k in range(3):
                a, b = int(tri_t[k]), int(tri_t[(k + 1) % 3])
                dirs[(min(a, b), max(a, b))] = (a, b)
            for key, (a, b) in dirs.items():
                for t2, _ in edge_map[key]:
                    if t2 == t or seen[t2]:
                        continue
                    tri2 = oriented[t2]
                    same_dir = any(
                        (int(tri2[k]), int(tri2[(k + 1) % 3])) == (a, b)
                        for k in range(3))
                    if same_dir:
                        oriented[t2] = oriented[t2][::-1]
                    seen[t2] = True
                    stack.append(t2)

    # outward orientation: positive signed volume per component
    flipped = False
    for c in range(n_comp):
        sel = comp == c
        q0, q1, q2 = (vertices[oriented[sel][:, i]] for i in range(3))
        vol = np.einsum("ij,ij->", q0, np.cross(q1, q2)) / 6.0
        if vol < 0:
            oriented[sel] = oriented[sel][:, ::-1]
            flipped = True
        elif vol == 0:
            raise MeshError(f"component {c} has zero signed volume")

    return oriented, comp, flipped


def load_mesh(path) -> Mesh:
    """Load a Wavefront OBJ file (v/f records, triangles only).

    Object tags are assigned per connected component.  Inward-oriented
    components are flipped with a warning.
    """
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshError(
                        f"non-triangular face with {len(idx)} vertices in {path}")
                faces.append([i - 1 for i in idx])
    if not vertices or not faces:
        raise MeshError(f"no usable v/f records in {path}")
    tris, comp, flipped = _validate_and_orient(np.array(vertices, dtype=float),
                                               np.array(faces, dtype=np.int64))
    if flipped:
        import warnings
        warnings.warn(f"{path}: inward-oriented component(s) were flipped",
                      stacklevel=2)
    return Mesh(np.array(vertices, dtype=float), tris, comp)


def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts[0])
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return verts, faces


def generate_sphere(radius: float, subdivisions: int) -> Mesh:
    """Icosphere: subdivided icosahedron, 20 * 4**s triangles.

    An inscribed polyhedron (vertices on the sphere) systematically
    under-represents the body: its volume and static response are low by
    O(h^2) with a sizeable constant.  The vertices are therefore placed
    slightly outside the nominal radius so the enclosed volume equals that
    of the target sphere, which cancels the leading faceting bias in
    scattering and force quantities.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if subdivisions < 0:
        raise ValueError("subdivisions must be >= 0")
    verts, faces = _icosahedron()
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
        verts /= np.linalg.norm(verts, axis=1)[:, None]
    verts = verts * radius
    tris, comp, _ = _validate_and_orient(verts, faces)
    mesh = Mesh(verts, tris, comp)
    scale = (4.0 / 3.0 * np.pi * radius ** 3
             / mesh.signed_volume()) ** (1.0 / 3.0)
    return mesh.scaled(scale)


def _subdivide(verts, faces):
    verts = list(map(tuple, verts))
    cache: dict[tuple[int, int], int] = {}

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            va, vb = np.array(verts[a]), np.array(verts[b])
            verts.append(tuple((va + vb) / 2.0))
            cache[key] = len(verts) - 1
        return cache[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
    return np.array(verts, dtype=float), np.array(new_faces, dtype=np.int64)


def generate_capsule(radius: float, length: float, refinement: int = 16,
                     axis: str = "z") -> Mesh:
    """Capsule: cylinder of radius R with hemispherical caps, total length L.

    refinement sets the number of azimuthal segments; polar/axial band counts
    follow it so elements stay roughly isotropic.  L = 2R degenerates to a
    sphere (UV tessellation).  As with generate_sphere, the mesh is scaled
    so the enclosed volume matches the exact capsule, cancelling the
    leading inscribed-faceting bias.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if length < 2 * radius:
        raise ValueError("capsule length must satisfy L >= 2R (caps overlap)")
    if refinement < 3:
        raise ValueError("refinement must be >= 3")

    n_az = int(refinement)
    n_pol = max(2, n_az // 4)              # latitude bands per hemisphere
    cyl_len = length - 2 * radius
    band_h = np.pi * radius / (2 * n_pol)  # cap band height, axial target
    n_cyl = max(1, int(round(cyl_len / band_h))) if cyl_len > 0 else 0

    # ring latitudes: south cap, cylinder, north cap; capsule axis = z
    z_bot, z_top = -cyl_len / 2.0, cyl_len / 2.0
    south = []                              # (z, ring radius), pole excluded
    for i in range(1, n_pol + 1):
        th = np.pi / 2.0 * i / n_pol
        south.append((z_bot - radius * np.cos(th), radius * np.sin(th)))
    cylinder = [(z_bot + cyl_len * j / n_cyl, radius)
                for j in range(1, n_cyl + 1)] if cyl_len > 0 else []
    north = [(-z, r) for (z, r) in reversed(south[:-1])]
    if cyl_len == 0:
        # the equator ring doubles as both cap rims
        rings = south + north
    else:
        rings = south + cylinder + north

    verts = [np.array([0.0, 0.0, z_bot - radius])]      # south pole
    ring_start = []
    angles = 2 * np.pi * np.arange(n_az) / n_az
    for z, r in rings:
        ring_start.append(len(verts))
        for a in angles:
            verts.append(np.array([r * np.cos(a), r * np.sin(a), z]))
    north_pole = len(verts)
    verts.append(np.array([0.0, 0.0, z_top + radius]))
    verts = np.array(verts)

    faces = []
    # south fan
    s0 = ring_start[0]
    for k in range(n_az):
        faces.append([0, s0 + k, s0 + (k + 1) % n_az])
    # bands
    for rlo, rhi in zip(ring_start[:-1], ring_start[1:]):
        for k in range(n_az):
            k2 = (k + 1) % n_az
            faces.append([rlo + k, rhi + k, rhi + k2])
            faces.append([rlo + k, rhi + k2, rlo + k2])
    # north fan
    sN = ring_start[-1]
    for k in range(n_az):
        faces.append([north_pole, sN + (k + 1) % n_az, sN + k])

    faces = np.array(faces, dtype=np.int64)
    if axis == "x":
        verts = verts[:, [2, 0, 1]]
    elif axis == "y":
        verts = verts[:, [1, 2, 0]]
    elif axis != "z":
        raise ValueError("axis must be one of x, y, z")
    tris, comp, _ = _validate_and_orient(verts, faces)
    mesh = Mesh(verts, tris, comp)
    exact = (np.pi * radius ** 2 * cyl_len
             + 4.0 / 3.0 * np.pi * radius ** 3)
    return mesh.scaled((exact / mesh.signed_volume()) ** (1.0 / 3.0))


def merge_meshes(meshes: list[Mesh]) -> Mesh:
    """Concatenate disjoint meshes, re-tagging object ids sequentially."""
    verts, tris, oid = [], [], []
    v_off, o_off = 0, 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + v_off)
        oid.append(m.object_id + o_off)
        v_off += m.num_vertices
        o_off += int(m.object_id.max()) + 1
    return Mesh(np.vstack(verts), np.vstack(tris), np.concatenate(oid))


def build_rwg(mesh: Mesh) -> BasisSet:
    """One RWG function per interior edge, deterministically ordered.

    Functions are sorted by (min vertex, max vertex) of the edge; the lower
    triangle index takes the plus sign.
    """
    edge_map: dict[tuple[int, int], list[int]] = {}
    for t, tri in enumerate(mesh.triangles):
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            key = (a, b) if a < b else (b, a)
            edge_map.setdefault(key, []).append(t)

    functions = []
    for (a, b) in sorted(edge_map):
        inc = edge_map[(a, b)]
        if len(inc) != 2:
            raise MeshError(f"edge ({a}, {b}) is not interior; open meshes "
                            "are unsupported")
        tp, tm = sorted(inc)
        length = float(np.linalg.norm(mesh.vertices[a] - mesh.vertices[b]))
        fp = int(next(v for v in mesh.triangles[tp] if v not in (a, b)))
        fm = int(next(v for v in mesh.triangles[tm] if v not in (a, b)))
        functions.append(RwgFunction((a, b), tp, tm, length, fp, fm))
    return BasisSet(mesh, functions)


_LEAST_ALIGNED_AXES = np.eye(3)


def frame_for_normal(origin: np.ndarray, n: np.ndarray) -> Frame:
    """Deterministic tangent pair: u = normalize(n x e), v = n x u, with e
    the global axis least parallel to n.  Then u x v = n."""
    e = _LEAST_ALIGNED_AXES[np.argmin(np.abs(n))]
    u = np.cross(n, e)
    u = u / np.linalg.norm(u)
    v = np.cross(n, u)
    return Frame(origin=np.asarray(origin, dtype=float), n=n, u=u, v=v)


def quadrature_points(mesh: Mesh, rule: str = "centroid"):
    """Surface quadrature points with weights and frames.

    rule: "centroid" or "gauss-N" with N in 1..5 (symmetric rules of degree
    N on each triangle).  Weights sum to the total mesh area.
    """
    if rule == "centroid":
        bary, w = triangle_rule(1)
    elif rule.startswith("gauss-"):
        degree = int(rule.split("-", 1)[1])
        if not 1 <= degree <= 5:
            raise ValueError("supported Gauss rules: gauss-1 .. gauss-5")
        bary, w = triangle_rule(degree)
    else:
        raise ValueError(f"unknown quadrature rule: {rule!r}")

    out = []
    for t in range(mesh.num_triangles):
        p = mesh.triangle_vertices(t)
        n = mesh.normals[t]
        for lam, wt in zip(bary, w):
            pt = lam @ p
            out.append((pt, float(wt * mesh.areas[t]),
                        frame_for_normal(pt, n)))
    return out
