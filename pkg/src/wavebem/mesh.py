"""Triangulated skeleton meshes for two-subdomain transmission problems.

A skeleton mesh carries the union of the subdomain boundaries.  Each flat
triangle knows which subdomain(s) it bounds and which boundary part it
belongs to:

* ``D`` -- Dirichlet part of the outer boundary,
* ``N`` -- Neumann part,
* ``I`` -- impedance part,
* ``J`` -- interface between the two subdomains.

Interface triangles are stored once and referenced by both subdomain
boundaries with opposite orientation.  The stored winding of a triangle
defines the skeleton normal ``n_sigma``; on the interface this equals the
outward normal of subdomain 1, so the orientation sign (the inner product
of the subdomain outward normal with ``n_sigma``) is +1 everywhere except
for subdomain 2 on the interface, where it is -1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Subdomain tags: 1, 2, or 12 for triangles shared by both subdomains.
SUBDOMAIN_BOTH = 12
VALID_SUBDOMAINS = (1, 2, SUBDOMAIN_BOTH)
VALID_PARTS = ("D", "N", "I", "J")

# Physical-id map used by the Gmsh MSH 2.2 reader/writer:
# id = 10 * subdomain + part code.
PART_CODES = {"D": 0, "N": 1, "I": 2, "J": 3}
CODE_PARTS = {v: k for k, v in PART_CODES.items()}

# Triangle quality floor (twice inradius over circumradius, 1 = equilateral).
QUALITY_FLOOR = 0.2

_SPHERE_TOL = 1e-9


@dataclass
class MaterialParams:
    """Wave speeds ``a_i`` and slowness-like densities ``p_i`` per subdomain.

    The Laplace-domain kernel of subdomain ``i`` decays like
    ``exp(-s p_i r / a_i) / (4 pi a_i^2 r)``, so only the positive
    constants ``a_i`` and ``p_i`` enter the operators.
    """

    a1: float = 1.0
    p1: float = 1.0
    a2: float = 1.0
    p2: float = 1.0

    def validate(self) -> None:
        for name in ("a1", "p1", "a2", "p2"):
            value = getattr(self, name)
            if not (value > 0.0):
                raise ValueError(f"material parameter {name} must be positive, got {value}")

    def for_subdomain(self, j: int) -> Tuple[float, float]:
        """Return ``(a_j, p_j)`` for subdomain ``j`` in {1, 2}."""
        if j == 1:
            return self.a1, self.p1
        if j == 2:
            return self.a2, self.p2
        raise ValueError(f"subdomain index must be 1 or 2, got {j}")


@dataclass
class SurfaceMesh:
    """Flat-triangle skeleton mesh with subdomain and part tags.

    Attributes
    ----------
    vertices : (V, 3) float array
    triangles : (M, 3) int array
        Vertex indices; the winding defines the skeleton normal.
    subdomain : (M,) int array with values in {1, 2, 12}
    part : (M,) unicode array with values in {"D", "N", "I", "J"}
    surface_kind : str or None
        "sphere" or "split_ball" for builtin geometries; refinement
        projects new vertices back onto the analytic surface.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    subdomain: np.ndarray
    part: np.ndarray
    surface_kind: Optional[str] = None

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.subdomain = np.asarray(self.subdomain, dtype=np.int64)
        self.part = np.asarray(self.part, dtype="<U1")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def validate(self) -> None:
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be a (V, 3) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must be a (M, 3) array")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= self.n_vertices
        ):
            raise ValueError("triangle vertex index out of range")
        if self.subdomain.shape != (self.n_triangles,):
            raise ValueError("subdomain tag array has wrong shape")
        if self.part.shape != (self.n_triangles,):
            raise ValueError("part tag array has wrong shape")
        bad = set(np.unique(self.subdomain)) - set(VALID_SUBDOMAINS)
        if bad:
            raise ValueError(f"invalid subdomain tags: {sorted(bad)}")
        bad = set(np.unique(self.part)) - set(VALID_PARTS)
        if bad:
            raise ValueError(f"invalid part tags: {sorted(bad)}")
        # Interface triangles are exactly the ones bounding both subdomains.
        is_both = self.subdomain == SUBDOMAIN_BOTH
        is_j = self.part == "J"
        if not np.array_equal(is_both, is_j):
            raise ValueError('part "J" must coincide with subdomain tag 12')

    def triangle_coords(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape (M, 3, 3)."""
        return self.vertices[self.triangles]

    def triangle_normals_areas(self) -> Tuple[np.ndarray, np.ndarray]:
        """Unit skeleton normals (from the winding) and areas."""
        coords = self.triangle_coords()
        cross = np.cross(coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0])
        norms = np.linalg.norm(cross, axis=1)
        if np.any(norms <= 0.0):
            raise ValueError("degenerate triangle with zero area")
        return cross / norms[:, None], 0.5 * norms

    def centroids(self) -> np.ndarray:
        return self.triangle_coords().mean(axis=1)

    def areas_by_part(self) -> Dict[str, float]:
        _, areas = self.triangle_normals_areas()
        return {p: float(areas[self.part == p].sum()) for p in VALID_PARTS}

    def subdomains_present(self) -> Tuple[int, ...]:
        present = [1]
        if np.any(self.subdomain == 2) or np.any(self.subdomain == SUBDOMAIN_BOTH):
            present.append(2)
        return tuple(present)


# ---------------------------------------------------------------------------
# builtin geometries
# ---------------------------------------------------------------------------


def _dedup_builder():
    """Vertex store with exact-coordinate dedup for mesh construction."""
    verts: List[np.ndarray] = []
    index: Dict[Tuple[float, float, float], int] = {}

    def add(p: Sequence[float]) -> int:
        key = (round(float(p[0]), 14), round(float(p[1]), 14), round(float(p[2]), 14))
        if key in index:
            return index[key]
        idx = len(verts)
        verts.append(np.asarray(p, dtype=np.float64))
        index[key] = idx
        return idx

    return verts, add


def icosphere(level: int) -> SurfaceMesh:
    """Unit sphere from a subdivided icosahedron, 20 * 4**level triangles.

    Single subdomain, whole boundary tagged Dirichlet.  Windings give
    outward normals.
    """
    if level < 0:
        raise ValueError("subdivision level must be >= 0")
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    raw = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=np.float64,
    )
    verts = raw / np.linalg.norm(raw, axis=1)[:, None]
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    mesh = SurfaceMesh(
        vertices=verts,
        triangles=faces,
        subdomain=np.ones(len(faces), dtype=np.int64),
        part=np.full(len(faces), "D"),
        surface_kind="sphere",
    )
    for _ in range(level):
        mesh = refine(mesh)
    return mesh


def split_ball(level: int, theta_d: float = np.pi / 3.0, theta_n: float = 2.0 * np.pi / 3.0) -> SurfaceMesh:
    """Unit ball cut by the equatorial disk into two half-ball subdomains.

    The sphere comes from a subdivided octahedron (8 * 4**level triangles)
    so the equator is resolved exactly; the interface disk (4 * 4**level
    triangles) reuses the equator vertices.  Sphere triangles are tagged by
    centroid polar angle: ``D`` for theta < theta_d, ``I`` for
    theta_d <= theta <= theta_n, ``N`` beyond.  Disk triangles are the
    interface ``J`` shared by both subdomains; their stored winding points
    out of subdomain 1 (the upper half ball), i.e. along -z.
    """
    if level < 0:
        raise ValueError("subdivision level must be >= 0")
    if not (0.0 < theta_d < theta_n < np.pi):
        raise ValueError("need 0 < theta_d < theta_n < pi")

    verts, add = _dedup_builder()
    ex, ey, ez = np.eye(3)
    top = [(ex, ey, ez), (ey, -ex, ez), (-ex, -ey, ez), (-ey, ex, ez)]
    bot = [(ey, ex, -ez), (ex, -ey, -ez), (-ey, -ex, -ez), (-ex, ey, -ez)]
    tris: List[Tuple[int, int, int]] = []
    for a, b, c in top + bot:
        tris.append((add(a), add(b), add(c)))

    def subdivide_sphere(tris_in: List[Tuple[int, int, int]]) -> List[Tuple[int, int, int]]:
        out: List[Tuple[int, int, int]] = []
        for i0, i1, i2 in tris_in:
            p0, p1, p2 = verts[i0], verts[i1], verts[i2]
            m01 = (p0 + p1) / 2.0
            m12 = (p1 + p2) / 2.0
            m20 = (p2 + p0) / 2.0
            j01 = add(m01 / np.linalg.norm(m01))
            j12 = add(m12 / np.linalg.norm(m12))
            j20 = add(m20 / np.linalg.norm(m20))
            out.extend(
                [(i0, j01, j20), (i1, j12, j01), (i2, j20, j12), (j01, j12, j20)]
            )
        return out

    for _ in range(level):
        tris = subdivide_sphere(tris)

    n_rings = 2 ** level
    # The boundary ring of the disk reuses the equator vertices laid down by
    # the sphere subdivision (no re-derivation, so dedup cannot misfire).
    arr = np.array(verts)
    eq = np.flatnonzero(
        (np.abs(arr[:, 2]) < _SPHERE_TOL)
        & (np.abs(np.linalg.norm(arr, axis=1) - 1.0) < _SPHERE_TOL)
    )
    if eq.size != 4 * n_rings:
        raise RuntimeError(f"expected {4 * n_rings} equator vertices, found {eq.size}")
    order = np.argsort(np.arctan2(arr[eq, 1], arr[eq, 0]) % (2.0 * np.pi))
    equator = [int(i) for i in eq[order]]

    ring_ids: List[List[int]] = [[add((0.0, 0.0, 0.0))]]
    for k in range(1, n_rings):
        r = k / n_rings
        angles = 2.0 * np.pi * np.arange(4 * k) / (4 * k)
        ring_ids.append([add((r * np.cos(t), r * np.sin(t), 0.0)) for t in angles])
    ring_ids.append(equator)

    disk: List[Tuple[int, int, int]] = []
    # winding chosen so the disk normal points along -z (out of subdomain 1)
    center = ring_ids[0][0]
    for j in range(4):
        o0, o1 = ring_ids[1][j], ring_ids[1][(j + 1) % len(ring_ids[1])]
        disk.append((center, o1, o0))
    for k in range(1, n_rings):
        inner, outer = ring_ids[k], ring_ids[k + 1]
        ni, no = len(inner), len(outer)
        for q in range(4):
            # quadrant q spans k inner segments and k+1 outer segments
            ii = [inner[(q * k + t) % ni] for t in range(k + 1)]
            oo = [outer[(q * (k + 1) + t) % no] for t in range(k + 2)]
            # two-pointer stitch; both branches wind clockwise seen from +z
            a = b = 0
            while a < k or b < k + 1:
                if b < k + 1 and (a == k or (b + 0.5) / (k + 1) <= (a + 0.5) / k):
                    disk.append((oo[b], ii[a], oo[b + 1]))
                    b += 1
                else:
                    disk.append((ii[a], ii[a + 1], oo[b]))
                    a += 1

    vertices = np.array(verts)
    sphere_tris = np.array(tris, dtype=np.int64)
    disk_tris = np.array(disk, dtype=np.int64)
    triangles = np.vstack([sphere_tris, disk_tris])

    cen = vertices[sphere_tris].mean(axis=1)
    sub_sphere = np.where(cen[:, 2] > 0.0, 1, 2).astype(np.int64)
    theta = np.arccos(np.clip(cen[:, 2] / np.linalg.norm(cen, axis=1), -1.0, 1.0))
    part_sphere = np.full(len(sphere_tris), "N", dtype="<U1")
    part_sphere[theta <= theta_n] = "I"
    part_sphere[theta < theta_d] = "D"

    subdomain = np.concatenate(
        [sub_sphere, np.full(len(disk_tris), SUBDOMAIN_BOTH, dtype=np.int64)]
    )
    part = np.concatenate([part_sphere, np.full(len(disk_tris), "J", dtype="<U1")])
    mesh = SurfaceMesh(vertices, triangles, subdomain, part, surface_kind="split_ball")
    mesh.validate()
    return mesh


def generate_builtin(name: str, level: int, **params) -> SurfaceMesh:
    """Dispatch to a builtin geometry by name ("icosphere" or "split_ball")."""
    if name == "icosphere":
        if params:
            raise ValueError(f"icosphere takes no extra parameters, got {sorted(params)}")
        return icosphere(level)
    if name == "split_ball":
        known = {"theta_d", "theta_n"}
        unknown = set(params) - known
        if unknown:
            raise ValueError(f"unknown split_ball parameters: {sorted(unknown)}")
        return split_ball(level, **params)
    raise ValueError(f"unknown builtin geometry {name!r}")


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------


def refine(mesh: SurfaceMesh) -> SurfaceMesh:
    """Quadrisect every triangle; children inherit the parent tags.

    New edge-midpoint vertices are shared through an edge cache, so the
    vertex count grows by exactly the number of global edges.  For builtin
    geometries the new vertices are projected back to the analytic
    surface: every midpoint of an edge whose endpoints both lie on the
    unit sphere is renormalized (equator midpoints stay on the equator, so
    the flat interface disk remains flat).
    """
    verts = [v.copy() for v in mesh.vertices]
    on_sphere = np.abs(np.linalg.norm(mesh.vertices, axis=1) - 1.0) < _SPHERE_TOL
    project = mesh.surface_kind in ("sphere", "split_ball")
    midpoint: Dict[Tuple[int, int], int] = {}

    def mid(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        if key in midpoint:
            return midpoint[key]
        p = (np.asarray(verts[i]) + np.asarray(verts[j])) / 2.0
        if project and on_sphere[i] and on_sphere[j]:
            p = p / np.linalg.norm(p)
        idx = len(verts)
        verts.append(p)
        midpoint[key] = idx
        return idx

    new_tris: List[Tuple[int, int, int]] = []
    new_sub: List[int] = []
    new_part: List[str] = []
    for t in range(mesh.n_triangles):
        i0, i1, i2 = (int(v) for v in mesh.triangles[t])
        m01, m12, m20 = mid(i0, i1), mid(i1, i2), mid(i2, i0)
        for tri in ((i0, m01, m20), (i1, m12, m01), (i2, m20, m12), (m01, m12, m20)):
            new_tris.append(tri)
            new_sub.append(int(mesh.subdomain[t]))
            new_part.append(str(mesh.part[t]))

    return SurfaceMesh(
        vertices=np.array(verts),
        triangles=np.array(new_tris, dtype=np.int64),
        subdomain=np.array(new_sub, dtype=np.int64),
        part=np.array(new_part, dtype="<U1"),
        surface_kind=mesh.surface_kind,
    )


# ---------------------------------------------------------------------------
# subdomain surfaces and orientation
# ---------------------------------------------------------------------------


def orientation_sign(mesh: SurfaceMesh, j: int, triangle: int) -> int:
    """Inner product sign of subdomain ``j``'s outward normal with ``n_sigma``.

    +1 on the outer boundary, and on the interface +1 for subdomain 1,
    -1 for subdomain 2 (the skeleton normal is fixed to point out of
    subdomain 1 there).
    """
    tag = int(mesh.subdomain[triangle])
    if j not in (1, 2):
        raise ValueError(f"subdomain index must be 1 or 2, got {j}")
    if tag == SUBDOMAIN_BOTH:
        return 1 if j == 1 else -1
    if tag != j:
        raise ValueError(f"triangle {triangle} does not bound subdomain {j}")
    return 1


@dataclass
class SubdomainSurface:
    """Closed oriented boundary of one subdomain, extracted from a skeleton.

    Triangles are re-wound so the stored normals all point out of the
    subdomain (interface triangles are flipped for subdomain 2).  P0
    degrees of freedom follow the local triangle order, P1 degrees of
    freedom the sorted global vertex ids.
    """

    subdomain_index: int
    vertices: np.ndarray              # (Vl, 3) coordinates
    triangles: np.ndarray             # (Ml, 3) local vertex indices
    global_vertex_ids: np.ndarray     # (Vl,) into the skeleton mesh
    global_triangle_ids: np.ndarray   # (Ml,)
    normals: np.ndarray               # (Ml, 3) outward unit normals
    areas: np.ndarray                 # (Ml,)
    part: np.ndarray                  # (Ml,) part tags
    orientation: np.ndarray           # (Ml,) +-1 vs the skeleton normal

    @property
    def n_p0(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_p1(self) -> int:
        return self.vertices.shape[0]

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def diameters(self) -> np.ndarray:
        coords = self.vertices[self.triangles]
        e = np.stack(
            [
                np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1),
                np.linalg.norm(coords[:, 2] - coords[:, 1], axis=1),
                np.linalg.norm(coords[:, 0] - coords[:, 2], axis=1),
            ]
        )
        return e.max(axis=0)


def subdomain_surface(mesh: SurfaceMesh, j: int) -> SubdomainSurface:
    """Extract the closed boundary surface of subdomain ``j``."""
    if j not in (1, 2):
        raise ValueError(f"subdomain index must be 1 or 2, got {j}")
    mask = (mesh.subdomain == j) | (mesh.subdomain == SUBDOMAIN_BOTH)
    tri_ids = np.flatnonzero(mask)
    if tri_ids.size == 0:
        raise ValueError(f"mesh has no triangles bounding subdomain {j}")
    tris = mesh.triangles[tri_ids].copy()
    signs = np.ones(len(tri_ids), dtype=np.int64)
    if j == 2:
        flip = mesh.subdomain[tri_ids] == SUBDOMAIN_BOTH
        tris[flip] = tris[flip][:, [0, 2, 1]]
        signs[flip] = -1

    gids = np.unique(tris)
    local = np.full(mesh.n_vertices, -1, dtype=np.int64)
    local[gids] = np.arange(gids.size)
    ltris = local[tris]
    coords = mesh.vertices[gids]

    tc = coords[ltris]
    cross = np.cross(tc[:, 1] - tc[:, 0], tc[:, 2] - tc[:, 0])
    nrm = np.linalg.norm(cross, axis=1)
    if np.any(nrm <= 0.0):
        raise ValueError("degenerate triangle in subdomain surface")

    return SubdomainSurface(
        subdomain_index=j,
        vertices=coords,
        triangles=ltris,
        global_vertex_ids=gids,
        global_triangle_ids=tri_ids,
        normals=cross / nrm[:, None],
        areas=0.5 * nrm,
        part=mesh.part[tri_ids].copy(),
        orientation=signs,
    )


def merge_subdomains(mesh: SurfaceMesh) -> Tuple[SurfaceMesh, np.ndarray, np.ndarray]:
    """Drop interface triangles and fuse the subdomains into one.

    Returns the merged mesh plus index maps: ``vertex_map[new] = old`` and
    ``triangle_map[new] = old``.  Used to compare a two-subdomain solve
    with identical materials against the plain single-domain solve on the
    common outer boundary.
    """
    keep = np.flatnonzero(mesh.subdomain != SUBDOMAIN_BOTH)
    tris = mesh.triangles[keep]
    gids = np.unique(tris)
    local = np.full(mesh.n_vertices, -1, dtype=np.int64)
    local[gids] = np.arange(gids.size)
    merged = SurfaceMesh(
        vertices=mesh.vertices[gids],
        triangles=local[tris],
        subdomain=np.ones(len(keep), dtype=np.int64),
        part=mesh.part[keep].copy(),
        surface_kind=mesh.surface_kind,
    )
    return merged, gids, keep


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass
class MeshValidationReport:
    n_vertices: int
    n_triangles: int
    parts: Dict[str, int]
    areas: Dict[str, float]
    subdomains: Tuple[int, ...]
    watertight: Dict[int, bool]
    oriented: Dict[int, bool]
    outward: Dict[int, bool]
    enclosed_volume: Dict[int, float]
    min_quality: float
    warnings: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            all(self.watertight.values())
            and all(self.oriented.values())
            and all(self.outward.values())
        )

    def lines(self) -> List[str]:
        out = [
            f"vertices            {self.n_vertices}",
            f"triangles           {self.n_triangles}",
            f"subdomains          {list(self.subdomains)}",
        ]
        for p in VALID_PARTS:
            out.append(f"part {p}: count {self.parts.get(p, 0):6d}  area {self.areas.get(p, 0.0):.6f}")
        for j in self.subdomains:
            out.append(
                f"subdomain {j}: watertight={self.watertight[j]} oriented={self.oriented[j]} "
                f"outward={self.outward[j]} volume={self.enclosed_volume[j]:.6f}"
            )
        out.append(f"min triangle quality {self.min_quality:.4f}")
        out.extend(f"warning: {w}" for w in self.warnings)
        return out


def _surface_topology_ok(surface: SubdomainSurface) -> Tuple[bool, bool]:
    """(watertight, consistently oriented) for one closed surface."""
    edges: Dict[Tuple[int, int], List[int]] = {}
    for tri in surface.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(min(a, b)), int(max(a, b)))
            edges.setdefault(key, []).append(1 if a < b else -1)
    watertight = all(len(v) == 2 for v in edges.values())
    oriented = watertight and all(v[0] + v[1] == 0 for v in edges.values())
    return watertight, oriented


def validate_mesh(mesh: SurfaceMesh) -> MeshValidationReport:
    """Structural checks: watertight, oriented, outward, tags, quality."""
    mesh.validate()
    _, areas = mesh.triangle_normals_areas()
    coords = mesh.triangle_coords()
    # quality: 2 r_in / r_circ = 4 * area^2 / (perimeter/2 * a*b*c ... )
    ea = np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)
    eb = np.linalg.norm(coords[:, 2] - coords[:, 1], axis=1)
    ec = np.linalg.norm(coords[:, 0] - coords[:, 2], axis=1)
    s = 0.5 * (ea + eb + ec)
    r_in = areas / s
    r_circ = ea * eb * ec / (4.0 * areas)
    quality = 2.0 * r_in / r_circ

    parts = {p: int(np.sum(mesh.part == p)) for p in VALID_PARTS}
    area_by_part = {p: float(areas[mesh.part == p].sum()) for p in VALID_PARTS}
    subs = mesh.subdomains_present()

    watertight: Dict[int, bool] = {}
    oriented: Dict[int, bool] = {}
    outward: Dict[int, bool] = {}
    volume: Dict[int, float] = {}
    for j in subs:
        surf = subdomain_surface(mesh, j)
        wt, ok = _surface_topology_ok(surf)
        watertight[j] = wt
        oriented[j] = ok
        cen = surf.centroids()
        vol = float(np.sum(np.einsum("ij,ij->i", cen, surf.normals) * surf.areas) / 3.0)
        volume[j] = vol
        outward[j] = vol > 0.0

    warnings = []
    n_bad = int(np.sum(quality < QUALITY_FLOOR))
    if n_bad:
        warnings.append(
            f"{n_bad} triangles below quality floor {QUALITY_FLOOR} (min {quality.min():.4f})"
        )
        logger.warning("mesh quality below floor: %d triangles", n_bad)

    return MeshValidationReport(
        n_vertices=mesh.n_vertices,
        n_triangles=mesh.n_triangles,
        parts=parts,
        areas=area_by_part,
        subdomains=subs,
        watertight=watertight,
        oriented=oriented,
        outward=outward,
        enclosed_volume=volume,
        min_quality=float(quality.min()),
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def save_off(mesh: SurfaceMesh, path: str) -> None:
    """Write OFF with one trailing tag line "subdomain part" per triangle."""
    with open(path, "w", encoding="ascii") as f:
        f.write("OFF\n")
        f.write(f"{mesh.n_vertices} {mesh.n_triangles} 0\n")
        for v in mesh.vertices:
            f.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            f.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        for s, p in zip(mesh.subdomain, mesh.part):
            f.write(f"{s} {p}\n")


def _off_tokens(path: str):
    with open(path, "r", encoding="ascii") as f:
        for ln, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield ln, line


def load_off(path: str) -> SurfaceMesh:
    """Read the tagged OFF format written by :func:`save_off`."""
    it = _off_tokens(path)
    try:
        ln, header = next(it)
    except StopIteration:
        raise ValueError(f"{path}: empty OFF file") from None
    if header != "OFF":
        raise ValueError(f"{path}:{ln}: expected OFF header, got {header!r}")
    ln, counts = next(it)
    try:
        nv, nf, _ = (int(x) for x in counts.split())
    except Exception as exc:
        raise ValueError(f"{path}:{ln}: bad count line {counts!r}") from exc

    verts = np.empty((nv, 3), dtype=np.float64)
    for i in range(nv):
        ln, line = next(it)
        xs = line.split()
        if len(xs) != 3:
            raise ValueError(f"{path}:{ln}: expected 3 coordinates, got {line!r}")
        verts[i] = [float(x) for x in xs]

    tris = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        ln, line = next(it)
        xs = line.split()
        if len(xs) != 4 or xs[0] != "3":
            raise ValueError(f"{path}:{ln}: expected triangle line '3 i j k', got {line!r}")
        tris[i] = [int(x) for x in xs[1:]]

    sub = np.empty(nf, dtype=np.int64)
    part = np.empty(nf, dtype="<U1")
    for i in range(nf):
        try:
            ln, line = next(it)
        except StopIteration:
            raise ValueError(f"{path}: missing tag line for triangle {i}") from None
        xs = line.split()
        if len(xs) != 2:
            raise ValueError(f"{path}:{ln}: expected tag line 'subdomain part', got {line!r}")
        sub[i] = int(xs[0])
        part[i] = xs[1]

    mesh = SurfaceMesh(verts, tris, sub, part)
    mesh.validate()
    return mesh


def save_msh(mesh: SurfaceMesh, path: str) -> None:
    """Write Gmsh MSH 2.2 ASCII; physical id = 10*subdomain + part code."""
    with open(path, "w", encoding="ascii") as f:
        f.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        f.write(f"$Nodes\n{mesh.n_vertices}\n")
        for i, v in enumerate(mesh.vertices, start=1):
            f.write(f"{i} {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        f.write("$EndNodes\n")
        f.write(f"$Elements\n{mesh.n_triangles}\n")
        for i in range(mesh.n_triangles):
            phys = 10 * int(mesh.subdomain[i]) + PART_CODES[str(mesh.part[i])]
            a, b, c = (int(x) + 1 for x in mesh.triangles[i])
            f.write(f"{i + 1} 2 2 {phys} {phys} {a} {b} {c}\n")
        f.write("$EndElements\n")


def load_msh(path: str) -> SurfaceMesh:
    """Read the MSH 2.2 ASCII subset written by :func:`save_msh`."""
    with open(path, "r", encoding="ascii") as f:
        lines = [ln.rstrip("\n") for ln in f]
    i = 0

    def expect(tag: str) -> None:
        nonlocal i
        while i < len(lines) and not lines[i].strip():
            i += 1
        if i >= len(lines) or lines[i].strip() != tag:
            found = lines[i].strip() if i < len(lines) else "<eof>"
            raise ValueError(f"{path}:{i + 1}: expected {tag}, got {found!r}")
        i += 1

    expect("$MeshFormat")
    ver = lines[i].split()
    if not ver or ver[0] != "2.2":
        raise ValueError(f"{path}:{i + 1}: unsupported MSH version {lines[i]!r}")
    i += 1
    expect("$EndMeshFormat")

    expect("$Nodes")
    n_nodes = int(lines[i]); i += 1
    ids = np.empty(n_nodes, dtype=np.int64)
    coords = np.empty((n_nodes, 3), dtype=np.float64)
    for k in range(n_nodes):
        xs = lines[i].split(); i += 1
        if len(xs) != 4:
            raise ValueError(f"{path}:{i}: bad node line {lines[i - 1]!r}")
        ids[k] = int(xs[0])
        coords[k] = [float(x) for x in xs[1:]]
    expect("$EndNodes")
    id_map = {int(node): k for k, node in enumerate(ids)}

    expect("$Elements")
    n_elem = int(lines[i]); i += 1
    tris: List[Tuple[int, int, int]] = []
    sub: List[int] = []
    part: List[str] = []
    for _ in range(n_elem):
        xs = lines[i].split(); i += 1
        if len(xs) < 2:
            raise ValueError(f"{path}:{i}: bad element line")
        etype = int(xs[1])
        if etype != 2:
            raise ValueError(f"{path}:{i}: unsupported element type {etype} (triangles only)")
        n_tags = int(xs[2])
        if len(xs) != 3 + n_tags + 3:
            raise ValueError(f"{path}:{i}: malformed triangle element")
        phys = int(xs[3])
        sub_tag, code = divmod(phys, 10)
        if sub_tag not in VALID_SUBDOMAINS or code not in CODE_PARTS:
            raise ValueError(f"{path}:{i}: physical id {phys} outside the documented id map")
        nodes = [int(x) for x in xs[3 + n_tags:]]
        try:
            tris.append(tuple(id_map[n] for n in nodes))
        except KeyError as exc:
            raise ValueError(f"{path}:{i}: unknown node id {exc}") from None
        sub.append(sub_tag)
        part.append(CODE_PARTS[code])
    expect("$EndElements")

    mesh = SurfaceMesh(
        coords,
        np.array(tris, dtype=np.int64),
        np.array(sub, dtype=np.int64),
        np.array(part, dtype="<U1"),
    )
    mesh.validate()
    return mesh


def load_mesh(path: str) -> SurfaceMesh:
    """Load a tagged mesh, dispatching on extension (.off or .msh)."""
    lower = path.lower()
    if lower.endswith(".off"):
        return load_off(path)
    if lower.endswith(".msh"):
        return load_msh(path)
    raise ValueError(f"unsupported mesh format for {path!r} (expected .off or .msh)")


def save_mesh(mesh: SurfaceMesh, path: str) -> None:
    lower = path.lower()
    if lower.endswith(".off"):
        save_off(mesh, path)
    elif lower.endswith(".msh"):
        save_msh(mesh, path)
    else:
        raise ValueError(f"unsupported mesh format for {path!r} (expected .off or .msh)")
