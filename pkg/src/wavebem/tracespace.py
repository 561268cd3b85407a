"""Multi-trace vectors, single-trace constraints, and discrete norms.

The skeleton carries one Cauchy trace pair per subdomain: a P1 Dirichlet
block and a P0 Neumann block.  The single-trace subspace is realized by
a sparse constraint map ``E``: Dirichlet coefficients vanish at vertices
touching the Dirichlet part, Neumann coefficients vanish on Neumann
panels, and interface degrees of freedom are shared between the two
subdomains (identically for the Dirichlet trace, with opposite signs for
the Neumann trace, fixing the interface normal to the subdomain-1 side).

Discrete fractional-order norms are operator quadratic forms at a fixed
real frequency: ``|phi|^2 = Re<V(sigma0) phi, phi>`` for the order -1/2
and ``|psi|^2 = Re<(W(sigma0) + M) psi, psi>`` for the order +1/2, with
``M`` the P1 mass matrix.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .mesh import (
    PART_CODES,
    MaterialParams,
    SubdomainSurface,
    SurfaceMesh,
    subdomain_surface,
)
from .operators import assemble_operators, assemble_p1_mass

__all__ = [
    "MultiTraceVector",
    "DofClassification",
    "SingleTraceMap",
    "classify_dofs",
    "build_single_trace_map",
    "offset_traces",
    "norm_gram",
    "discrete_norm",
    "export_constraint_map",
]

NORM_SIGMA0 = 1.0


# ---------------------------------------------------------------------------
# multi-trace vectors
# ---------------------------------------------------------------------------


@dataclass
class MultiTraceVector:
    """Per-subdomain Cauchy trace coefficients.

    ``dirichlet[k]`` holds the P1 block and ``neumann[k]`` the P0 block
    of the ``k``-th subdomain surface.  The flat layout used by matrix
    algebra is ``[d_1, n_1, d_2, n_2]``.
    """

    dirichlet: List[np.ndarray]
    neumann: List[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.dirichlet) != len(self.neumann):
            raise ValueError("dirichlet/neumann block counts differ")
        self.dirichlet = [
            np.asarray(b, dtype=complex) for b in self.dirichlet
        ]
        self.neumann = [np.asarray(b, dtype=complex) for b in self.neumann]

    @classmethod
    def zeros(cls, surfaces: Sequence[SubdomainSurface]) -> "MultiTraceVector":
        return cls(
            dirichlet=[np.zeros(s.n_p1, dtype=complex) for s in surfaces],
            neumann=[np.zeros(s.n_p0, dtype=complex) for s in surfaces],
        )

    @classmethod
    def from_concat(
        cls, flat: np.ndarray, surfaces: Sequence[SubdomainSurface]
    ) -> "MultiTraceVector":
        flat = np.asarray(flat, dtype=complex)
        expect = sum(s.n_p1 + s.n_p0 for s in surfaces)
        if flat.shape != (expect,):
            raise ValueError(
                f"flat trace vector has length {flat.shape}, expected {expect}"
            )
        d, n, pos = [], [], 0
        for s in surfaces:
            d.append(flat[pos : pos + s.n_p1])
            pos += s.n_p1
            n.append(flat[pos : pos + s.n_p0])
            pos += s.n_p0
        return cls(dirichlet=d, neumann=n)

    @property
    def n_subdomains(self) -> int:
        return len(self.dirichlet)

    def concat(self) -> np.ndarray:
        blocks = []
        for d, n in zip(self.dirichlet, self.neumann):
            blocks.extend((d, n))
        return np.concatenate(blocks)

    def copy(self) -> "MultiTraceVector":
        return MultiTraceVector(
            dirichlet=[d.copy() for d in self.dirichlet],
            neumann=[n.copy() for n in self.neumann],
        )


# ---------------------------------------------------------------------------
# degree-of-freedom classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DofClassification:
    """Part labels and constraint flags for every trace DOF.

    Vertex labels live in {D, N, I, J, junction}: a vertex is a
    ``junction`` when the interface meets the outer boundary there.  The
    constraint flags carry the variational meaning — a vertex touching
    the Dirichlet part is constrained to zero no matter what else it
    touches; a vertex touching the interface but not the Dirichlet part
    is shared between the subdomains.  Triangle DOFs inherit their
    panel's tag: Neumann panels are constrained, interface panels shared.
    """

    n_vertices: int
    n_triangles: int
    subdomains: Tuple[int, ...]
    surfaces: Tuple[SubdomainSurface, ...]
    vertex_part: Tuple[np.ndarray, ...]
    vertex_constrained: Tuple[np.ndarray, ...]
    vertex_shared: Tuple[np.ndarray, ...]
    triangle_part: Tuple[np.ndarray, ...]
    triangle_constrained: Tuple[np.ndarray, ...]
    triangle_shared: Tuple[np.ndarray, ...]


def _vertex_part_table(mesh: SurfaceMesh) -> np.ndarray:
    """(n_vertices, 4) booleans: vertex touches a triangle of that part."""
    touches = np.zeros((mesh.n_vertices, len(PART_CODES)), dtype=bool)
    for tag, code in PART_CODES.items():
        vids = mesh.triangles[mesh.part == tag]
        touches[vids.ravel(), code] = True
    return touches


def _label_vertices(touches: np.ndarray) -> np.ndarray:
    labels = np.empty(touches.shape[0], dtype="<U8")
    n_parts = touches.sum(axis=1)
    on_j = touches[:, PART_CODES["J"]]
    labels[on_j & (n_parts > 1)] = "junction"
    labels[on_j & (n_parts == 1)] = "J"
    # vertices off the interface: Dirichlet wins, then the smallest code
    rest = ~on_j
    for tag in ("D", "N", "I"):
        hit = rest & touches[:, PART_CODES[tag]]
        labels[hit] = tag
        rest &= ~hit
    return labels


def classify_dofs(mesh: SurfaceMesh) -> DofClassification:
    """Classify every vertex and triangle DOF of each subdomain surface."""
    mesh.validate()
    touches = _vertex_part_table(mesh)
    labels = _label_vertices(touches)
    constrained = touches[:, PART_CODES["D"]]
    shared = touches[:, PART_CODES["J"]] & ~constrained

    subdomains = mesh.subdomains_present()
    surfaces = tuple(subdomain_surface(mesh, j) for j in subdomains)
    return DofClassification(
        n_vertices=mesh.n_vertices,
        n_triangles=mesh.n_triangles,
        subdomains=subdomains,
        surfaces=surfaces,
        vertex_part=tuple(labels[s.global_vertex_ids] for s in surfaces),
        vertex_constrained=tuple(
            constrained[s.global_vertex_ids] for s in surfaces
        ),
        vertex_shared=tuple(shared[s.global_vertex_ids] for s in surfaces),
        triangle_part=tuple(s.part.copy() for s in surfaces),
        triangle_constrained=tuple(s.part == "N" for s in surfaces),
        triangle_shared=tuple(s.part == "J" for s in surfaces),
    )


# ---------------------------------------------------------------------------
# single-trace constraint map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingleTraceMap:
    """Sparse map from free single-trace DOFs into the multi-trace space.

    Columns are ordered: subdomain-1-only Dirichlet, subdomain-2-only
    Dirichlet, shared interface Dirichlet, then the Neumann groups in
    the same order.  ``provenance`` records one ``(trace, scope, gid)``
    triple per column, where ``trace`` is ``"D"`` or ``"N"``, ``scope``
    is the owning subdomain index or 0 for shared DOFs, and ``gid`` the
    skeleton vertex/triangle id.
    """

    matrix: sp.csr_matrix
    provenance: Tuple[Tuple[str, int, int], ...]
    classification: DofClassification

    @property
    def n_free(self) -> int:
        return self.matrix.shape[1]

    @property
    def surfaces(self) -> Tuple[SubdomainSurface, ...]:
        return self.classification.surfaces

    def expand(self, xi: np.ndarray) -> MultiTraceVector:
        """Multi-trace vector of a single-trace coefficient vector."""
        return MultiTraceVector.from_concat(self.matrix @ xi, self.surfaces)

    def restrict(self, trace: MultiTraceVector) -> np.ndarray:
        """Adjoint application ``E^T`` to a multi-trace vector."""
        return self.matrix.T @ trace.concat()


def _block_offsets(surfaces: Sequence[SubdomainSurface]) -> List[Tuple[int, int]]:
    """(dirichlet, neumann) flat offsets per subdomain surface."""
    offsets, pos = [], 0
    for s in surfaces:
        offsets.append((pos, pos + s.n_p1))
        pos += s.n_p1 + s.n_p0
    return offsets


def build_single_trace_map(
    mesh: SurfaceMesh, classification: Optional[DofClassification] = None
) -> SingleTraceMap:
    """Build the constraint map realizing the single-trace subspace."""
    cls = classification if classification is not None else classify_dofs(mesh)
    if (cls.n_vertices, cls.n_triangles) != (mesh.n_vertices, mesh.n_triangles):
        raise ValueError("classification is inconsistent with the mesh")
    surfaces = cls.surfaces
    offsets = _block_offsets(surfaces)
    total = sum(s.n_p1 + s.n_p0 for s in surfaces)

    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    prov: List[Tuple[str, int, int]] = []

    def add_column(entries) -> None:
        col = len(prov)
        for row, val in entries:
            rows.append(row)
            cols.append(col)
            vals.append(val)

    # private Dirichlet DOFs per subdomain
    for k, surf in enumerate(surfaces):
        free = ~cls.vertex_constrained[k] & ~cls.vertex_shared[k]
        for lv in np.flatnonzero(free):
            add_column([(offsets[k][0] + lv, 1.0)])
            prov.append(("D", cls.subdomains[k], int(surf.global_vertex_ids[lv])))

    # shared interface Dirichlet DOFs (identical coefficient on each side)
    shared_gids = np.unique(
        np.concatenate(
            [
                s.global_vertex_ids[cls.vertex_shared[k]]
                for k, s in enumerate(surfaces)
            ]
        )
        if surfaces
        else np.empty(0, dtype=np.int64)
    )
    for gid in shared_gids:
        entries = []
        for k, surf in enumerate(surfaces):
            lv = np.searchsorted(surf.global_vertex_ids, gid)
            if (
                lv < surf.global_vertex_ids.size
                and surf.global_vertex_ids[lv] == gid
            ):
                entries.append((offsets[k][0] + lv, 1.0))
        add_column(entries)
        prov.append(("D", 0, int(gid)))

    # private Neumann DOFs per subdomain
    for k, surf in enumerate(surfaces):
        free = ~cls.triangle_constrained[k] & ~cls.triangle_shared[k]
        for lt in np.flatnonzero(free):
            add_column([(offsets[k][1] + lt, 1.0)])
            prov.append(("N", cls.subdomains[k], int(surf.global_triangle_ids[lt])))

    # shared interface Neumann DOFs: +1 on side 1, -1 on side 2 (the
    # interface normal is fixed to point out of subdomain 1)
    shared_tids = np.unique(
        np.concatenate(
            [
                s.global_triangle_ids[cls.triangle_shared[k]]
                for k, s in enumerate(surfaces)
            ]
        )
    ) if surfaces else np.empty(0, dtype=np.int64)
    for gid in shared_tids:
        entries = []
        for k, surf in enumerate(surfaces):
            lt = np.searchsorted(surf.global_triangle_ids, gid)
            if (
                lt < surf.global_triangle_ids.size
                and surf.global_triangle_ids[lt] == gid
            ):
                sign = 1.0 if cls.subdomains[k] == 1 else -1.0
                entries.append((offsets[k][1] + lt, sign))
        add_column(entries)
        prov.append(("N", 0, int(gid)))

    matrix = sp.csr_matrix(
        (vals, (rows, cols)), shape=(total, len(prov)), dtype=float
    )
    return SingleTraceMap(
        matrix=matrix, provenance=tuple(prov), classification=cls
    )


def export_constraint_map(path, smap: SingleTraceMap) -> None:
    """Dump the constraint map as text triples ``row col value``."""
    coo = smap.matrix.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")


# ---------------------------------------------------------------------------
# offset traces for inhomogeneous boundary data
# ---------------------------------------------------------------------------


def offset_traces(
    mesh: SurfaceMesh,
    g_dirichlet: Optional[np.ndarray] = None,
    d_neumann: Optional[np.ndarray] = None,
    classification: Optional[DofClassification] = None,
) -> MultiTraceVector:
    """Discrete traces of the boundary-data offset.

    ``g_dirichlet`` holds samples at every skeleton vertex and
    ``d_neumann`` one value per skeleton triangle; only the values on
    the closure of the Dirichlet part (vertices touching a ``D`` panel)
    and on Neumann panels are used — the blocks are extended by zero
    elsewhere.  Dirichlet data must vanish where the interface meets the
    impedance part, since no conforming zero-extension exists there.
    """
    cls = classification if classification is not None else classify_dofs(mesh)
    out = MultiTraceVector.zeros(cls.surfaces)

    if g_dirichlet is not None:
        g = np.asarray(g_dirichlet, dtype=complex)
        if g.shape != (mesh.n_vertices,):
            raise ValueError(
                "Dirichlet data must be sampled at every skeleton vertex "
                f"(expected shape {(mesh.n_vertices,)}, got {g.shape})"
            )
        touches = _vertex_part_table(mesh)
        on_d = touches[:, PART_CODES["D"]]
        bad = (
            on_d
            & touches[:, PART_CODES["J"]]
            & touches[:, PART_CODES["I"]]
            & (np.abs(g) > 1e-14 * max(1.0, np.abs(g).max()))
        )
        if np.any(bad):
            raise ValueError(
                "Dirichlet data must vanish at junction vertices adjacent "
                f"to the impedance part (violated at vertices "
                f"{np.flatnonzero(bad).tolist()})"
            )
        for k, surf in enumerate(cls.surfaces):
            mask = on_d[surf.global_vertex_ids]
            out.dirichlet[k][mask] = g[surf.global_vertex_ids[mask]]

    if d_neumann is not None:
        d = np.asarray(d_neumann, dtype=complex)
        if d.shape != (mesh.n_triangles,):
            raise ValueError(
                "Neumann data must be given per skeleton triangle "
                f"(expected shape {(mesh.n_triangles,)}, got {d.shape})"
            )
        for k, surf in enumerate(cls.surfaces):
            mask = surf.part == "N"
            out.neumann[k][mask] = d[surf.global_triangle_ids[mask]]

    return out


# ---------------------------------------------------------------------------
# discrete fractional norms
# ---------------------------------------------------------------------------


def norm_gram(
    surf: SubdomainSurface,
    kind: str,
    a: float = 1.0,
    p: float = 1.0,
    sigma0: float = NORM_SIGMA0,
    orders=None,
) -> np.ndarray:
    """Gram matrix of the discrete fractional norm on one surface.

    ``minus_half`` is the real part of the single-layer matrix at the
    real frequency ``sigma0``; ``half`` is the real part of the
    hypersingular matrix plus the P1 mass matrix.  Both are symmetric
    positive definite.
    """
    if not (sigma0 > 0.0):
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    ops = assemble_operators(surf, sigma0, a, p, orders=orders)
    if kind == "minus_half":
        gram = ops.V.real
    elif kind == "half":
        gram = ops.W.real + assemble_p1_mass(surf).toarray()
    else:
        raise ValueError(f"unknown norm kind: {kind!r}")
    return 0.5 * (gram + gram.T)


def _gram_pairs(
    surfaces: Sequence[SubdomainSurface],
    mat: MaterialParams,
    sigma0: float,
    orders=None,
) -> List[Tuple[np.ndarray, np.ndarray]]:
    pairs = []
    for surf in surfaces:
        a, p = mat.for_subdomain(surf.subdomain_index)
        ops = assemble_operators(surf, sigma0, a, p, orders=orders)
        gd = ops.W.real + assemble_p1_mass(surf).toarray()
        gn = ops.V.real
        pairs.append((0.5 * (gd + gd.T), 0.5 * (gn + gn.T)))
    return pairs


def discrete_norm(
    kind: str,
    vector,
    mesh,
    mat: Optional[MaterialParams] = None,
    sigma0: float = NORM_SIGMA0,
    orders=None,
) -> float:
    """Discrete fractional norm of a trace vector.

    ``half`` and ``minus_half`` act on a single block given a
    SubdomainSurface (material constants taken as 1); ``multi`` acts on
    a MultiTraceVector over a skeleton mesh and returns the root of the
    summed squared block norms.
    """
    if kind == "multi":
        if not isinstance(vector, MultiTraceVector):
            raise ValueError("multi norm expects a MultiTraceVector")
        if not isinstance(mesh, SurfaceMesh):
            raise ValueError("multi norm expects the skeleton mesh")
        mat = mat if mat is not None else MaterialParams()
        surfaces = [
            subdomain_surface(mesh, j) for j in mesh.subdomains_present()
        ]
        total = 0.0
        for k, (gd, gn) in enumerate(
            _gram_pairs(surfaces, mat, sigma0, orders)
        ):
            d, n = vector.dirichlet[k], vector.neumann[k]
            if not (np.all(np.isfinite(d)) and np.all(np.isfinite(n))):
                raise ValueError("non-finite trace coefficients")
            total += (np.conj(d) @ (gd @ d)).real
            total += (np.conj(n) @ (gn @ n)).real
        return float(np.sqrt(max(total, 0.0)))

    if kind not in ("half", "minus_half"):
        raise ValueError(f"unknown norm kind: {kind!r}")
    if not isinstance(mesh, SubdomainSurface):
        raise ValueError(f"{kind} norm expects a SubdomainSurface")
    v = np.asarray(vector, dtype=complex)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite trace coefficients")
    gram = norm_gram(mesh, kind, sigma0=sigma0, orders=orders)
    return float(np.sqrt(max((np.conj(v) @ (gram @ v)).real, 0.0)))
