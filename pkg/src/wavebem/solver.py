"""Assembly and solution of the mixed transmission problem at one frequency.

The unknown is the single-trace coefficient vector of the offset solution:
the scaled traces ``(s^{1/2} gamma_D u0, s^{-1/2} gamma_N u0)`` expanded
through a :class:`~wavebem.tracespace.SingleTraceMap`.  The system couples
the block Calderon form ``<(A(s) - 1/2)phi, psi>^+`` with the impedance
form ``<phi_N - T(s) phi_D, psi_D>`` on the impedance part, and the
right-hand side carries the boundary data through an offset trace vector.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .calderon import (
    BlockCalderon,
    build_block_calderon,
    frequency_scaling,
    pairing_matrix,
    scale_traces,
)
from .mesh import MaterialParams, SubdomainSurface, SurfaceMesh
from .operators import (
    assemble_mixed_mass,
    assemble_p0_mass,
    assemble_p1_mass,
    double_layer_potential,
    single_layer_potential,
)
from .tracespace import (
    MultiTraceVector,
    SingleTraceMap,
    build_single_trace_map,
    classify_dofs,
    offset_traces,
)

__all__ = [
    "AssembledSystem",
    "ImpedanceOperator",
    "LaplaceSolveResult",
    "NumericsError",
    "SIGMA0_DEFAULT",
    "TransmissionProblem",
    "assemble_rhs",
    "assemble_system",
    "default_transfer",
    "impedance_default",
    "reconstruct_field",
    "solve_frequency",
]

# Default Laplace abscissa: norms, guards and probe frequencies refer to it.
SIGMA0_DEFAULT = 1.0

# Relative residual a direct solve must reach (after one refinement step).
RESIDUAL_TOL = 1e-10

# Reciprocal condition estimate below which a factorization is rejected.
RCOND_FLOOR = 1e-13

# Fixed seed for the internal dissipativity spot check (determinism).
_CHECK_SEED = 0x5EED


class NumericsError(RuntimeError):
    """A linear-algebra failure: singular system, residual, or bad transfer."""


# ---------------------------------------------------------------------------
# impedance transfer operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImpedanceOperator:
    """Weak transfer operator on the impedance part of the skeleton.

    ``vertex_ids[k]`` lists the local P1 indices of subdomain ``k`` whose
    hat functions touch an impedance panel; ``supplier(s)`` returns one
    compressed matrix per subdomain with entries ``<T(s) lam_w, lam_v>``
    over those vertices.  Surfaces without impedance panels get a 0 x 0
    block, so an empty impedance part degenerates gracefully.
    """

    vertex_ids: Tuple[np.ndarray, ...]
    supplier: Callable[[complex], Tuple[np.ndarray, ...]]

    @property
    def n_subdomains(self) -> int:
        return len(self.vertex_ids)

    @property
    def is_empty(self) -> bool:
        return all(ids.size == 0 for ids in self.vertex_ids)

    def weak(self, s) -> Tuple[np.ndarray, ...]:
        """Compressed weak matrices ``<T(s) lam_w, lam_v>`` at frequency s."""
        blocks = tuple(
            np.asarray(block, dtype=complex) for block in self.supplier(complex(s))
        )
        if len(blocks) != self.n_subdomains:
            raise ValueError(
                f"transfer supplier returned {len(blocks)} blocks for "
                f"{self.n_subdomains} subdomains"
            )
        for ids, block in zip(self.vertex_ids, blocks):
            want = (ids.size, ids.size)
            if block.shape != want:
                raise ValueError(
                    f"transfer block has shape {block.shape}, expected {want}"
                )
        return blocks

    def norm(self, s) -> float:
        """Largest spectral norm among the subdomain blocks at s."""
        norms = [
            np.linalg.norm(block, 2) if block.size else 0.0
            for block in self.weak(s)
        ]
        return float(max(norms, default=0.0))


def _impedance_vertex_ids(surf: SubdomainSurface) -> np.ndarray:
    on_i = surf.part == "I"
    if not np.any(on_i):
        return np.empty(0, dtype=np.int64)
    return np.unique(surf.triangles[on_i])


def impedance_default(s, mat: MaterialParams, mesh: SurfaceMesh):
    """Weak matrices of the constant transfer ``T(s) = -a p Id`` on L2(Gamma_I).

    Returns one compressed block per subdomain: ``-a_j p_j`` times the P1
    mass matrix restricted to the impedance panels of subdomain ``j``,
    indexed by the vertices touching those panels.  The operator does not
    depend on ``s``; the argument is validated to keep the supplier
    signature uniform.
    """
    s = complex(s)
    if not s.real > 0.0:
        raise ValueError(f"frequency must satisfy Re s > 0, got {s}")
    mat.validate()
    cls = classify_dofs(mesh)
    blocks = []
    for surf in cls.surfaces:
        ids = _impedance_vertex_ids(surf)
        if ids.size == 0:
            blocks.append(np.zeros((0, 0)))
            continue
        a, p = mat.for_subdomain(surf.subdomain_index)
        mass = assemble_p1_mass(surf, parts="I").toarray()
        blocks.append(-a * p * mass[np.ix_(ids, ids)])
    return tuple(blocks)


def default_transfer(mesh: SurfaceMesh, mat: MaterialParams) -> ImpedanceOperator:
    """The dissipative constant-impedance operator ``T(s) = -a p Id``."""
    cls = classify_dofs(mesh)
    vertex_ids = tuple(_impedance_vertex_ids(surf) for surf in cls.surfaces)
    supplier = functools.partial(impedance_default, mat=mat, mesh=mesh)
    return ImpedanceOperator(vertex_ids=vertex_ids, supplier=supplier)


def check_transfer(transfer: ImpedanceOperator, s, n_samples: int = 8) -> None:
    """Abort if the transfer operator is not dissipative at frequency s.

    Verifies ``Re <T(s) phi, conj(phi)> <= 0`` for seeded random densities
    supported on the impedance part, and the conjugation symmetry
    ``T(conj(s)) = conj(T(s))``.  Raises :class:`NumericsError` with the
    offending frequency and value, since a sign-violating transfer breaks
    the coercivity the time march relies on.
    """
    s = complex(s)
    blocks = transfer.weak(s)
    conj_blocks = transfer.weak(np.conj(s))
    rng = np.random.default_rng(_CHECK_SEED)
    for k, (block, conj_block) in enumerate(zip(blocks, conj_blocks)):
        if block.size == 0:
            continue
        scale = 1.0 + np.abs(block).max()
        if np.abs(conj_block - np.conj(block)).max() > 1e-12 * scale:
            raise NumericsError(
                f"transfer operator violates conjugation symmetry at s={s} "
                f"(subdomain {k + 1})"
            )
        n = block.shape[0]
        for _ in range(n_samples):
            phi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            value = np.real(np.vdot(phi, block @ phi))
            limit = 1e-12 * scale * float(np.vdot(phi, phi).real)
            if value > limit:
                raise NumericsError(
                    f"transfer operator is not dissipative at s={s}: "
                    f"Re<T phi, conj(phi)> = {value:.3e} > 0 on subdomain {k + 1}"
                )


# ---------------------------------------------------------------------------
# system assembly
# ---------------------------------------------------------------------------


@dataclass
class AssembledSystem:
    """Factorized single-trace system at one frequency."""

    s: complex
    matrix: np.ndarray
    lu: Tuple[np.ndarray, np.ndarray]
    smap: SingleTraceMap
    calderon: BlockCalderon
    transfer: ImpedanceOperator
    rcond: float

    @property
    def n_free(self) -> int:
        return self.matrix.shape[0]


def _impedance_matrix(
    s, transfer: ImpedanceOperator, surfaces: Sequence[SubdomainSurface]
):
    """Multi-trace matrix of ``<phi_N - T(s) phi_D, psi_D>`` on Gamma_I."""
    blocks = transfer.weak(s)
    parts = []
    for surf, ids, weak in zip(surfaces, transfer.vertex_ids, blocks):
        n_d, n_n = surf.n_p1, surf.n_p0
        block = sp.lil_matrix((n_d + n_n, n_d + n_n), dtype=complex)
        if ids.size:
            mixed_i = assemble_mixed_mass(surf, parts="I")
            block[:n_d, n_d:] = mixed_i.T
            block[np.ix_(ids, ids)] = -weak
        parts.append(block.tocsr())
    return sp.block_diag(parts, format="csr")


def assemble_system(
    s,
    mesh: SurfaceMesh,
    mat: MaterialParams,
    transfer: Optional[ImpedanceOperator] = None,
    smap: Optional[SingleTraceMap] = None,
    orders=None,
    calderon: Optional[BlockCalderon] = None,
) -> AssembledSystem:
    """Assemble and factorize the mixed single-trace system at frequency s.

    The matrix is ``E^T (P+ (A(s) - 1/2)) E`` plus the impedance
    contribution; the returned handle carries a reusable LU
    factorization.  The transfer operator is spot-checked for
    dissipativity before any factorization, and a numerically singular
    matrix is rejected with its condition estimate.
    """
    s = complex(s)
    if not s.real > 0.0:
        raise ValueError(f"frequency must satisfy Re s > 0, got {s}")
    if smap is None:
        smap = build_single_trace_map(mesh)
    if transfer is None:
        transfer = default_transfer(mesh, mat)
    check_transfer(transfer, s)
    bc = calderon if calderon is not None else build_block_calderon(
        s, mesh, mat, orders=orders
    )
    surfaces = smap.surfaces
    if len(surfaces) != bc.n_subdomains:
        raise ValueError("trace map and Calderon blocks disagree on subdomains")

    core = bc.system_blockdiag()
    core -= 0.5 * pairing_matrix(surfaces, "+").toarray()
    imp = _impedance_matrix(s, transfer, surfaces)
    if imp.nnz:
        core += imp.toarray()
    e_map = smap.matrix
    matrix = np.asarray((e_map.T @ core) @ e_map, dtype=complex)

    if not np.all(np.isfinite(matrix)):
        raise NumericsError(f"system matrix at s={s} contains non-finite entries")
    anorm = np.linalg.norm(matrix, 1)
    lu, piv = sla.lu_factor(matrix)
    rcond, info = sla.lapack.zgecon(lu, anorm)
    if info != 0 or not np.isfinite(rcond) or rcond < RCOND_FLOOR:
        raise NumericsError(
            f"system at s={s} is numerically singular "
            f"(reciprocal condition estimate {rcond:.3e})"
        )
    return AssembledSystem(
        s=s,
        matrix=matrix,
        lu=(lu, piv),
        smap=smap,
        calderon=bc,
        transfer=transfer,
        rcond=float(rcond),
    )


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------


def _core_action(bc: BlockCalderon, flat: np.ndarray) -> np.ndarray:
    """Blockwise action of ``P+ (A(s) - 1/2)`` on a flat trace vector."""
    out = np.zeros_like(flat, dtype=complex)
    offset = 0
    for k, surf in enumerate(bc.surfaces):
        n_d, n_n = surf.n_p1, surf.n_p0
        d = flat[offset : offset + n_d]
        n = flat[offset + n_d : offset + n_d + n_n]
        ops = bc.operators[k]
        mixed = assemble_mixed_mass(surf)
        out[offset : offset + n_d] = ops.W @ d / bc.s + ops.K.T @ n - 0.5 * (mixed.T @ n)
        out[offset + n_d : offset + n_d + n_n] = (
            -(ops.K @ d) + bc.s * (ops.V @ n) - 0.5 * (mixed @ d)
        )
        offset += n_d + n_n
    return out


def assemble_rhs(
    s,
    mesh: SurfaceMesh,
    mat: MaterialParams,
    transfer: Optional[ImpedanceOperator],
    smap: SingleTraceMap,
    offset: MultiTraceVector,
    d_impedance: Optional[np.ndarray] = None,
    orders=None,
    calderon: Optional[BlockCalderon] = None,
) -> np.ndarray:
    """Right-hand side of the mixed system for given offset traces.

    Implements ``-E^T P+ (A(s) - 1/2) D(s) b`` plus the impedance load
    ``<s^{-1/2} d_I - s^{-1/2} gamma_N b + s^{1/2} T(s) gamma_D b, psi_D>``
    on the impedance panels.  ``offset`` holds the unscaled traces of the
    boundary-data offset; ``d_impedance`` gives one value per skeleton
    triangle and is required whenever the mesh has impedance panels.
    """
    s = complex(s)
    if not s.real > 0.0:
        raise ValueError(f"frequency must satisfy Re s > 0, got {s}")
    if transfer is None:
        transfer = default_transfer(mesh, mat)
    bc = calderon if calderon is not None else build_block_calderon(
        s, mesh, mat, orders=orders
    )
    surfaces = smap.surfaces
    for k, surf in enumerate(surfaces):
        if offset.dirichlet[k].shape[0] != surf.n_p1 or (
            offset.neumann[k].shape[0] != surf.n_p0
        ):
            raise ValueError("offset trace block sizes do not match the mesh")

    has_impedance = any(np.any(surf.part == "I") for surf in surfaces)
    if has_impedance and d_impedance is None:
        raise ValueError(
            "boundary data on the impedance part is missing "
            "(d_impedance is required when the mesh has impedance panels)"
        )
    if d_impedance is not None:
        d_impedance = np.asarray(d_impedance, dtype=complex)
        if d_impedance.shape != (mesh.n_triangles,):
            raise ValueError(
                "impedance data must be given per skeleton triangle "
                f"(expected shape {(mesh.n_triangles,)}, got {d_impedance.shape})"
            )

    scaled = scale_traces(s, offset, "forward")
    rhs_flat = -_core_action(bc, scaled.concat())

    if has_impedance:
        root = frequency_scaling(s)
        weak_blocks = transfer.weak(s)
        pos = 0
        for k, surf in enumerate(surfaces):
            n_d, n_n = surf.n_p1, surf.n_p0
            ids = transfer.vertex_ids[k]
            mixed_i = assemble_mixed_mass(surf, parts="I")
            local_d = d_impedance[surf.global_triangle_ids]
            load = root.inv_root * (mixed_i.T @ (local_d - offset.neumann[k]))
            if ids.size:
                load[ids] += root.root * (
                    weak_blocks[k] @ offset.dirichlet[k][ids]
                )
            rhs_flat[pos : pos + n_d] += load
            pos += n_d + n_n

    return np.asarray(smap.matrix.T @ rhs_flat, dtype=complex)


# ---------------------------------------------------------------------------
# frequency solve
# ---------------------------------------------------------------------------


@dataclass
class LaplaceSolveResult:
    """Solution of the mixed system at one frequency.

    ``xi`` holds the free single-trace coefficients (scaled traces of the
    offset solution); ``traces`` the unscaled multi-trace coefficients of
    the full solution with the data offset added back.
    """

    s: complex
    xi: np.ndarray
    traces: MultiTraceVector
    residual: float
    stats: Dict[str, float] = field(default_factory=dict)


def solve_assembled(system: AssembledSystem, rhs: np.ndarray) -> Tuple[np.ndarray, float]:
    """Direct solve with one step of iterative refinement.

    Returns the solution and the relative residual; raises
    :class:`NumericsError` if the residual stays above ``RESIDUAL_TOL``.
    """
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape != (system.n_free,):
        raise ValueError(
            f"right-hand side has shape {rhs.shape}, expected {(system.n_free,)}"
        )
    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        return np.zeros_like(rhs), 0.0
    xi = sla.lu_solve(system.lu, rhs)
    residual = rhs - system.matrix @ xi
    rel = np.linalg.norm(residual) / scale
    if rel > RESIDUAL_TOL:
        xi = xi + sla.lu_solve(system.lu, residual)
        rel = np.linalg.norm(rhs - system.matrix @ xi) / scale
    if not np.isfinite(rel) or rel > RESIDUAL_TOL:
        raise NumericsError(
            f"direct solve at s={system.s} left relative residual {rel:.3e} "
            f"(tolerance {RESIDUAL_TOL:.1e}, rcond {system.rcond:.3e})"
        )
    return xi, float(rel)


def solve_frequency(
    s,
    mesh: SurfaceMesh,
    mat: Optional[MaterialParams] = None,
    *,
    g_dirichlet: Optional[np.ndarray] = None,
    d_neumann: Optional[np.ndarray] = None,
    d_impedance: Optional[np.ndarray] = None,
    transfer: Optional[ImpedanceOperator] = None,
    smap: Optional[SingleTraceMap] = None,
    orders=None,
    sigma0: float = SIGMA0_DEFAULT,
    system: Optional[AssembledSystem] = None,
    with_energy: bool = False,
) -> LaplaceSolveResult:
    """Solve the mixed transmission problem at one Laplace frequency.

    Builds the offset traces from the raw boundary data, assembles the
    system and right-hand side, and solves by dense LU.  Frequencies with
    ``Re s < sigma0 / 10`` are refused as a guard against contour
    excursions.  ``with_energy`` additionally records the real quadratic
    forms of the Calderon and transfer parts on the computed solution
    (used by the time-domain coercivity check).
    """
    s = complex(s)
    if s.real < sigma0 / 10.0:
        raise ValueError(
            f"frequency s={s} has Re s < sigma0/10 = {sigma0 / 10.0:g}; refusing"
        )
    if mat is None:
        mat = MaterialParams()
    if smap is None:
        smap = system.smap if system is not None else build_single_trace_map(mesh)
    if transfer is None:
        transfer = (
            system.transfer if system is not None else default_transfer(mesh, mat)
        )
    if system is None:
        system = assemble_system(s, mesh, mat, transfer, smap, orders=orders)
    elif complex(system.s) != s:
        raise ValueError(
            f"assembled system is for s={system.s}, cannot reuse at s={s}"
        )

    classification = smap.classification
    offset = offset_traces(
        mesh, g_dirichlet, d_neumann, classification=classification
    )
    rhs = assemble_rhs(
        s,
        mesh,
        mat,
        transfer,
        smap,
        offset,
        d_impedance=d_impedance,
        calderon=system.calderon,
    )
    xi, residual = solve_assembled(system, rhs)

    scaled_full = smap.expand(xi)
    unscaled = scale_traces(s, scaled_full, "inverse")
    traces = MultiTraceVector(
        dirichlet=[u + b for u, b in zip(unscaled.dirichlet, offset.dirichlet)],
        neumann=[u + b for u, b in zip(unscaled.neumann, offset.neumann)],
    )
    stats: Dict[str, float] = {
        "n_free": float(system.n_free),
        "rcond": system.rcond,
    }
    if with_energy:
        flat = scaled_full.concat()
        quad_a = complex(np.conj(flat) @ _calderon_action(system.calderon, flat))
        stats["quad_a"] = float(quad_a.real)
        stats["quad_t"] = _transfer_quadratic(transfer, s, scaled_full)
    return LaplaceSolveResult(
        s=s, xi=xi, traces=traces, residual=residual, stats=stats
    )


def _calderon_action(bc: BlockCalderon, flat: np.ndarray) -> np.ndarray:
    """Blockwise action of the Galerkin Calderon matrix (no -1/2 term)."""
    out = np.zeros_like(flat, dtype=complex)
    pos = 0
    for k, surf in enumerate(bc.surfaces):
        n_d, n_n = surf.n_p1, surf.n_p0
        d = flat[pos : pos + n_d]
        n = flat[pos + n_d : pos + n_d + n_n]
        ops = bc.operators[k]
        out[pos : pos + n_d] = ops.W @ d / bc.s + ops.K.T @ n
        out[pos + n_d : pos + n_d + n_n] = -(ops.K @ d) + bc.s * (ops.V @ n)
        pos += n_d + n_n
    return out


def _transfer_quadratic(
    transfer: ImpedanceOperator, s, scaled: MultiTraceVector
) -> float:
    """``Re <T(s) phi_D, conj(phi_D)>`` of a scaled trace vector."""
    total = 0.0
    blocks = transfer.weak(s)
    for k, (ids, weak) in enumerate(zip(transfer.vertex_ids, blocks)):
        if ids.size == 0:
            continue
        phi = scaled.dirichlet[k][ids]
        total += float(np.real(np.vdot(phi, weak @ phi)))
    return total


# ---------------------------------------------------------------------------
# field reconstruction
# ---------------------------------------------------------------------------


def _guard_points(surfaces: Sequence[SubdomainSurface], points: np.ndarray) -> None:
    for surf in surfaces:
        centroids = surf.centroids()
        diam = surf.diameters()
        dist = np.linalg.norm(
            points[:, None, :] - centroids[None, :, :], axis=2
        )
        # any point on a triangle lies within 2/3 of its diameter from the
        # centroid, so this radius catches every on-panel point and the
        # near-singular band where plain quadrature degrades anyway
        too_close = dist < 0.7 * diam[None, :]
        if np.any(too_close):
            idx = int(np.flatnonzero(np.any(too_close, axis=1))[0])
            raise ValueError(
                f"evaluation point {points[idx].tolist()} lies on or too "
                "near the skeleton"
            )


def reconstruct_field(
    mesh: SurfaceMesh,
    mat: MaterialParams,
    traces: MultiTraceVector,
    s,
    points: np.ndarray,
    subdomain: Optional[int] = None,
) -> np.ndarray:
    """Evaluate the representation formula ``u = S gamma_N u - D gamma_D u``.

    With ``subdomain`` given, only that subdomain's potentials are used
    (valid for points inside it); otherwise potentials of all subdomains
    are summed, which reproduces the field in whichever subdomain each
    point lies in, since the representation of the others vanishes there.
    """
    s = complex(s)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("points must be an (n, 3) array")
    cls = classify_dofs(mesh)
    surfaces = cls.surfaces
    if traces.n_subdomains != len(surfaces):
        raise ValueError("trace vector does not match the mesh subdomains")
    if subdomain is not None:
        indices = [s_idx for s_idx, surf in enumerate(surfaces)
                   if surf.subdomain_index == subdomain]
        if not indices:
            raise ValueError(f"mesh has no subdomain {subdomain}")
    else:
        indices = list(range(len(surfaces)))
    _guard_points([surfaces[i] for i in indices], points)

    values = np.zeros(points.shape[0], dtype=complex)
    for k in indices:
        surf = surfaces[k]
        a, p = mat.for_subdomain(surf.subdomain_index)
        values += single_layer_potential(
            surf, s, a, p, traces.neumann[k], points
        )
        values -= double_layer_potential(
            surf, s, a, p, traces.dirichlet[k], points
        )
    return values


# ---------------------------------------------------------------------------
# time-domain problem description
# ---------------------------------------------------------------------------


@dataclass
class TransmissionProblem:
    """Causal time-domain transmission problem marched by CQ.

    The data suppliers map a time ``t`` to the full per-vertex (Dirichlet)
    or per-triangle (Neumann / impedance) sample arrays; they must be
    causal and vanish at ``t = 0`` together with their first derivative.
    """

    mesh: SurfaceMesh
    mat: MaterialParams
    horizon: float
    dt: float
    g_dirichlet: Optional[Callable[[float], np.ndarray]] = None
    d_neumann: Optional[Callable[[float], np.ndarray]] = None
    d_impedance: Optional[Callable[[float], np.ndarray]] = None
    transfer: Optional[ImpedanceOperator] = None
    sigma0: float = SIGMA0_DEFAULT
    scheme: str = "BDF2"

    def validate(self) -> None:
        if not (self.dt > 0.0):
            raise ValueError(f"time step must be positive, got {self.dt}")
        if not (self.horizon > 0.0):
            raise ValueError(f"final time must be positive, got {self.horizon}")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(
                f"final time {self.horizon} is not an integer multiple of "
                f"the step {self.dt}"
            )
        if self.scheme not in ("BDF1", "BDF2"):
            raise ValueError(f"unknown CQ scheme: {self.scheme!r}")
        self.mat.validate()

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))
