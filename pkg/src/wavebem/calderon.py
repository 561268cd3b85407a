"""Frequency scaling, the scaled block Calderón operator, and pairings.

Per subdomain the scaled operator acts on trace pairs ``(phi_D, phi_N)``
as the 2x2 block ``[[-K, sV], [W/s, K^T]]``; the scaling ``D(s) =
diag(s^{1/2}, s^{-1/2})`` (principal roots) turns plain Cauchy traces
into the scaled ones the block expects.  Scaled Cauchy data of a
homogeneous solution is annihilated by ``(A(s) - Id/2)``, which the
residual routine tests in the discrete dual norm.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .mesh import MaterialParams, SubdomainSurface, SurfaceMesh, subdomain_surface
from .operators import (
    OperatorSet,
    assemble_mixed_mass,
    assemble_operators,
    assemble_p1_mass,
)
from .tracespace import NORM_SIGMA0, MultiTraceVector

__all__ = [
    "ScalingPair",
    "frequency_scaling",
    "scale_traces",
    "BlockCalderon",
    "build_block_calderon",
    "mixed_masses",
    "pairing",
    "pairing_matrix",
    "CalderonResidual",
    "calderon_residual",
]


# ---------------------------------------------------------------------------
# frequency scaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingPair:
    """Principal square root of a frequency and its reciprocal."""

    root: complex
    inv_root: complex

    def validate(self) -> None:
        if abs(self.root * self.inv_root - 1.0) > 1e-14:
            raise ValueError("scaling roots are not reciprocal")


def frequency_scaling(s) -> ScalingPair:
    """Principal ``(s^{1/2}, s^{-1/2})`` for ``Re s > 0``."""
    s = complex(s)
    if not (s.real > 0.0):
        raise ValueError(f"frequency must satisfy Re s > 0, got {s}")
    root = np.sqrt(s)
    return ScalingPair(root=complex(root), inv_root=complex(1.0 / root))


def scale_traces(s, trace: MultiTraceVector, direction: str) -> MultiTraceVector:
    """Apply ``D(s)`` (``forward``) or its inverse to a trace vector.

    Forward multiplies Dirichlet blocks by ``s^{1/2}`` and Neumann
    blocks by ``s^{-1/2}``; inverse undoes it exactly.
    """
    pair = frequency_scaling(s)
    if direction == "forward":
        fd, fn = pair.root, pair.inv_root
    elif direction == "inverse":
        fd, fn = pair.inv_root, pair.root
    else:
        raise ValueError(f"direction must be forward or inverse, got {direction!r}")
    return MultiTraceVector(
        dirichlet=[fd * d for d in trace.dirichlet],
        neumann=[fn * n for n in trace.neumann],
    )


# ---------------------------------------------------------------------------
# block operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockCalderon:
    """Assembled scaled Calderón blocks for every subdomain.

    ``operators[k]`` holds the Galerkin matrices of subdomain
    ``subdomains[k]``; ``block`` and ``galerkin`` expose the 2x2
    frequency-weighted combinations in the two natural row orders.
    """

    s: complex
    subdomains: Tuple[int, ...]
    surfaces: Tuple[SubdomainSurface, ...]
    operators: Tuple[OperatorSet, ...]

    @property
    def n_subdomains(self) -> int:
        return len(self.subdomains)

    def block(self, k: int) -> np.ndarray:
        """``[[-K, sV], [W/s, K^T]]`` with P0-tested rows first.

        Columns follow the trace layout ``(phi_D, phi_N)``; the first
        row group holds the P0-tested Dirichlet-type output, the second
        the P1-tested Neumann-type output.
        """
        ops = self.operators[k]
        return np.block(
            [[-ops.K, self.s * ops.V], [ops.W / self.s, ops.K.T]]
        )

    def galerkin(self, k: int) -> np.ndarray:
        """Rows reordered to the flat trace layout ``(psi_D, psi_N)``.

        ``psi^T galerkin(k) phi`` equals the dual pairing of the block
        applied to ``phi`` against ``psi``, so this is the matrix the
        variational system is built from.
        """
        ops = self.operators[k]
        return np.block(
            [[ops.W / self.s, ops.K.T], [-ops.K, self.s * ops.V]]
        )

    def system_blockdiag(self) -> np.ndarray:
        """Block-diagonal Galerkin matrix over all subdomains."""
        return sla.block_diag(
            *(self.galerkin(k) for k in range(self.n_subdomains))
        )


def build_block_calderon(
    s, mesh: SurfaceMesh, mat: MaterialParams, orders=None
) -> BlockCalderon:
    """Assemble the scaled block Calderón operator of every subdomain."""
    mat.validate()
    subdomains = mesh.subdomains_present()
    surfaces = tuple(subdomain_surface(mesh, j) for j in subdomains)
    operators = tuple(
        assemble_operators(
            surf, s, *mat.for_subdomain(j), orders=orders
        )
        for j, surf in zip(subdomains, surfaces)
    )
    return BlockCalderon(
        s=complex(s),
        subdomains=subdomains,
        surfaces=surfaces,
        operators=operators,
    )


# ---------------------------------------------------------------------------
# dual pairings
# ---------------------------------------------------------------------------


def mixed_masses(surfaces: Sequence[SubdomainSurface]):
    """Per-surface mixed P0/P1 mass matrices for the dual pairings."""
    return [assemble_mixed_mass(surf) for surf in surfaces]


def pairing(sign: str, phi: MultiTraceVector, psi: MultiTraceVector, masses) -> complex:
    """Symmetric (+) or skew (-) dual pairing of two trace vectors.

    Computes ``sum_j (<phi_D, psi_N> +/- <phi_N, psi_D>)`` with the
    non-conjugating mixed mass matrices; conjugate ``psi`` at the call
    site when a sesquilinear form is wanted.
    """
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    if phi.n_subdomains != psi.n_subdomains or len(masses) != phi.n_subdomains:
        raise ValueError("trace vectors and mass list have different block counts")
    sgn = 1.0 if sign == "+" else -1.0
    total = 0.0 + 0.0j
    for d_phi, n_phi, d_psi, n_psi, m in zip(
        phi.dirichlet, phi.neumann, psi.dirichlet, psi.neumann, masses
    ):
        if d_phi.shape[0] != m.shape[1] or n_phi.shape[0] != m.shape[0]:
            raise ValueError("trace block sizes do not match the mass matrix")
        total += n_psi @ (m @ d_phi) + sgn * (d_psi @ (m.T @ n_phi))
    return complex(total)


def pairing_matrix(surfaces: Sequence[SubdomainSurface], sign: str = "+"):
    """Sparse matrix P with ``psi^T P phi`` equal to the dual pairing.

    Rows and columns both follow the flat trace layout; per subdomain
    the block is ``[[0, +/-M^T], [M, 0]]`` with ``M`` the mixed mass.
    """
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    sgn = 1.0 if sign == "+" else -1.0
    blocks = []
    for surf in surfaces:
        m = assemble_mixed_mass(surf)
        blocks.append(sp.bmat([[None, sgn * m.T], [m, None]]))
    return sp.block_diag(blocks, format="csr")


# ---------------------------------------------------------------------------
# Calderón projector residual
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalderonResidual:
    """Relative projector residual; ``trivial`` flags zero input traces."""

    value: float
    trivial: bool


def calderon_residual(
    s,
    mesh: SurfaceMesh,
    mat: MaterialParams,
    traces: MultiTraceVector,
    sigma0: float = NORM_SIGMA0,
    orders=None,
) -> CalderonResidual:
    """Relative dual-norm residual of ``(A(s) - Id/2)`` on scaled traces.

    The residual moments are measured in the discrete dual norms (the
    inverses of the fractional-norm Gram matrices at ``sigma0``) and
    normalized by the discrete norm of the traces themselves; it
    vanishes, up to discretization error, exactly when the traces are
    scaled Cauchy data of a homogeneous subdomain solution.
    """
    bc = build_block_calderon(s, mesh, mat, orders=orders)
    if traces.n_subdomains != bc.n_subdomains:
        raise ValueError("trace vector does not match the mesh subdomains")

    dual_sq = 0.0
    norm_sq = 0.0
    for k, surf in enumerate(bc.surfaces):
        d, n = traces.dirichlet[k], traces.neumann[k]
        if d.shape[0] != surf.n_p1 or n.shape[0] != surf.n_p0:
            raise ValueError("trace block sizes do not match the mesh")
        mixed = assemble_mixed_mass(surf)
        ops_s = bc.operators[k]
        # blockwise [[W/s, K^T], [-K, sV]] action minus the half pairing;
        # never materializes the concatenated dense block matrix
        r_d = ops_s.W @ d / bc.s + ops_s.K.T @ n - 0.5 * (mixed.T @ n)
        r_n = -(ops_s.K @ d) + bc.s * (ops_s.V @ n) - 0.5 * (mixed @ d)

        if complex(s) == complex(sigma0):
            ops = ops_s
        else:
            a, p = mat.for_subdomain(bc.subdomains[k])
            ops = assemble_operators(surf, sigma0, a, p, orders=orders)
        gram_d = ops.W.real + assemble_p1_mass(surf).toarray()
        gram_d = 0.5 * (gram_d + gram_d.T)
        gram_n = 0.5 * (ops.V.real + ops.V.real.T)

        cho_d = sla.cho_factor(gram_d)
        cho_n = sla.cho_factor(gram_n)
        dual_sq += (np.conj(r_d) @ sla.cho_solve(cho_d, r_d)).real
        dual_sq += (np.conj(r_n) @ sla.cho_solve(cho_n, r_n)).real
        norm_sq += (np.conj(d) @ (gram_d @ d)).real
        norm_sq += (np.conj(n) @ (gram_n @ n)).real

    if norm_sq <= 0.0:
        return CalderonResidual(value=0.0, trivial=True)
    return CalderonResidual(
        value=float(np.sqrt(max(dual_sq, 0.0) / norm_sq)), trivial=False
    )
