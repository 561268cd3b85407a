"""Galerkin boundary-integral operators on subdomain surfaces.

Conventions.  The subdomain kernel is ``exp(-kappa r) / (4 pi a^2 r)`` with
``kappa = s p / a``; the conormal trace carries the ``a^2`` material weight.
The Galerkin spaces are piecewise-constant fluxes (one dof per triangle)
and continuous piecewise-linear traces (one dof per vertex).  Assembled
blocks:

- ``V``  single layer, P0 x P0, kernel ``G / a^2``;
- ``K``  double layer, P0 test x P1 trial, kernel ``d/dn_y G``;
- ``K^T``  the adjoint double layer: equal to ``K`` transposed exactly for
  flat panels (real, non-conjugated duality), so it is never assembled;
- ``W``  hypersingular, P1 x P1, in the integrated-by-parts form
  ``a^2 [ (curl_G lam_a . curl_G lam_b) G + kappa^2 <n_x, n_y> lam_a lam_b G ]``
  where the surface curl of a hat function is constant per flat panel.

The hypersingular block never differentiates the kernel; the double layer
uses ``d/dn_y G = g1(r) <n_y, y - x>``, which vanishes identically for
coplanar pairs, so coincident panels contribute nothing to ``K``.

Assembly runs a vectorized base pass with a fixed-order rule over all
panel pairs, masking pairs that share a vertex or sit closer than a
near-field threshold, then revisits the masked pairs: near-but-disjoint
pairs with a higher-order rule, touching pairs with the regularizing
transforms.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import VALID_PARTS, SubdomainSurface
from .quadrature import (
    PanelPairKind,
    check_frequency,
    classify_pair,
    grad_factor,
    laplace_kernel,
    pair_rule,
    second_grad_factor,
    shape_values,
    triangle_rule,
    wavenumber,
)

__all__ = [
    "OperatorSet",
    "QuadratureOrders",
    "assemble_operators",
    "assemble_p0_mass",
    "assemble_p1_mass",
    "assemble_mixed_mass",
    "single_layer_potential",
    "double_layer_potential",
    "save_matrix",
    "load_matrix",
]


@dataclass(frozen=True)
class QuadratureOrders:
    """Points per dimension for the three panel-pair regimes."""

    base: int = 3
    near: int = 5
    singular: int = 4
    near_factor: float = 2.0  # centroid distance / max diameter threshold

    def validate(self):
        if min(self.base, self.near, self.singular) < 1:
            raise ValueError("quadrature orders must be positive")
        if self.near_factor < 0:
            raise ValueError("near_factor must be nonnegative")


@dataclass(frozen=True)
class OperatorSet:
    """Assembled boundary-operator blocks of one subdomain at one s."""

    V: np.ndarray
    K: np.ndarray
    W: np.ndarray
    s: complex
    a: float
    p: float

    @property
    def kappa(self) -> complex:
        return wavenumber(self.s, self.a, self.p)

    @property
    def Kt(self) -> np.ndarray:
        return self.K.T


def _hat_curls(tri_pts, areas):
    """Surface curl of each hat function: constant per flat panel.

    ``curl_G lam_a = (v_{a+1} - v_{a+2}) / (2 A)`` for outward winding.
    """
    c = np.empty_like(tri_pts)
    for k in range(3):
        c[:, k, :] = tri_pts[:, (k + 1) % 3, :] - tri_pts[:, (k + 2) % 3, :]
    return c / (2.0 * areas[:, None, None])


def _touching_pairs(triangles, n_vertices):
    """Ordered (i, j) pairs of panels sharing at least one vertex."""
    n = len(triangles)
    incidence = sp.csr_matrix(
        (
            np.ones(3 * n, dtype=np.int8),
            (np.repeat(np.arange(n), 3), triangles.ravel()),
        ),
        shape=(n, n_vertices),
    )
    shared = (incidence @ incidence.T).tocoo()
    return shared.row, shared.col


def assemble_operators(
    surf: SubdomainSurface,
    s: complex,
    a: float,
    p: float,
    orders: QuadratureOrders | None = None,
    row_chunk: int | None = None,
) -> OperatorSet:
    """Assemble V, K, W for one subdomain surface at frequency s.

    The base pass walks unordered panel pairs once (kernel values are
    symmetric in the pair) and scatters each pair's contribution to both
    orientations; real frequencies run in real arithmetic.
    """
    orders = orders or QuadratureOrders()
    orders.validate()
    s = check_frequency(s)
    kappa = wavenumber(s, a, p)
    if kappa.imag == 0.0:
        kappa = kappa.real
    tris = surf.triangles
    tri_pts = surf.vertices[tris]
    normals, areas = surf.normals, surf.areas
    n_tri, n_vert = surf.n_p0, surf.n_p1
    curls = _hat_curls(tri_pts, areas)

    ref_pts, ref_w = triangle_rule(orders.base)
    lam = shape_values(ref_pts)
    X = np.einsum("qa,nad->nqd", lam, tri_pts)
    wq = 2.0 * areas[:, None] * ref_w[None, :]
    lam_w = wq[:, :, None] * lam[None, :, :]
    ndoty = np.einsum("nd,nqd->nq", normals, X)
    X2 = np.einsum("nqd,nqd->nq", X, X)

    adj_r, adj_c = _touching_pairs(tris, n_vert)
    adj = sp.csr_matrix(
        (np.ones(len(adj_r), bool), (adj_r, adj_c)), shape=(n_tri, n_tri)
    )
    cent = surf.centroids()
    diam = surf.diameters()

    G00 = np.zeros((n_tri, n_tri), dtype=complex)
    K = np.zeros((n_tri, n_vert), dtype=complex)
    W = np.zeros((n_vert, n_vert), dtype=complex)

    if row_chunk is None:
        # keep each (chunk, n_tri, Q, Q) temporary near 250 MB
        per_pair = 16 * len(ref_w) ** 2
        row_chunk = min(64, max(8, int(2.5e8 / (per_pair * max(n_tri, 1)))))
    near_lists = []
    for lo in range(0, n_tri, row_chunk):
        hi = min(lo + row_chunk, n_tri)
        rows = np.arange(lo, hi)
        cols = np.arange(lo, n_tri)
        dist = np.linalg.norm(cent[rows, None, :] - cent[None, cols, :], axis=2)
        lim = orders.near_factor * np.maximum(
            diam[rows, None], diam[None, cols]
        )
        touching = adj[rows][:, cols].toarray()
        upper = cols[None, :] > rows[:, None]
        mask = (dist < lim) | touching
        keep = (~mask) & upper
        ri, ci = np.nonzero(mask & ~touching & upper)
        near_lists.append(np.column_stack([rows[ri], cols[ci]]))

        cross = np.einsum("iqd,jrd->ijqr", X[rows], X[cols], optimize=True)
        cross *= -2.0
        cross += X2[rows][:, None, :, None]
        cross += X2[cols][None, :, None, :]
        np.maximum(cross, 0.0, out=cross)
        r = np.sqrt(cross, out=cross)
        with np.errstate(divide="ignore", invalid="ignore"):
            G = laplace_kernel(kappa, r)
            g1 = grad_factor(kappa, r, kernel=G)
        del cross, r
        mi, mj = np.nonzero(~keep)
        G[mi, mj] = 0.0
        g1[mi, mj] = 0.0

        # pair integrals, trial panel second: test rows i, trial cols j
        blk = np.einsum("iq,jr,ijqr->ij", wq[rows], wq[cols], G, optimize=True)
        G00[rows[:, None], cols[None, :]] += blk
        G00[cols[:, None], rows[None, :]] += blk.T

        # double layer: d/dn_y G = g1 <n_y, y - x>
        dot_d = (
            ndoty[cols][None, :, None, :]
            - np.einsum("jd,iqd->ijq", normals[cols], X[rows])[:, :, :, None]
        )
        H = g1 * dot_d
        del dot_d
        K_dir = np.einsum(
            "iq,ijqr,jrb->ijb", wq[rows], H, lam_w[cols], optimize=True
        )
        _scatter_rows(K, rows[:, None, None], tris[cols][None, :, :], K_dir)
        dot_m = (
            ndoty[rows][:, None, :, None]
            - np.einsum("id,jrd->ijr", normals[rows], X[cols])[:, :, None, :]
        )
        np.multiply(g1, dot_m, out=H)
        del dot_m, g1
        K_mir = np.einsum(
            "jr,ijqr,iqb->ijb", wq[cols], H, lam_w[rows], optimize=True
        )
        _scatter_rows(K, cols[None, :, None], tris[rows][:, None, :], K_mir)
        del H

        IG = np.einsum(
            "iqa,jrb,ijqr->ijab", lam_w[rows], lam_w[cols], G, optimize=True
        )
        del G
        cc = np.einsum("iad,jbd->ijab", curls[rows], curls[cols])
        nn = normals[rows] @ normals[cols].T
        blocks = cc * blk[:, :, None, None]
        blocks += (kappa * kappa) * nn[:, :, None, None] * IG
        _scatter_rows(
            W, tris[rows][:, None, :, None], tris[cols][None, :, None, :],
            blocks,
        )
        _scatter_rows(
            W, tris[cols][None, :, :, None], tris[rows][:, None, None, :],
            blocks.transpose(0, 1, 3, 2),
        )

    near_pairs = np.vstack(near_lists) if near_lists else np.zeros((0, 2), int)
    _near_corrections(
        surf, near_pairs, kappa, orders.near, tri_pts, lam, ref_w, normals,
        areas, curls, G00, K, W,
    )
    keep_up = adj_r <= adj_c
    _singular_corrections(
        surf, adj_r[keep_up], adj_c[keep_up], kappa, orders.singular,
        tri_pts, normals, areas, curls, G00, K, W,
    )

    a2 = a * a
    return OperatorSet(V=G00 / a2, K=K, W=a2 * W, s=complex(s), a=a, p=p)


def _scatter_rows(target, row_idx, col_idx, values):
    """Accumulate ``values`` into ``target`` with broadcast index arrays."""
    np.add.at(
        target,
        (
            np.broadcast_to(row_idx, values.shape),
            np.broadcast_to(col_idx, values.shape),
        ),
        values,
    )


def _near_corrections(
    surf, pairs, kappa, order, tri_pts, lam_base, w_base, normals, areas,
    curls, G00, K, W,
):
    """Re-integrate near-but-disjoint pairs with a higher-order rule.

    ``pairs`` holds each unordered pair once (i < j); both orientations
    are scattered from one kernel evaluation.
    """
    if len(pairs) == 0:
        return
    ref_pts, ref_w = triangle_rule(order)
    lam = shape_values(ref_pts)
    tris = surf.triangles
    for batch in np.array_split(pairs, max(1, len(pairs) // 256)):
        i, j = batch[:, 0], batch[:, 1]
        Xi = np.einsum("qa,mad->mqd", lam, tri_pts[i])
        Yj = np.einsum("qa,mad->mqd", lam, tri_pts[j])
        diff = Xi[:, :, None, :] - Yj[:, None, :, :]
        r = np.linalg.norm(diff, axis=3)
        G = laplace_kernel(kappa, r)
        g1 = grad_factor(kappa, r, kernel=G)
        wi = 2.0 * areas[i, None] * ref_w[None, :]
        wj = 2.0 * areas[j, None] * ref_w[None, :]
        g00 = np.einsum("mq,mr,mqr->m", wi, wj, G)
        G00[i, j] += g00
        G00[j, i] += g00
        dot = -np.einsum("md,mqrd->mqr", normals[j], diff)
        K_blk = np.einsum("mq,mqr,mr,rb->mb", wi, g1 * dot, wj, lam)
        np.add.at(K, (i[:, None], tris[j]), K_blk)
        dot_m = np.einsum("md,mqrd->mqr", normals[i], diff)
        K_mir = np.einsum("mr,mqr,mq,qb->mb", wj, g1 * dot_m, wi, lam)
        np.add.at(K, (j[:, None], tris[i]), K_mir)
        IG = np.einsum("mq,qa,mr,rb,mqr->mab", wi, lam, wj, lam, G)
        cc = np.einsum("mad,mbd->mab", curls[i], curls[j])
        nn = np.einsum("md,md->m", normals[i], normals[j])
        blocks = cc * g00[:, None, None]
        blocks += (kappa * kappa) * nn[:, None, None] * IG
        np.add.at(W, (tris[i][:, :, None], tris[j][:, None, :]), blocks)
        np.add.at(
            W,
            (tris[j][:, :, None], tris[i][:, None, :]),
            blocks.transpose(0, 2, 1),
        )


def _singular_corrections(
    surf, adj_r, adj_c, kappa, order, tri_pts, normals, areas, curls,
    G00, K, W,
):
    """Integrate touching pairs with the regularizing transforms.

    ``adj_r``/``adj_c`` hold each unordered pair once (i <= j); pairs are
    grouped by contact class so each group shares one reference rule and
    one vectorized kernel evaluation, scattered to both orientations.
    """
    tris = surf.triangles
    groups: dict = {}
    for i, j in zip(adj_r, adj_c):
        kind, px, py = classify_pair(tris[i], tris[j])
        groups.setdefault(kind, []).append((i, j) + px + py)
    for kind, entries in groups.items():
        rule = pair_rule(kind, order)
        lx = shape_values(rule.xhat)
        ly = shape_values(rule.yhat)
        ent = np.asarray(entries)
        mirror = kind is not PanelPairKind.IDENTICAL
        for batch in np.array_split(ent, max(1, len(ent) // 1024)):
            i, j = batch[:, 0], batch[:, 1]
            px, py = batch[:, 2:5], batch[:, 5:8]
            m, q = len(batch), len(rule.weights)
            vx = tri_pts[i[:, None], px]
            vy = tri_pts[j[:, None], py]
            x = np.einsum("qa,mad->mqd", lx, vx)
            y = np.einsum("qa,mad->mqd", ly, vy)
            midx = np.arange(m)[:, None, None]
            qidx = np.arange(q)[None, :, None]
            lam_x = np.zeros((m, q, 3))
            lam_y = np.zeros((m, q, 3))
            lam_x[midx, qidx, px[:, None, :]] = lx[None, :, :]
            lam_y[midx, qidx, py[:, None, :]] = ly[None, :, :]
            w = rule.weights[None, :] * (4.0 * areas[i] * areas[j])[:, None]
            diff = x - y
            r = np.linalg.norm(diff, axis=2)
            G = laplace_kernel(kappa, r)
            g00 = np.einsum("mq,mq->m", w, G)
            G00[i, j] += g00
            IG = np.einsum(
                "mq,mqa,mqb->mab", w * G, lam_x, lam_y, optimize=True
            )
            cc = np.einsum("mad,mbd->mab", curls[i], curls[j])
            nn = np.einsum("md,md->m", normals[i], normals[j])
            blocks = cc * g00[:, None, None]
            blocks += (kappa * kappa) * nn[:, None, None] * IG
            np.add.at(W, (tris[i][:, :, None], tris[j][:, None, :]), blocks)
            if not mirror:
                continue
            g1 = grad_factor(kappa, r, kernel=G)
            dot = -np.einsum("md,mqd->mq", normals[j], diff)
            K_blk = np.einsum("mq,mqb->mb", w * g1 * dot, lam_y)
            np.add.at(K, (i[:, None], tris[j]), K_blk)
            dot_m = np.einsum("md,mqd->mq", normals[i], diff)
            K_mir = np.einsum("mq,mqb->mb", w * g1 * dot_m, lam_x)
            np.add.at(K, (j[:, None], tris[i]), K_mir)
            G00[j, i] += g00
            np.add.at(
                W,
                (tris[j][:, :, None], tris[i][:, None, :]),
                blocks.transpose(0, 2, 1),
            )


# ----------------------------------------------------------------------
# mass matrices
# ----------------------------------------------------------------------

def _part_selection(surf, parts):
    if parts is None:
        return np.arange(surf.n_p0)
    if isinstance(parts, str):
        parts = (parts,)
    unknown = set(parts) - set(VALID_PARTS)
    if unknown:
        raise ValueError(f"unknown part tag(s): {sorted(unknown)}")
    return np.flatnonzero(np.isin(surf.part, list(parts)))


def assemble_p0_mass(surf: SubdomainSurface, parts=None, weights=None):
    """Diagonal P0 mass; optionally restricted to parts / panel-weighted."""
    sel = _part_selection(surf, parts)
    diag = np.zeros(surf.n_p0)
    diag[sel] = surf.areas[sel] if weights is None else (
        surf.areas[sel] * np.asarray(weights)[sel]
    )
    return sp.diags(diag).tocsr()

def assemble_p1_mass(surf: SubdomainSurface, parts=None, weights=None):
    """P1 x P1 mass matrix, integrals restricted to the selected parts.

    ``weights`` is an optional per-triangle factor (e.g. a material
    coefficient), applied to each panel's local block.
    """
    sel = _part_selection(surf, parts)
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    scale = surf.areas[sel] if weights is None else (
        surf.areas[sel] * np.asarray(weights)[sel]
    )
    blocks = scale[:, None, None] * local[None, :, :]
    tri = surf.triangles[sel]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return sp.csr_matrix(
        (blocks.ravel(), (rows, cols)), shape=(surf.n_p1, surf.n_p1)
    )


def assemble_mixed_mass(surf: SubdomainSurface, parts=None):
    """P0 test x P1 trial mass: ``integral over T_p of lam_q = area / 3``."""
    sel = _part_selection(surf, parts)
    tri = surf.triangles[sel]
    rows = np.repeat(sel, 3)
    vals = np.repeat(surf.areas[sel] / 3.0, 3)
    return sp.csr_matrix(
        (vals, (rows, tri.ravel())), shape=(surf.n_p0, surf.n_p1)
    )


# ----------------------------------------------------------------------
# layer potentials at off-surface points
# ----------------------------------------------------------------------

def _potential_sum(kind, kappa, a, z, verts, dens, normals, gradient):
    """Direct rule contribution of panels ``verts`` at points ``z``.

    ``z``: (M, 3); ``verts``: (M, 3, 3); ``dens``: (M, 3) vertex values of
    the linear density; ``normals``: (M, 3).  Returns (M,) or (M, 3).
    """
    ref_pts, ref_w = triangle_rule(4)
    lam = shape_values(ref_pts)
    Y = np.einsum("qa,mad->mqd", lam, verts)
    areas = 0.5 * np.linalg.norm(
        np.cross(verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]), axis=1
    )
    w = 2.0 * areas[:, None] * ref_w[None, :]
    f = w * (lam[None, :, :] @ dens[:, :, None])[:, :, 0]
    d = z[:, None, :] - Y
    r = np.linalg.norm(d, axis=2)
    if kind == "single":
        if gradient:
            g1 = grad_factor(kappa, r) / a**2
            return np.einsum("mq,mq,mqd->md", f, g1, d)
        return np.einsum("mq,mq->m", f, laplace_kernel(kappa, r) / a**2)
    dot = np.einsum("md,mqd->mq", normals, Y - z[:, None, :])
    if gradient:
        g2 = second_grad_factor(kappa, r)
        g1 = grad_factor(kappa, r)
        return np.einsum("mq,mq,mqd->md", f, dot * g2, d) - np.einsum(
            "mq,mq,md->md", f, g1, normals
        )
    return np.einsum("mq,mq->m", f, grad_factor(kappa, r) * dot)


def _potential(
    surf, s, a, p, points, dens_vertex, kind, gradient, near_factor, max_depth
):
    s = check_frequency(s)
    kappa = wavenumber(s, a, p)
    points = np.asarray(points, float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    tri_pts = surf.vertices[surf.triangles]
    n_tri = surf.n_p0
    m = len(points)
    cent = surf.centroids()
    diam = surf.diameters()

    dist = np.linalg.norm(points[:, None, :] - cent[None, :, :], axis=2)
    near = dist < near_factor * diam[None, :]
    out_shape = (m, 3) if gradient else (m,)
    out = np.zeros(out_shape, dtype=complex)

    # far pairs: one vectorized pass per point over its far panels
    far_idx, far_tri = np.nonzero(~near)
    if len(far_idx):
        vals = _potential_sum(
            kind,
            kappa,
            a,
            points[far_idx],
            tri_pts[far_tri],
            dens_vertex[far_tri],
            surf.normals[far_tri],
            gradient,
        )
        np.add.at(out, far_idx, vals)

    # near pairs: level-synchronous quadrisection until every subpanel is
    # far from its target point
    pi, ti = np.nonzero(near)
    verts = tri_pts[ti]
    dens = dens_vertex[ti]
    nrm = surf.normals[ti]
    for depth in range(max_depth):
        if len(pi) == 0:
            break
        c = verts.mean(axis=1)
        edge = np.linalg.norm(
            verts - np.roll(verts, 1, axis=1), axis=2
        ).max(axis=1)
        d = np.linalg.norm(points[pi] - c, axis=1)
        done = (d >= near_factor * edge) | (depth == max_depth - 1)
        if done.any():
            vals = _potential_sum(
                kind, kappa, a, points[pi[done]], verts[done], dens[done],
                nrm[done], gradient,
            )
            np.add.at(out, pi[done], vals)
        keep = ~done
        pi, verts, dens, nrm = pi[keep], verts[keep], dens[keep], nrm[keep]
        if len(pi) == 0:
            break
        mid = 0.5 * (verts + np.roll(verts, -1, axis=1))  # m01, m12, m20
        dmid = 0.5 * (dens + np.roll(dens, -1, axis=1))
        children_v = np.concatenate(
            [
                np.stack([verts[:, 0], mid[:, 0], mid[:, 2]], axis=1),
                np.stack([mid[:, 0], verts[:, 1], mid[:, 1]], axis=1),
                np.stack([mid[:, 2], mid[:, 1], verts[:, 2]], axis=1),
                np.stack([mid[:, 0], mid[:, 1], mid[:, 2]], axis=1),
            ]
        )
        children_d = np.concatenate(
            [
                np.stack([dens[:, 0], dmid[:, 0], dmid[:, 2]], axis=1),
                np.stack([dmid[:, 0], dens[:, 1], dmid[:, 1]], axis=1),
                np.stack([dmid[:, 2], dmid[:, 1], dens[:, 2]], axis=1),
                np.stack([dmid[:, 0], dmid[:, 1], dmid[:, 2]], axis=1),
            ]
        )
        pi = np.tile(pi, 4)
        nrm = np.tile(nrm, (4, 1))
        verts, dens = children_v, children_d
    return out[0] if single else out


def single_layer_potential(
    surf, s, a, p, density_p0, points, gradient=False,
    near_factor=0.75, max_depth=12,
):
    """Single-layer potential of a P0 density at off-surface points."""
    dens = np.repeat(
        np.asarray(density_p0, dtype=complex)[:, None], 3, axis=1
    )
    return _potential(
        surf, s, a, p, points, dens, "single", gradient, near_factor,
        max_depth,
    )


def double_layer_potential(
    surf, s, a, p, density_p1, points, gradient=False,
    near_factor=0.75, max_depth=12,
):
    """Double-layer potential of a P1 density at off-surface points."""
    dens = np.asarray(density_p1, dtype=complex)[surf.triangles]
    return _potential(
        surf, s, a, p, points, dens, "double", gradient, near_factor,
        max_depth,
    )


# ----------------------------------------------------------------------
# matrix snapshots
# ----------------------------------------------------------------------

_MAGIC = b"WBM1"


def save_matrix(path, matrix, s, tag=""):
    """Write a complex matrix snapshot.

    Layout: 4-byte magic, uint32 rows, uint32 cols, 4-byte tag, complex128
    frequency; then the row-major complex128 little-endian payload.
    """
    m = np.ascontiguousarray(matrix, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError("matrix snapshots are 2-D only")
    tag_b = tag.encode()[:4].ljust(4, b"\0")
    s = complex(s)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", m.shape[0], m.shape[1]))
        fh.write(tag_b)
        fh.write(struct.pack("<dd", s.real, s.imag))
        fh.write(m.astype("<c16").tobytes())


def load_matrix(path):
    """Read a matrix snapshot; returns (matrix, s, tag)."""
    with open(path, "rb") as fh:
        head = fh.read(32)
        if len(head) != 32 or head[:4] != _MAGIC:
            raise ValueError(f"{path}: not a matrix snapshot")
        rows, cols = struct.unpack("<II", head[4:12])
        tag = head[12:16].rstrip(b"\0").decode()
        sre, sim = struct.unpack("<dd", head[16:32])
        payload = fh.read()
    if len(payload) != 16 * rows * cols:
        raise ValueError(f"{path}: truncated payload")
    data = np.frombuffer(payload, dtype="<c16")
    return data.reshape(rows, cols).copy(), complex(sre, sim), tag
