"""Gauss rules and regularizing transforms for panel-pair integrals.

Reference quantities live on the unit simplex ``{0 <= x2 <= x1 <= 1}`` with
the affine chart ``x = V0 + x1 (V1 - V0) + x2 (V2 - V1)``, whose P1 hat
values are ``(1 - x1, x1 - x2, x2)``.  Pairs of flat panels that share a
vertex, an edge, or coincide are integrated with Sauter-Schwab-type
variable changes that remove the kernel singularity; disjoint pairs use
tensor-product Gauss rules.  All weights are reference weights: a physical
pair integral is the weighted sum times ``4 * area_x * area_y``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "PanelPairKind",
    "PairPoints",
    "PairRule",
    "check_frequency",
    "classify_pair",
    "gauss01",
    "grad_factor",
    "integrate_pair",
    "laplace_kernel",
    "pair_points",
    "pair_rule",
    "second_grad_factor",
    "shape_values",
    "transmission_kernel",
    "triangle_rule",
    "wavenumber",
]


def check_frequency(s: complex) -> complex:
    """Validate a Laplace frequency; the solver requires Re s > 0."""
    s = complex(s)
    if not (np.isfinite(s.real) and np.isfinite(s.imag)):
        raise ValueError(f"frequency must be finite, got {s!r}")
    if s.real <= 0.0:
        raise ValueError(f"frequency must satisfy Re s > 0, got {s!r}")
    return s


# ----------------------------------------------------------------------
# kernels
# ----------------------------------------------------------------------

def wavenumber(s: complex, a: float, p: float) -> complex:
    """Laplace-domain wavenumber ``s p / a`` of a subdomain."""
    return complex(s) * p / a


def laplace_kernel(kappa, r):
    """Fundamental solution ``exp(-kappa r) / (4 pi r)``."""
    return np.exp(-kappa * r) / (4.0 * np.pi * r)


def transmission_kernel(s, a, p, r):
    """Subdomain kernel: fundamental solution over ``a**2``."""
    return laplace_kernel(wavenumber(s, a, p), r) / a**2


def grad_factor(kappa, r, kernel=None):
    """Factor ``g1`` with ``grad_x G(|x-y|) = g1(r) (x - y)``.

    Pass ``kernel = laplace_kernel(kappa, r)`` if already evaluated to
    skip a second exponential.
    """
    if kernel is None:
        kernel = laplace_kernel(kappa, r)
    return -(kappa + 1.0 / r) * kernel / r


def second_grad_factor(kappa, r, kernel=None):
    """Factor ``g2 = g1'(r)/r``; used by gradients of the dipole kernel.

    ``grad_x [d/dn_y G] = <n_y, y - x> g2(r) (x - y) - g1(r) n_y``.
    """
    if kernel is None:
        kernel = laplace_kernel(kappa, r)
    return (kappa * kappa + 3.0 * kappa / r + 3.0 / (r * r)) * (
        kernel / (r * r)
    )


# ----------------------------------------------------------------------
# plain rules
# ----------------------------------------------------------------------

def _readonly(*arrays):
    for arr in arrays:
        arr.setflags(write=False)
    return arrays


@lru_cache(maxsize=None)
def gauss01(n: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if n < 1:
        raise ValueError(f"rule order must be positive, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    return _readonly(0.5 * (x + 1.0), 0.5 * w)


@lru_cache(maxsize=None)
def triangle_rule(n: int):
    """Collapsed ``n x n`` tensor rule on the simplex; weights sum to 1/2."""
    p, wp = gauss01(n)
    pg, qg = np.meshgrid(p, p, indexing="ij")
    pts = np.column_stack([pg.ravel(), (pg * qg).ravel()])
    wts = (np.outer(wp, wp) * pg).ravel()
    return _readonly(pts, wts)


def shape_values(xhat: np.ndarray) -> np.ndarray:
    """P1 hat values ``(1 - x1, x1 - x2, x2)`` at simplex points (Q, 2)."""
    x1, x2 = xhat[:, 0], xhat[:, 1]
    return np.column_stack([1.0 - x1, x1 - x2, x2])


# ----------------------------------------------------------------------
# pair classification
# ----------------------------------------------------------------------

class PanelPairKind(enum.Enum):
    DISJOINT = "disjoint"
    SHARED_VERTEX = "vertex"
    SHARED_EDGE = "edge"
    IDENTICAL = "identical"


def classify_pair(gids_x, gids_y):
    """Classify a panel pair by shared global vertices.

    Returns ``(kind, perm_x, perm_y)`` where the permutations reorder each
    triangle's local vertices so the shared feature comes first, in the
    same global order on both panels.
    """
    gx = tuple(int(g) for g in gids_x)
    gy = tuple(int(g) for g in gids_y)
    if len(set(gx)) != 3 or len(set(gy)) != 3:
        raise ValueError("degenerate triangle: repeated vertex ids")
    shared = sorted(set(gx) & set(gy))
    identity = (0, 1, 2)
    if not shared:
        return PanelPairKind.DISJOINT, identity, identity
    if len(shared) == 3:
        return PanelPairKind.IDENTICAL, identity, tuple(gy.index(g) for g in gx)
    if len(shared) == 2:
        a, b = shared
        ia, ib = gx.index(a), gx.index(b)
        ja, jb = gy.index(a), gy.index(b)
        return (
            PanelPairKind.SHARED_EDGE,
            (ia, ib, 3 - ia - ib),
            (ja, jb, 3 - ja - jb),
        )
    i = gx.index(shared[0])
    j = gy.index(shared[0])
    # cyclic shifts keep the original winding
    return (
        PanelPairKind.SHARED_VERTEX,
        (i, (i + 1) % 3, (i + 2) % 3),
        (j, (j + 1) % 3, (j + 2) % 3),
    )


# ----------------------------------------------------------------------
# regularizing transforms
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PairRule:
    """Reference point pairs for one panel-pair class.

    ``sum(weights * F(xhat, yhat))`` approximates the integral of F over
    the simplex squared; weights therefore sum to 1/4.
    """

    kind: PanelPairKind
    xhat: np.ndarray
    yhat: np.ndarray
    weights: np.ndarray


def _tensor4(n):
    p, w = gauss01(n)
    a, b, c, d = np.meshgrid(p, p, p, p, indexing="ij")
    wt = (
        w[:, None, None, None]
        * w[None, :, None, None]
        * w[None, None, :, None]
        * w[None, None, None, :]
    )
    return a.ravel(), b.ravel(), c.ravel(), d.ravel(), wt.ravel()


def _rule_identical(n):
    xi, eta, w1, w2 = _tensor4(n)[:4]
    base = _tensor4(n)[4] * xi * (1.0 - xi) ** 2 * w1
    x2_low = (1.0 - xi) * w1 * w2
    pieces = []
    for x1, z1, z2 in (
        ((1.0 - xi) * w1, xi, xi * eta),
        (xi * (1.0 - eta) + (1.0 - xi) * w1, xi * eta, xi),
        (xi + (1.0 - xi) * w1, xi * (eta - 1.0), xi * eta),
    ):
        xhat = np.column_stack([x1, x2_low])
        yhat = np.column_stack([x1 + z1, x2_low + z2])
        pieces.append((xhat, yhat, base))
        pieces.append((yhat, xhat, base))
    return pieces


def _rule_edge(n):
    ze, e1, e2, w = _tensor4(n)[:4]
    wt = _tensor4(n)[4]
    maps = []
    # singular cone split along u = d and v = u + d; u = x2, v = y2,
    # d = y1 - x1, t = x1
    u = ze / (1.0 + e1)
    d = ze * e1 / (1.0 + e1)
    v = ze * e2
    wgt = wt * ze**2 * (1.0 - ze) / (1.0 + e1) ** 2
    # the t strip always has length 1 - ze but starts at the piece's own u
    maps.append((u, v, d, u + w * (1.0 - ze), wgt))
    maps.append((d, v, u, d + w * (1.0 - ze), wgt))
    u2 = ze * e1 * e2
    d2 = ze * e1 * (1.0 - e2)
    t2 = ze * (1.0 - e1 * (1.0 - e2)) + w * (1.0 - ze)
    maps.append((u2, ze, d2, t2, wt * ze**2 * e1 * (1.0 - ze)))
    pieces = []
    for u_, v_, d_, t_, w_ in maps:
        xhat = np.column_stack([t_, u_])
        yhat = np.column_stack([t_ + d_, v_])
        pieces.append((xhat, yhat, w_))
        pieces.append((yhat, xhat, w_))  # mirror branch d <= 0
    return pieces


def _rule_vertex(n):
    xi, eta, w1, w2 = _tensor4(n)[:4]
    wt = _tensor4(n)[4] * xi**3 * eta
    near = np.column_stack([xi, xi * w1])
    far = np.column_stack([xi * eta, xi * eta * w2])
    return [(near, far, wt), (far, near, wt)]


_RULE_BUILDERS = {
    PanelPairKind.SHARED_VERTEX: _rule_vertex,
    PanelPairKind.SHARED_EDGE: _rule_edge,
    PanelPairKind.IDENTICAL: _rule_identical,
}


@lru_cache(maxsize=None)
def pair_rule(kind: PanelPairKind, n: int) -> PairRule:
    """Reference rule for one pair class; ``n`` points per dimension."""
    if kind is PanelPairKind.DISJOINT:
        pts, wts = triangle_rule(n)
        qx = np.repeat(pts, len(pts), axis=0)
        qy = np.tile(pts, (len(pts), 1))
        ww = np.outer(wts, wts).ravel()
        xhat, yhat, weights = _readonly(qx, qy, ww.copy())
    else:
        pieces = _RULE_BUILDERS[kind](n)
        xhat = np.vstack([p[0] for p in pieces])
        yhat = np.vstack([p[1] for p in pieces])
        weights = np.concatenate([p[2] for p in pieces])
        xhat, yhat, weights = _readonly(xhat, yhat, weights)
    return PairRule(kind, xhat, yhat, weights)


# ----------------------------------------------------------------------
# physical pair integration
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PairPoints:
    """Mapped quadrature data for one physical panel pair.

    ``lam_x``/``lam_y`` are P1 hat values indexed by the panels' original
    local vertex order; ``w`` includes both area Jacobians.
    """

    x: np.ndarray
    y: np.ndarray
    lam_x: np.ndarray
    lam_y: np.ndarray
    w: np.ndarray


def _area(verts):
    return 0.5 * np.linalg.norm(
        np.cross(verts[1] - verts[0], verts[2] - verts[0])
    )


def pair_points(
    verts_x,
    verts_y,
    kind: PanelPairKind,
    perm_x=(0, 1, 2),
    perm_y=(0, 1, 2),
    n: int = 4,
) -> PairPoints:
    """Map the reference rule of ``kind`` onto a physical panel pair."""
    rule = pair_rule(kind, n)
    vx = np.asarray(verts_x, dtype=float)[list(perm_x)]
    vy = np.asarray(verts_y, dtype=float)[list(perm_y)]
    lx = shape_values(rule.xhat)
    ly = shape_values(rule.yhat)
    lam_x = np.empty_like(lx)
    lam_y = np.empty_like(ly)
    lam_x[:, list(perm_x)] = lx
    lam_y[:, list(perm_y)] = ly
    w = rule.weights * (4.0 * _area(vx) * _area(vy))
    return PairPoints(lx @ vx, ly @ vy, lam_x, lam_y, w)


def integrate_pair(f, pts: PairPoints):
    """Integral of ``f(x, y)`` over the panel pair behind ``pts``.

    ``f`` maps point batches (Q, 3) to values of shape (Q,) or (Q, ...).
    """
    return np.einsum("q,q...->...", pts.w, np.asarray(f(pts.x, pts.y)))
