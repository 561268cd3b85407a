"""Shared independent reference helpers for the test suite.

Everything here is built from plain Gauss rules and closed forms only —
never from the package's regularizing transforms — so tests that compare
against these helpers are genuine cross-checks.
"""

import math

import numpy as np


def tri_area(tri):
    return 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))


def _ref_rule(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    P, Q = np.meshgrid(x, x, indexing="ij")
    pts = np.column_stack([P.ravel(), (P * Q).ravel()])
    return pts, (np.outer(w, w) * P).ravel()


def map_tri(tri, pts):
    return (
        tri[0]
        + np.outer(pts[:, 0], tri[1] - tri[0])
        + np.outer(pts[:, 1], tri[2] - tri[1])
    )


def brute_pair_integral(f, tx, ty, n=24):
    """Tensor-Gauss integral of f(x, y) over two panels (smooth f only)."""
    tx = np.asarray(tx, float)
    ty = np.asarray(ty, float)
    pts, w = _ref_rule(n)
    X = map_tri(tx, pts)
    Y = map_tri(ty, pts)
    vals = f(np.repeat(X, len(Y), axis=0), np.tile(Y, (len(X), 1)))
    ww = np.outer(w, w).ravel()
    return 4 * tri_area(tx) * tri_area(ty) * np.einsum(
        "q,q...->...", ww, np.asarray(vals)
    )


def newtonian_inplane(tri, x):
    """integral over T of 1/|x - y| dS_y, for x in the plane of T.

    Edge-log closed form, evaluated through asinh for stability near the
    edge lines.
    """
    tri = np.asarray(tri, float)
    x = np.asarray(x, float)
    nrm = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    nrm = nrm / np.linalg.norm(nrm)
    val = 0.0
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        that = (b - a) / np.linalg.norm(b - a)
        mhat = np.cross(that, nrm)
        de = float(np.dot(a - x, mhat))
        if de == 0.0:
            continue
        s0 = float(np.dot(a - x, that))
        s1 = float(np.dot(b - x, that))
        val += de * (math.asinh(s1 / abs(de)) - math.asinh(s0 / abs(de)))
    return val
