"""Analytic excitation signals and point-source trace families.

Time signals come with their exact Laplace transforms, since the time
march consumes boundary data only through Laplace-domain samples.  The
point-source family evaluates the subdomain kernel and its conormal
derivative, giving analytic Cauchy traces for manufactured problems.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np

from .quadrature import check_frequency

__all__ = [
    "CausalPulse",
    "CausalRamp",
    "point_source_field",
    "point_source_traces",
    "polar_cap_bump",
]


@dataclass(frozen=True)
class CausalPulse:
    """Smooth causal pulse ``amplitude ((t-t0)/tau)^m exp(-(t-t0)/tau)``.

    Vanishes identically for ``t < onset`` and meets it with ``m - 1``
    zero derivatives, so CQ sees data that is both exactly causal and
    smooth.  The Laplace transform is exact:
    ``m! tau exp(-s t0) / (tau s + 1)^{m+1}``.
    """

    onset: float = 0.0
    decay: float = 0.25
    power: int = 4
    amplitude: float = 1.0

    def validate(self) -> None:
        if not (self.decay > 0.0):
            raise ValueError(f"decay time must be positive, got {self.decay}")
        if self.onset < 0.0:
            raise ValueError(f"onset must be nonnegative, got {self.onset}")
        if self.power < 1:
            raise ValueError(f"power must be at least 1, got {self.power}")

    def __call__(self, t):
        self.validate()
        t = np.asarray(t, dtype=float)
        u = (t - self.onset) / self.decay
        out = np.where(u > 0.0, np.maximum(u, 0.0) ** self.power, 0.0)
        out = out * np.exp(-np.maximum(u, 0.0))
        return self.amplitude * out

    def laplace(self, s):
        self.validate()
        s = complex(s)
        return (
            self.amplitude
            * factorial(self.power)
            * self.decay
            * np.exp(-s * self.onset)
            / (self.decay * s + 1.0) ** (self.power + 1)
        )


@dataclass(frozen=True)
class CausalRamp:
    """Raised-cosine-squared window ramping smoothly from 0 to 1.

    Equals ``((1 - cos(pi (t - t0)/ramp)) / 2)^2`` on the ramp interval
    and ``1`` afterwards, so the signal switches on once and stays; it
    meets both ends of the ramp with continuous first derivative.  With
    ``w = pi/ramp`` and ``E = exp(-s ramp)`` the Laplace transform is
    exact::

        exp(-s t0) [ 3(1-E)/(8s) - s(1+E)/(2(s^2+w^2))
                     + s(1-E)/(8(s^2+4w^2)) + E/s ]
    """

    onset: float = 0.0
    ramp: float = 1.0
    amplitude: float = 1.0

    def validate(self) -> None:
        if not (self.ramp > 0.0):
            raise ValueError(f"ramp time must be positive, got {self.ramp}")
        if self.onset < 0.0:
            raise ValueError(f"onset must be nonnegative, got {self.onset}")

    def __call__(self, t):
        self.validate()
        t = np.asarray(t, dtype=float)
        u = np.clip((t - self.onset) / self.ramp, 0.0, 1.0)
        window = (0.5 * (1.0 - np.cos(np.pi * u))) ** 2
        return self.amplitude * window

    def laplace(self, s):
        self.validate()
        s = complex(s)
        w = np.pi / self.ramp
        decay = np.exp(-s * self.ramp)
        hat = (
            0.375 * (1.0 - decay) / s
            - 0.5 * s * (1.0 + decay) / (s * s + w * w)
            + 0.125 * s * (1.0 - decay) / (s * s + 4.0 * w * w)
            + decay / s
        )
        return self.amplitude * np.exp(-s * self.onset) * hat


def point_source_field(points, s, a, p, source, gradient=False):
    """Kernel field ``exp(-s p r / a) / (4 pi a^2 r)`` of a point source.

    ``points`` is (n, 3) or (3,); with ``gradient=True`` the spatial
    gradient is returned instead (same leading shape, trailing 3).
    """
    s = check_frequency(s)
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    src = np.asarray(source, dtype=float)
    kappa = s * p / a
    diff = pts - src[None, :]
    r = np.linalg.norm(diff, axis=1)
    if np.any(r <= 0.0):
        raise ValueError("evaluation point coincides with the source")
    val = np.exp(-kappa * r) / (4.0 * np.pi * a**2 * r)
    if gradient:
        out = (-(kappa + 1.0 / r) * val / r)[:, None] * diff
        return out[0] if single else out
    return val[0] if single else val


def point_source_traces(surf, s, a, p, source=(0.0, 0.0, 2.0)):
    """Analytic Cauchy traces of the point-source field on a surface.

    Returns the Dirichlet trace sampled at the vertices (P1
    coefficients) and the conormal trace ``n . (a^2 grad)`` sampled at
    the centroids (P0 coefficients).
    """
    gd = point_source_field(surf.vertices, s, a, p, source)
    grad = point_source_field(surf.centroids(), s, a, p, source, gradient=True)
    gn = a**2 * np.einsum("md,md->m", surf.normals, grad)
    return gd, gn


def polar_cap_bump(points, cap_angle=np.pi / 3.0, axis=(0.0, 0.0, 1.0)):
    """Smooth bump supported on the polar cap ``angle(x, axis) < cap_angle``.

    Classic compactly supported mollifier profile in the polar angle;
    equals 1 on the axis and vanishes with all derivatives at the cap
    rim.  Points are taken as directions from the origin.
    """
    if not (0.0 < cap_angle < np.pi):
        raise ValueError(f"cap_angle must lie in (0, pi), got {cap_angle}")
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    rad = np.linalg.norm(pts, axis=1)
    if np.any(rad <= 0.0):
        raise ValueError("polar angle undefined at the origin")
    cosang = np.clip(pts @ ax / rad, -1.0, 1.0)
    theta = np.arccos(cosang)
    u = theta / cap_angle
    out = np.zeros(pts.shape[0])
    inside = u < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out[0] if single else out
