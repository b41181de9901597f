"""The corner map z -> z^(pi/alpha) and numerical checks built on it.

A sector of opening ``alpha`` with its first leg along ``rotation`` is sent
onto the upper half-disk.  Harmonic functions stay harmonic under the map
and the Dirichlet energy is unchanged, which ``energy_identity_check``
verifies by quadrature on both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from signolab.fields import Field
from signolab.geometry import CriticalPoint

ANGLE_TOL = 1e-12


class OutOfSector(ValueError):
    pass


@dataclass(frozen=True)
class CornerMap:
    center: tuple = (0.0, 0.0)
    alpha: float = math.pi
    rotation: float = 0.0  # direction of the first leg

    def __post_init__(self):
        if not 0 < self.alpha < 2 * math.pi:
            raise ValueError("opening angle must lie in (0, 2 pi)")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def exponent(self) -> float:
        return math.pi / self.alpha

    @classmethod
    def at(cls, cp: CriticalPoint) -> "CornerMap":
        return cls(cp.location, cp.angle, cp.direction)


def local_polar(m: CornerMap, points):
    """Radius and angle in [0, alpha] relative to the first leg; raises OutOfSector."""
    p = np.atleast_2d(np.asarray(points, float)) - np.asarray(m.center)
    r = np.hypot(p[:, 0], p[:, 1])
    theta = np.mod(np.arctan2(p[:, 1], p[:, 0]) - m.rotation, 2 * math.pi)
    # a point on the first leg may come back as 2 pi - eps
    theta = np.where(theta > 2 * math.pi - ANGLE_TOL, 0.0, theta)
    scale = np.maximum(1.0, r)
    if np.any(r <= ANGLE_TOL * scale):
        raise OutOfSector("the sector center has no image direction")
    if np.any(theta > m.alpha + ANGLE_TOL):
        bad = int(np.argmax(theta > m.alpha + ANGLE_TOL))
        raise OutOfSector(f"point {p[bad] + m.center} lies outside the sector")
    return r, np.minimum(theta, m.alpha)


def map_point(m: CornerMap, points) -> np.ndarray:
    """Image ``r^(pi/alpha) e^(i theta pi/alpha)`` in the half-disk frame."""
    r, theta = local_polar(m, points)
    rh, th = r**m.exponent, theta * m.exponent
    return np.stack([rh * np.cos(th), rh * np.sin(th)], axis=1)


def inverse(m: CornerMap, points) -> np.ndarray:
    """Preimage of half-disk points, back in world coordinates."""
    p = np.atleast_2d(np.asarray(points, float))
    rh = np.hypot(p[:, 0], p[:, 1])
    th = np.arctan2(p[:, 1], p[:, 0])
    th = np.where((th < 0) & (th > -ANGLE_TOL), 0.0, th)
    if np.any(th < 0) or np.any(rh == 0):
        raise OutOfSector("point is outside the closed upper half-plane or at the origin")
    r = rh ** (1.0 / m.exponent)
    ang = th / m.exponent + m.rotation
    return np.stack([m.center[0] + r * np.cos(ang), m.center[1] + r * np.sin(ang)], axis=1)


def jacobian(m: CornerMap, points) -> np.ndarray:
    """Real 2x2 derivative of the map at each point, shape (n, 2, 2)."""
    r, theta = local_polar(m, points)
    p = m.exponent
    # h'(zeta) = p zeta^(p-1) in the leg frame, then undo the rotation
    mod = p * r ** (p - 1)
    arg = (p - 1) * theta - m.rotation
    a, b = mod * np.cos(arg), mod * np.sin(arg)
    return np.stack([np.stack([a, -b], axis=1), np.stack([b, a], axis=1)], axis=1)


def pull_back(field: Field, m: CornerMap):
    """``y_hat(z_hat) = y(h^-1(z_hat))`` as a vectorized callable on (n, 2) arrays."""

    def y_hat(points):
        z = inverse(m, points)
        return field.value(z[:, 0], z[:, 1])

    return y_hat


def _polar_gauss(n: int, radius: float, opening: float):
    x, w = np.polynomial.legendre.leggauss(n)
    r = 0.5 * radius * (x + 1)
    wr = 0.5 * radius * w
    t = 0.5 * opening * (x + 1)
    wt = 0.5 * opening * w
    R, T = np.meshgrid(r, t, indexing="ij")
    W = np.outer(wr, wt) * R
    return R.ravel(), T.ravel(), W.ravel()


def _polar_derivatives(field: Field, m: CornerMap, r, theta):
    ang = theta + m.rotation
    c, s = np.cos(ang), np.sin(ang)
    x = m.center[0] + r * c
    y = m.center[1] + r * s
    gx, gy = field.grad(x, y)
    gx = np.broadcast_to(gx, r.shape)
    gy = np.broadcast_to(gy, r.shape)
    return gx * c + gy * s, r * (-gx * s + gy * c)


@dataclass
class EnergyCheck:
    sector: float
    mapped: float
    relative_difference: float

    def to_json(self) -> dict:
        return {"E_sector": self.sector, "E_mapped": self.mapped, "relative_difference": self.relative_difference}


def energy_identity_check(field: Field, m: CornerMap, resolution: int = 256, radius: float = 1.0) -> EnergyCheck:
    """Dirichlet energy of ``y`` on the sector of given radius and of ``y_hat`` on its image.

    Both integrals use a ``resolution x resolution`` tensor Gauss rule in
    polar coordinates.  The mapped gradient comes from the chain rule
    ``d/dr_hat = (dr/dr_hat) d/dr`` and ``d/dtheta_hat = (alpha/pi) d/dtheta``,
    so no numerical differentiation is involved.
    """
    p = m.exponent
    r, t, w = _polar_gauss(resolution, radius, m.alpha)
    dr, dt = _polar_derivatives(field, m, r, t)
    e_sector = float(np.sum(w * (dr**2 + (dt / r) ** 2)))

    rh, th, wh = _polar_gauss(resolution, radius**p, math.pi)
    r0 = rh ** (1.0 / p)
    dr, dt = _polar_derivatives(field, m, r0, th / p)
    d_rh = dr / (p * r0 ** (p - 1))
    d_th = dt / p
    e_mapped = float(np.sum(wh * (d_rh**2 + (d_th / rh) ** 2)))

    scale = max(abs(e_sector), abs(e_mapped))
    rel = 0.0 if scale == 0.0 else abs(e_sector - e_mapped) / scale
    return EnergyCheck(e_sector, e_mapped, rel)


def mapped_laplacian(field: Field, m: CornerMap, points, step: float) -> np.ndarray:
    """5-point Laplacian of the pulled-back field at half-disk points."""
    p = np.atleast_2d(np.asarray(points, float))
    y_hat = pull_back(field, m)
    ex, ey = np.array([step, 0.0]), np.array([0.0, step])
    total = y_hat(p + ex) + y_hat(p - ex) + y_hat(p + ey) + y_hat(p - ey) - 4 * y_hat(p)
    return total / step**2


@dataclass(frozen=True)
class BoundaryGradientSample:
    """Gradient data at a boundary point, in the frame where the boundary is the real axis."""

    arclength: float
    t: float  # tangential derivative, d/dx_1 in the local frame
    n: float  # normal derivative, d/dx_2 in the local frame

    @property
    def w(self) -> complex:
        return complex(self.n, self.t)


def imag_w_squared(sample: BoundaryGradientSample) -> float:
    """``Im(w^2)`` with ``w = d2 y + i d1 y``; equals ``2 t n``."""
    return 2.0 * sample.t * sample.n


def boundary_samples(field: Field, a, b, count: int = 50) -> list:
    """Samples along the straight edge from ``a`` to ``b`` (interior points only).

    The local frame has the edge direction as ``x_1`` and the inward normal
    (left of the edge for a counterclockwise boundary) as ``x_2``.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    length = float(np.linalg.norm(b - a))
    d = (b - a) / length
    nrm = np.array([-d[1], d[0]])
    s = (np.arange(count) + 0.5) / count * length
    pts = a + s[:, None] * d
    gx, gy = field.grad(pts[:, 0], pts[:, 1])
    gx = np.broadcast_to(gx, s.shape)
    gy = np.broadcast_to(gy, s.shape)
    t = gx * d[0] + gy * d[1]
    n = gx * nrm[0] + gy * nrm[1]
    return [BoundaryGradientSample(float(si), float(ti), float(ni)) for si, ti, ni in zip(s, t, n)]
