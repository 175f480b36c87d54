"""Two-layered acoustic medium with a flat interface at ``x_n = 0``.

The lower half-space (wave speed ``c_minus``) holds the source; measurements are
taken in the upper half-space (wave speed ``c_plus``). Angles are polar angles
measured from the interface plane, in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidDimensionError, OutsideApertureError

# slack for round-off in sqrt arguments at the aperture boundary
_SQRT_SLACK = 1e-14


def _check_dimension(n):
    if n not in (2, 3):
        raise InvalidDimensionError(f"dimension must be 2 or 3, got {n!r}")


@dataclass(frozen=True)
class Medium:
    c_minus: float
    c_plus: float

    def __post_init__(self):
        if not (self.c_minus > 0 and self.c_plus > 0):
            raise InvalidConfigError(
                f"wave speeds must be positive, got c_minus={self.c_minus}, c_plus={self.c_plus}"
            )
        if not (math.isfinite(self.c_minus) and math.isfinite(self.c_plus)):
            raise InvalidConfigError("wave speeds must be finite")

    @property
    def ratio(self):
        """Speed ratio ``c_minus / c_plus``."""
        return self.c_minus / self.c_plus

    @property
    def theta_c(self):
        return critical_angle(self)

    def k_minus(self, omega):
        return omega / self.c_minus

    def k_plus(self, omega):
        return omega / self.c_plus


@dataclass(frozen=True)
class Direction:
    """Unit direction with both angular and Cartesian forms.

    ``theta`` is the polar angle from the interface plane; ``phi`` the azimuth
    (ignored for ``n == 2``). Build instances with :meth:`from_angles` or
    :meth:`from_vector` so the two forms stay consistent.
    """

    n: int
    theta: float
    phi: float = 0.0
    vector: tuple = field(default=(), compare=False)

    def __post_init__(self):
        _check_dimension(self.n)
        if not self.vector:
            object.__setattr__(self, "vector", _angles_to_vector(self.n, self.theta, self.phi))

    @classmethod
    def from_angles(cls, n, theta, phi=0.0):
        return cls(n, float(theta), float(phi))

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        n = v.size
        _check_dimension(n)
        v = v / np.linalg.norm(v)
        if n == 2:
            theta = math.atan2(v[1], v[0])
            phi = 0.0
        else:
            theta = math.atan2(v[2], math.hypot(v[0], v[1]))
            phi = math.atan2(v[1], v[0])
        return cls(n, theta, phi, tuple(float(c) for c in v))

    def as_array(self):
        return np.array(self.vector)


def _angles_to_vector(n, theta, phi):
    if n == 2:
        return (math.cos(theta), math.sin(theta))
    return (
        math.cos(phi) * math.cos(theta),
        math.sin(phi) * math.cos(theta),
        math.sin(theta),
    )


def critical_angle(m: Medium) -> float:
    if m.c_minus > m.c_plus:
        return math.acos(m.c_plus / m.c_minus)
    return 0.0


def aperture_contains(m: Medium, n: int, theta):
    """Whether ``theta`` lies in the observation aperture.

    Open interval ``(theta_c, pi - theta_c)`` in 2D, half-open
    ``(theta_c, pi/2]`` in 3D. Accepts scalars or arrays.
    """
    _check_dimension(n)
    tc = critical_angle(m)
    theta = np.asarray(theta, dtype=float)
    if n == 2:
        out = (theta > tc) & (theta < math.pi - tc)
    else:
        out = (theta > tc) & (theta <= math.pi / 2)
    return bool(out) if out.ndim == 0 else out


def _sqrt_term(m, theta):
    """``sqrt(c_+^2/c_-^2 - cos^2 theta)``, rejecting points outside the aperture closure."""
    # rho^2 - cos^2 = (rho - 1)(rho + 1) + sin^2 avoids cancellation near grazing
    rho = m.c_plus / m.c_minus
    s = np.sin(theta)
    if rho >= 1.0:
        # hypot keeps q ~ |sin| when sin^2 underflows
        return np.hypot(math.sqrt((rho - 1.0) * (rho + 1.0)), s)
    arg = (rho - 1.0) * (rho + 1.0) + s ** 2
    if np.any(arg < -_SQRT_SLACK):
        raise OutsideApertureError(f"angle outside the observation aperture (theta_c={critical_angle(m):.6g})")
    return np.sqrt(np.maximum(arg, 0.0))


def _coefficients(m, theta):
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta)
    q = _sqrt_term(m, theta)
    den = s + q
    # 0/0 only at grazing incidence with equal speeds; the limit there is T=1, H=0
    degenerate = den == 0.0
    safe = np.where(degenerate, 1.0, den)
    t = np.where(degenerate, 1.0, 2.0 * s / safe)
    h = np.where(degenerate, 0.0, (s - q) / safe)
    if t.ndim == 0:
        return float(t), float(h)
    return t, h


def transmission_T(m: Medium, theta):
    return _coefficients(m, theta)[0]


def reflection_H(m: Medium, theta):
    return _coefficients(m, theta)[1]


def transmitted_direction(m: Medium, d: Direction) -> Direction:
    """Direction in the lower medium whose wave refracts into observation direction ``d``."""
    c = m.ratio * math.cos(d.theta)
    arg = 1.0 - c * c
    if arg < -_SQRT_SLACK:
        raise OutsideApertureError(f"no transmitted direction for theta={d.theta:.6g}")
    if d.n == 2:
        vec = (c, math.sqrt(max(arg, 0.0)))
    else:
        vec = (c * math.cos(d.phi), c * math.sin(d.phi), math.sqrt(max(arg, 0.0)))
    theta_t = math.atan2(vec[-1], c)
    return Direction(d.n, theta_t, d.phi if d.n == 3 else 0.0, vec)


def observation_angle(m: Medium, horizontal):
    """Observation polar angle whose transmitted direction has the given horizontal part.

    Inverts ``(c_-/c_+) cos(theta) = horizontal``; ``horizontal`` is the signed
    first component in 2D and the horizontal magnitude in 3D. Returns NaN where
    no real angle exists (only possible when ``c_plus > c_minus``).
    """
    c = np.asarray(horizontal, dtype=float) / m.ratio
    with np.errstate(invalid="ignore"):
        out = np.where(np.abs(c) <= 1.0, np.arccos(np.clip(c, -1.0, 1.0)), np.nan)
    return float(out) if out.ndim == 0 else out


def mirror(x):
    """Reflect a point across the interface (negate the last coordinate)."""
    x = np.array(x, dtype=float)
    x[..., -1] = -x[..., -1]
    return x
