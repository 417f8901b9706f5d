"""Antenna kinematics and vector geometry.

Conventions
-----------
* Points and vectors are arrays whose last axis has length 3, ``(x1, x2, x3)``
  with ``x3`` the height. Every function broadcasts over leading axes.
* Slow time ``s`` is physical seconds. Trajectories built with
  :meth:`Trajectory.linear_pass` put ``s = 0`` at the midpoint of the pass.
* The look direction points from the antenna to the scatterer,
  ``L = (x - gamma(s)) / |x - gamma(s)|``.
* Doppler is ``f = -(omega0 / c) L . gamma_dot`` [rad/s]. Every Doppler,
  Doppler-rate and interferometric residual in the package derives from this
  one definition.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .exceptions import GeometryError, NotFoundError

C_DEFAULT = 3.0e8

# relative range below which a point is treated as sitting on the antenna
_SINGULAR_RANGE = 1e-9


@dataclass(frozen=True)
class PhysicalConstants:
    """Propagation constants.

    Parameters
    ----------
    c : float
        Propagation speed in m/s.
    """

    c: float = C_DEFAULT

    def __post_init__(self):
        if not np.isfinite(self.c) or self.c <= 0:
            raise ValueError(f"propagation speed must be positive, got {self.c}")


DEFAULT_CONSTANTS = PhysicalConstants()


def _vec3(v, name):
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Trajectory:
    """Antenna path ``gamma(s) = p0 + v (s - S1) + a (s - S1)^2 / 2``.

    Parameters
    ----------
    start_position : array_like, shape (3,)
        Position at ``s = S1`` [m].
    velocity : array_like, shape (3,)
        Velocity at ``s = S1`` [m/s].
    s_interval : tuple of float
        ``(S1, S2)`` in seconds, ``S1 < S2``.
    acceleration : array_like, shape (3,), optional
        Constant acceleration [m/s^2]. Must be zero for ``kind='linear'``.
    kind : {'linear', 'quadratic'}
    name : str
        Free-form identifier carried into image metadata.
    """

    start_position: np.ndarray
    velocity: np.ndarray
    s_interval: tuple
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    kind: str = "linear"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "start_position", _vec3(self.start_position, "start_position"))
        object.__setattr__(self, "velocity", _vec3(self.velocity, "velocity"))
        object.__setattr__(self, "acceleration", _vec3(self.acceleration, "acceleration"))
        s1, s2 = (float(v) for v in self.s_interval)
        if not s1 < s2:
            raise ValueError(f"s_interval must satisfy S1 < S2, got {self.s_interval}")
        object.__setattr__(self, "s_interval", (s1, s2))
        if self.kind not in ("linear", "quadratic"):
            raise ValueError(f"unsupported trajectory kind {self.kind!r}")
        if self.kind == "linear" and np.any(self.acceleration != 0):
            raise ValueError("linear trajectories must have zero acceleration")

    @classmethod
    def linear_pass(cls, x, height, speed, length, y_center=0.0, name=""):
        """Constant-velocity pass parallel to the x2 axis, centred on ``y_center``.

        The slow-time interval is ``[-T/2, T/2]`` with ``T = length / speed``,
        so ``s = 0`` is the midpoint of the pass.
        """
        if speed <= 0 or length <= 0:
            raise ValueError("speed and length must be positive")
        half = 0.5 * length / speed
        return cls(
            start_position=(x, y_center - 0.5 * length, height),
            velocity=(0.0, speed, 0.0),
            s_interval=(-half, half),
            name=name,
        )

    @property
    def S1(self):
        return self.s_interval[0]

    @property
    def S2(self):
        return self.s_interval[1]

    @property
    def duration(self):
        return self.S2 - self.S1

    def is_constant_velocity(self):
        return not np.any(self.acceleration)

    def slow_times(self, n):
        """``n`` equispaced slow-time samples covering the closed interval."""
        return np.linspace(self.S1, self.S2, int(n))

    def contains(self, s, rtol=1e-12):
        tol = rtol * max(1.0, abs(self.S1), abs(self.S2))
        s = np.asarray(s, dtype=float)
        return np.all((s >= self.S1 - tol) & (s <= self.S2 + tol))

    def _check(self, s):
        if not self.contains(s):
            raise GeometryError(
                f"slow time outside trajectory interval [{self.S1}, {self.S2}]"
            )

    def position(self, s):
        self._check(s)
        ds = np.asarray(s, dtype=float)[..., None] - self.S1
        return self.start_position + self.velocity * ds + 0.5 * self.acceleration * ds**2

    def velocity_at(self, s):
        self._check(s)
        ds = np.asarray(s, dtype=float)[..., None] - self.S1
        return self.velocity + self.acceleration * ds

    def acceleration_at(self, s):
        self._check(s)
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(self.acceleration, s.shape + (3,)).copy()

    def to_dict(self):
        return {
            "kind": self.kind,
            "name": self.name,
            "start_position_m": self.start_position.tolist(),
            "velocity_m_per_s": self.velocity.tolist(),
            "acceleration_m_per_s2": self.acceleration.tolist(),
            "s_interval_s": list(self.s_interval),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            start_position=d["start_position_m"],
            velocity=d["velocity_m_per_s"],
            acceleration=d.get("acceleration_m_per_s2", (0.0, 0.0, 0.0)),
            s_interval=tuple(d["s_interval_s"]),
            kind=d.get("kind", "linear"),
            name=d.get("name", ""),
        )


@dataclass(frozen=True)
class Scatterer:
    """Point scatterer at ``[x1, x2, height]`` with complex reflectivity."""

    ground_position: tuple
    height: float
    reflectivity: complex = 1.0 + 0.0j

    def __post_init__(self):
        gp = tuple(float(v) for v in self.ground_position)
        if len(gp) != 2 or not all(np.isfinite(gp)):
            raise ValueError("ground_position must be two finite numbers")
        if not np.isfinite(self.height):
            raise ValueError("height must be finite")
        object.__setattr__(self, "ground_position", gp)
        object.__setattr__(self, "height", float(self.height))
        object.__setattr__(self, "reflectivity", complex(self.reflectivity))

    @property
    def position(self):
        return np.array([*self.ground_position, self.height])


@dataclass(frozen=True)
class Scene:
    """A collection of point scatterers."""

    scatterers: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))

    def __len__(self):
        return len(self.scatterers)

    @property
    def positions(self):
        if not self.scatterers:
            return np.zeros((0, 3))
        return np.array([sc.position for sc in self.scatterers])

    @property
    def reflectivities(self):
        return np.array([sc.reflectivity for sc in self.scatterers], dtype=complex)

    def scaled(self, alpha):
        """Scene with every reflectivity multiplied by ``alpha``."""
        return Scene(
            tuple(Scatterer(sc.ground_position, sc.height, alpha * sc.reflectivity)
                  for sc in self.scatterers)
        )


# ---------------------------------------------------------------------------
# kinematics


def position(traj, s):
    """Antenna position ``gamma(s)``."""
    return traj.position(s)


def _offset(traj, s, x):
    d = np.asarray(x, dtype=float) - traj.position(s)
    r = np.linalg.norm(d, axis=-1)
    return d, r


def _check_range(r):
    if np.any(r <= _SINGULAR_RANGE):
        raise GeometryError("point coincides with the antenna (zero range)")


def slant_range(traj, s, x):
    """Range ``|x - gamma(s)|`` in metres."""
    return _offset(traj, s, x)[1]


def look_direction(traj, s, x):
    """Unit vector from ``gamma(s)`` to ``x``."""
    d, r = _offset(traj, s, x)
    _check_range(r)
    return d / r[..., None]


def look_dot_velocity(traj, s, x):
    """Raw dot product ``L(x, s) . gamma_dot(s)`` [m/s].

    This is the quantity set to zero at the zero-Doppler time. It is the
    *negative* of the range derivative returned by :func:`range_rate`.
    """
    return np.sum(look_direction(traj, s, x) * traj.velocity_at(s), axis=-1)


def range_rate(traj, s, x):
    """Exact slow-time derivative ``d|x - gamma(s)|/ds = -L . gamma_dot``."""
    return -look_dot_velocity(traj, s, x)


def perp_component(a, u, atol=1e-9):
    """Component of ``a`` orthogonal to the unit vector ``u``.

    Raises
    ------
    GeometryError
        If ``u`` is not of unit norm within ``atol``.
    """
    a = np.asarray(a, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(np.linalg.norm(u, axis=-1) - 1.0) > atol):
        raise GeometryError("projection direction must be a unit vector")
    return a - u * np.sum(u * a, axis=-1)[..., None]


def doppler(traj, s, x, omega0, consts=DEFAULT_CONSTANTS):
    """Doppler ``f = -(omega0 / c) L . gamma_dot`` in rad/s."""
    return -(omega0 / consts.c) * look_dot_velocity(traj, s, x)


def doppler_rate_bracket(traj, s, x):
    """``L . gamma_ddot - gamma_dot . gamma_dot_perp / R`` [m/s^2].

    The iso-Doppler-rate surface is a level set of this expression; the
    Doppler rate is ``-(omega0 / c)`` times it.
    """
    d, r = _offset(traj, s, x)
    _check_range(r)
    look = d / r[..., None]
    vel = traj.velocity_at(s)
    vperp = perp_component(vel, look)
    return (np.sum(look * traj.acceleration_at(s), axis=-1)
            - np.sum(vel * vperp, axis=-1) / r)


def doppler_rate(traj, s, x, omega0, consts=DEFAULT_CONSTANTS):
    """Slow-time derivative of :func:`doppler` in rad/s^2."""
    return -(omega0 / consts.c) * doppler_rate_bracket(traj, s, x)


def zero_doppler_time(traj, x, clamp=False):
    """Slow time at which the look direction is orthogonal to the velocity.

    For constant-velocity trajectories this is the closest-approach time in
    closed form. Otherwise a bracketed root of ``L . gamma_dot`` is sought.

    Parameters
    ----------
    clamp : bool
        Return the nearest interval endpoint instead of raising when the root
        lies outside ``[S1, S2]`` (constant-velocity trajectories only).

    Raises
    ------
    NotFoundError
        If no root lies in the slow-time interval.
    """
    x = np.asarray(x, dtype=float)
    if traj.is_constant_velocity():
        v = traj.velocity
        s0 = traj.S1 + np.sum((x - traj.start_position) * v, axis=-1) / np.dot(v, v)
        if clamp:
            return np.clip(s0, traj.S1, traj.S2)
        if not traj.contains(s0):
            raise NotFoundError("closest approach lies outside the slow-time interval")
        return np.clip(s0, traj.S1, traj.S2)
    if x.ndim != 1:
        return np.array([zero_doppler_time(traj, xi, clamp) for xi in x.reshape(-1, 3)]).reshape(x.shape[:-1])

    def g(s):
        return float(look_dot_velocity(traj, s, x))

    grid = np.linspace(traj.S1, traj.S2, 257)
    vals = np.array([g(s) for s in grid])
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
    if sign_change.size == 0:
        if clamp:
            return grid[np.argmin(np.abs(vals))]
        raise NotFoundError("no zero-Doppler time in the slow-time interval")
    i = sign_change[0]
    if vals[i] == 0:
        return grid[i]
    return brentq(g, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15)


def zero_doppler_rate_time(traj, x):
    """Slow time treated as the zero-Doppler-rate time for ``x``.

    A constant-velocity straight pass never reaches the exact root (it needs
    the look direction parallel to the velocity), so the endpoint of the pass
    farthest from ``x`` is returned; ties go to the later endpoint. For
    accelerating trajectories ``|d f / ds|`` is minimised numerically.
    """
    x = np.asarray(x, dtype=float)
    if traj.is_constant_velocity():
        d1 = np.linalg.norm(x - traj.position(traj.S1), axis=-1)
        d2 = np.linalg.norm(x - traj.position(traj.S2), axis=-1)
        return np.where(d1 > d2, traj.S1, traj.S2)
    if x.ndim != 1:
        return np.array([zero_doppler_rate_time(traj, xi) for xi in x.reshape(-1, 3)]).reshape(x.shape[:-1])

    def obj(s):
        return abs(float(doppler_rate_bracket(traj, s, x)))

    grid = np.linspace(traj.S1, traj.S2, 257)
    vals = np.array([obj(s) for s in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(obj, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return res.x if res.fun <= vals[i] else grid[i]


# ---------------------------------------------------------------------------
# far-field approximations and baselines


def far_field_range(x, y):
    """First-order approximation ``|x| - x_hat . y`` of ``|x - y|``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx = np.linalg.norm(x, axis=-1)
    _check_range(nx)
    return nx - np.sum(x * y, axis=-1) / nx


def look_direction_difference(x, y, antenna):
    """First-order ``L(x) - L(y)`` seen from ``antenna``: ``z_perp / |y - antenna|``.

    ``z = x - y`` and ``z_perp`` is its component orthogonal to the look
    direction towards ``y``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - np.asarray(antenna, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    _check_range(r)
    return perp_component(x - y, d / r[..., None]) / r[..., None]


def baseline(traj1, s1, traj2, s2):
    """``gamma_2(s2) - gamma_1(s1)``."""
    return traj2.position(s2) - traj1.position(s1)


def baseline_velocity(traj1, s1, traj2, s2):
    """``gamma_dot_2(s2) - gamma_dot_1(s1)``."""
    return traj2.velocity_at(s2) - traj1.velocity_at(s1)
