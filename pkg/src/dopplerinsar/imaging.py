"""Backprojection imaging onto a flat reference surface.

Both modalities use the unit filter, so each image is the adjoint of its
forward model evaluated at the reference surface. The frequency (WB) or
fast-time (UNB) sum is evaluated exactly with Horner's rule, so the image
can be sampled at arbitrary points without interpolation.

With ``absolute_phase=True`` (the default) every pixel is multiplied by the
conjugate of its own back-projection phase at its reference time (zero-Doppler
time for WB, zero-Doppler-rate time for UNB). That unit-modulus per-pixel
filter leaves magnitudes untouched and makes the peak phase carry the
target's range (WB) or Doppler (UNB) at the reference time.
"""
from __future__ import annotations

import hashlib
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from . import geometry as geo
from .exceptions import NotFoundError
from .fileio import dumps_json, read_container, write_container
from .forward import UNBDataSet, WidebandDataSet, window_weights

# a pixel this close to the antenna path is excluded rather than imaged
_SINGULAR_RANGE = 1e-6
_PIXEL_BLOCK = 4096
_SLOW_CHUNK = 64


@dataclass(frozen=True)
class ImageGrid:
    """Regular pixel grid on the plane ``x3 = reference_height``.

    Pixel centres run from ``center - extent`` to ``center + extent`` in
    steps of ``spacing``; the default is 129 x 129 pixels at 1 m.
    """

    x_extent: float = 64.0
    y_extent: float = 64.0
    spacing: float = 1.0
    reference_height: float = 0.0
    x_center: float = 0.0
    y_center: float = 0.0

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.x_extent <= 0 or self.y_extent <= 0:
            raise ValueError("extents must be positive")

    def _axis(self, center, extent):
        n = int(np.floor(extent / self.spacing + 1e-9))
        return center + self.spacing * np.arange(-n, n + 1)

    @property
    def x(self):
        return self._axis(self.x_center, self.x_extent)

    @property
    def y(self):
        return self._axis(self.y_center, self.y_extent)

    @property
    def shape(self):
        """``(n_y, n_x)``: rows follow y, columns follow x."""
        return self.y.size, self.x.size

    def points(self):
        """Pixel centres, shape ``(n_y, n_x, 3)``."""
        xx, yy = np.meshgrid(self.x, self.y)
        return np.stack([xx, yy, np.full_like(xx, self.reference_height)], axis=-1)

    def position(self, index):
        iy, ix = index
        return np.array([self.x[ix], self.y[iy], self.reference_height])

    def corners(self):
        x, y = self.x, self.y
        return np.array([[xi, yi, self.reference_height]
                         for xi in (x[0], x[-1]) for yi in (y[0], y[-1])])

    def to_dict(self):
        return {"x_extent_m": self.x_extent, "y_extent_m": self.y_extent,
                "spacing_m": self.spacing, "reference_height_m": self.reference_height,
                "x_center_m": self.x_center, "y_center_m": self.y_center}

    @classmethod
    def from_dict(cls, d):
        return cls(d["x_extent_m"], d["y_extent_m"], d["spacing_m"],
                   d.get("reference_height_m", 0.0), d.get("x_center_m", 0.0),
                   d.get("y_center_m", 0.0))


@dataclass
class ComplexImage:
    """Complex raster over an :class:`ImageGrid` (rows = y, columns = x)."""

    values: np.ndarray
    grid: ImageGrid
    meta: dict = field(default_factory=dict)
    excluded: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"raster shape {self.values.shape} does not match grid {self.grid.shape}")
        if self.excluded is None:
            self.excluded = np.zeros(self.grid.shape, dtype=bool)

    @property
    def magnitude(self):
        return np.abs(self.values)

    @property
    def phase(self):
        return np.angle(self.values)

    @property
    def modality(self):
        return self.meta.get("modality", "")

    def with_values(self, values, **meta):
        return ComplexImage(values, self.grid, {**self.meta, **meta}, self.excluded.copy())

    def save(self, path):
        header = {"kind": "complex-image", "grid": self.grid.to_dict(), "meta": self.meta,
                  "excluded_pixels": np.argwhere(self.excluded).tolist()}
        return write_container(path, self.values, header)

    @classmethod
    def load(cls, path):
        values, h = read_container(path)
        if h.get("kind") != "complex-image":
            raise ValueError(f"{path}: not an image file")
        grid = ImageGrid.from_dict(h["grid"])
        excluded = np.zeros(grid.shape, dtype=bool)
        for iy, ix in h.get("excluded_pixels", []):
            excluded[iy, ix] = True
        return cls(values, grid, h.get("meta", {}), excluded)


class Peak(NamedTuple):
    index: tuple
    value: complex
    position: np.ndarray


def config_hash(obj):
    """Short stable digest of a JSON-serialisable configuration."""
    return hashlib.sha256(dumps_json(obj).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# exact point evaluation


def _pixel_geometry(points, traj, s):
    """Offsets, ranges and a singular-pixel mask for points x slow times."""
    gam = traj.position(s)
    d = points[:, None, :] - gam[None, :, :]
    r = np.linalg.norm(d, axis=-1)
    bad = r <= _SINGULAR_RANGE
    return d, np.where(bad, 1.0, r), bad.any(axis=1)


def _check_uniform(axis, name):
    steps = np.diff(axis)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ValueError(f"{name} axis must be uniformly spaced")
    return steps[0]


def _wb_block(points, data, traj, consts):
    wp = data.omega_offsets
    dw = _check_uniform(wp, "frequency") if wp.size > 1 else 0.0
    k0 = 2.0 * (data.omega0 + wp[0]) / consts.c
    acc_img = np.zeros(points.shape[0], dtype=complex)
    bad = np.zeros(points.shape[0], dtype=bool)
    for a in range(0, data.slow_times.size, _SLOW_CHUNK):
        s = data.slow_times[a:a + _SLOW_CHUNK]
        _, r, b = _pixel_geometry(points, traj, s)
        bad |= b
        step = np.exp(-2j * dw * r / consts.c)
        acc = np.zeros_like(step)
        block = data.samples[:, a:a + _SLOW_CHUNK]
        for k in range(wp.size - 1, -1, -1):
            acc = acc * step + block[k][None, :]
        acc_img += np.sum(acc * np.exp(-1j * k0 * r), axis=1)
    return acc_img, bad


def _unb_block(points, data, traj, consts, fast_sum):
    cfg = data.config
    t0, dt = cfg.fast_times()[0], cfg.fast_step
    scale = -cfg.omega0 / consts.c
    acc_img = np.zeros(points.shape[0], dtype=complex)
    bad = np.zeros(points.shape[0], dtype=bool)
    for a in range(0, data.slow_times.size, _SLOW_CHUNK):
        s = data.slow_times[a:a + _SLOW_CHUNK]
        d, r, b = _pixel_geometry(points, traj, s)
        bad |= b
        fz = scale * np.einsum("psk,sk->ps", d, traj.velocity_at(s)) / r
        step = np.exp(-2j * fz * dt)
        acc = np.zeros_like(step)
        block = fast_sum[:, a:a + _SLOW_CHUNK]
        for j in range(block.shape[0] - 1, -1, -1):
            acc = acc * step + block[j][None, :]
        acc *= np.exp(-2j * fz * (t0 + s[None, :] * cfg.t_phi))
        acc_img += acc.sum(axis=1)
    return acc_img, bad


def _unb_fast_sum(data):
    """Correlate the data with every fast-time sample: ``phi_j dt sum_mu d e^{i t_j w0 (1-mu)}``."""
    cfg = data.config
    t = cfg.fast_times()
    steer = np.exp(1j * np.outer(t, cfg.omega0 * (1.0 - data.mu)))
    return window_weights(cfg)[:, None] * (steer @ data.samples)


def _run_blocks(func, points, threads):
    flat = points.reshape(-1, 3)
    starts = range(0, flat.shape[0], _PIXEL_BLOCK)
    blocks = [flat[i:i + _PIXEL_BLOCK] for i in starts]
    if threads and threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(func, blocks))
    else:
        parts = [func(b) for b in blocks]
    if not parts:
        return np.zeros(points.shape[:-1], complex), np.zeros(points.shape[:-1], bool)
    vals = np.concatenate([p[0] for p in parts]).reshape(points.shape[:-1])
    bad = np.concatenate([p[1] for p in parts]).reshape(points.shape[:-1])
    return vals, bad


def wb_reference_phase(points, traj, omega0, consts=geo.DEFAULT_CONSTANTS):
    """``exp(+i 2 omega0 R(z, s0(z)) / c)`` with ``s0`` clamped to the pass."""
    s0 = geo.zero_doppler_time(traj, points, clamp=True)
    r = np.linalg.norm(points - traj.position(s0), axis=-1)
    return np.exp(2j * omega0 * r / consts.c)


def unb_reference_phase(points, traj, omega0, t_phi, consts=geo.DEFAULT_CONSTANTS):
    """``exp(+i 2 f(z, s_d(z)) s_d(z) t_phi)`` at each point's zero-Doppler-rate time."""
    sd = geo.zero_doppler_rate_time(traj, points)
    d = points - traj.position(sd)
    r = np.maximum(np.linalg.norm(d, axis=-1), _SINGULAR_RANGE)
    f = -(omega0 / consts.c) * np.sum(d * traj.velocity_at(sd), axis=-1) / r
    return np.exp(2j * f * sd * t_phi)


def evaluate_wideband(data: WidebandDataSet, traj, points, consts=geo.DEFAULT_CONSTANTS,
                      absolute_phase=True, threads=1):
    """Wideband backprojection ``sum_s sum_w' D exp(-i 2 (w0 + w') R(z, s) / c)`` at points.

    Returns
    -------
    values : ndarray of complex
        Image values, shape ``points.shape[:-1]``.
    excluded : ndarray of bool
        Points that touch the antenna path; their values are zero.
    """
    points = np.asarray(points, dtype=float)
    vals, bad = _run_blocks(lambda p: _wb_block(p, data, traj, consts), points, threads)
    if absolute_phase:
        vals = vals * wb_reference_phase(points, traj, data.omega0, consts)
    vals[bad] = 0.0
    return vals, bad


def evaluate_unb(data: UNBDataSet, traj, points, consts=geo.DEFAULT_CONSTANTS,
                 absolute_phase=True, threads=1, fast_sum=None):
    """UNB backprojection at points: the data correlated against each point's Doppler history."""
    points = np.asarray(points, dtype=float)
    if fast_sum is None:
        fast_sum = _unb_fast_sum(data)
    vals, bad = _run_blocks(lambda p: _unb_block(p, data, traj, consts, fast_sum),
                            points, threads)
    if absolute_phase:
        vals = vals * unb_reference_phase(points, traj, data.config.omega0,
                                          data.config.t_phi, consts)
    vals[bad] = 0.0
    return vals, bad


def _image_meta(modality, data, traj, absolute_phase):
    return {"modality": modality, "trajectory": traj.name,
            "trajectory_state": traj.to_dict(), "config_hash": config_hash(data.meta),
            "absolute_phase": absolute_phase}


def backproject_wideband(data, traj, grid=ImageGrid(), consts=geo.DEFAULT_CONSTANTS,
                         absolute_phase=True, threads=1):
    """Wideband image over ``grid``; see :func:`evaluate_wideband`."""
    vals, bad = evaluate_wideband(data, traj, grid.points(), consts, absolute_phase, threads)
    meta = _image_meta("WB", data, traj, absolute_phase)
    meta["omega0_rad_per_s"] = data.omega0
    return ComplexImage(vals, grid, meta, bad)


def backproject_unb(data, traj, grid=ImageGrid(), consts=geo.DEFAULT_CONSTANTS,
                    absolute_phase=True, threads=1):
    """UNB image over ``grid``; see :func:`evaluate_unb`."""
    vals, bad = evaluate_unb(data, traj, grid.points(), consts, absolute_phase, threads)
    meta = _image_meta("UNB", data, traj, absolute_phase)
    meta.update(omega0_rad_per_s=data.config.omega0, t_phi_s=data.config.t_phi)
    return ComplexImage(vals, grid, meta, bad)


# ---------------------------------------------------------------------------
# peaks and phase-factor equalisation


def find_peak(img: ComplexImage) -> Peak:
    """Pixel of largest magnitude; ties go to the smallest row-major index.

    Raises
    ------
    NotFoundError
        If the image is identically zero.
    """
    mag = np.abs(img.values)
    if mag.size == 0 or not np.any(mag > 0):
        raise NotFoundError("image has no peak (all pixels are zero)")
    flat = int(np.argmax(mag))
    index = np.unravel_index(flat, mag.shape)
    index = (int(index[0]), int(index[1]))
    return Peak(index, complex(img.values[index]), img.grid.position(index))


def refine_peak(evaluate, start, spacing, xatol=1e-5):
    """Sub-pixel maximum of ``|evaluate(points)|`` in the reference plane.

    Parameters
    ----------
    evaluate : callable
        Maps an ``(m, 3)`` array of points to ``m`` complex values.
    start : array_like, shape (3,)
        Initial position, normally the peak pixel. Its height is kept.
    spacing : float
        Pixel size; sets the initial simplex.

    Returns
    -------
    position : ndarray, shape (3,)
    value : complex
    """
    start = np.asarray(start, dtype=float)

    def point(xy):
        return np.array([[xy[0], xy[1], start[2]]])

    def cost(xy):
        return -abs(evaluate(point(xy))[0])

    step = 0.25 * spacing
    simplex = start[:2] + np.array([[0.0, 0.0], [step, 0.0], [0.0, step]])
    res = minimize(cost, start[:2], method="Nelder-Mead",
                   options={"initial_simplex": simplex, "xatol": xatol, "fatol": 0.0,
                            "maxiter": 400})
    xy = res.x if res.fun <= cost(start[:2]) else start[:2]
    pos = point(xy)[0]
    return pos, complex(evaluate(pos[None, :])[0])


def equalize_doppler_rate_factor(img: ComplexImage, s_d_own, s_d_ref) -> ComplexImage:
    """Rescale the image phase by ``s_d_ref / s_d_own``, keeping the magnitude.

    UNB image phases carry a factor ``s_d T_phi`` of their own antenna. Scaling
    one image this way makes both carry the reference antenna's factor. The
    wrapped phase is scaled, which is exact modulo 2 pi only for integer
    ratios; other ratios emit a warning.

    Raises
    ------
    ValueError
        If ``s_d_own`` is zero.
    """
    if s_d_own == 0:
        raise ValueError("zero-Doppler-rate time of the image must be non-zero")
    ratio = float(s_d_ref) / float(s_d_own)
    if ratio == 1.0:
        return img.with_values(img.values.copy(), phase_scale=1.0)
    if not np.isclose(ratio, round(ratio), rtol=0, atol=1e-12):
        warnings.warn(f"phase scale {ratio:g} is not an integer; result depends on the "
                      "wrapped branch", RuntimeWarning, stacklevel=2)
    values = np.abs(img.values) * np.exp(1j * np.angle(img.values) * ratio)
    return img.with_values(values, phase_scale=ratio)
