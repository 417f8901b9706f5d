"""Co-registration, interferograms, phase models and phase flattening."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .exceptions import NotFoundError
from .fileio import read_container, write_container
from .imaging import ComplexImage, ImageGrid, find_peak

TWO_PI = 2.0 * np.pi


def wrap_phase(phase):
    """Wrap to ``(-pi, pi]``."""
    w = np.mod(np.asarray(phase, dtype=float) + np.pi, TWO_PI) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return w if w.ndim else float(w)


# ---------------------------------------------------------------------------
# registration and interferograms


def shift_raster(values, offset):
    """Translate a raster by ``offset = (dx, dy)`` pixels, zero-filling the border."""
    dx, dy = (int(v) for v in offset)
    out = np.zeros_like(values)
    ny, nx = values.shape
    src_y = slice(max(0, -dy), min(ny, ny - dy))
    dst_y = slice(max(0, dy), min(ny, ny + dy))
    src_x = slice(max(0, -dx), min(nx, nx - dx))
    dst_x = slice(max(0, dx), min(nx, nx + dx))
    if src_y.start < src_y.stop and src_x.start < src_x.stop:
        out[dst_y, dst_x] = values[src_y, src_x]
    return out


def coregister(i1: ComplexImage, i2: ComplexImage):
    """Shift image 2 by whole pixels so that both peaks coincide.

    Returns
    -------
    i1, i2_shifted : ComplexImage
    offset : tuple of int
        ``(dx, dy)`` = peak of image 1 minus peak of image 2, in pixels.

    Raises
    ------
    NotFoundError
        If either image is identically zero.
    """
    _check_same_grid(i1, i2)
    p1, p2 = find_peak(i1), find_peak(i2)
    offset = (p1.index[1] - p2.index[1], p1.index[0] - p2.index[0])
    shifted = i2.with_values(shift_raster(i2.values, offset), registration_offset_px=list(offset))
    shifted.excluded = shift_raster(i2.excluded, offset)
    return i1, shifted, offset


def _check_same_grid(i1, i2):
    if i1.grid != i2.grid or i1.values.shape != i2.values.shape:
        raise ValueError("images are defined on different grids")


@dataclass
class Interferogram:
    """Pixelwise ``I1 * conj(I2)`` with the registration offset applied to ``I2``."""

    values: np.ndarray
    grid: ImageGrid
    offset: tuple = (0, 0)
    meta: dict = field(default_factory=dict)

    @property
    def phase(self):
        return np.angle(self.values)

    @property
    def magnitude(self):
        return np.abs(self.values)

    def save(self, path):
        header = {"kind": "interferogram", "grid": self.grid.to_dict(),
                  "offset_px": list(self.offset), "meta": self.meta}
        return write_container(path, self.values, header)

    @classmethod
    def load(cls, path):
        values, h = read_container(path)
        if h.get("kind") != "interferogram":
            raise ValueError(f"{path}: not an interferogram file")
        return cls(values, ImageGrid.from_dict(h["grid"]), tuple(h["offset_px"]), h.get("meta", {}))


def interferogram(i1: ComplexImage, i2: ComplexImage, offset=(0, 0)) -> Interferogram:
    """Form ``I1 * conj(I2)`` on co-registered images.

    Raises
    ------
    ValueError
        If the grids differ.
    """
    _check_same_grid(i1, i2)
    meta = {"modalities": [i1.modality, i2.modality]}
    return Interferogram(i1.values * np.conj(i2.values), i1.grid, tuple(offset), meta)


# ---------------------------------------------------------------------------
# ambiguity resolution


@dataclass(frozen=True)
class PhaseMeasurement:
    """Interferometric phase with its resolved 2 pi ambiguity.

    ``uncertainty`` bounds the predictor error in radians. The integer is
    trustworthy only when it is below pi, which is what ``resolved`` reports.
    """

    wrapped_phase: float
    unwrapped_phase: float
    ambiguity_index: int
    modality: str = "WB"
    predicted_phase: float | None = None
    uncertainty: float | None = None

    def __post_init__(self):
        expected = self.wrapped_phase + TWO_PI * self.ambiguity_index
        if not np.isclose(self.unwrapped_phase, expected, rtol=0, atol=1e-9 * max(1.0, abs(expected))):
            raise ValueError("unwrapped phase must equal wrapped + 2 pi * index")
        if self.modality not in ("WB", "UNB"):
            raise ValueError(f"unknown modality {self.modality!r}")

    @property
    def resolved(self):
        return self.uncertainty is None or self.uncertainty < np.pi

    def to_dict(self):
        return {"wrapped_phase_rad": self.wrapped_phase, "unwrapped_phase_rad": self.unwrapped_phase,
                "ambiguity_index": self.ambiguity_index, "modality": self.modality,
                "predicted_phase_rad": self.predicted_phase, "uncertainty_rad": self.uncertainty,
                "resolved": self.resolved}

    @classmethod
    def from_dict(cls, d):
        return cls(d["wrapped_phase_rad"], d["unwrapped_phase_rad"], d["ambiguity_index"],
                   d["modality"], d.get("predicted_phase_rad"), d.get("uncertainty_rad"))


def ambiguity_index(wrapped, predicted):
    """Integer ``k`` minimising ``|wrapped + 2 pi k - predicted|``; ties go to smaller ``|k|``."""
    q = (float(predicted) - float(wrapped)) / TWO_PI
    lo = int(np.floor(q))
    hi = lo + 1
    dlo, dhi = q - lo, hi - q
    if dlo < dhi:
        return lo
    if dhi < dlo:
        return hi
    return lo if abs(lo) <= abs(hi) else hi


def resolve_ambiguity(wrapped, predicted, modality="WB", uncertainty=None) -> PhaseMeasurement:
    """Pick the 2 pi branch of ``wrapped`` closest to ``predicted``."""
    k = ambiguity_index(wrapped, predicted)
    return PhaseMeasurement(float(wrapped), float(wrapped) + TWO_PI * k, k, modality,
                            float(predicted), uncertainty)


# ---------------------------------------------------------------------------
# phase models


def wb_phase_model(x, traj1, s01, traj2, s02, omega0, consts=geo.DEFAULT_CONSTANTS):
    """Unwrapped wideband phase ``2 (omega0 / c) (R1(x, s01) - R2(x, s02))``."""
    r1 = geo.slant_range(traj1, s01, x)
    r2 = geo.slant_range(traj2, s02, x)
    geo._check_range(r1)
    geo._check_range(r2)
    return 2.0 * omega0 / consts.c * (r1 - r2)


def unb_phase_model(x, traj1, s_d1, traj2, s_d2, t_phi, omega0, consts=geo.DEFAULT_CONSTANTS):
    """Unwrapped UNB phase ``2 s_d1 t_phi (f1(x, s_d1) - f2(x, s_d2))``."""
    f1 = geo.doppler(traj1, s_d1, x, omega0, consts)
    f2 = geo.doppler(traj2, s_d2, x, omega0, consts)
    return 2.0 * s_d1 * t_phi * (f1 - f2)


def _far_field_check(l, r):
    if np.any(np.linalg.norm(l, axis=-1) >= r / 100.0):
        warnings.warn("offset from the reference point is not small compared with the range",
                      RuntimeWarning, stacklevel=3)


def _value(phase):
    return phase.unwrapped_phase if isinstance(phase, PhaseMeasurement) else float(phase)


def flatten_wb(phase, z0, traj1, s01, b, omega0, consts=geo.DEFAULT_CONSTANTS):
    """Measured phase minus the exact phase of reference point ``z0``.

    The second antenna is taken at ``gamma_1(s01) + b``.
    """
    g1 = traj1.position(s01)
    z0 = np.asarray(z0, dtype=float)
    ref = 2.0 * omega0 / consts.c * (np.linalg.norm(z0 - g1, axis=-1)
                                     - np.linalg.norm(z0 - g1 - np.asarray(b), axis=-1))
    return _value(phase) - ref


def flatten_wb_approx(x, z0, traj1, s01, b, omega0, consts=geo.DEFAULT_CONSTANTS,
                      project="baseline"):
    """First-order flattened phase ``2 (omega0 / c) b_perp . l / R(z0, s01)`` with ``l = x - z0``.

    ``project='offset'`` evaluates the equal quantity ``l_perp . b`` instead.
    """
    g1 = traj1.position(s01)
    z0 = np.asarray(z0, dtype=float)
    l = np.asarray(x, dtype=float) - z0
    r = geo.slant_range(traj1, s01, z0)
    geo._check_range(r)
    _far_field_check(l, r)
    look = (z0 - g1) / r[..., None]
    b = np.asarray(b, dtype=float)
    if project == "baseline":
        proj = np.sum(geo.perp_component(b, look) * l, axis=-1)
    elif project == "offset":
        proj = np.sum(geo.perp_component(l, look) * b, axis=-1)
    else:
        raise ValueError(f"unknown projection {project!r}")
    return 2.0 * omega0 / consts.c * proj / r


def flatten_unb(phase, z0, traj1, s_d1, traj2, s_d2, t_phi, omega0, consts=geo.DEFAULT_CONSTANTS):
    """Measured UNB phase minus the exact model phase of reference point ``z0``."""
    return _value(phase) - unb_phase_model(z0, traj1, s_d1, traj2, s_d2, t_phi, omega0, consts)


def flatten_unb_approx(x, z0, traj1, s_d1, v, t_phi, omega0, consts=geo.DEFAULT_CONSTANTS,
                       project="velocity"):
    """First-order flattened UNB phase ``2 s_d1 t_phi (omega0 / c) v_perp . l / R1(z0, s_d1)``.

    ``v`` is the baseline velocity. The baseline term ``b_perp . gamma_dot_2 / R``
    changes only at order ``|l| |b| |gamma_dot_2| / R^2`` and is dropped.
    """
    g1 = traj1.position(s_d1)
    z0 = np.asarray(z0, dtype=float)
    l = np.asarray(x, dtype=float) - z0
    r = geo.slant_range(traj1, s_d1, z0)
    geo._check_range(r)
    _far_field_check(l, r)
    look = (z0 - g1) / r[..., None]
    v = np.asarray(v, dtype=float)
    if project == "velocity":
        proj = np.sum(geo.perp_component(v, look) * l, axis=-1)
    elif project == "offset":
        proj = np.sum(geo.perp_component(l, look) * v, axis=-1)
    else:
        raise ValueError(f"unknown projection {project!r}")
    return 2.0 * s_d1 * t_phi * omega0 / consts.c * proj / r


def layover_point_wb(x, traj, reference_height=0.0):
    """Point on the reference plane, at the target's ``x2``, with the target's closest-approach range.

    Closed form for passes parallel to the ``x2`` axis. The branch on the
    same side of the antenna track as the target is returned.

    Raises
    ------
    NotFoundError
        If the reference plane does not reach that range.
    """
    x = np.asarray(x, dtype=float)
    s0 = geo.zero_doppler_time(traj, x)
    g = traj.position(s0)
    r = geo.slant_range(traj, s0, x)
    dh = g[..., 2] - reference_height
    ground = r**2 - dh**2 - (x[..., 1] - g[..., 1]) ** 2
    if np.any(ground < 0):
        raise NotFoundError("reference plane does not reach the target range")
    side = np.where(x[..., 0] >= g[..., 0], 1.0, -1.0)
    return np.stack([g[..., 0] + side * np.sqrt(ground), x[..., 1],
                     np.full_like(r, reference_height)], axis=-1)
