"""Height recovery by grid search over measurement-surface residuals.

Each measurement defines a surface through the unknown scatterer (a range
sphere, Doppler cone, iso-Doppler-rate surface or constant-phase surface).
The residual maps measure distance from those surfaces on a search grid.
The solution is the grid point that minimises their normalised sum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import minimum_filter

from . import geometry as geo
from .exceptions import AmbiguityError
from .imaging import (equalize_doppler_rate_factor, evaluate_wideband,
                      find_peak, refine_peak)
from .interferometry import (PhaseMeasurement, coregister, resolve_ambiguity,
                             unb_phase_model, wb_phase_model, wrap_phase)

TWO_PI = 2.0 * np.pi
# a map whose spread is below this fraction of its natural scale carries no information
UNINFORMATIVE = 1e-9
# bound on the off-grid peak position error after Nelder-Mead refinement [m]
REFINED_POSITION_TOL = 1e-4


# ---------------------------------------------------------------------------
# measurements


@dataclass(frozen=True)
class WBMeasurement:
    """Wideband observables of one target.

    ``doppler1`` is the raw dot product ``L . gamma_dot_1`` [m/s] at ``s01``.
    """

    R1: float
    doppler1: float
    phi: PhaseMeasurement
    s01: float
    s02: float
    omega0: float
    peaks: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.R1 > 0:
            raise ValueError("R1 must be positive")

    def to_dict(self):
        return {"R1_m": self.R1, "doppler1_m_per_s": self.doppler1, "phase": self.phi.to_dict(),
                "s01_s": self.s01, "s02_s": self.s02, "omega0_rad_per_s": self.omega0,
                "peaks": self.peaks}


@dataclass(frozen=True)
class UNBMeasurement:
    """UNB observables of one target.

    ``f1`` [rad/s] and ``f1_rate`` [rad/s^2] are the Doppler and Doppler rate
    of antenna 1 at its zero-Doppler-rate time ``s_d1``.
    """

    f1: float
    f1_rate: float
    phi: PhaseMeasurement
    s_d1: float
    s_d2: float
    t_phi: float
    omega0: float
    reference_point: tuple | None = None
    peaks: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.f1) and np.isfinite(self.f1_rate)):
            raise ValueError("Doppler observables must be finite")

    def to_dict(self):
        return {"f1_rad_per_s": self.f1, "f1_rate_rad_per_s2": self.f1_rate,
                "phase": self.phi.to_dict(), "s_d1_s": self.s_d1, "s_d2_s": self.s_d2,
                "t_phi_s": self.t_phi, "omega0_rad_per_s": self.omega0,
                "reference_point_m": None if self.reference_point is None else list(self.reference_point),
                "peaks": self.peaks}


def _branch(wrapped, coarse):
    """Unwrap ``wrapped`` onto the 2 pi branch nearest ``coarse``."""
    return wrapped + TWO_PI * np.round((coarse - wrapped) / TWO_PI)


def _pixel_error(grid):
    """Largest distance from a point to its nearest pixel centre."""
    return grid.spacing / np.sqrt(2.0)


def _check_resolved(phi, allow_unresolved):
    if not phi.resolved and not allow_unresolved:
        raise AmbiguityError(
            f"phase ambiguity unresolved: predictor uncertainty {phi.uncertainty:.3f} rad >= pi")


def measure_wb(img1, img2, data1, data2, traj1, traj2, consts=geo.DEFAULT_CONSTANTS,
               refine=True, allow_unresolved=False, threads=1):
    """Extract wideband observables from an image pair.

    The peaks are located on the pixel grid and then refined off-grid with
    the exact backprojection, because the branch of the interferometric phase
    is predicted from peak ranges and must be right to a fraction of a
    wavelength. ``R1`` comes from the image-1 peak phase on the branch
    selected by the refined peak range.

    Raises
    ------
    NotFoundError
        If an image has no peak.
    AmbiguityError
        If the phase predictor is not accurate to within pi and
        ``allow_unresolved`` is false.
    """
    omega0 = data1.omega0
    k = 2.0 * omega0 / consts.c
    _, _, offset = coregister(img1, img2)
    p1, p2 = find_peak(img1), find_peak(img2)
    z1, v1, z2, v2 = p1.position, p1.value, p2.position, p2.value
    if refine:
        z1, v1 = refine_peak(lambda p: evaluate_wideband(data1, traj1, p, consts, threads=threads)[0],
                             z1, img1.grid.spacing)
        z2, v2 = refine_peak(lambda p: evaluate_wideband(data2, traj2, p, consts, threads=threads)[0],
                             z2, img2.grid.spacing)
    # |grad R| <= 1, so a peak misplaced by e metres misplaces its range by at most e
    pos_err = REFINED_POSITION_TOL if refine else _pixel_error(img1.grid)
    s01 = float(geo.zero_doppler_time(traj1, z1, clamp=True))
    s02 = float(geo.zero_doppler_time(traj2, z2, clamp=True))
    r1_coarse = float(geo.slant_range(traj1, s01, z1))
    r2_coarse = float(geo.slant_range(traj2, s02, z2))
    a1, a2 = np.angle(v1), np.angle(v2)
    mis1 = abs(wrap_phase(a1 - k * r1_coarse))
    mis2 = abs(wrap_phase(a2 - k * r2_coarse))
    predicted = k * (r1_coarse - r2_coarse)
    phi = resolve_ambiguity(wrap_phase(a1 - a2), predicted, "WB", mis1 + mis2 + 2.0 * k * pos_err)
    _check_resolved(phi, allow_unresolved)
    r1 = _branch(a1, k * r1_coarse) / k
    doppler1 = float(geo.look_dot_velocity(traj1, s01, z1))
    peaks = {"image1_px": list(p1.index), "image2_px": list(p2.index),
             "image1_m": p1.position.tolist(), "image2_m": p2.position.tolist(),
             "image1_refined_m": np.asarray(z1).tolist(), "image2_refined_m": np.asarray(z2).tolist(),
             "registration_offset_px": list(offset)}
    return WBMeasurement(float(r1), doppler1, phi, s01, s02, omega0, peaks)


def measure_wb_from_truth(x, traj1, traj2, omega0, consts=geo.DEFAULT_CONSTANTS):
    """Noise-free wideband observables of a known scatterer position."""
    x = np.asarray(x, dtype=float)
    s01 = float(geo.zero_doppler_time(traj1, x))
    s02 = float(geo.zero_doppler_time(traj2, x))
    phase = float(wb_phase_model(x, traj1, s01, traj2, s02, omega0, consts))
    wrapped = wrap_phase(phase)
    phi = PhaseMeasurement(wrapped, phase, int(round((phase - wrapped) / TWO_PI)), "WB", phase, 0.0)
    return WBMeasurement(float(geo.slant_range(traj1, s01, x)),
                         float(geo.look_dot_velocity(traj1, s01, x)), phi, s01, s02, omega0)


def measure_unb(img1, img2, data1, data2, traj1, traj2, consts=geo.DEFAULT_CONSTANTS,
                allow_unresolved=False):
    """Extract UNB observables from an image pair.

    Image 2's phase is rescaled to carry antenna 1's zero-Doppler-rate
    factor before the interferometric phase is read at the co-registered
    peak. ``f1`` comes from the image-1 peak phase; ``f1_rate`` is the
    Doppler rate at the image-1 peak, which shares the target's Doppler
    history on a straight pass.

    Raises
    ------
    NotFoundError
        If an image has no peak.
    AmbiguityError
        If the phase predictor is not accurate to within pi and
        ``allow_unresolved`` is false.
    """
    cfg1, cfg2 = data1.config, data2.config
    if cfg1.t_phi != cfg2.t_phi or cfg1.omega0 != cfg2.omega0:
        raise ValueError("both UNB datasets must share omega0 and t_phi")
    omega0, t_phi = cfg1.omega0, cfg1.t_phi
    _, _, offset = coregister(img1, img2)
    p1, p2 = find_peak(img1), find_peak(img2)
    z1, z2 = p1.position, p2.position
    s_d1 = float(geo.zero_doppler_rate_time(traj1, z1))
    s_d2 = float(geo.zero_doppler_rate_time(traj2, z2))
    eq2 = equalize_doppler_rate_factor(img2, s_d2, s_d1)
    a1 = np.angle(p1.value)
    a2 = np.angle(eq2.values[p2.index])
    scale = 2.0 * s_d1 * t_phi
    f1_coarse = float(geo.doppler(traj1, s_d1, z1, omega0, consts))
    f2_coarse = float(geo.doppler(traj2, s_d2, z2, omega0, consts))
    mis1 = abs(wrap_phase(a1 - scale * f1_coarse))
    mis2 = abs(wrap_phase(a2 - scale * f2_coarse))
    predicted = scale * (f1_coarse - f2_coarse)
    # |grad (L . v)| <= |v| / R bounds the Doppler error of a misplaced peak
    grad = omega0 / consts.c * sum(
        float(np.linalg.norm(t.velocity_at(s)) / geo.slant_range(t, s, z))
        for t, s, z in ((traj1, s_d1, z1), (traj2, s_d2, z2)))
    pos_term = abs(scale) * grad * _pixel_error(img1.grid)
    phi = resolve_ambiguity(wrap_phase(a1 - a2), predicted, "UNB", mis1 + mis2 + pos_term)
    _check_resolved(phi, allow_unresolved)
    f1 = _branch(a1, scale * f1_coarse) / scale
    f1_rate = float(geo.doppler_rate(traj1, s_d1, z1, omega0, consts))
    peaks = {"image1_px": list(p1.index), "image2_px": list(p2.index),
             "image1_m": z1.tolist(), "image2_m": z2.tolist(),
             "registration_offset_px": list(offset), "phase_scale": s_d1 / s_d2}
    return UNBMeasurement(float(f1), f1_rate, phi, s_d1, s_d2, t_phi, omega0, tuple(z1), peaks)


def measure_unb_from_truth(x, traj1, traj2, omega0, t_phi, consts=geo.DEFAULT_CONSTANTS):
    """Noise-free UNB observables of a known scatterer position."""
    x = np.asarray(x, dtype=float)
    s_d1 = float(geo.zero_doppler_rate_time(traj1, x))
    s_d2 = float(geo.zero_doppler_rate_time(traj2, x))
    phase = float(unb_phase_model(x, traj1, s_d1, traj2, s_d2, t_phi, omega0, consts))
    wrapped = wrap_phase(phase)
    phi = PhaseMeasurement(wrapped, phase, int(round((phase - wrapped) / TWO_PI)), "UNB", phase, 0.0)
    return UNBMeasurement(float(geo.doppler(traj1, s_d1, x, omega0, consts)),
                          float(geo.doppler_rate(traj1, s_d1, x, omega0, consts)),
                          phi, s_d1, s_d2, t_phi, omega0, tuple(x))


# ---------------------------------------------------------------------------
# search grid and residual maps


def _axis(lo, hi, step):
    if step <= 0:
        raise ValueError("grid step must be positive")
    if hi < lo:
        raise ValueError("grid interval is empty")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


@dataclass(frozen=True)
class SearchGrid:
    """Candidate positions: an ``(x, height)`` slice at ``fixed_y``, or a 3-D box.

    The 3-D mode is enabled by giving ``y_interval``. Arrays are laid out
    ``(n_h, [n_y,] n_x)`` with heights ascending, so the first minimum in
    row-major order is the lowest one.
    """

    x_interval: tuple = (-64.0, 64.0)
    x_step: float = 1.0
    h_interval: tuple = (1.0, 100.0)
    h_step: float = 0.5
    fixed_y: float | None = None
    y_interval: tuple | None = None
    y_step: float = 1.0

    @property
    def x(self):
        return _axis(*self.x_interval, self.x_step)

    @property
    def h(self):
        return _axis(*self.h_interval, self.h_step)

    @property
    def y(self):
        if self.y_interval is not None:
            return _axis(*self.y_interval, self.y_step)
        if self.fixed_y is None:
            raise ValueError("a fixed y or a y interval is required")
        return np.array([float(self.fixed_y)])

    @property
    def is_3d(self):
        return self.y_interval is not None

    def with_fixed_y(self, y):
        return SearchGrid(self.x_interval, self.x_step, self.h_interval, self.h_step, float(y),
                          self.y_interval, self.y_step)

    def points(self):
        hh, yy, xx = np.meshgrid(self.h, self.y, self.x, indexing="ij")
        pts = np.stack([xx, yy, hh], axis=-1)
        return pts if self.is_3d else pts[:, 0]

    def to_dict(self):
        return {"x_interval_m": list(self.x_interval), "x_step_m": self.x_step,
                "h_interval_m": list(self.h_interval), "h_step_m": self.h_step,
                "fixed_y_m": self.fixed_y,
                "y_interval_m": None if self.y_interval is None else list(self.y_interval),
                "y_step_m": self.y_step}


@dataclass
class ResidualMap:
    """Non-negative residual of one equation over the search grid."""

    name: str
    values: np.ndarray
    units: str
    natural_scale: float

    @property
    def informative(self):
        return bool(np.ptp(self.values) > UNINFORMATIVE * self.natural_scale)

    @property
    def normaliser(self):
        med = float(np.median(self.values))
        return med if med > 0 else float(np.mean(self.values))


@dataclass
class ResidualMaps:
    grid: SearchGrid
    maps: dict
    combined: np.ndarray
    used: list

    def __getitem__(self, name):
        return self.maps[name]

    @property
    def uninformative(self):
        return [n for n in self.maps if n not in self.used]


def combine(grid, maps):
    """Sum of informative maps, each divided by its grid median (mean if the median is 0)."""
    used = [m.name for m in maps if m.informative and m.normaliser > 0]
    combined = np.zeros_like(maps[0].values)
    for m in maps:
        if m.name in used:
            combined = combined + m.values / m.normaliser
    return ResidualMaps(grid, {m.name: m for m in maps}, combined, used)


def wb_residuals_at(meas: WBMeasurement, traj1, traj2, points, consts=geo.DEFAULT_CONSTANTS,
                    phase_surface="hyperboloid"):
    """Wideband residuals at arbitrary points.

    ``phase_surface`` selects the constant-phase surface: the exact
    ``'hyperboloid'`` of constant range difference, or its ``'cone'``
    approximation ``L1 . b``. An unresolved phase is compared modulo 2 pi.

    Returns
    -------
    dict of name -> ndarray
        ``range`` [m], ``doppler`` [m/s] and ``phase`` [m of range difference].
    """
    z = np.asarray(points, dtype=float)
    g1, vel1 = traj1.position(meas.s01), traj1.velocity_at(meas.s01)
    g2 = traj2.position(meas.s02)
    d1 = z - g1
    r1 = np.linalg.norm(d1, axis=-1)
    look1 = d1 / r1[..., None]
    half_wave = consts.c / (2.0 * meas.omega0)
    if phase_surface == "hyperboloid":
        diff = r1 - np.linalg.norm(z - g2, axis=-1)
    elif phase_surface == "cone":
        diff = look1 @ (g2 - g1)
    else:
        raise ValueError(f"unknown phase surface {phase_surface!r}")
    if meas.phi.resolved:
        phase_res = np.abs(diff - half_wave * meas.phi.unwrapped_phase)
    else:
        phase_res = half_wave * np.abs(wrap_phase(diff / half_wave - meas.phi.wrapped_phase))
    return {"range": np.abs(r1 - meas.R1),
            "doppler": np.abs(look1 @ vel1 - meas.doppler1),
            "phase": phase_res}


def residuals_wb(meas: WBMeasurement, traj1, traj2, grid: SearchGrid,
                 consts=geo.DEFAULT_CONSTANTS, phase_surface="hyperboloid") -> ResidualMaps:
    """Range-sphere, Doppler-cone and constant-phase residual maps over ``grid``."""
    res = wb_residuals_at(meas, traj1, traj2, grid.points(), consts, phase_surface)
    speed = float(np.linalg.norm(traj1.velocity_at(meas.s01)))
    baseline = float(np.linalg.norm(geo.baseline(traj1, meas.s01, traj2, meas.s02)))
    maps = [ResidualMap("range", res["range"], "m", meas.R1),
            ResidualMap("doppler", res["doppler"], "m/s", speed),
            ResidualMap("phase", res["phase"], "m", max(baseline, consts.c / meas.omega0))]
    return combine(grid, maps)


def unb_residuals_at(meas: UNBMeasurement, traj1, traj2, points, consts=geo.DEFAULT_CONSTANTS,
                     phase_surface="exact"):
    """UNB residuals at arbitrary points.

    ``phase_surface='exact'`` compares ``L1 . gamma_dot_1 - L2 . gamma_dot_2``
    with the phase; ``'linearized'`` uses the first-order form
    ``-L1 . v + b_perp . gamma_dot_2 / R1``.

    Returns
    -------
    dict of name -> ndarray
        ``doppler`` [m/s], ``rate`` [m/s^2] and ``phase`` [m/s].
    """
    z = np.asarray(points, dtype=float)
    g1, vel1 = traj1.position(meas.s_d1), traj1.velocity_at(meas.s_d1)
    acc1 = traj1.acceleration_at(meas.s_d1)
    g2, vel2 = traj2.position(meas.s_d2), traj2.velocity_at(meas.s_d2)
    d1 = z - g1
    r1 = np.linalg.norm(d1, axis=-1)
    look1 = d1 / r1[..., None]
    ldv1 = look1 @ vel1
    vperp = vel1 - look1 * ldv1[..., None]
    bracket = look1 @ acc1 - (vperp @ vel1) / r1
    to_speed = consts.c / meas.omega0
    phase_speed = to_speed / (2.0 * meas.s_d1 * meas.t_phi)
    if phase_surface == "exact":
        d2 = z - g2
        look2 = d2 / np.linalg.norm(d2, axis=-1)[..., None]
        model = ldv1 - look2 @ vel2
    elif phase_surface == "linearized":
        b = g2 - g1
        bperp = b - look1 * (look1 @ b)[..., None]
        model = -(look1 @ (vel2 - vel1)) + (bperp @ vel2) / r1
    else:
        raise ValueError(f"unknown phase surface {phase_surface!r}")
    # Phi = 2 s_d1 t_phi (f1 - f2) = -(2 s_d1 t_phi omega0 / c) * model
    if meas.phi.resolved:
        phase_res = np.abs(model + phase_speed * meas.phi.unwrapped_phase)
    else:
        phase_res = phase_speed * np.abs(wrap_phase(-model / phase_speed - meas.phi.wrapped_phase))
    return {"doppler": np.abs(ldv1 + to_speed * meas.f1),
            "rate": np.abs(bracket + to_speed * meas.f1_rate),
            "phase": phase_res}


def residuals_unb(meas: UNBMeasurement, traj1, traj2, grid: SearchGrid,
                  consts=geo.DEFAULT_CONSTANTS, phase_surface="exact") -> ResidualMaps:
    """Iso-Doppler, iso-Doppler-rate and interferometric residual maps over ``grid``."""
    res = unb_residuals_at(meas, traj1, traj2, grid.points(), consts, phase_surface)
    speed1 = float(np.linalg.norm(traj1.velocity_at(meas.s_d1)))
    speed2 = float(np.linalg.norm(traj2.velocity_at(meas.s_d2)))
    ref = meas.reference_point
    r_ref = (float(geo.slant_range(traj1, meas.s_d1, np.asarray(ref))) if ref is not None
             else float(np.median(np.linalg.norm(grid.points() - traj1.position(meas.s_d1), axis=-1))))
    maps = [ResidualMap("doppler", res["doppler"], "m/s", speed1),
            ResidualMap("rate", res["rate"], "m/s^2", speed1**2 / r_ref),
            ResidualMap("phase", res["phase"], "m/s", speed1 + speed2)]
    return combine(grid, maps)


# ---------------------------------------------------------------------------
# solving


@dataclass
class Solution:
    """Grid point minimising the combined residual.

    ``degenerate`` is set when the interferometric map carries no
    information (for example identical platforms). ``candidates`` lists the
    lowest local minima of the combined map, best first.
    """

    position: np.ndarray
    combined_residual: float
    residuals: dict
    index: tuple
    degenerate: bool = False
    uninformative: list = field(default_factory=list)
    candidates: list = field(default_factory=list)
    wrapped_fallback: bool = False

    def to_dict(self):
        return {"position_m": np.asarray(self.position).tolist(),
                "combined_residual": self.combined_residual, "residuals": self.residuals,
                "grid_index": list(self.index), "degenerate": self.degenerate,
                "uninformative_maps": self.uninformative,
                "candidates_m": [np.asarray(c).tolist() for c in self.candidates],
                "wrapped_phase_fallback": self.wrapped_fallback}


def local_minima(values, points, n=5):
    """Up to ``n`` local minima of ``values`` (best first) as positions."""
    mask = values == minimum_filter(values, size=3, mode="nearest")
    idx = np.argwhere(mask)
    order = np.argsort(values[mask], kind="stable")[:n]
    return [points[tuple(i)] for i in idx[order]]


def _argmin_solution(maps: ResidualMaps, phase_resolved):
    if maps.combined.size == 0:
        raise ValueError("search grid is empty")
    points = maps.grid.points()
    flat = int(np.argmin(maps.combined))
    index = np.unravel_index(flat, maps.combined.shape)
    index = tuple(int(i) for i in index)
    return Solution(
        position=points[index],
        combined_residual=float(maps.combined[index]),
        residuals={n: float(m.values[index]) for n, m in maps.maps.items()},
        index=index,
        degenerate="phase" not in maps.used,
        uninformative=maps.uninformative,
        candidates=local_minima(maps.combined, points),
        wrapped_fallback=not phase_resolved,
    )


def solve_wb(meas, traj1, traj2, grid=SearchGrid(), consts=geo.DEFAULT_CONSTANTS,
             phase_surface="hyperboloid") -> Solution:
    """Wideband position estimate; ``grid.fixed_y`` defaults to the antenna y at ``s01``."""
    if grid.fixed_y is None and not grid.is_3d:
        grid = grid.with_fixed_y(traj1.position(meas.s01)[1])
    maps = residuals_wb(meas, traj1, traj2, grid, consts, phase_surface)
    return _argmin_solution(maps, meas.phi.resolved)


def solve_unb(meas, traj1, traj2, grid=SearchGrid(), consts=geo.DEFAULT_CONSTANTS,
              phase_surface="exact") -> Solution:
    """UNB position estimate; ``grid.fixed_y`` defaults to the reference point's y."""
    if grid.fixed_y is None and not grid.is_3d:
        if meas.reference_point is None:
            raise ValueError("fixed y is required when the measurement has no reference point")
        grid = grid.with_fixed_y(meas.reference_point[1])
    maps = residuals_unb(meas, traj1, traj2, grid, consts, phase_surface)
    return _argmin_solution(maps, meas.phi.resolved)
