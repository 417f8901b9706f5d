"""Synthetic data for point-scatterer scenes.

Wideband data live in the (frequency offset, slow time) domain and use the
exact range history; ultra-narrowband (UNB) data live in the (Doppler scale
factor ``mu``, slow time) domain. Antenna patterns and spreading loss are
not modelled (unit amplitude).
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry as geo
from .exceptions import AliasingWarning
from .fileio import read_container, write_container

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class WidebandConfig:
    """Wideband waveform and sampling.

    ``omega0`` and ``bandwidth`` are angular frequencies [rad/s]; the
    bandwidth is the full width ``2 * Omega``. Offsets are sampled at
    ``(k - n_freq / 2) * bandwidth / n_freq``.
    """

    omega0: float = TWO_PI * 8e9
    bandwidth: float = TWO_PI * 100e6
    n_freq: int = 512
    n_slow: int = 1024
    amplitude_model: str = "unity"

    def __post_init__(self):
        if not 0 < self.bandwidth < self.omega0:
            raise ValueError("need 0 < bandwidth < omega0")
        if self.n_freq < 2 or self.n_slow < 2:
            raise ValueError("n_freq and n_slow must be at least 2")
        if self.amplitude_model != "unity":
            raise ValueError("only the 'unity' amplitude model is supported")

    @property
    def frequency_step(self):
        return self.bandwidth / self.n_freq

    def frequency_offsets(self):
        return (np.arange(self.n_freq) - self.n_freq // 2) * self.frequency_step


@dataclass(frozen=True)
class UNBConfig:
    """Continuous-wave Doppler processing parameters.

    ``t_phi`` is the correlation window duration [s]. ``mu_span`` is the
    half-width of the scale-factor axis around 1; ``None`` picks four times
    the largest ``|2 f / omega0|`` of the scene.
    """

    omega0: float = TWO_PI * 8e9
    t_phi: float = 0.01
    n_fast: int = 512
    n_slow: int = 1024
    mu_span: float | None = None
    n_mu: int = 512
    window_kind: str = "raised-cosine"

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.t_phi <= 0:
            raise ValueError("t_phi must be positive")
        if min(self.n_fast, self.n_slow, self.n_mu) < 2:
            raise ValueError("sample counts must be at least 2")
        if self.mu_span is not None and self.mu_span <= 0:
            raise ValueError("mu_span must be positive")
        if self.window_kind not in ("raised-cosine", "rectangular"):
            raise ValueError(f"unknown window kind {self.window_kind!r}")

    @property
    def fast_step(self):
        return self.t_phi / self.n_fast

    def fast_times(self):
        """Midpoint samples of ``[0, t_phi]``; symmetric about ``t_phi / 2``."""
        return (np.arange(self.n_fast) + 0.5) * self.fast_step


def window_value(t, cfg):
    """Correlation window on ``[0, t_phi]``, zero outside, peak 1 at the centre."""
    t = np.asarray(t, dtype=float)
    inside = (t >= 0) & (t <= cfg.t_phi)
    if cfg.window_kind == "rectangular":
        w = np.ones_like(t)
    else:
        w = 0.5 * (1.0 - np.cos(TWO_PI * t / cfg.t_phi))
    return np.where(inside, w, 0.0)


def window_weights(cfg):
    """``phi(t_j) * dt`` at the fast-time samples."""
    return window_value(cfg.fast_times(), cfg) * cfg.fast_step


def doppler_kernel(delta, cfg):
    """``K(delta) = sum_j phi(t_j) exp(-i t_j delta) dt`` for angular offsets ``delta``."""
    delta = np.asarray(delta, dtype=float)
    t = cfg.fast_times()
    return np.exp(-1j * delta[..., None] * t) @ window_weights(cfg)


@dataclass
class WidebandDataSet:
    """Demodulated wideband samples indexed ``(frequency offset, slow time)``."""

    samples: np.ndarray
    omega_offsets: np.ndarray
    slow_times: np.ndarray
    omega0: float
    meta: dict = field(default_factory=dict)

    modality = "WB"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        self.omega_offsets = np.asarray(self.omega_offsets, dtype=float)
        self.slow_times = np.asarray(self.slow_times, dtype=float)
        if self.samples.shape != (self.omega_offsets.size, self.slow_times.size):
            raise ValueError("sample matrix does not match its axes")

    def save(self, path):
        header = {
            "kind": "wideband-data",
            "omega0_rad_per_s": self.omega0,
            "axes": {"omega_offset_rad_per_s": self.omega_offsets,
                     "slow_time_s": self.slow_times},
            "meta": self.meta,
        }
        return write_container(path, self.samples, header)

    @classmethod
    def load(cls, path):
        samples, h = read_container(path)
        if h.get("kind") != "wideband-data":
            raise ValueError(f"{path}: not a wideband dataset")
        return cls(samples, h["axes"]["omega_offset_rad_per_s"], h["axes"]["slow_time_s"],
                   h["omega0_rad_per_s"], h.get("meta", {}))


@dataclass
class UNBDataSet:
    """Correlated UNB samples indexed ``(mu, slow time)``."""

    samples: np.ndarray
    mu: np.ndarray
    slow_times: np.ndarray
    config: UNBConfig
    meta: dict = field(default_factory=dict)

    modality = "UNB"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        self.mu = np.asarray(self.mu, dtype=float)
        self.slow_times = np.asarray(self.slow_times, dtype=float)
        if self.samples.shape != (self.mu.size, self.slow_times.size):
            raise ValueError("sample matrix does not match its axes")

    @property
    def omega0(self):
        return self.config.omega0

    def save(self, path):
        header = {
            "kind": "unb-data",
            "config": asdict(self.config),
            "axes": {"mu": self.mu, "slow_time_s": self.slow_times},
            "meta": self.meta,
        }
        return write_container(path, self.samples, header)

    @classmethod
    def load(cls, path):
        samples, h = read_container(path)
        if h.get("kind") != "unb-data":
            raise ValueError(f"{path}: not a UNB dataset")
        return cls(samples, h["axes"]["mu"], h["axes"]["slow_time_s"],
                   UNBConfig(**h["config"]), h.get("meta", {}))


def _scene_arrays(scene):
    if isinstance(scene, geo.Scene):
        return scene.positions, scene.reflectivities
    scene = geo.Scene(scene)
    return scene.positions, scene.reflectivities


def simulate_wideband(scene, traj, cfg=WidebandConfig(), consts=geo.DEFAULT_CONSTANTS):
    """Wideband samples ``D(w', s) = sum_k V_k exp(i 2 (w0 + w') R_k(s) / c)``.

    Raises
    ------
    GeometryError
        If a scatterer coincides with the antenna.
    """
    pos, refl = _scene_arrays(scene)
    s = traj.slow_times(cfg.n_slow)
    wp = cfg.frequency_offsets()
    data = np.zeros((cfg.n_freq, cfg.n_slow), dtype=complex)
    wavenumber = 2.0 * (cfg.omega0 + wp)[:, None] / consts.c
    for x, v in zip(pos, refl):
        r = geo.slant_range(traj, s, x)
        geo._check_range(r)
        data += v * np.exp(1j * wavenumber * r[None, :])
    return WidebandDataSet(data, wp, s, cfg.omega0,
                           {"trajectory": traj.to_dict(), "config": asdict(cfg),
                            "c_m_per_s": consts.c, "n_scatterers": len(refl)})


def max_doppler_ratio(points, traj, n_slow, consts=geo.DEFAULT_CONSTANTS):
    """Largest ``|2 f / omega0| = |2 L . gamma_dot / c|`` over points and slow times."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if points.shape[0] == 0:
        return 0.0
    s = traj.slow_times(n_slow)
    ldv = geo.look_dot_velocity(traj, s, points[:, None, :])
    return float(np.max(np.abs(2.0 * ldv / consts.c)))


def mu_axis(points, traj, cfg, consts=geo.DEFAULT_CONSTANTS):
    """Scale-factor axis centred on 1.

    The half-width is ``cfg.mu_span`` when set, otherwise four times the
    largest Doppler ratio of ``points``. With no usable points the bound
    ``2 |gamma_dot| / c`` is used.
    """
    half = cfg.mu_span
    if half is None:
        half = 4.0 * max_doppler_ratio(points, traj, cfg.n_slow, consts)
        if half == 0.0:
            half = 2.0 * float(np.linalg.norm(traj.velocity)) / consts.c
    return 1.0 + np.linspace(-half, half, cfg.n_mu)


def simulate_unb(scene, traj, cfg=UNBConfig(), consts=geo.DEFAULT_CONSTANTS, mu=None):
    """UNB samples ``d(mu, s) = sum_k V_k K(w0 (1 - mu) - 2 f_k(s)) exp(i 2 f_k(s) s t_phi)``.

    Parameters
    ----------
    mu : array_like, optional
        Scale-factor axis; defaults to :func:`mu_axis` over the scene.

    Warns
    -----
    AliasingWarning
        When a scatterer's Doppler leaves the ``mu`` axis or the fast-time
        sampling cannot represent it.
    """
    pos, refl = _scene_arrays(scene)
    s = traj.slow_times(cfg.n_slow)
    mu = mu_axis(pos, traj, cfg, consts) if mu is None else np.asarray(mu, dtype=float)
    t = cfg.fast_times()
    # K(w0(1-mu) - 2f) = sum_j w_j e^{-i t_j w0 (1-mu)} e^{+2 i t_j f}: separable in (mu, s)
    left = window_weights(cfg)[None, :] * np.exp(-1j * np.outer(cfg.omega0 * (1.0 - mu), t))
    data = np.zeros((mu.size, s.size), dtype=complex)
    lo, hi = 1.0 - mu.max(), 1.0 - mu.min()
    for x, v in zip(pos, refl):
        f = geo.doppler(traj, s, x, cfg.omega0, consts)
        ratio = 2.0 * f / cfg.omega0
        if ratio.min() < lo or ratio.max() > hi:
            warnings.warn("scatterer Doppler falls outside the mu axis; data are aliased",
                          AliasingWarning, stacklevel=2)
        if np.max(np.abs(2.0 * f)) * cfg.fast_step >= np.pi:
            warnings.warn("fast-time sampling too coarse for the scene Doppler",
                          AliasingWarning, stacklevel=2)
        right = np.exp(2j * np.outer(t, f))
        data += v * (left @ right) * np.exp(2j * f * s * cfg.t_phi)[None, :]
    return UNBDataSet(data, mu, s, cfg,
                      {"trajectory": traj.to_dict(), "c_m_per_s": consts.c,
                       "n_scatterers": len(refl)})
