"""Run configuration files.

Configurations are TOML. Every physical quantity carries its unit in the
key name (``center_frequency_hz``, ``window_duration_s``, ``height_m``).
Frequencies are given in Hz and converted to rad/s here. Unknown keys are
rejected so that typos cannot silently fall back to defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import geometry as geo
from .exceptions import ConfigError
from .forward import UNBConfig, WidebandConfig, max_doppler_ratio
from .heightsolver import SearchGrid
from .imaging import ImageGrid

TWO_PI = 2.0 * np.pi
SHIPPED = {"paper-wb": "paper_wb.toml", "paper-unb": "paper_unb.toml"}
MODALITIES = ("WB", "UNB", "both")


@dataclass(frozen=True)
class Expectations:
    """Reference results checked by ``reproduce-paper``."""

    peak1_m: tuple | None = None
    peak2_m: tuple | None = None
    solution_m: tuple | None = None
    peak_tolerance_m: float = 1.0
    ground_tolerance_m: float = 1.0
    height_tolerance_m: float = 0.5

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class ModalityRun:
    """Antenna pair, waveform and expectations for one modality."""

    modality: str
    traj1: geo.Trajectory
    traj2: geo.Trajectory
    waveform: WidebandConfig | UNBConfig
    expected: Expectations = Expectations()
    phase_surface: str = "hyperboloid"


@dataclass(frozen=True)
class RunConfig:
    name: str
    modality: str
    scene: geo.Scene
    runs: tuple
    image_grid: ImageGrid = ImageGrid()
    search_grid: SearchGrid = SearchGrid()
    constants: geo.PhysicalConstants = geo.DEFAULT_CONSTANTS
    output_dir: str | None = None
    seed: int = 0
    desk_divisor: int = 2
    source: dict = field(default_factory=dict)

    def run_for(self, modality):
        for r in self.runs:
            if r.modality == modality:
                return r
        raise KeyError(modality)

    def profiled(self, full=False):
        """Copy with sample counts divided by the desk divisor unless ``full``."""
        if full or self.desk_divisor == 1:
            return self
        k = self.desk_divisor
        runs = []
        for r in self.runs:
            w = r.waveform
            if isinstance(w, WidebandConfig):
                w = replace(w, n_freq=max(2, w.n_freq // k), n_slow=max(2, w.n_slow // k))
            else:
                w = replace(w, n_fast=max(2, w.n_fast // k), n_slow=max(2, w.n_slow // k))
            runs.append(replace(r, waveform=w))
        return replace(self, runs=tuple(runs))


# ---------------------------------------------------------------------------
# parsing helpers


class _Section:
    """Dict view that records which keys were consumed and where it lives."""

    def __init__(self, data, path):
        if not isinstance(data, dict):
            raise ConfigError("expected a table", path)
        self.data, self.path, self.used = data, path, set()

    def _key(self, key):
        return f"{self.path}.{key}" if self.path else key

    def has(self, key):
        return key in self.data

    def get(self, key, kind, default=...):
        if key not in self.data:
            if default is ...:
                raise ConfigError("missing required key", self._key(key))
            return default
        self.used.add(key)
        value = self.data[key]
        try:
            if kind is float:
                if isinstance(value, bool):
                    raise TypeError
                value = float(value)
                if not np.isfinite(value):
                    raise ValueError
            elif kind is int:
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError
                value = int(value)
            elif kind is str:
                if not isinstance(value, str):
                    raise TypeError
            elif kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
            elif kind == "vec":
                value = tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value {value!r}", self._key(key)) from None
        return value

    def sub(self, key, required=True):
        if key not in self.data:
            if required:
                raise ConfigError("missing required section", self._key(key))
            return None
        self.used.add(key)
        return _Section(self.data[key], self._key(key))

    def finish(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(f"unknown key(s) {', '.join(extra)}", self.path or "<root>")


def _positive(sec, key, kind=float, default=...):
    v = sec.get(key, kind, default)
    if v is not None and v <= 0:
        raise ConfigError("must be positive", sec._key(key))
    return v


def _trajectory(sec, name):
    traj = geo.Trajectory.linear_pass(
        x=sec.get("x_m", float), height=sec.get("height_m", float),
        speed=_positive(sec, "speed_m_per_s"), length=_positive(sec, "pass_length_m"),
        y_center=sec.get("y_center_m", float, 0.0), name=name)
    sec.finish()
    return traj


def _expected(sec):
    if sec is None:
        return Expectations()
    e = Expectations(
        peak1_m=sec.get("peak1_m", "vec", None), peak2_m=sec.get("peak2_m", "vec", None),
        solution_m=sec.get("solution_m", "vec", None),
        peak_tolerance_m=_positive(sec, "peak_tolerance_m", float, 1.0),
        ground_tolerance_m=_positive(sec, "ground_tolerance_m", float, 1.0),
        height_tolerance_m=_positive(sec, "height_tolerance_m", float, 0.5))
    sec.finish()
    return e


def _wideband(sec, name):
    f0 = _positive(sec, "center_frequency_hz")
    bw = _positive(sec, "bandwidth_hz")
    if bw >= f0:
        raise ConfigError("bandwidth must be below the centre frequency", sec._key("bandwidth_hz"))
    cfg = WidebandConfig(omega0=TWO_PI * f0, bandwidth=TWO_PI * bw,
                         n_freq=_count(sec, "n_freq", 512), n_slow=_count(sec, "n_slow", 1024))
    return _modality_run(sec, name, "WB", cfg, "hyperboloid")


def _unb(sec, name):
    kind = sec.get("window_kind", str, "raised-cosine")
    if kind not in ("raised-cosine", "rectangular"):
        raise ConfigError(f"unknown window kind {kind!r}", sec._key("window_kind"))
    cfg = UNBConfig(omega0=TWO_PI * _positive(sec, "center_frequency_hz"),
                    t_phi=_positive(sec, "window_duration_s"),
                    n_fast=_count(sec, "n_fast", 512), n_slow=_count(sec, "n_slow", 1024),
                    mu_span=_positive(sec, "mu_half_span", float, None),
                    n_mu=_count(sec, "n_mu", 512), window_kind=kind)
    return _modality_run(sec, name, "UNB", cfg, "exact")


def _count(sec, key, default):
    v = sec.get(key, int, default)
    if v < 2:
        raise ConfigError("must be at least 2", sec._key(key))
    return v


def _modality_run(sec, name, modality, cfg, default_surface):
    surfaces = ("hyperboloid", "cone") if modality == "WB" else ("exact", "linearized")
    surface = sec.get("phase_surface", str, default_surface)
    if surface not in surfaces:
        raise ConfigError(f"phase_surface must be one of {surfaces}", sec._key("phase_surface"))
    t1 = _trajectory(sec.sub("antenna1"), f"{modality.lower()}-antenna1")
    t2 = _trajectory(sec.sub("antenna2"), f"{modality.lower()}-antenna2")
    exp = _expected(sec.sub("expected", required=False))
    sec.finish()
    return ModalityRun(modality, t1, t2, cfg, exp, surface)


def _scene(sec):
    if sec is None:
        return geo.Scene()
    items = sec.data.get("scatterers", [])
    sec.used.add("scatterers")
    scatterers = []
    for i, raw in enumerate(items):
        s = _Section(raw, f"{sec.path}.scatterers[{i}]")
        scatterers.append(geo.Scatterer(
            (s.get("x_m", float), s.get("y_m", float)), s.get("height_m", float),
            complex(s.get("reflectivity_re", float, 1.0), s.get("reflectivity_im", float, 0.0))))
        s.finish()
    sec.finish()
    return geo.Scene(scatterers)


def _image_grid(sec):
    if sec is None:
        return ImageGrid()
    g = ImageGrid(x_extent=_positive(sec, "x_extent_m", float, 64.0),
                  y_extent=_positive(sec, "y_extent_m", float, 64.0),
                  spacing=_positive(sec, "spacing_m", float, 1.0),
                  reference_height=sec.get("reference_height_m", float, 0.0),
                  x_center=sec.get("x_center_m", float, 0.0),
                  y_center=sec.get("y_center_m", float, 0.0))
    sec.finish()
    return g


def _search_grid(sec):
    if sec is None:
        return SearchGrid()
    x = (sec.get("x_min_m", float, -64.0), sec.get("x_max_m", float, 64.0))
    h = (sec.get("h_min_m", float, 1.0), sec.get("h_max_m", float, 100.0))
    for lo_hi, key in ((x, "x_max_m"), (h, "h_max_m")):
        if lo_hi[1] < lo_hi[0]:
            raise ConfigError("interval is empty", sec._key(key))
    y = None
    if sec.has("y_min_m") or sec.has("y_max_m"):
        y = (sec.get("y_min_m", float), sec.get("y_max_m", float))
        if y[1] < y[0]:
            raise ConfigError("interval is empty", sec._key("y_max_m"))
    g = SearchGrid(x_interval=x, x_step=_positive(sec, "x_step_m", float, 1.0),
                   h_interval=h, h_step=_positive(sec, "h_step_m", float, 0.5),
                   fixed_y=sec.get("fixed_y_m", float, None), y_interval=y,
                   y_step=_positive(sec, "y_step_m", float, 1.0))
    sec.finish()
    return g


def check_mu_span(cfg: RunConfig):
    """Reject UNB runs whose scale-factor axis cannot hold the scene Doppler."""
    try:
        run = cfg.run_for("UNB")
    except KeyError:
        return
    span = run.waveform.mu_span
    if span is None or len(cfg.scene) == 0:
        return
    for traj in (run.traj1, run.traj2):
        need = max_doppler_ratio(cfg.scene.positions, traj, run.waveform.n_slow, cfg.constants)
        if span <= need:
            raise ConfigError(f"mu half-span {span:g} does not cover the scene Doppler "
                              f"ratio {need:g} of {traj.name}", "unb.mu_half_span")


def parse_config(data, source=None) -> RunConfig:
    """Build and validate a :class:`RunConfig` from a parsed TOML document."""
    root = _Section(data, "")
    name = root.get("name", str, Path(source).stem if source else "run")
    modality = root.get("modality", str)
    if modality not in MODALITIES:
        raise ConfigError(f"modality must be one of {MODALITIES}", "modality")
    consts_sec = root.sub("constants", required=False)
    consts = geo.DEFAULT_CONSTANTS
    if consts_sec is not None:
        consts = geo.PhysicalConstants(_positive(consts_sec, "propagation_speed_m_per_s", float, 3.0e8))
        consts_sec.finish()
    runs = []
    try:
        if modality in ("WB", "both"):
            runs.append(_wideband(root.sub("wideband"), name))
        if modality in ("UNB", "both"):
            runs.append(_unb(root.sub("unb"), name))
        scene = _scene(root.sub("scene", required=False))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "<model>") from None
    profile = root.sub("profile", required=False)
    divisor = 2
    if profile is not None:
        divisor = _positive(profile, "desk_divisor", int, 2)
        profile.finish()
    cfg = RunConfig(
        name=name, modality=modality, scene=scene, runs=tuple(runs),
        image_grid=_image_grid(root.sub("image_grid", required=False)),
        search_grid=_search_grid(root.sub("search_grid", required=False)),
        constants=consts, output_dir=root.get("output_dir", str, None),
        seed=root.get("seed", int, 0), desk_divisor=divisor, source=data)
    root.finish()
    check_mu_span(cfg)
    return cfg


def resolve_config_path(name_or_path):
    """Map a shipped config name (``paper-wb``) or a file path to a readable path."""
    if name_or_path in SHIPPED:
        return resources.files("dopplerinsar") / "configs" / SHIPPED[name_or_path]
    path = Path(name_or_path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {name_or_path}", "--config")
    return path


def load_config(name_or_path) -> RunConfig:
    path = resolve_config_path(name_or_path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}", str(name_or_path)) from None
    return parse_config(data, source=str(name_or_path))
