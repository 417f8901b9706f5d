"""Staged simulate -> image -> interferogram -> solve pipeline with a run manifest.

Each stage reads its inputs from the output directory and writes its
products back there, so stages can be run one at a time or all together
with identical results. ``manifest.json`` accumulates the configuration
echo, per-stage timings, peaks, phase measurements, solutions and a
SHA-256 inventory of every emitted file.
"""
from __future__ import annotations

import json
import logging
import platform
import time
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import forward as fw
from . import heightsolver as hs
from .config import ModalityRun, RunConfig
from .exceptions import StageDependencyError
from .fileio import (dumps_json, phase_to_uint16, sha256_file, write_pgm16,
                     write_raster_csv)
from .imaging import ComplexImage, backproject_unb, backproject_wideband, find_peak
from .interferometry import coregister, interferogram

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
STAGES = ("simulate", "image", "interferogram", "solve")

CONVENTIONS = {
    "look_direction": "L = (x - gamma(s)) / |x - gamma(s)|, antenna to scatterer",
    "doppler": "f = -(omega0 / c) L . gamma_dot  [rad/s]",
    "doppler_rate": "df/ds = -(omega0 / c) (L . gamma_ddot - gamma_dot . gamma_dot_perp / R)",
    "range_rate": "dR/ds = -L . gamma_dot",
    "slow_time": "physical seconds, s = 0 at the pass midpoint",
    "wb_phase": "Phi = 2 (omega0 / c) (R1(x, s01) - R2(x, s02))",
    "unb_phase": "Phi = 2 s_d1 t_phi (f1(x, s_d1) - f2(x, s_d2))",
    "unb_phase_surface": "L1 . gamma_dot_1 - L2 . gamma_dot_2 = -c Phi / (2 s_d1 t_phi omega0)",
    "unb_linearized_surface": "L1 . v - b_perp . gamma_dot_2 / R1 = c Phi / (2 s_d1 t_phi omega0)",
    "image_phase_reference": "per-pixel conjugate phase at the pixel's own reference time",
}


def _ensure(path, stage):
    if not Path(path).is_file():
        raise StageDependencyError(f"{path} not found; run the '{stage}' stage first")
    return path


def _pgm(path, raster):
    # rows are stored with y increasing; flip so the picture is north-up
    write_pgm16(path, np.flipud(raster))


class Pipeline:
    """Runs the stages of one :class:`RunConfig` into ``out_dir``."""

    def __init__(self, cfg: RunConfig, out_dir, threads=1, full=False):
        self.cfg = cfg.profiled(full)
        self.full = full
        self.threads = max(1, int(threads or 1))
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = self._load_manifest()

    # -- manifest -----------------------------------------------------------

    def _load_manifest(self):
        path = self.out / MANIFEST
        base = {
            "software": {"package": "dopplerinsar", "version": __version__,
                         "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__},
            "config": {"name": self.cfg.name, "modality": self.cfg.modality,
                       "profile": "full" if self.full else f"desk (counts / {self.cfg.desk_divisor})",
                       "source": self.cfg.source, "effective": self._effective()},
            "sign_conventions": CONVENTIONS,
            "timings_s": {}, "results": {}, "warnings": [], "status": "incomplete",
        }
        if path.is_file():
            old = json.loads(path.read_text())
            if old.get("config", {}).get("effective") == base["config"]["effective"]:
                for key in ("timings_s", "results", "warnings"):
                    base[key] = old.get(key, base[key])
        return base

    def _effective(self):
        eff = {"scene": [{"position_m": s.position.tolist(),
                          "reflectivity": [s.reflectivity.real, s.reflectivity.imag]}
                         for s in self.cfg.scene.scatterers],
               "image_grid": self.cfg.image_grid.to_dict(),
               "search_grid": self.cfg.search_grid.to_dict(),
               "propagation_speed_m_per_s": self.cfg.constants.c}
        for r in self.cfg.runs:
            eff[r.modality] = {"waveform": r.waveform.__dict__, "antenna1": r.traj1.to_dict(),
                               "antenna2": r.traj2.to_dict(), "phase_surface": r.phase_surface,
                               "expected": r.expected.to_dict()}
        return json.loads(dumps_json(eff))

    def save_manifest(self):
        files = []
        for p in sorted(self.out.rglob("*")):
            if p.is_file() and p.name != MANIFEST:
                files.append({"path": p.relative_to(self.out).as_posix(),
                              "sha256": sha256_file(p), "bytes": p.stat().st_size})
        self.manifest["files"] = files
        (self.out / MANIFEST).write_text(dumps_json(self.manifest, indent=2) + "\n")
        return self.out / MANIFEST

    def _result(self, run):
        return self.manifest["results"].setdefault(run.modality, {})

    def _dir(self, run):
        d = self.out / run.modality.lower()
        d.mkdir(exist_ok=True)
        return d

    def _timed(self, name, func, *args):
        t0 = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            value = func(*args)
        for w in caught:
            msg = f"{name}: {w.message}"
            if msg not in self.manifest["warnings"]:
                self.manifest["warnings"].append(msg)
            log.warning(msg)
        self.manifest["timings_s"][name] = round(time.perf_counter() - t0, 3)
        return value

    # -- stages ---------------------------------------------------------------

    def _each(self, stage):
        for run in self.cfg.runs:
            self._timed(f"{run.modality}.{stage}", getattr(self, f"_{stage}"), run)
        self.save_manifest()

    def simulate(self):
        self._each("simulate")

    def image(self):
        self._each("image")

    def interferogram(self):
        self._each("interferogram")

    def solve(self):
        self._each("solve")

    def run(self):
        """All stages in order; on failure the manifest is written with status 'failed'."""
        try:
            for stage in STAGES:
                getattr(self, stage)()
        except Exception as exc:
            self.manifest["status"] = "failed"
            self.manifest["error"] = f"{type(exc).__name__}: {exc}"
            self.save_manifest()
            raise
        self.manifest["status"] = "ok"
        self.save_manifest()
        return self.manifest

    def _simulate(self, run: ModalityRun):
        d = self._dir(run)
        for i, traj in enumerate((run.traj1, run.traj2), start=1):
            if run.modality == "WB":
                data = fw.simulate_wideband(self.cfg.scene, traj, run.waveform, self.cfg.constants)
            else:
                pts = self.cfg.scene.positions
                if pts.shape[0] == 0:
                    pts = self.cfg.image_grid.corners()
                mu = fw.mu_axis(pts, traj, run.waveform, self.cfg.constants)
                data = fw.simulate_unb(self.cfg.scene, traj, run.waveform, self.cfg.constants, mu=mu)
            data.save(d / f"data{i}.dsi")

    def _load_data(self, run, i):
        path = _ensure(self._dir(run) / f"data{i}.dsi", "simulate")
        cls = fw.WidebandDataSet if run.modality == "WB" else fw.UNBDataSet
        return cls.load(path)

    def _image(self, run: ModalityRun):
        d = self._dir(run)
        peaks = {}
        for i, traj in enumerate((run.traj1, run.traj2), start=1):
            data = self._load_data(run, i)
            back = backproject_wideband if run.modality == "WB" else backproject_unb
            img = back(data, traj, self.cfg.image_grid, self.cfg.constants, threads=self.threads)
            img.save(d / f"image{i}.dsi")
            _pgm(d / f"image{i}_magnitude.pgm", img.magnitude)
            _pgm(d / f"image{i}_phase.pgm", phase_to_uint16(img.phase))
            if np.any(img.magnitude > 0):
                p = find_peak(img)
                peaks[f"image{i}"] = {"pixel": list(p.index), "position_m": p.position.tolist(),
                                      "magnitude": abs(p.value), "phase_rad": float(np.angle(p.value))}
            else:
                peaks[f"image{i}"] = None
            if img.excluded.any():
                peaks[f"image{i}_excluded_pixels"] = np.argwhere(img.excluded).tolist()
        self._result(run)["peaks"] = peaks

    def _load_images(self, run):
        d = self._dir(run)
        return tuple(ComplexImage.load(_ensure(d / f"image{i}.dsi", "image")) for i in (1, 2))

    def _interferogram(self, run: ModalityRun):
        d = self._dir(run)
        i1, i2 = self._load_images(run)
        _, i2r, offset = coregister(i1, i2)
        ifg = interferogram(i1, i2r, offset)
        ifg.save(d / "interferogram.dsi")
        _pgm(d / "interferogram_phase.pgm", phase_to_uint16(ifg.phase))
        g = ifg.grid
        write_raster_csv(d / "interferogram.csv", (("y_m", g.y), ("x_m", g.x)),
                         {"magnitude": ifg.magnitude, "phase_rad": ifg.phase},
                         ["magnitude", "phase_rad"])
        p = find_peak(i1)
        self._result(run)["interferogram"] = {"registration_offset_px": list(offset),
                                              "phase_at_peak_rad": float(ifg.phase[p.index])}

    def _solve(self, run: ModalityRun):
        d = self._dir(run)
        _ensure(d / "interferogram.dsi", "interferogram")
        i1, i2 = self._load_images(run)
        data1, data2 = self._load_data(run, 1), self._load_data(run, 2)
        c = self.cfg.constants
        if run.modality == "WB":
            meas = hs.measure_wb(i1, i2, data1, data2, run.traj1, run.traj2, c, threads=self.threads)
            grid = self.cfg.search_grid
            if grid.fixed_y is None and not grid.is_3d:
                grid = grid.with_fixed_y(meas.peaks["image1_m"][1])
            maps = hs.residuals_wb(meas, run.traj1, run.traj2, grid, c, run.phase_surface)
            sol = hs.solve_wb(meas, run.traj1, run.traj2, grid, c, run.phase_surface)
        else:
            meas = hs.measure_unb(i1, i2, data1, data2, run.traj1, run.traj2, c)
            grid = self.cfg.search_grid
            if grid.fixed_y is None and not grid.is_3d:
                grid = grid.with_fixed_y(meas.reference_point[1])
            maps = hs.residuals_unb(meas, run.traj1, run.traj2, grid, c, run.phase_surface)
            sol = hs.solve_unb(meas, run.traj1, run.traj2, grid, c, run.phase_surface)
        self._export_maps(d, grid, maps, sol)
        res = self._result(run)
        res["measurement"] = meas.to_dict()
        res["search_grid"] = grid.to_dict()
        res["solution"] = sol.to_dict()
        res["phase_surface"] = run.phase_surface
        res["checks"] = check_results(run, res)

    def _export_maps(self, d, grid, maps, sol):
        names = list(maps.maps)
        values = {n: maps[n].values for n in names}
        values["combined"] = maps.combined
        if grid.is_3d:
            iy = sol.index[1]
            values = {k: v[:, iy, :] for k, v in values.items()}
        for k, v in values.items():
            _pgm(d / f"residual_{k}.pgm", v)
        write_raster_csv(d / "residuals.csv", (("height_m", grid.h), ("x_m", grid.x)),
                         values, [*names, "combined"])


def check_results(run: ModalityRun, res):
    """Compare peaks and solution against the run's expectations."""
    exp = run.expected
    checks = []
    peaks = res.get("peaks", {})
    for key, want in (("image1", exp.peak1_m), ("image2", exp.peak2_m)):
        if want is None:
            continue
        got = (peaks.get(key) or {}).get("position_m")
        ok = got is not None and all(abs(g - w) <= exp.peak_tolerance_m for g, w in zip(got, want))
        checks.append({"check": f"{run.modality} {key} peak", "expected": list(want),
                       "got": None if got is None else got[:2],
                       "tolerance_m": exp.peak_tolerance_m, "passed": bool(ok)})
    if exp.solution_m is not None:
        got = res.get("solution", {}).get("position_m")
        ok = got is not None and (
            np.hypot(got[0] - exp.solution_m[0], got[1] - exp.solution_m[1]) <= exp.ground_tolerance_m
            and abs(got[2] - exp.solution_m[2]) <= exp.height_tolerance_m)
        checks.append({"check": f"{run.modality} solution", "expected": list(exp.solution_m),
                       "got": got, "tolerance_m": [exp.ground_tolerance_m, exp.height_tolerance_m],
                       "passed": bool(ok)})
    return checks


def all_checks(manifest):
    return [c for r in manifest.get("results", {}).values() for c in r.get("checks", [])]
