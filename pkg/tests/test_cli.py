import csv
import json

import numpy as np
import pytest

from dopplerinsar import cli
from dopplerinsar.config import resolve_config_path
from dopplerinsar.fileio import read_pgm16, sha256_file

SHRINK = [("x_extent_m = 64.0", "x_extent_m = 16.0\nx_center_m = -40.0"),
          ("y_extent_m = 64.0", "y_extent_m = 4.0\ny_center_m = -31.0"),
          ("x_min_m = -64.0", "x_min_m = -30.0"), ("x_max_m = 64.0", "x_max_m = -10.0"),
          ("h_min_m = 1.0", "h_min_m = 40.0"), ("h_max_m = 100.0", "h_max_m = 60.0"),
          ("n_freq = 512", "n_freq = 128"), ("n_slow = 1024", "n_slow = 256"),
          ("n_fast = 512", "n_fast = 128"), ("n_mu = 512", "n_mu = 256"),
          ("desk_divisor = 2", "desk_divisor = 1")]


def small_config(tmp_path, shipped, edits=()):
    """A shrunken copy of a shipped config that runs in a couple of seconds."""
    text = resolve_config_path(shipped).read_text()
    for old, new in SHRINK:
        text = text.replace(old, new)
    for old, new in edits:
        assert old in text
        text = text.replace(old, new)
    path = tmp_path / f"{shipped}-small.toml"
    path.write_text(text)
    return str(path)


@pytest.fixture(scope="module")
def wb_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("wb")
    cfg = small_config(tmp, "paper-wb")
    out = tmp / "out"
    code = cli.main(["run", "--config", cfg, "--out", str(out)])
    return code, cfg, out


def test_run_passes_checks(wb_run):
    code, _, out = wb_run
    assert code == cli.EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    sol = manifest["results"]["WB"]["solution"]["position_m"]
    assert sol == [-20.0, -31.0, 50.0]


def test_run_emits_files(wb_run):
    _, _, out = wb_run
    names = {p.name for p in (out / "wb").iterdir()}
    assert {"data1.dsi", "data2.dsi", "image1.dsi", "image2.dsi", "interferogram.dsi",
            "interferogram_phase.pgm", "interferogram.csv", "residuals.csv",
            "residual_combined.pgm", "image1_magnitude.pgm"} <= names


def test_manifest_hashes_match_files(wb_run):
    _, _, out = wb_run
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["files"]
    for entry in manifest["files"]:
        assert sha256_file(out / entry["path"]) == entry["sha256"]
        assert (out / entry["path"]).stat().st_size == entry["bytes"]


def test_manifest_records_conventions(wb_run):
    manifest = json.loads((wb_run[2] / "manifest.json").read_text())
    assert "sign_conventions" in manifest
    assert manifest["config"]["effective"]
    assert "WB" in manifest["results"]


def test_stages_match_single_run(wb_run, tmp_path):
    _, cfg, out = wb_run
    staged = tmp_path / "staged"
    for stage in ("simulate", "image", "interferogram", "solve"):
        assert cli.main([stage, "--config", cfg, "--out", str(staged)]) == cli.EXIT_OK
    for name in ("data1.dsi", "data2.dsi", "image1.dsi", "image2.dsi", "interferogram.dsi",
                 "residuals.csv"):
        assert sha256_file(staged / "wb" / name) == sha256_file(out / "wb" / name), name


def test_threads_give_identical_images(wb_run, tmp_path):
    _, cfg, out = wb_run
    other = tmp_path / "threads"
    assert cli.main(["run", "--config", cfg, "--out", str(other), "--threads", "2"]) == cli.EXIT_OK
    assert sha256_file(other / "wb" / "image1.dsi") == sha256_file(out / "wb" / "image1.dsi")


def test_missing_stage_input(tmp_path, capsys):
    cfg = small_config(tmp_path, "paper-wb")
    code = cli.main(["image", "--config", cfg, "--out", str(tmp_path / "empty")])
    assert code == cli.EXIT_RUNTIME
    assert "simulate" in capsys.readouterr().err


def test_unb_run(tmp_path):
    cfg = small_config(tmp_path, "paper-unb")
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_OK
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["results"]["UNB"]["solution"]["position_m"] == [-20.0, -31.0, 50.0]


def test_empty_scene_is_runtime_error(tmp_path):
    cfg = small_config(tmp_path, "paper-wb", [("[[scene.scatterers]]\nx_m = -20.0\ny_m = -31.0\n"
                                               "height_m = 50.0\n", "")])
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_RUNTIME
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["status"] == "failed"


def test_failed_check_exit_code(tmp_path):
    cfg = small_config(tmp_path, "paper-wb", [("peak1_m = [-41.0, -31.0]", "peak1_m = [-30.0, -31.0]")])
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_CHECK


def test_bad_config(tmp_path, capsys):
    cfg = small_config(tmp_path, "paper-wb", [("n_freq = 128", "n_freq = 1")])
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "wideband.n_freq" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "nope.toml")]) == cli.EXIT_CONFIG


def test_bad_arguments():
    assert cli.main(["frobnicate"]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--config", "paper-wb", "--threads", "0"]) == cli.EXIT_CONFIG


def test_export_csv(wb_run, tmp_path):
    _, _, out = wb_run
    dest = tmp_path / "i.csv"
    assert cli.main(["export", "--input", str(out / "wb" / "image1.dsi"), "--format", "csv",
                     "--out", str(dest)]) == cli.EXIT_OK
    rows = list(csv.reader(open(dest)))
    assert rows[0] == ["x_m", "y_m", "real", "imag", "magnitude", "phase_rad"]
    assert len(rows) == 1 + 33 * 9


def test_export_pgm(wb_run, tmp_path):
    _, _, out = wb_run
    dest = tmp_path / "p.pgm"
    assert cli.main(["export", "--input", str(out / "wb" / "interferogram.dsi"), "--format", "pgm",
                     "--quantity", "phase", "--out", str(dest)]) == cli.EXIT_OK
    assert read_pgm16(dest).shape == (9, 33)


def test_export_rejects_data_file(wb_run, tmp_path):
    _, _, out = wb_run
    code = cli.main(["export", "--input", str(out / "wb" / "data1.dsi"), "--format", "csv",
                     "--out", str(tmp_path / "x.csv")])
    assert code == cli.EXIT_CONFIG


def test_export_missing_input(tmp_path):
    code = cli.main(["export", "--input", str(tmp_path / "none.dsi"), "--format", "csv",
                     "--out", str(tmp_path / "x.csv")])
    assert code == cli.EXIT_RUNTIME


def test_pgm_is_north_up(wb_run):
    _, _, out = wb_run
    raster = read_pgm16(out / "wb" / "image1_magnitude.pgm")
    row, col = np.unravel_index(np.argmax(raster), raster.shape)
    # peak at y = -31 is the centre row; x = -41 is column -41 - (-56) = 15
    assert (row, col) == (4, 15)
