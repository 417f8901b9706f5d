"""Command-line interface.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime
failure (missing stage inputs, no peak, unresolved phase), 3 a reference
check failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import SHIPPED, load_config
from .exceptions import ConfigError
from .fileio import phase_to_uint16, read_container, write_pgm16, write_raster_csv
from .imaging import ImageGrid
from .pipeline import Pipeline, all_checks

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3
STAGE_COMMANDS = ("simulate", "image", "interferogram", "solve", "run")

log = logging.getLogger("dopplerinsar")


def _common(p, config_required=True):
    p.add_argument("--config", required=config_required,
                   help=f"config file, or a shipped name ({', '.join(SHIPPED)})")
    p.add_argument("--out", help="output directory (default: runs/<config name>)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for backprojection")
    p.add_argument("--full", action="store_true", help="full sample counts instead of the desk profile")


def build_parser():
    parser = argparse.ArgumentParser(prog="dopplerinsar",
                                     description="Wideband and Doppler SAR interferometry simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"simulate": "synthesise data for both antennas",
             "image": "backproject the simulated data",
             "interferogram": "co-register the images and form the interferogram",
             "solve": "measure observables and grid-search the height",
             "run": "all stages in order"}
    for name in STAGE_COMMANDS:
        _common(sub.add_parser(name, help=helps[name]))
    rp = sub.add_parser("reproduce-paper", help="run both shipped configurations and check them")
    _common(rp, config_required=False)
    ex = sub.add_parser("export", help="export an image or interferogram file as CSV or PGM")
    ex.add_argument("--input", required=True, help="image or interferogram container")
    ex.add_argument("--format", choices=("csv", "pgm"), required=True)
    ex.add_argument("--quantity", choices=("magnitude", "phase"), default=None,
                    help="PGM raster to write (CSV carries all columns)")
    ex.add_argument("--out", required=True, help="output file")
    return parser


def _out_dir(args, cfg):
    if args.out:
        return Path(args.out)
    return Path(cfg.output_dir) if cfg.output_dir else Path("runs") / cfg.name


def _print_checks(checks, stream=sys.stdout):
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status}  {c['check']:<22} expected {c['expected']}  got {c['got']}", file=stream)


def _stage(args):
    cfg = load_config(args.config)
    pipe = Pipeline(cfg, _out_dir(args, cfg), threads=args.threads, full=args.full)
    if args.command == "run":
        manifest = pipe.run()
        checks = all_checks(manifest)
        _print_checks(checks)
        print(f"manifest: {pipe.out / 'manifest.json'}")
        return EXIT_OK if all(c["passed"] for c in checks) else EXIT_CHECK
    getattr(pipe, args.command)()
    print(f"{args.command}: outputs in {pipe.out}")
    return EXIT_OK


def _reproduce(args):
    root = Path(args.out or "runs")
    checks = []
    for name in SHIPPED:
        cfg = load_config(name)
        pipe = Pipeline(cfg, root / name, threads=args.threads, full=args.full)
        checks += all_checks(pipe.run())
    print(f"{'status':<6}{'check':<24}{'expected':<28}got")
    for c in checks:
        got = c["got"] if c["got"] is None else [round(float(v), 3) for v in c["got"]]
        print(f"{'PASS' if c['passed'] else 'FAIL':<6}{c['check']:<24}{str(c['expected']):<28}{got}")
    ok = bool(checks) and all(c["passed"] for c in checks)
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_CHECK


def _export(args):
    path = Path(args.input)
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    values, header = read_container(path)
    if "grid" not in header:
        raise ConfigError("only images and interferograms can be exported", "--input")
    grid = ImageGrid.from_dict(header["grid"])
    if args.format == "csv":
        write_raster_csv(args.out, (("y_m", grid.y), ("x_m", grid.x)),
                         {"real": values.real, "imag": values.imag,
                          "magnitude": np.abs(values), "phase_rad": np.angle(values)},
                         ["real", "imag", "magnitude", "phase_rad"])
    else:
        quantity = args.quantity or "magnitude"
        raster = np.abs(values) if quantity == "magnitude" else phase_to_uint16(np.angle(values))
        write_pgm16(args.out, np.flipud(raster))
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "reproduce-paper":
            return _reproduce(args)
        if args.command == "export":
            return _export(args)
        return _stage(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to one exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
