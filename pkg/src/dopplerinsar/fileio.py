"""Binary container, 16-bit PGM and CSV writers.

Container layout (all integers little-endian)::

    offset  size  content
    0       8     magic b"DSINSAR\\x00"
    8       4     uint32 format version
    12      8     uint64 header length H in bytes
    20      H     UTF-8 JSON header (sorted keys)
    20+H    ...   row-major complex samples, float64 (real, imag) pairs, '<c16'

The header always carries ``shape`` and ``dtype``; callers add axes,
configuration echo and provenance.
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DSINSAR\x00"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def dumps_json(obj, indent=None):
    return json.dumps(obj, sort_keys=True, default=_jsonable, indent=indent)


def write_container(path, samples, header):
    """Write a complex array and its metadata header; return the path."""
    samples = np.ascontiguousarray(samples, dtype="<c16")
    head = dict(header)
    head["shape"] = list(samples.shape)
    head["dtype"] = "complex128-le"
    head["format_version"] = FORMAT_VERSION
    blob = dumps_json(head).encode("utf-8")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(samples.tobytes(order="C"))
    return path


def read_container(path):
    """Return ``(samples, header)`` from a container file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _PREFIX.size:
        raise ValueError(f"{path}: truncated container")
    magic, version, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a container file")
    if version > FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    start = _PREFIX.size
    header = json.loads(raw[start:start + hlen].decode("utf-8"))
    shape = tuple(header["shape"])
    data = np.frombuffer(raw, dtype="<c16", offset=start + hlen)
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: sample count does not match header shape {shape}")
    return data.reshape(shape).astype(complex), header


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def to_uint16(values, lo=None, hi=None):
    """Linearly map ``[lo, hi]`` to ``[0, 65535]`` (clipped)."""
    values = np.asarray(values, dtype=float)
    lo = float(np.nanmin(values)) if lo is None else lo
    hi = float(np.nanmax(values)) if hi is None else hi
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint16)
    scaled = np.round((values - lo) / (hi - lo) * 65535.0)
    return np.clip(np.nan_to_num(scaled), 0, 65535).astype(np.uint16)


def phase_to_uint16(phase):
    """Map phase in (-pi, pi] to [0, 65535]."""
    return to_uint16(phase, -np.pi, np.pi)


def write_pgm16(path, raster):
    """Write a binary (P5) 16-bit PGM; rows are written top row first.

    ``raster[0]`` is the first image row. Callers that store rasters with
    increasing y along axis 0 should flip before writing if a north-up
    picture is wanted.
    """
    raster = np.asarray(raster)
    if raster.dtype != np.uint16:
        raster = to_uint16(raster)
    h, w = raster.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(raster.astype(">u2").tobytes())
    return Path(path)


def read_pgm16(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode("ascii"))
    pos += 1
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(raw, dtype=dtype, offset=pos, count=w * h).reshape(h, w)


def write_raster_csv(path, axes, values, columns):
    """Write a 2-D raster in long form, one row per cell.

    Parameters
    ----------
    axes : tuple of (name, array)
        ``(row_axis_name, row_coords), (col_axis_name, col_coords)``.
    values : dict
        Column name -> 2-D array aligned with the axes.
    columns : list of str
        Order of the value columns.
    """
    (rname, rcoords), (cname, ccoords) = axes
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow([cname, rname, *columns])
        for i, rv in enumerate(rcoords):
            for j, cv in enumerate(ccoords):
                writer.writerow([repr(float(cv)), repr(float(rv)),
                                 *(repr(float(values[c][i, j])) for c in columns)])
    return Path(path)
