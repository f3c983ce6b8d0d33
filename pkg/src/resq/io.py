"""File formats: CSV traces, Touchstone two-port, and JSON documents.

Schemas
-------
Trace CSV: header ``frequency_hz,s21_real,s21_imag`` or
``frequency_hz,s21_db,s21_phase_rad``. Rocking scans use
``angle_deg,intensity`` and transport data ``temperature_k,resistance_ohm``.
Blank lines and lines starting with ``#`` are ignored.

Manifest (JSON)::

    {"resonator_id": "R1", "attenuators": [20, 30], "temperature_k": 0.01,
     "traces": [{"path": "p00.csv", "vna_power_dbm": -60}, ...]}

Trace paths are relative to the manifest. JSON output writes non-finite
floats as ``null``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputOutputError, ParseError, ValidationError
from .model import ComplexTransmissionTrace
from .tls import CurveBin, EnsembleCurve
from .transport import ResistanceTrace
from .xrd import DiffractionScan

TRACE_HEADERS = {
    ("frequency_hz", "s21_real", "s21_imag"): "ri",
    ("frequency_hz", "s21_db", "s21_phase_rad"): "db",
}
ROCKING_HEADER = ("angle_deg", "intensity")
TRANSPORT_HEADER = ("temperature_k", "resistance_ohm")
TOUCHSTONE_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}


def _read_text(path) -> str:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise InputOutputError(exc.strerror or str(exc), path=p) from exc
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        line = raw[: exc.start].count(b"\n") + 1
        raise ParseError("file is not valid UTF-8", path=p, line=line) from exc


def sha256_file(path) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise InputOutputError(exc.strerror or str(exc), path=path) from exc


def _write_text(path, text: str):
    p = Path(path)
    try:
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputOutputError(exc.strerror or str(exc), path=p) from exc


def _parse_float(text, path, line, column):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text.strip()!r} as a number", path, line, column) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {text.strip()!r}", path, line, column)
    return v


def read_csv_columns(path, headers: dict) -> Tuple[str, np.ndarray]:
    """Parse a numeric CSV whose header must be a key of ``headers``.

    Returns ``(headers[header], data)`` with ``data`` of shape (rows, cols).
    """
    text = _read_text(path)
    rows: List[List[float]] = []
    kind = None
    ncol = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        cells = s.split(",")
        if kind is None:
            key = tuple(c.strip().lower() for c in cells)
            if key not in headers:
                expected = " or ".join(",".join(h) for h in headers)
                raise ParseError(f"unrecognized header {s!r}; expected {expected}", path, lineno, 1)
            kind = headers[key]
            ncol = len(key)
            continue
        if len(cells) != ncol:
            raise ParseError(f"expected {ncol} fields, found {len(cells)}", path, lineno,
                             min(len(cells), ncol) + 1)
        rows.append([_parse_float(c, path, lineno, j + 1) for j, c in enumerate(cells)])
    if kind is None:
        raise ParseError("empty file: no header line", path, 1, 1)
    if not rows:
        raise ParseError("no data rows after header", path, 2, 1)
    return kind, np.array(rows, dtype=float)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path, header: Sequence[str], columns: Sequence[np.ndarray]):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in zip(*columns))
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# resonator traces


def read_trace(path, fmt: str = "auto", vna_power: float = 0.0,
               total_attenuation: float = 0.0,
               temperature: Optional[float] = None) -> ComplexTransmissionTrace:
    """Read a trace as CSV or Touchstone (``fmt`` = auto | csv | touchstone).

    ``auto`` picks Touchstone for ``.s2p`` files and CSV otherwise.
    """
    if fmt == "auto":
        fmt = "touchstone" if str(path).lower().endswith(".s2p") else "csv"
    if fmt == "touchstone":
        f, z = read_touchstone(path)
    elif fmt == "csv":
        kind, data = read_csv_columns(path, TRACE_HEADERS)
        f = data[:, 0]
        if kind == "ri":
            z = data[:, 1] + 1j * data[:, 2]
        else:
            z = 10.0 ** (data[:, 1] / 20.0) * np.exp(1j * data[:, 2])
    else:
        raise ValidationError(f"unknown trace format {fmt!r}; use auto, csv or touchstone")
    try:
        return ComplexTransmissionTrace(f, z, vna_power, total_attenuation, temperature)
    except ValidationError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def write_trace(path, trace: ComplexTransmissionTrace):
    _write_csv(path, ("frequency_hz", "s21_real", "s21_imag"),
               (trace.frequencies, trace.s21.real, trace.s21.imag))


def read_touchstone(path) -> Tuple[np.ndarray, np.ndarray]:
    """S21 column (port-2 response to port-1 drive) of a two-port file.

    Supports RI, MA and DB data formats and HZ/KHZ/MHZ/GHZ units. Angles
    are in degrees per the format convention.
    """
    text = _read_text(path)
    unit, fmt = 1e9, "MA"
    seen_option = False
    tokens: List[Tuple[str, int, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("!", 1)[0]
        s = body.strip()
        if not s:
            continue
        if s.startswith("#"):
            if seen_option:
                continue  # only the first option line counts
            seen_option = True
            opts = s[1:].upper().split()
            i = 0
            while i < len(opts):
                o = opts[i]
                if o in TOUCHSTONE_UNITS:
                    unit = TOUCHSTONE_UNITS[o]
                elif o in ("RI", "MA", "DB"):
                    fmt = o
                elif o == "R":
                    i += 1
                elif o != "S":
                    raise ParseError(f"unsupported option {o!r}", path, lineno, 1)
                i += 1
            continue
        col = 1
        for part in body.split():
            col = body.index(part, col - 1) + 1
            tokens.append((part, lineno, col))
            col += len(part)
    if not tokens:
        raise ParseError("empty Touchstone file: no data", path, 1, 1)
    if len(tokens) % 9:
        _, ln, c = tokens[-1]
        raise ParseError(f"two-port data needs 9 values per frequency; {len(tokens) % 9} left over",
                         path, ln, c)
    vals = np.array([_parse_float(t, path, ln, c) for t, ln, c in tokens]).reshape(-1, 9)
    f = vals[:, 0] * unit
    a, b = vals[:, 3], vals[:, 4]
    if fmt == "RI":
        z = a + 1j * b
    elif fmt == "MA":
        z = a * np.exp(1j * np.deg2rad(b))
    else:
        z = 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))
    return f, z


def write_touchstone(path, trace: ComplexTransmissionTrace):
    """Two-port RI file carrying S21 = S12 from ``trace`` and zero reflection."""
    lines = ["! two-port notch transmission", "# HZ S RI R 50"]
    for f, z in zip(trace.frequencies, trace.s21):
        vals = [f, 0.0, 0.0, z.real, z.imag, z.real, z.imag, 0.0, 0.0]
        lines.append(" ".join(_fmt(v) for v in vals))
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# rocking and transport


def read_scan(path, mode: str = "theta2theta") -> DiffractionScan:
    _, data = read_csv_columns(path, {ROCKING_HEADER: "xrd"})
    try:
        return DiffractionScan(data[:, 0], data[:, 1], mode)
    except ValidationError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def write_scan(path, scan: DiffractionScan):
    _write_csv(path, ROCKING_HEADER, (scan.angles, scan.intensities))


def read_rt(path) -> ResistanceTrace:
    _, data = read_csv_columns(path, {TRANSPORT_HEADER: "rt"})
    try:
        return ResistanceTrace(data[:, 0], data[:, 1])
    except ValidationError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def write_rt(path, trace: ResistanceTrace):
    _write_csv(path, TRANSPORT_HEADER, (trace.temperatures, trace.resistances))


# ---------------------------------------------------------------------------
# JSON documents


def jsonable(obj):
    """Convert to plain JSON types; non-finite floats become ``None``."""
    if hasattr(obj, "as_dict"):
        return jsonable(obj.as_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_json(path, obj):
    _write_text(path, dumps(obj))


def read_json(path):
    text = _read_text(path)
    if not text.strip():
        raise ParseError("empty file", path, 1, 1)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None


def _num(v, what, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{what} must be a number, got {v!r}", path)
    return float(v)


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    vna_power_dbm: float


@dataclass(frozen=True)
class SweepManifest:
    traces: Tuple[ManifestEntry, ...]
    attenuators: Tuple[float, ...] = ()
    temperature_k: Optional[float] = None
    resonator_id: str = ""

    def __post_init__(self):
        if not self.traces:
            raise ValidationError("manifest lists no traces")
        paths = [str(e.path) for e in self.traces]
        if len(set(paths)) != len(paths):
            raise ValidationError("manifest trace paths must be distinct")

    def as_dict(self, relative_to=None):
        def rel(p):
            if relative_to is None:
                return str(p)
            return os.path.relpath(p, relative_to)

        return {
            "resonator_id": self.resonator_id,
            "attenuators": list(self.attenuators),
            "temperature_k": self.temperature_k,
            "traces": [{"path": rel(e.path), "vna_power_dbm": e.vna_power_dbm}
                       for e in self.traces],
        }


def read_manifest(path) -> SweepManifest:
    doc = read_json(path)
    base = Path(path).parent
    if not isinstance(doc, dict):
        raise ParseError("manifest must be a JSON object", path)
    traces = doc.get("traces")
    if not isinstance(traces, list):
        raise ParseError("manifest needs a 'traces' list", path)
    entries = []
    for i, t in enumerate(traces):
        if not isinstance(t, dict) or "path" not in t or "vna_power_dbm" not in t:
            raise ParseError(f"traces[{i}] needs 'path' and 'vna_power_dbm'", path)
        entries.append(ManifestEntry(base / str(t["path"]),
                                     _num(t["vna_power_dbm"], f"traces[{i}].vna_power_dbm", path)))
    att = doc.get("attenuators", [])
    if not isinstance(att, list):
        raise ParseError("'attenuators' must be a list of dB values", path)
    temp = doc.get("temperature_k")
    try:
        return SweepManifest(
            tuple(entries),
            tuple(_num(a, "attenuator", path) for a in att),
            None if temp is None else _num(temp, "temperature_k", path),
            str(doc.get("resonator_id", "")),
        )
    except ValidationError as exc:
        raise ParseError(str(exc), path) from None


def write_manifest(path, manifest: SweepManifest):
    write_json(path, manifest.as_dict(relative_to=Path(path).parent))


def read_curve(path) -> EnsembleCurve:
    """EnsembleCurve from its own JSON or from the ``curve`` block of a report."""
    doc = read_json(path)
    if isinstance(doc, dict) and "curve" in doc and "bins" not in doc:
        doc = doc["curve"]
    if not isinstance(doc, dict) or not isinstance(doc.get("bins"), list):
        raise ParseError("curve file needs a 'bins' list", path)
    bins = []
    for i, b in enumerate(doc["bins"]):
        if not isinstance(b, dict):
            raise ParseError(f"bins[{i}] must be an object", path)
        try:
            bins.append(CurveBin(_num(b.get("n_center"), f"bins[{i}].n_center", path),
                                 _num(b.get("mean_q_i"), f"bins[{i}].mean_q_i", path),
                                 _num(b.get("std_q_i", 0.0), f"bins[{i}].std_q_i", path),
                                 int(b.get("count", 1))))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bins[{i}]: {exc}", path) from None
    try:
        return EnsembleCurve(tuple(bins))
    except ValidationError as exc:
        raise ParseError(str(exc), path) from None


def read_params(path, required: Iterable[str] = ()) -> dict:
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ParseError("parameter file must be a JSON object", path)
    missing = [k for k in required if k not in doc]
    if missing:
        raise ParseError(f"missing keys: {', '.join(missing)}", path)
    return doc
