"""Binary file formats for images, visibilities and level selectors.

Every file starts with a 16-byte preamble (12-byte magic, little-endian
``uint32`` version) followed by a one-line JSON header terminated by ``\\n`` and
a little-endian payload:

* image: ``{"width": W, "height": H, "dtype": "f64le"}`` then ``W*H`` float64,
  row-major;
* visibilities: ``{"m": m, "tracks": T, "baseline_length": [...]}`` then ``m``
  packed records ``(u f64, v f64, re f64, im f64, track u32)``;
* selector: ``{"count": k, "parent_m": m, "fraction": f}`` then ``k`` uint64
  indices, sorted.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .measurement import UVCoverage

VERSION = 1
IMAGE_MAGIC = b"IMLFISTA-IMG"
VIS_MAGIC = b"IMLFISTA-VIS"
SELECTOR_MAGIC = b"IMLFISTA-SEL"

VIS_RECORD = np.dtype([("u", "<f8"), ("v", "<f8"), ("re", "<f8"), ("im", "<f8"), ("track", "<u4")])


class FormatError(ValueError):
    """Malformed or truncated file; ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _write(path, magic, header, payload: bytes):
    with open(path, "wb") as fh:
        fh.write(magic + struct.pack("<I", VERSION))
        fh.write(json.dumps(header, separators=(",", ":")).encode() + b"\n")
        fh.write(payload)


def _read(path, magic):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16 or raw[:12] != magic:
        raise FormatError(f"bad magic, expected {magic!r}", 0)
    (version,) = struct.unpack("<I", raw[12:16])
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 12)
    end = raw.find(b"\n", 16)
    if end < 0:
        raise FormatError("unterminated JSON header", 16)
    try:
        header = json.loads(raw[16:end])
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed JSON header: {exc.msg}", 16 + exc.pos) from None
    if not isinstance(header, dict):
        raise FormatError("JSON header is not an object", 16)
    return header, raw, end + 1


def _payload(raw, start, dtype, count, what):
    need = count * np.dtype(dtype).itemsize
    have = len(raw) - start
    if have != need:
        raise FormatError(f"{what} payload has {have} bytes, header implies {need}", start + min(have, need))
    return np.frombuffer(raw, dtype=dtype, count=count, offset=start)


def save_image(path, x) -> None:
    x = np.asarray(x, dtype="<f8")
    if x.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {x.shape}")
    H, W = x.shape
    _write(path, IMAGE_MAGIC, {"width": W, "height": H, "dtype": "f64le"}, np.ascontiguousarray(x).tobytes())


def load_image(path) -> np.ndarray:
    header, raw, start = _read(path, IMAGE_MAGIC)
    try:
        W, H = int(header["width"]), int(header["height"])
    except (KeyError, TypeError, ValueError):
        raise FormatError("header needs integer width and height", 16) from None
    if header.get("dtype") != "f64le":
        raise FormatError(f"unsupported dtype {header.get('dtype')!r}", 16)
    data = _payload(raw, start, "<f8", W * H, "image")
    return data.reshape(H, W).astype(float)


def save_visibilities(path, values, coverage: UVCoverage) -> None:
    values = np.asarray(values)
    if values.shape != (coverage.m,):
        raise ValueError(f"{values.size} visibilities for a coverage of {coverage.m} points")
    rec = np.empty(coverage.m, dtype=VIS_RECORD)
    rec["u"], rec["v"] = coverage.uv[:, 0], coverage.uv[:, 1]
    rec["re"], rec["im"] = values.real, values.imag
    rec["track"] = coverage.track
    header = {"m": coverage.m, "tracks": coverage.n_tracks, "baseline_length": coverage.baseline_length.tolist()}
    _write(path, VIS_MAGIC, header, rec.tobytes())


def load_visibilities(path):
    """Return ``(values, coverage)``."""
    header, raw, start = _read(path, VIS_MAGIC)
    try:
        m, T = int(header["m"]), int(header["tracks"])
        lengths = np.asarray(header.get("baseline_length", np.zeros(T)), dtype=float)
    except (KeyError, TypeError, ValueError):
        raise FormatError("header needs integer m and tracks", 16) from None
    if lengths.size != T:
        raise FormatError(f"baseline_length lists {lengths.size} tracks, header says {T}", 16)
    rec = _payload(raw, start, VIS_RECORD, m, "visibility")
    if m and rec["track"].max() >= T:
        bad = int(np.argmax(rec["track"] >= T))
        raise FormatError(f"record {bad} has track id beyond {T}", start + bad * VIS_RECORD.itemsize)
    cov = UVCoverage(np.stack([rec["u"], rec["v"]], axis=1), rec["track"].astype(np.int64), lengths)
    return rec["re"] + 1j * rec["im"], cov


def save_selector(path, indices, parent_m, fraction) -> None:
    idx = np.sort(np.asarray(indices, dtype="<u8"))
    _write(path, SELECTOR_MAGIC, {"count": int(idx.size), "parent_m": int(parent_m), "fraction": float(fraction)}, idx.tobytes())


def load_selector(path):
    """Return ``(indices, header)``."""
    header, raw, start = _read(path, SELECTOR_MAGIC)
    try:
        count = int(header["count"])
    except (KeyError, TypeError, ValueError):
        raise FormatError("header needs integer count", 16) from None
    return _payload(raw, start, "<u8", count, "selector").astype(np.int64), header


def log_scale(x, dynamic=1e3):
    """``log10(dynamic * x + 1) / log10(dynamic)``; maps ``[0, 1]`` onto ``[0, ~1]``."""
    return np.log10(dynamic * np.clip(x, 0, None) + 1.0) / np.log10(dynamic)


def save_pgm(path, x, log=True) -> None:
    """16-bit binary PGM, optionally after the log transform; scaled to full range."""
    img = log_scale(np.asarray(x, dtype=float)) if log else np.asarray(x, dtype=float)
    lo, hi = float(img.min()), float(img.max())
    norm = (img - lo) / (hi - lo) if hi > lo else np.zeros_like(img)
    data = np.round(norm * 65535).astype(">u2")
    H, W = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{W} {H}\n65535\n".encode())
        fh.write(data.tobytes())
