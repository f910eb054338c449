"""Deterministic binary rasterization, disk erasure, and pixel accounting.

A pixel is ink iff its center lies within half the stroke width of the
polygon outline: a capsule around each edge, whose overlaps give round
joins at the vertices. Disk erasure whitens pixels whose centers fall
strictly inside a disk. Nothing is anti-aliased, so black pixel counts
(and therefore measured degradation proportions) are exact functions of
the geometry.

PNG output is fixed at 8-bit grayscale, no alpha, a single IDAT chunk,
filter type 0 on every row, zlib level 6. The encoder never varies its
settings, so equal canvases produce identical bytes on a given zlib build.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import DecodeError, MeasurementError, ValidationError

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6


@dataclass(frozen=True, eq=False)
class Canvas:
    """A strictly binary grayscale image: 255 is background, 0 is ink."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.ndim != 2 or px.dtype != np.uint8:
            raise ValidationError("canvas pixels must be a 2-D uint8 array")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValidationError(f"canvas must be at least 1x1, got shape {px.shape}")
        if not bool(((px == 0) | (px == 255)).all()):
            raise ValidationError("canvas must be strictly binary (every pixel 0 or 255)")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def blank(cls, width: int, height: int) -> "Canvas":
        return cls(np.full((height, width), 255, dtype=np.uint8))

    def same_pixels(self, other: "Canvas") -> bool:
        return np.array_equal(self.pixels, other.pixels)


def _mark_capsule(ink: np.ndarray, x0: float, y0: float, x1: float, y1: float, half: float) -> None:
    """Mark pixels whose centers lie within ``half`` (inclusive) of the segment."""
    rows, cols = ink.shape
    col_lo = max(0, math.ceil(min(x0, x1) - half - 0.5))
    col_hi = min(cols - 1, math.floor(max(x0, x1) + half - 0.5))
    row_lo = max(0, math.ceil(min(y0, y1) - half - 0.5))
    row_hi = min(rows - 1, math.floor(max(y0, y1) + half - 0.5))
    if col_lo > col_hi or row_lo > row_hi:
        return
    xs = np.arange(col_lo, col_hi + 1, dtype=np.float64) + 0.5 - x0
    ys = np.arange(row_lo, row_hi + 1, dtype=np.float64) + 0.5 - y0
    dx = x1 - x0
    dy = y1 - y0
    seg2 = dx * dx + dy * dy
    if seg2 > 0.0:
        t = np.add.outer(ys * dy, xs * dx) / seg2
        np.clip(t, 0.0, 1.0, out=t)
        rx = xs[None, :] - t * dx
        ry = ys[:, None] - t * dy
    else:  # degenerate segment: plain disk around the endpoint
        rx, ry = np.meshgrid(xs, ys)
    ink[row_lo : row_hi + 1, col_lo : col_hi + 1] |= rx * rx + ry * ry <= half * half


def render_polygon(spec: geometry.PolygonSpec, canvas_size: int) -> Canvas:
    """Rasterize the closed polygon outline onto a white square canvas."""
    spec.require_fits(canvas_size)
    verts = geometry.polygon_vertices(spec)
    ink = np.zeros((canvas_size, canvas_size), dtype=bool)
    half = spec.stroke_width / 2.0
    for k in range(spec.n_sides):
        a = verts[k]
        b = verts[(k + 1) % spec.n_sides]
        _mark_capsule(ink, a.x, a.y, b.x, b.y, half)
    pixels = np.full((canvas_size, canvas_size), 255, dtype=np.uint8)
    pixels[ink] = 0
    return Canvas(pixels)


def stamp_disks(canvas: Canvas, disks: list[geometry.Disk]) -> Canvas:
    """Whiten every pixel whose center lies strictly inside any disk.

    Strict interior makes the boundary tie-break deterministic; stamping
    is idempotent and never darkens a pixel.
    """
    pixels = canvas.pixels.copy()
    rows, cols = pixels.shape
    for disk in disks:
        r = disk.radius
        if r <= 0.0:
            continue
        col_lo = max(0, math.floor(disk.center.x - r - 0.5))
        col_hi = min(cols - 1, math.ceil(disk.center.x + r - 0.5))
        row_lo = max(0, math.floor(disk.center.y - r - 0.5))
        row_hi = min(rows - 1, math.ceil(disk.center.y + r - 0.5))
        if col_lo > col_hi or row_lo > row_hi:
            continue
        xs = np.arange(col_lo, col_hi + 1, dtype=np.float64) + 0.5 - disk.center.x
        ys = np.arange(row_lo, row_hi + 1, dtype=np.float64) + 0.5 - disk.center.y
        inside = np.add.outer(ys * ys, xs * xs) < r * r
        region = pixels[row_lo : row_hi + 1, col_lo : col_hi + 1]
        region[inside] = 255
    return Canvas(pixels)


def black_pixel_count(canvas: Canvas) -> int:
    return int(np.count_nonzero(canvas.pixels == 0))


def measure_degradation(whole: Canvas, degraded: Canvas) -> float:
    """Fraction of the whole image's ink that the degraded image lost."""
    if whole.pixels.shape != degraded.pixels.shape:
        raise MeasurementError(
            f"canvas dimensions differ: {whole.pixels.shape} vs {degraded.pixels.shape}"
        )
    whole_black = black_pixel_count(whole)
    if whole_black == 0:
        raise MeasurementError("whole canvas has no ink; degradation is undefined")
    return 1.0 - black_pixel_count(degraded) / whole_black


def _chunk(tag: bytes, data: bytes) -> bytes:
    crc = zlib.crc32(data, zlib.crc32(tag)) & 0xFFFFFFFF
    return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", crc)


def encode_png(canvas: Canvas) -> bytes:
    """Encode as 8-bit grayscale PNG with fixed, deterministic settings."""
    height, width = canvas.pixels.shape
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 0, 0, 0, 0)
    filtered = np.zeros((height, width + 1), dtype=np.uint8)
    filtered[:, 1:] = canvas.pixels
    idat = zlib.compress(filtered.tobytes(), _ZLIB_LEVEL)
    return _PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: np.ndarray) -> np.ndarray:
    """Reverse per-row PNG filtering for 1-byte-per-pixel rows."""
    height, width1 = raw.shape
    width = width1 - 1
    out = np.zeros((height, width), dtype=np.uint8)
    prev = np.zeros(width, dtype=np.uint8)
    for j in range(height):
        ftype = int(raw[j, 0])
        line = raw[j, 1:]
        if ftype == 0:
            recon = line.copy()
        elif ftype == 1:  # sub: prefix sum mod 256
            recon = np.cumsum(line, dtype=np.int64).astype(np.uint8)
        elif ftype == 2:  # up
            recon = line + prev
        elif ftype == 3:  # average
            recon = np.empty(width, dtype=np.uint8)
            left = 0
            for i in range(width):
                left = (int(line[i]) + ((left + int(prev[i])) >> 1)) & 0xFF
                recon[i] = left
        elif ftype == 4:  # paeth
            recon = np.empty(width, dtype=np.uint8)
            left = upleft = 0
            for i in range(width):
                up = int(prev[i])
                left = (int(line[i]) + _paeth(left, up, upleft)) & 0xFF
                recon[i] = left
                upleft = up
        else:
            raise DecodeError(f"unknown PNG filter type {ftype} on row {j}")
        out[j] = recon
        prev = recon
    return out


def decode_png(data: bytes) -> Canvas:
    """Decode an 8-bit grayscale, non-interlaced PNG into a Canvas."""
    data = bytes(data)
    if len(data) < 8 or data[:8] != _PNG_SIGNATURE:
        raise DecodeError("not a PNG: bad signature")
    pos = 8
    width = height = None
    idat_parts: list[bytes] = []
    while pos + 8 <= len(data):
        length, tag = struct.unpack(">I4s", data[pos : pos + 8])
        end = pos + 8 + length
        if end + 4 > len(data):
            raise DecodeError(f"truncated {tag!r} chunk")
        chunk = data[pos + 8 : end]
        (crc,) = struct.unpack(">I", data[end : end + 4])
        if crc != (zlib.crc32(chunk, zlib.crc32(tag)) & 0xFFFFFFFF):
            raise DecodeError(f"CRC mismatch in {tag!r} chunk")
        if tag == b"IHDR":
            if length != 13:
                raise DecodeError("malformed IHDR chunk")
            width, height, depth, color, comp, filt, interlace = struct.unpack(">IIBBBBB", chunk)
            if (depth, color, comp, filt, interlace) != (8, 0, 0, 0, 0):
                raise DecodeError(
                    "unsupported PNG: need 8-bit grayscale, deflate, standard "
                    f"filtering, no interlace (got depth={depth}, color={color}, "
                    f"interlace={interlace})"
                )
        elif tag == b"IDAT":
            idat_parts.append(chunk)
        elif tag == b"IEND":
            break
        pos = end + 4
    if width is None or height is None:
        raise DecodeError("missing IHDR chunk")
    if not idat_parts:
        raise DecodeError("missing IDAT data")
    try:
        raw = zlib.decompress(b"".join(idat_parts))
    except zlib.error as exc:
        raise DecodeError(f"corrupt IDAT stream: {exc}") from exc
    if len(raw) != (width + 1) * height:
        raise DecodeError(
            f"pixel data length {len(raw)} does not match {width}x{height} grayscale"
        )
    rows = np.frombuffer(raw, dtype=np.uint8).reshape(height, width + 1)
    return Canvas(_unfilter(rows))
