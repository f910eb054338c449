"""Exact continuous-plane geometry for regular polygons and erasure disks.

Everything here works in continuous pixel coordinates; no pixels are
touched. All functions are pure, and polygon sampling takes an explicit
``numpy.random.Generator`` so the same generator state always yields the
same spec, independent of thread scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError

TWO_PI = 2.0 * math.pi

CORNER = "corner"
EDGE = "edge"
NONE = "none"
KINDS = (CORNER, EDGE, NONE)

# Slack for float noise when a stroke exactly touches the canvas border.
_FIT_EPS = 1e-9


@dataclass(frozen=True)
class Point:
    """A point in continuous pixel coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError(f"point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class PolygonSpec:
    """A regular polygon described by its circumscribed circle.

    ``rotation`` is the angle of vertex 0 in radians, restricted to
    [0, 2*pi). The outline is stroked ``stroke_width`` pixels thick,
    centred on the ideal polygon path.
    """

    n_sides: int
    center: Point
    circumradius: float
    rotation: float
    stroke_width: float = 2.0

    def __post_init__(self):
        if self.n_sides < 3:
            raise ValidationError(f"a polygon needs at least 3 sides, got {self.n_sides}")
        if not (math.isfinite(self.circumradius) and self.circumradius > 0):
            raise ValidationError(f"circumradius must be positive and finite, got {self.circumradius}")
        if not (0.0 <= self.rotation < TWO_PI):
            raise ValidationError(f"rotation must lie in [0, 2*pi), got {self.rotation}")
        if not (math.isfinite(self.stroke_width) and self.stroke_width > 0):
            raise ValidationError(f"stroke_width must be positive and finite, got {self.stroke_width}")

    @property
    def reach(self) -> float:
        """Distance from the center to the outer edge of the stroke."""
        return self.circumradius + self.stroke_width / 2.0

    def fits_canvas(self, canvas_size: float) -> bool:
        return (
            self.center.x - self.reach >= -_FIT_EPS
            and self.center.y - self.reach >= -_FIT_EPS
            and self.center.x + self.reach <= canvas_size + _FIT_EPS
            and self.center.y + self.reach <= canvas_size + _FIT_EPS
        )

    def require_fits(self, canvas_size: float) -> None:
        if not self.fits_canvas(canvas_size):
            raise ValidationError(
                f"polygon with center ({self.center.x:.3f}, {self.center.y:.3f}), "
                f"circumradius {self.circumradius:.3f} and stroke {self.stroke_width} "
                f"does not fit a {canvas_size}x{canvas_size} canvas"
            )


@dataclass(frozen=True)
class DegradationSpec:
    """How much of the outline to erase, and where.

    ``proportion`` is the fraction of total perimeter length removed.
    1.0 is excluded: it would erase the entire outline. ``kind="none"``
    means no erasure and requires proportion 0.
    """

    kind: str
    proportion: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"degradation kind must be one of {KINDS}, got {self.kind!r}")
        if not (0.0 <= self.proportion < 1.0):
            raise ValidationError(f"degradation proportion must lie in [0, 1), got {self.proportion}")
        if self.kind == NONE and self.proportion != 0.0:
            raise ValidationError("kind 'none' requires proportion 0")


@dataclass(frozen=True)
class Disk:
    center: Point
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius >= 0):
            raise ValidationError(f"disk radius must be nonnegative and finite, got {self.radius}")


def polygon_vertices(spec: PolygonSpec) -> list[Point]:
    """Vertices in counter-clockwise order; vertex k sits at angle
    ``rotation + 2*pi*k/n_sides`` on the circumscribed circle."""
    angles = spec.rotation + TWO_PI * np.arange(spec.n_sides) / spec.n_sides
    xs = spec.center.x + spec.circumradius * np.cos(angles)
    ys = spec.center.y + spec.circumradius * np.sin(angles)
    return [Point(float(x), float(y)) for x, y in zip(xs, ys)]


def edge_midpoints(spec: PolygonSpec) -> list[Point]:
    """Midpoint of each edge, in the same cyclic order as the vertices."""
    verts = polygon_vertices(spec)
    n = spec.n_sides
    return [
        Point((verts[k].x + verts[(k + 1) % n].x) / 2.0, (verts[k].y + verts[(k + 1) % n].y) / 2.0)
        for k in range(n)
    ]


def side_length(spec: PolygonSpec) -> float:
    return 2.0 * spec.circumradius * math.sin(math.pi / spec.n_sides)


def perimeter(spec: PolygonSpec) -> float:
    return spec.n_sides * side_length(spec)


def degradation_radius(proportion: float, n_sides: int, perimeter: float) -> float:
    """Radius of each erasure disk for an even global cut of ``proportion``.

    Each disk removes a 2r run of outline, so the n_sides disks together
    remove exactly ``proportion`` of the total perimeter length.
    """
    if not (0.0 <= proportion < 1.0):
        raise ValidationError(f"degradation proportion must lie in [0, 1), got {proportion}")
    if n_sides < 3:
        raise ValidationError(f"a polygon needs at least 3 sides, got {n_sides}")
    if not (math.isfinite(perimeter) and perimeter > 0):
        raise ValidationError(f"perimeter must be positive and finite, got {perimeter}")
    return proportion * perimeter / (2.0 * n_sides)


def erasure_disks(spec: PolygonSpec, deg: DegradationSpec) -> list[Disk]:
    """Erasure disks for the given polygon and degradation.

    Corner disks sit on the vertices, edge disks on the edge midpoints;
    all share the radius from :func:`degradation_radius`. For any
    proportion < 1 the edge disks cannot reach a vertex, and same-kind
    disks are pairwise disjoint.
    """
    if deg.kind == NONE:
        return []
    radius = degradation_radius(deg.proportion, spec.n_sides, perimeter(spec))
    centers = polygon_vertices(spec) if deg.kind == CORNER else edge_midpoints(spec)
    return [Disk(c, radius) for c in centers]


def sample_polygon(
    rng: np.random.Generator,
    n_sides: int,
    canvas_size: float,
    r_min: float,
    stroke_width: float = 2.0,
) -> PolygonSpec:
    """Sample one polygon: center uniform over the admissible square, then
    radius uniform within what that center allows, then rotation.

    The admissible square keeps ``r_min`` plus half the stroke inside every
    canvas border, so sampled strokes never clip. The draw order
    (x, y, radius, rotation) is part of the determinism contract.
    """
    if n_sides < 3:
        raise ValidationError(f"a polygon needs at least 3 sides, got {n_sides}")
    if not (canvas_size > 0 and math.isfinite(canvas_size)):
        raise ConfigurationError(f"canvas_size must be positive, got {canvas_size}")
    if not (r_min > 0 and math.isfinite(r_min)):
        raise ConfigurationError(f"r_min must be positive, got {r_min}")
    margin = r_min + stroke_width / 2.0
    if margin > canvas_size / 2.0 + _FIT_EPS:
        raise ConfigurationError(
            f"r_min {r_min} with stroke {stroke_width} does not fit a "
            f"{canvas_size}x{canvas_size} canvas"
        )
    lo = margin
    hi = max(canvas_size - margin, lo)
    cx = float(rng.uniform(lo, hi))
    cy = float(rng.uniform(lo, hi))
    max_radius = min(cx, cy, canvas_size - cx, canvas_size - cy) - stroke_width / 2.0
    max_radius = max(max_radius, r_min)
    radius = float(rng.uniform(r_min, max_radius))
    rotation = float(rng.uniform(0.0, TWO_PI))
    return PolygonSpec(n_sides, Point(cx, cy), radius, rotation, stroke_width)
