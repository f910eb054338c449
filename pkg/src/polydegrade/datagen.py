"""Seeded, parallel generation of whole and degraded polygon images.

Every image is a pure function of a seed derived from (master_seed,
class, index), so generation is embarrassingly parallel and byte-identical
for any worker count. The manifest is assembled in planning order by the
parent process and written atomically: a present ``manifest.jsonl``
implies a complete dataset.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import geometry, raster
from .errors import ConfigurationError, ValidationError
from .geometry import DegradationSpec, Point, PolygonSpec

PIPELINE_VERSION = "0.1.0"

SPLITS = ("train", "val", "test")

HEADER_NAME = "header.json"
MANIFEST_NAME = "manifest.jsonl"
INCOMPLETE_MARKER = "INCOMPLETE.json"

# Fixed stream for the split permutation; assign_split takes no seed, so the
# permutation must be a constant of (per_class_whole, split_fractions) alone.
_SPLIT_STREAM_SEED = 0x5EED_5B117


@dataclass(frozen=True)
class GenerationConfig:
    classes: tuple[int, ...] = (3, 4, 5, 6, 7, 8)
    per_class_whole: int = 1000
    degradation_grid: tuple[float, ...] = (0.10, 0.15, 0.20, 0.25, 0.30, 0.40, 0.50, 0.60, 0.70)
    kinds: tuple[str, ...] = (geometry.CORNER, geometry.EDGE)
    master_seed: int = 0
    canvas_size: int = 224
    r_min: float = 28.0
    stroke_width: float = 2.0
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    output_dir: str = "dataset"
    shared_bases: bool = True


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    class_label: int
    polygon: PolygonSpec
    degradation: DegradationSpec
    base_id: str
    split: str
    seed: int
    path: str


@dataclass
class Manifest:
    config: GenerationConfig | None
    records: list[ImageRecord]
    version: str = PIPELINE_VERSION
    _index: dict[str, ImageRecord] | None = field(default=None, repr=False, compare=False)

    def by_id(self) -> dict[str, ImageRecord]:
        if self._index is None:
            self._index = {r.image_id: r for r in self.records}
        return self._index

    def class_set(self) -> tuple[int, ...]:
        return tuple(sorted({r.class_label for r in self.records}))


def _exact_fractions(split_fractions: tuple[float, ...]) -> tuple[Fraction, ...]:
    """Read fractions through their decimal repr so 0.6 means exactly 3/5."""
    try:
        fracs = tuple(Fraction(str(f)) for f in split_fractions)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"unparseable split fractions {split_fractions}") from exc
    if any(f < 0 for f in fracs):
        raise ConfigurationError(f"split fractions must be nonnegative, got {split_fractions}")
    if sum(fracs) != 1:
        raise ConfigurationError(f"split fractions must sum to exactly 1, got {split_fractions}")
    return fracs


def percent_tag(proportion: float) -> str:
    """Directory tag for a degradation proportion, e.g. 0.5 -> 'p050'."""
    return f"p{round(proportion * 100):03d}"


def validate_config(config: GenerationConfig) -> None:
    if not config.classes:
        raise ConfigurationError("classes must be nonempty")
    if any(not isinstance(c, int) or c < 3 for c in config.classes):
        raise ConfigurationError(f"classes must be integer side counts >= 3, got {config.classes}")
    if len(set(config.classes)) != len(config.classes):
        raise ConfigurationError(f"classes must be unique, got {config.classes}")
    if config.per_class_whole < 1:
        raise ConfigurationError(f"per_class_whole must be >= 1, got {config.per_class_whole}")
    for p in config.degradation_grid:
        if not (0.0 <= p < 1.0) or not math.isfinite(p):
            raise ConfigurationError(f"degradation proportions must lie in [0, 1), got {p}")
    tags = [percent_tag(p) for p in config.degradation_grid]
    if len(set(tags)) != len(tags):
        raise ConfigurationError(
            f"degradation grid values collide at whole-percent resolution: {config.degradation_grid}"
        )
    for kind in config.kinds:
        if kind not in (geometry.CORNER, geometry.EDGE):
            raise ConfigurationError(f"kinds must be drawn from ('corner', 'edge'), got {kind!r}")
    if len(set(config.kinds)) != len(config.kinds):
        raise ConfigurationError(f"kinds must be unique, got {config.kinds}")
    if config.canvas_size < 1:
        raise ConfigurationError(f"canvas_size must be >= 1, got {config.canvas_size}")
    if len(config.split_fractions) != len(SPLITS):
        raise ConfigurationError(
            f"split_fractions needs {len(SPLITS)} entries (train/val/test), got {config.split_fractions}"
        )
    _exact_fractions(config.split_fractions)
    if config.r_min + config.stroke_width / 2.0 > config.canvas_size / 2.0 + 1e-9:
        raise ConfigurationError(
            f"r_min {config.r_min} with stroke {config.stroke_width} does not fit a "
            f"{config.canvas_size}x{config.canvas_size} canvas"
        )


def derive_seed(master_seed: int, class_label: int, index: int) -> int:
    """Stable 64-bit seed for one (class, index) cell of the master stream.

    Uses a keyed hash rather than Python's salted ``hash`` so the value is
    identical across processes, machines, and interpreter versions.
    """
    payload = struct.pack(">Qqq", master_seed & 0xFFFFFFFFFFFFFFFF, class_label, index)
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")


@lru_cache(maxsize=None)
def _split_labels(per_class: int, split_fractions: tuple[float, ...]) -> tuple[str, ...]:
    fracs = _exact_fractions(split_fractions)
    counts = [int(f * per_class) for f in fracs]  # Fraction*int floors via int()
    remainder = per_class - sum(counts)
    for i in range(remainder):
        counts[i % len(counts)] += 1
    perm = np.random.default_rng(_SPLIT_STREAM_SEED).permutation(per_class)
    labels: list[str | None] = [None] * per_class
    position = 0
    for split, count in zip(SPLITS, counts):
        for k in range(position, position + count):
            labels[int(perm[k])] = split
        position += count
    return tuple(labels)  # type: ignore[arg-type]


def assign_split(base_index: int, per_class_whole: int, split_fractions: tuple[float, ...]) -> str:
    """Split for one whole-shape index; degraded variants inherit it.

    Counts are exact: floor allocation per split, remainders handed out
    train -> val -> test. Which indices land where is a fixed seeded
    permutation, so the assignment is stable across runs.
    """
    if not (0 <= base_index < per_class_whole):
        raise ValidationError(f"base_index {base_index} outside [0, {per_class_whole})")
    return _split_labels(per_class_whole, tuple(split_fractions))[base_index]


def _record_path(record_split: str, class_label: int, kind: str, proportion: float, image_id: str) -> str:
    return f"{record_split}/{class_label}/{kind}/{percent_tag(proportion)}/{image_id}.png"


_NO_DEGRADATION = DegradationSpec(geometry.NONE, 0.0)


def _whole_record(config: GenerationConfig, class_label: int, stream_index: int, split: str) -> ImageRecord:
    seed = derive_seed(config.master_seed, class_label, stream_index)
    rng = np.random.default_rng(seed)
    spec = geometry.sample_polygon(
        rng, class_label, config.canvas_size, config.r_min, config.stroke_width
    )
    image_id = f"{seed:016x}"
    return ImageRecord(
        image_id=image_id,
        class_label=class_label,
        polygon=spec,
        degradation=_NO_DEGRADATION,
        base_id=image_id,
        split=split,
        seed=seed,
        path=_record_path(split, class_label, geometry.NONE, 0.0, image_id),
    )


def _derived_record(base: ImageRecord, deg: DegradationSpec) -> ImageRecord:
    image_id = f"{base.image_id}-{deg.kind[0]}{round(deg.proportion * 100):03d}"
    return ImageRecord(
        image_id=image_id,
        class_label=base.class_label,
        polygon=base.polygon,
        degradation=deg,
        base_id=base.image_id,
        split=base.split,
        seed=base.seed,
        path=_record_path(base.split, base.class_label, deg.kind, deg.proportion, image_id),
    )


def expected_record_count(config: GenerationConfig) -> int:
    cells = len(config.degradation_grid) * len(config.kinds)
    per_index = 1 + cells if config.shared_bases else 1 + 2 * cells
    return len(config.classes) * config.per_class_whole * per_index


def plan_manifest(config: GenerationConfig) -> Manifest:
    """Lay out every record (specs, seeds, splits, paths) without rendering.

    Record order is (class, index, cell) with the degradation grid as the
    outer cell axis and kinds inner; this order is the manifest order.
    """
    validate_config(config)
    degradations = [
        DegradationSpec(kind, p) for p in config.degradation_grid for kind in config.kinds
    ]
    records: list[ImageRecord] = []
    for class_label in config.classes:
        for index in range(config.per_class_whole):
            split = assign_split(index, config.per_class_whole, config.split_fractions)
            base = _whole_record(config, class_label, index, split)
            records.append(base)
            for cell_no, deg in enumerate(degradations, start=1):
                if config.shared_bases:
                    records.append(_derived_record(base, deg))
                else:
                    stream_index = index + cell_no * config.per_class_whole
                    cell_base = _whole_record(config, class_label, stream_index, split)
                    records.append(cell_base)
                    records.append(_derived_record(cell_base, deg))
    ids = {r.image_id for r in records}
    if len(ids) != len(records):
        raise ConfigurationError("internal error: duplicate image ids in plan")
    return Manifest(config=config, records=records, version=PIPELINE_VERSION)


# --- serialization ---------------------------------------------------------


def config_to_dict(config: GenerationConfig) -> dict:
    return {
        "classes": list(config.classes),
        "per_class_whole": config.per_class_whole,
        "degradation_grid": list(config.degradation_grid),
        "kinds": list(config.kinds),
        "master_seed": config.master_seed,
        "canvas_size": config.canvas_size,
        "r_min": config.r_min,
        "stroke_width": config.stroke_width,
        "split_fractions": list(config.split_fractions),
        "output_dir": config.output_dir,
        "shared_bases": config.shared_bases,
    }


def config_from_dict(data: dict) -> GenerationConfig:
    known = {f.name for f in fields(GenerationConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
    kwargs = dict(data)
    for key in ("classes", "degradation_grid", "kinds", "split_fractions"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return GenerationConfig(**kwargs)


def load_config(path: str | Path) -> GenerationConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    return config_from_dict(data)


def record_to_dict(record: ImageRecord) -> dict:
    return {
        "image_id": record.image_id,
        "class_label": record.class_label,
        "polygon": {
            "n_sides": record.polygon.n_sides,
            "center": {"x": record.polygon.center.x, "y": record.polygon.center.y},
            "circumradius": record.polygon.circumradius,
            "rotation": record.polygon.rotation,
            "stroke_width": record.polygon.stroke_width,
        },
        "degradation": {
            "kind": record.degradation.kind,
            "proportion": record.degradation.proportion,
        },
        "base_id": record.base_id,
        "split": record.split,
        "seed": record.seed,
        "path": record.path,
    }


def record_from_dict(data: dict) -> ImageRecord:
    poly = data["polygon"]
    return ImageRecord(
        image_id=data["image_id"],
        class_label=data["class_label"],
        polygon=PolygonSpec(
            n_sides=poly["n_sides"],
            center=Point(poly["center"]["x"], poly["center"]["y"]),
            circumradius=poly["circumradius"],
            rotation=poly["rotation"],
            stroke_width=poly["stroke_width"],
        ),
        degradation=DegradationSpec(data["degradation"]["kind"], data["degradation"]["proportion"]),
        base_id=data["base_id"],
        split=data["split"],
        seed=data["seed"],
        path=data["path"],
    )


def _header_text(manifest: Manifest) -> str:
    header = {
        "version": manifest.version,
        "config": config_to_dict(manifest.config) if manifest.config else None,
        "record_count": len(manifest.records),
    }
    return json.dumps(header, indent=2) + "\n"


def _manifest_lines(manifest: Manifest):
    for record in manifest.records:
        yield json.dumps(record_to_dict(record), separators=(",", ":")) + "\n"


def load_manifest(path: str | Path) -> Manifest:
    """Load a manifest from a dataset directory or a bare .jsonl file."""
    path = Path(path)
    if path.is_dir():
        jsonl = path / MANIFEST_NAME
        header_path = path / HEADER_NAME
    else:
        jsonl = path
        header_path = path.parent / HEADER_NAME
    config = None
    version = PIPELINE_VERSION
    if header_path.is_file():
        header = json.loads(header_path.read_text(encoding="utf-8"))
        version = header.get("version", PIPELINE_VERSION)
        if header.get("config"):
            config = config_from_dict(header["config"])
    records = []
    with open(jsonl, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_dict(json.loads(line)))
    return Manifest(config=config, records=records, version=version)


# --- rendering -------------------------------------------------------------

_JOB_CONFIG: GenerationConfig | None = None


def _init_job_config(config: GenerationConfig) -> None:
    global _JOB_CONFIG
    _JOB_CONFIG = config


def _jobs_by_base(manifest: Manifest) -> list[tuple[ImageRecord, tuple[ImageRecord, ...]]]:
    groups: dict[str, list[ImageRecord]] = {}
    bases: list[ImageRecord] = []
    for record in manifest.records:
        if record.image_id == record.base_id:
            bases.append(record)
            groups[record.image_id] = []
        else:
            groups[record.base_id].append(record)
    return [(base, tuple(groups[base.image_id])) for base in bases]


def render_record_images(
    base: ImageRecord, variants: tuple[ImageRecord, ...], canvas_size: int
) -> list[tuple[ImageRecord, raster.Canvas]]:
    """Render a base polygon and stamp all of its degraded variants."""
    whole = raster.render_polygon(base.polygon, canvas_size)
    out = [(base, whole)]
    for record in variants:
        disks = geometry.erasure_disks(record.polygon, record.degradation)
        out.append((record, raster.stamp_disks(whole, disks)))
    return out


def _render_job(job: tuple[ImageRecord, tuple[ImageRecord, ...]]) -> None:
    config = _JOB_CONFIG
    assert config is not None, "worker config not initialised"
    root = Path(config.output_dir)
    base, variants = job
    for record, canvas in render_record_images(base, variants, config.canvas_size):
        (root / record.path).write_bytes(raster.encode_png(canvas))


def generate_dataset(config: GenerationConfig, workers: int | None = None) -> Manifest:
    """Generate all images plus the manifest under ``config.output_dir``.

    Output bytes depend only on the config, never on ``workers``. On
    failure an ``INCOMPLETE.json`` marker is left next to the partial
    output; the manifest itself is written last and atomically.
    """
    manifest = plan_manifest(config)
    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    manifest_path = root / MANIFEST_NAME
    if manifest_path.exists():
        manifest_path.unlink()  # a stale manifest must not suggest completeness
    marker = root / INCOMPLETE_MARKER
    marker.write_text(json.dumps({"status": "generating"}) + "\n", encoding="utf-8")
    try:
        (root / HEADER_NAME).write_text(_header_text(manifest), encoding="utf-8")
        for parent in sorted({(root / r.path).parent for r in manifest.records}):
            parent.mkdir(parents=True, exist_ok=True)
        jobs = _jobs_by_base(manifest)
        if workers is not None and workers > 1:
            chunksize = max(1, len(jobs) // (workers * 8))
            with ProcessPoolExecutor(
                max_workers=workers, initializer=_init_job_config, initargs=(config,)
            ) as pool:
                for _ in pool.map(_render_job, jobs, chunksize=chunksize):
                    pass
        else:
            _init_job_config(config)
            for job in jobs:
                _render_job(job)
        tmp_path = root / (MANIFEST_NAME + ".tmp")
        with open(tmp_path, "w", encoding="utf-8") as fh:
            fh.writelines(_manifest_lines(manifest))
        os.replace(tmp_path, manifest_path)
    except Exception as exc:
        marker.write_text(
            json.dumps({"status": "failed", "error": f"{type(exc).__name__}: {exc}"}) + "\n",
            encoding="utf-8",
        )
        raise
    marker.unlink()
    return manifest


# --- verification ----------------------------------------------------------


@dataclass
class VerificationReport:
    n_records: int
    n_measured: int
    max_abs_deviation: float
    mean_abs_deviation: float
    mean_signed_error: float
    tolerance: float
    flagged: list[dict]
    missing: list[str]

    @property
    def ok(self) -> bool:
        return not self.flagged and not self.missing

    def summary(self) -> str:
        lines = [
            f"records: {self.n_records}  measured: {self.n_measured}",
            f"max |deviation|: {self.max_abs_deviation:.4f}",
            f"mean |deviation|: {self.mean_abs_deviation:.4f}",
            f"mean signed error: {self.mean_signed_error:+.4f}",
            f"tolerance: {self.tolerance}",
            f"flagged: {len(self.flagged)}  missing: {len(self.missing)}",
        ]
        for item in self.flagged[:20]:
            lines.append(f"  FLAG {item['image_id']}: {item['reason']}")
        if len(self.flagged) > 20:
            lines.append(f"  ... and {len(self.flagged) - 20} more")
        for image_id in self.missing[:20]:
            lines.append(f"  MISSING {image_id}")
        if len(self.missing) > 20:
            lines.append(f"  ... and {len(self.missing) - 20} more")
        return "\n".join(lines)


def _load_canvas(root: Path, record: ImageRecord) -> raster.Canvas:
    return raster.decode_png((root / record.path).read_bytes())


def verify_dataset(
    manifest: Manifest, root: str | Path | None = None, tolerance: float = 0.04
) -> VerificationReport:
    """Recompute the erased-ink proportion of every derived image.

    Each derived record is measured against its base image on disk and
    compared with its declared proportion; deviations beyond ``tolerance``
    are flagged, as are unreadable or blank files.
    """
    if root is None:
        if manifest.config is None:
            raise ConfigurationError("verify_dataset needs a root when the manifest has no config")
        root = manifest.config.output_dir
    root = Path(root)
    flagged: list[dict] = []
    missing: list[str] = []
    deviations: list[float] = []
    for base, variants in _jobs_by_base(manifest):
        base_canvas = None
        try:
            base_canvas = _load_canvas(root, base)
        except FileNotFoundError:
            missing.append(base.image_id)
        except (ValueError, OSError) as exc:
            flagged.append({"image_id": base.image_id, "reason": f"unreadable base: {exc}"})
        if base_canvas is not None and raster.black_pixel_count(base_canvas) == 0:
            flagged.append({"image_id": base.image_id, "reason": "base image has no ink"})
            base_canvas = None
        for record in variants:
            try:
                canvas = _load_canvas(root, record)
            except FileNotFoundError:
                missing.append(record.image_id)
                continue
            except (ValueError, OSError) as exc:
                flagged.append({"image_id": record.image_id, "reason": f"unreadable file: {exc}"})
                continue
            if base_canvas is None:
                flagged.append(
                    {"image_id": record.image_id, "reason": "base image unavailable, cannot measure"}
                )
                continue
            measured = raster.measure_degradation(base_canvas, canvas)
            deviation = measured - record.degradation.proportion
            deviations.append(deviation)
            if abs(deviation) > tolerance:
                flagged.append(
                    {
                        "image_id": record.image_id,
                        "reason": (
                            f"measured {measured:.4f} vs declared "
                            f"{record.degradation.proportion:.4f} (|dev| > {tolerance})"
                        ),
                        "deviation": deviation,
                    }
                )
    if deviations:
        arr = np.asarray(deviations)
        max_abs = float(np.max(np.abs(arr)))
        mean_abs = float(np.mean(np.abs(arr)))
        mean_signed = float(np.mean(arr))
    else:
        max_abs = mean_abs = mean_signed = 0.0
    return VerificationReport(
        n_records=len(manifest.records),
        n_measured=len(deviations),
        max_abs_deviation=max_abs,
        mean_abs_deviation=mean_abs,
        mean_signed_error=mean_signed,
        tolerance=tolerance,
        flagged=flagged,
        missing=missing,
    )
