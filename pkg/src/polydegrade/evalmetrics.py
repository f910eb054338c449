"""Scoring of prediction files against a dataset manifest.

Predictions from a model run and from a human trial session share one CSV
schema and flow through identical code paths. Accuracies are accumulated
as exact integer tallies and only turned into percentages at the edges.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import geometry, svgplot
from .datagen import Manifest
from .errors import PredictionsError

PREDICTIONS_HEADER = [
    "image_id",
    "predicted",
    "rank2",
    "rank3",
    "rank4",
    "rank5",
    "rank6",
    "response_ms",
    "source",
]

_RANK_COLUMNS = ["rank2", "rank3", "rank4", "rank5", "rank6"]


@dataclass(frozen=True)
class PredictionRow:
    image_id: str
    predicted: int
    ranked: tuple[int, ...]  # rank 1..k, rank 1 == predicted
    response_ms: float | None
    source: str


@dataclass
class PredictionSet:
    source: str
    rows: list[PredictionRow]


@dataclass(frozen=True, order=True)
class CellKey:
    class_label: int
    proportion: float
    kind: str


@dataclass(frozen=True)
class CellTally:
    correct: int
    total: int

    @property
    def accuracy(self) -> Fraction:
        return Fraction(100 * self.correct, self.total)


@dataclass
class MetricsReport:
    """Per-cell tallies plus the curves derived from them.

    Cells with no predictions are simply absent. Curves are recomputed
    from the grid on demand, so they can never drift out of sync.
    """

    cells: dict[CellKey, CellTally]
    source: str = ""

    def kinds(self) -> list[str]:
        return sorted({key.kind for key in self.cells})

    def marginal_curve(self, kind: str) -> dict[float, Fraction]:
        """Unweighted mean accuracy over classes, per proportion."""
        by_p: dict[float, list[Fraction]] = {}
        for key, tally in self.cells.items():
            if key.kind == kind:
                by_p.setdefault(key.proportion, []).append(tally.accuracy)
        return {
            p: sum(vals, Fraction(0)) / len(vals) for p, vals in sorted(by_p.items())
        }


def _parse_label(text: str, class_set: set[int], line_no: int, column: str, problems: list[str]):
    try:
        label = int(text)
    except ValueError:
        problems.append(f"line {line_no}: {column} {text!r} is not an integer label")
        return None
    if label not in class_set:
        problems.append(f"line {line_no}: {column} {label} not in manifest classes {sorted(class_set)}")
        return None
    return label


def load_predictions(path: str | Path, manifest: Manifest) -> PredictionSet:
    """Load and validate a predictions CSV against the manifest.

    Every image_id must resolve and every label must belong to the
    manifest's class set; violations are collected and reported with
    their line numbers in one error.
    """
    path = Path(path)
    index = manifest.by_id()
    class_set = set(manifest.class_set())
    problems: list[str] = []
    lines: list[int] = []
    rows: list[PredictionRow] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PredictionsError(f"{path}: empty file, expected header {PREDICTIONS_HEADER}")
        if header != PREDICTIONS_HEADER:
            raise PredictionsError(
                f"{path}: header mismatch\n  expected: {PREDICTIONS_HEADER}\n  got:      {header}"
            )
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            row_problems: list[str] = []
            if len(raw) != len(PREDICTIONS_HEADER):
                problems.append(f"line {line_no}: expected {len(PREDICTIONS_HEADER)} fields, got {len(raw)}")
                lines.append(line_no)
                continue
            cells = dict(zip(PREDICTIONS_HEADER, raw))
            image_id = cells["image_id"]
            if image_id not in index:
                row_problems.append(f"line {line_no}: unknown image_id {image_id!r}")
            predicted = _parse_label(cells["predicted"], class_set, line_no, "predicted", row_problems)
            ranked: list[int] = [predicted] if predicted is not None else []
            gap = False
            for column in _RANK_COLUMNS:
                text = cells[column].strip()
                if not text:
                    gap = True
                    continue
                if gap:
                    row_problems.append(f"line {line_no}: rank columns must be contiguous ({column} after a blank)")
                    break
                label = _parse_label(text, class_set, line_no, column, row_problems)
                if label is not None:
                    ranked.append(label)
            response_ms = None
            if cells["response_ms"].strip():
                try:
                    response_ms = float(cells["response_ms"])
                except ValueError:
                    row_problems.append(f"line {line_no}: response_ms {cells['response_ms']!r} is not a number")
            if row_problems:
                problems.extend(row_problems)
                lines.append(line_no)
                continue
            rows.append(
                PredictionRow(
                    image_id=image_id,
                    predicted=predicted,  # type: ignore[arg-type]
                    ranked=tuple(ranked),
                    response_ms=response_ms,
                    source=cells["source"],
                )
            )
    if problems:
        shown = "\n".join(problems[:25])
        more = f"\n... and {len(problems) - 25} more" if len(problems) > 25 else ""
        raise PredictionsError(f"{path}: {len(problems)} invalid rows\n{shown}{more}", lines)
    sources = {row.source for row in rows if row.source}
    if len(sources) == 1:
        source = sources.pop()
    elif sources:
        source = "mixed"
    else:
        source = path.stem
    return PredictionSet(source=source, rows=rows)


def accuracy_by_cell(preds: PredictionSet, manifest: Manifest) -> MetricsReport:
    """Tally correct/total per (class, proportion, kind) cell."""
    index = manifest.by_id()
    correct: dict[CellKey, int] = {}
    total: dict[CellKey, int] = {}
    for row in preds.rows:
        record = index.get(row.image_id)
        if record is None:
            raise PredictionsError(f"image_id {row.image_id!r} not in manifest")
        key = CellKey(record.class_label, record.degradation.proportion, record.degradation.kind)
        total[key] = total.get(key, 0) + 1
        if row.predicted == record.class_label:
            correct[key] = correct.get(key, 0) + 1
    cells = {key: CellTally(correct.get(key, 0), n) for key, n in total.items()}
    return MetricsReport(cells=cells, source=preds.source)


def topk_accuracy(preds: PredictionSet, manifest: Manifest, k: int) -> float:
    """Percent of rows whose true label appears in the first k ranks."""
    if k < 1:
        raise PredictionsError(f"k must be >= 1, got {k}")
    if not preds.rows:
        raise PredictionsError("cannot compute top-k accuracy of an empty prediction set")
    index = manifest.by_id()
    short = [row.image_id for row in preds.rows if len(row.ranked) < k]
    if short:
        raise PredictionsError(
            f"{len(short)} rows carry fewer than {k} ranked labels (first: {short[0]!r})"
        )
    hits = sum(
        1 for row in preds.rows if index[row.image_id].class_label in row.ranked[:k]
    )
    return float(Fraction(100 * hits, len(preds.rows)))


def differential_curve(report: MetricsReport) -> dict[float, Fraction]:
    """Edge-minus-corner mean accuracy at each proportion.

    Proportions missing either kind are omitted with a warning rather
    than fabricated.
    """
    edge = report.marginal_curve(geometry.EDGE)
    corner = report.marginal_curve(geometry.CORNER)
    curve: dict[float, Fraction] = {}
    for p in sorted(set(edge) | set(corner)):
        if p not in edge or p not in corner:
            have = "edge" if p in edge else "corner"
            warnings.warn(
                f"differential curve: only {have} cells present at proportion {p}; point omitted",
                stacklevel=2,
            )
            continue
        curve[p] = edge[p] - corner[p]
    return curve


BASELINE_HEADER = ["p_d", "kind", "accuracy"]


def load_baseline(path: str | Path) -> dict[str, dict[float, float]]:
    """Load an external accuracy-vs-proportion baseline for comparison plots.

    CSV schema: header ``p_d,kind,accuracy`` with proportions in [0, 1)
    and accuracies in percent.
    """
    path = Path(path)
    curves: dict[str, dict[float, float]] = {}
    problems: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PredictionsError(f"{path}: empty baseline file, expected header {BASELINE_HEADER}")
        if header != BASELINE_HEADER:
            raise PredictionsError(
                f"{path}: baseline header mismatch\n  expected: {BASELINE_HEADER}\n  got:      {header}"
            )
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            try:
                proportion = float(raw[0])
                kind = raw[1]
                accuracy = float(raw[2])
            except (ValueError, IndexError):
                problems.append(f"line {line_no}: cannot parse {raw!r}")
                continue
            if not 0.0 <= proportion < 1.0:
                problems.append(f"line {line_no}: proportion {proportion} outside [0, 1)")
                continue
            if not 0.0 <= accuracy <= 100.0:
                problems.append(f"line {line_no}: accuracy {accuracy} outside [0, 100]")
                continue
            curves.setdefault(kind, {})[proportion] = accuracy
    if problems:
        raise PredictionsError(f"{path}: invalid baseline rows\n" + "\n".join(problems))
    return curves


def format_percent(value: Fraction | float) -> str:
    """Display formatting used in printed tables: one decimal place."""
    return f"{float(value):.1f}"


def report_table(report: MetricsReport) -> str:
    lines = [f"source: {report.source}", "class  p_d    kind    accuracy      n"]
    for key in sorted(report.cells):
        tally = report.cells[key]
        lines.append(
            f"{key.class_label:<6d} {key.proportion:<6g} {key.kind:<7s} "
            f"{format_percent(tally.accuracy):>8s} {tally.total:>6d}"
        )
    return "\n".join(lines)


def export_report(
    report: MetricsReport,
    out_dir: str | Path,
    baseline: dict[str, dict[float, float]] | None = None,
) -> dict[str, Path]:
    """Write per-cell and curve CSVs plus deterministic SVG charts.

    CSV accuracies carry full float precision so a re-ingest reproduces
    the grid exactly; one-decimal rounding is applied only in printed
    tables. An optional external ``baseline`` (see :func:`load_baseline`)
    is drawn alongside the measured accuracy curves.
    """
    if not report.cells:
        raise PredictionsError("cannot export an empty report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    cells_path = out_dir / "cells.csv"
    with open(cells_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class", "p_d", "kind", "accuracy", "count"])
        for key in sorted(report.cells):
            tally = report.cells[key]
            writer.writerow(
                [key.class_label, repr(key.proportion), key.kind, repr(float(tally.accuracy)), tally.total]
            )
    paths["cells"] = cells_path

    curves = {kind: report.marginal_curve(kind) for kind in report.kinds()}
    diff = differential_curve(report) if geometry.EDGE in curves and geometry.CORNER in curves else {}
    curves_path = out_dir / "curves.csv"
    with open(curves_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "p_d", "accuracy"])
        for kind in sorted(curves):
            for p, acc in curves[kind].items():
                writer.writerow([kind, repr(p), repr(float(acc))])
        for p, value in diff.items():
            writer.writerow(["differential", repr(p), repr(float(value))])
    paths["curves"] = curves_path

    accuracy_series = [
        (kind, [(p, float(acc)) for p, acc in curves[kind].items()]) for kind in sorted(curves)
    ]
    if baseline:
        accuracy_series += [
            (f"{kind} (baseline)", sorted(points.items())) for kind, points in sorted(baseline.items())
        ]
    accuracy_svg = out_dir / "accuracy_vs_degradation.svg"
    accuracy_svg.write_text(
        svgplot.line_chart(
            accuracy_series,
            title=f"Accuracy vs degradation ({report.source})" if report.source else "Accuracy vs degradation",
            x_label="degradation proportion",
            y_label="accuracy (%)",
            y_range=(0.0, 100.0),
        ),
        encoding="utf-8",
    )
    paths["accuracy_svg"] = accuracy_svg

    if diff:
        diff_svg = out_dir / "differential.svg"
        diff_svg.write_text(
            svgplot.line_chart(
                [("edge - corner", [(p, float(v)) for p, v in diff.items()])],
                title="Edge minus corner accuracy",
                x_label="degradation proportion",
                y_label="accuracy difference (%)",
            ),
            encoding="utf-8",
        )
        paths["differential_svg"] = diff_svg
    return paths
