"""Command-line entry point.

Exit codes: 0 success, 1 validation/configuration failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import datagen, evalmetrics, geometry, raster, trialservice
from .errors import (
    ConfigurationError,
    DecodeError,
    MeasurementError,
    PredictionsError,
    ValidationError,
)

_USAGE_EXIT = 1
_IO_EXIT = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; we reserve 2 for I/O
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="polydegrade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a dataset from a config file and/or flags")
    gen.add_argument("--config", help="JSON config file; missing fields use defaults")
    gen.add_argument("--seed", type=int, help="override master_seed")
    gen.add_argument("--out", help="override output_dir")
    gen.add_argument("--workers", type=int, default=None, help="parallel worker processes")

    degrade = sub.add_parser("degrade", help="degrade one whole-image PNG given its polygon spec")
    degrade.add_argument("--image", required=True, help="whole-shape PNG")
    degrade.add_argument("--record", required=True, help="JSON polygon spec or manifest record")
    degrade.add_argument("--kind", required=True, choices=[geometry.CORNER, geometry.EDGE, geometry.NONE])
    degrade.add_argument("--proportion", required=True, type=float)
    degrade.add_argument("--out", required=True, help="output PNG path")

    verify = sub.add_parser("verify", help="recheck degradation proportions of a generated dataset")
    verify.add_argument("--manifest", required=True, help="dataset directory or manifest.jsonl")
    verify.add_argument("--root", help="image root (default: manifest directory)")
    verify.add_argument("--tolerance", type=float, default=0.04)

    evalp = sub.add_parser("eval", help="score a predictions CSV against a manifest")
    evalp.add_argument("--predictions", required=True)
    evalp.add_argument("--manifest", required=True)
    evalp.add_argument("--out", help="directory for CSV/SVG exports")
    evalp.add_argument("--topk", type=int, default=None, help="also print top-k accuracy")
    evalp.add_argument("--baseline", help="external accuracy curve CSV (p_d,kind,accuracy) to plot alongside")

    serve = sub.add_parser("serve", help="serve stimuli and record timed human responses")
    serve.add_argument("--dataset", required=True, help="generated dataset directory")
    serve.add_argument("--port", type=int, default=None, help="default: $POLYDEGRADE_PORT or 8000")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--responses", help="append-only response log (default: <dataset>/responses.jsonl)")
    serve.add_argument("--exposures", default="100,200,750", help="allowed exposures in ms")
    serve.add_argument("--ui", help="directory of trial UI static files to serve at /")

    export = sub.add_parser("export-human", help="dump logged responses as a predictions CSV")
    export.add_argument("--responses", required=True, help="response log JSONL")
    export.add_argument("--session", action="append", default=None, help="restrict to session id (repeatable)")
    export.add_argument("--out", required=True, help="output CSV path")
    return parser


def _cmd_gen(args) -> int:
    config = datagen.load_config(args.config) if args.config else datagen.GenerationConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if overrides:
        config = dataclasses.replace(config, **overrides)
    manifest = datagen.generate_dataset(config, workers=args.workers)
    print(f"wrote {len(manifest.records)} records to {config.output_dir}")
    return 0


def _cmd_degrade(args) -> int:
    with open(args.record, encoding="utf-8") as fh:
        data = json.load(fh)
    poly = data["polygon"] if "polygon" in data else data
    spec = geometry.PolygonSpec(
        n_sides=poly["n_sides"],
        center=geometry.Point(poly["center"]["x"], poly["center"]["y"]),
        circumradius=poly["circumradius"],
        rotation=poly["rotation"],
        stroke_width=poly.get("stroke_width", 2.0),
    )
    deg = geometry.DegradationSpec(args.kind, args.proportion)
    canvas = raster.decode_png(Path(args.image).read_bytes())
    stamped = raster.stamp_disks(canvas, geometry.erasure_disks(spec, deg))
    Path(args.out).write_bytes(raster.encode_png(stamped))
    print(f"wrote {args.out} ({args.kind}, proportion {args.proportion})")
    return 0


def _cmd_verify(args) -> int:
    manifest = datagen.load_manifest(args.manifest)
    root = args.root
    if root is None:
        path = Path(args.manifest)
        root = path if path.is_dir() else path.parent
    report = datagen.verify_dataset(manifest, root=root, tolerance=args.tolerance)
    print(report.summary())
    return 0 if report.ok else 1


def _cmd_eval(args) -> int:
    manifest = datagen.load_manifest(args.manifest)
    preds = evalmetrics.load_predictions(args.predictions, manifest)
    report = evalmetrics.accuracy_by_cell(preds, manifest)
    print(evalmetrics.report_table(report))
    if args.topk is not None:
        print(f"top-{args.topk}: {evalmetrics.format_percent(evalmetrics.topk_accuracy(preds, manifest, args.topk))}")
    if args.out:
        baseline = evalmetrics.load_baseline(args.baseline) if args.baseline else None
        paths = evalmetrics.export_report(report, args.out, baseline=baseline)
        for name, path in sorted(paths.items()):
            print(f"wrote {name}: {path}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    dataset = Path(args.dataset)
    manifest = datagen.load_manifest(dataset)
    responses = args.responses or str(dataset / "responses.jsonl")
    exposures = tuple(int(x) for x in args.exposures.split(",") if x.strip())
    store = trialservice.TrialStore(manifest, dataset, responses, exposures)
    app = trialservice.create_app(store, ui_dir=args.ui)
    port = args.port if args.port is not None else int(os.environ.get("POLYDEGRADE_PORT", "8000"))
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def _cmd_export_human(args) -> int:
    csv_text = trialservice.export_responses_csv(args.responses, args.session)
    Path(args.out).write_text(csv_text, encoding="utf-8")
    rows = max(csv_text.count("\n") - 1, 0)
    print(f"wrote {rows} rows to {args.out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "degrade": _cmd_degrade,
    "verify": _cmd_verify,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
    "export-human": _cmd_export_human,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, ConfigurationError, PredictionsError, MeasurementError, DecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return _IO_EXIT


if __name__ == "__main__":
    sys.exit(main())
