"""Timed human-trial service: sessions, stimulus serving, response log.

Sessions hold a seeded, cell-balanced stimulus order. Responses go to an
append-only JSONL log that is replayed on startup, so a restart never
loses data. The service is strictly read-only towards the dataset and
never puts a pending stimulus's true label in any payload.

Note: this module must not use ``from __future__ import annotations``;
FastAPI cannot resolve stringified annotations of request models defined
inside the app factory.
"""

import csv
import io
import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .datagen import ImageRecord, Manifest
from .errors import ValidationError

DEFAULT_EXPOSURES_MS = (100, 200, 750)

_FILTER_KEYS = {"classes", "proportions", "kinds", "splits", "length"}


class NotFoundError(KeyError):
    """Unknown session or image id."""


class ConflictError(RuntimeError):
    """Response is a duplicate or does not match the pending stimulus."""


@dataclass
class Session:
    session_id: str
    exposure_ms: int
    order: list[str]
    seed: int
    created_at: float
    cursor: int = 0
    served_at: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class TrialResponse:
    session_id: str
    image_id: str
    chosen_label: int
    response_ms: float
    served_at: float
    flash_ms: float | None = None


def _select_records(manifest: Manifest, cell_filter: dict | None) -> list[ImageRecord]:
    cell_filter = cell_filter or {}
    unknown = set(cell_filter) - _FILTER_KEYS
    if unknown:
        raise ValidationError(f"unknown filter keys: {sorted(unknown)}")
    classes = cell_filter.get("classes")
    proportions = cell_filter.get("proportions")
    kinds = cell_filter.get("kinds")
    splits = cell_filter.get("splits")
    selected = []
    for record in manifest.records:
        if classes is not None and record.class_label not in classes:
            continue
        if proportions is not None and record.degradation.proportion not in proportions:
            continue
        if kinds is not None and record.degradation.kind not in kinds:
            continue
        if splits is not None and record.split not in splits:
            continue
        selected.append(record)
    return selected


def balanced_order(records: list[ImageRecord], seed: int, length: int | None = None) -> list[str]:
    """Seeded stimulus order, round-robin across cells.

    Each (class, proportion, kind) cell is shuffled with the session seed
    and cells are interleaved in sorted cell order, so any truncation
    keeps the cells as evenly represented as possible.
    """
    import random

    cells: dict[tuple, list[str]] = {}
    for record in records:
        key = (record.class_label, record.degradation.proportion, record.degradation.kind)
        cells.setdefault(key, []).append(record.image_id)
    rng = random.Random(seed)
    per_cell = []
    for key in sorted(cells):
        ids = sorted(cells[key])
        rng.shuffle(ids)
        per_cell.append(ids)
    order: list[str] = []
    depth = max(len(ids) for ids in per_cell)
    for k in range(depth):
        for ids in per_cell:
            if k < len(ids):
                order.append(ids[k])
    if length is not None:
        if length < 1:
            raise ValidationError(f"session length must be >= 1, got {length}")
        order = order[:length]
    return order


class TrialStore:
    """Session registry plus durable response log for one dataset."""

    def __init__(
        self,
        manifest: Manifest,
        dataset_root: str | Path,
        log_path: str | Path,
        exposures_ms: tuple[int, ...] = DEFAULT_EXPOSURES_MS,
    ):
        self.manifest = manifest
        self.dataset_root = Path(dataset_root)
        self.log_path = Path(log_path)
        self.exposures_ms = tuple(exposures_ms)
        self.choices = list(manifest.class_set())
        self.sessions: dict[str, Session] = {}
        self.answered: dict[str, set[str]] = {}
        self.responses: list[TrialResponse] = []
        self._lock = threading.Lock()
        if self.log_path.exists():
            self._replay()
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        self._log_fh = open(self.log_path, "a", encoding="utf-8")

    # -- durability ---------------------------------------------------------

    def _replay(self) -> None:
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                if entry["type"] == "session":
                    session = Session(
                        session_id=entry["session_id"],
                        exposure_ms=entry["exposure_ms"],
                        order=list(entry["order"]),
                        seed=entry["seed"],
                        created_at=entry["created_at"],
                    )
                    self.sessions[session.session_id] = session
                    self.answered[session.session_id] = set()
                elif entry["type"] == "response":
                    response = TrialResponse(
                        session_id=entry["session_id"],
                        image_id=entry["image_id"],
                        chosen_label=entry["chosen_label"],
                        response_ms=entry["response_ms"],
                        served_at=entry["served_at"],
                        flash_ms=entry.get("flash_ms"),
                    )
                    self.responses.append(response)
                    session = self.sessions[response.session_id]
                    self.answered[response.session_id].add(response.image_id)
                    session.cursor += 1

    def _append_log(self, entry: dict) -> None:
        self._log_fh.write(json.dumps(entry, separators=(",", ":")) + "\n")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())

    def close(self) -> None:
        self._log_fh.close()

    # -- protocol -----------------------------------------------------------

    def create_session(
        self,
        exposure_ms: int,
        cell_filter: dict | None = None,
        seed: int = 0,
        length: int | None = None,
    ) -> Session:
        if exposure_ms not in self.exposures_ms:
            raise ValidationError(
                f"exposure_ms must be one of {self.exposures_ms}, got {exposure_ms}"
            )
        if cell_filter and "length" in cell_filter:
            cell_filter = dict(cell_filter)
            filter_length = cell_filter.pop("length")
            if length is None:
                length = filter_length
        records = _select_records(self.manifest, cell_filter)
        if not records:
            raise ValidationError("cell filter selects no stimuli")
        order = balanced_order(records, seed, length)
        with self._lock:
            session = Session(
                session_id=secrets.token_hex(8),
                exposure_ms=exposure_ms,
                order=order,
                seed=seed,
                created_at=time.time(),
            )
            self.sessions[session.session_id] = session
            self.answered[session.session_id] = set()
            self._append_log(
                {
                    "type": "session",
                    "session_id": session.session_id,
                    "exposure_ms": session.exposure_ms,
                    "order": session.order,
                    "seed": session.seed,
                    "created_at": session.created_at,
                    "filter": cell_filter or {},
                }
            )
        return session

    def _get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        return session

    def next_stimulus(self, session_id: str) -> dict:
        """Descriptor of the pending stimulus; re-fetch is idempotent."""
        with self._lock:
            session = self._get_session(session_id)
            if session.cursor >= len(session.order):
                return {"done": True, "total": len(session.order), "answered": session.cursor}
            image_id = session.order[session.cursor]
            session.served_at.setdefault(session.cursor, time.time())
            return {
                "done": False,
                "image_id": image_id,
                "image_url": f"/images/{image_id}",
                "exposure_ms": session.exposure_ms,
                "choices": self.choices,
                "index": session.cursor,
                "total": len(session.order),
            }

    def record_response(
        self,
        session_id: str,
        image_id: str,
        chosen_label: int,
        response_ms: float,
        flash_ms: float | None = None,
    ) -> dict:
        with self._lock:
            session = self._get_session(session_id)
            if image_id in self.answered[session_id]:
                raise ConflictError(f"duplicate response for {image_id} in session {session_id}")
            if session.cursor >= len(session.order):
                raise ConflictError(f"session {session_id} is already complete")
            current = session.order[session.cursor]
            if image_id != current:
                raise ConflictError(
                    f"response for {image_id} but the pending stimulus is {current}"
                )
            if chosen_label not in self.choices:
                raise ValidationError(
                    f"chosen_label {chosen_label} not in class set {self.choices}"
                )
            response = TrialResponse(
                session_id=session_id,
                image_id=image_id,
                chosen_label=chosen_label,
                response_ms=float(response_ms),
                served_at=session.served_at.get(session.cursor, time.time()),
                flash_ms=None if flash_ms is None else float(flash_ms),
            )
            self._append_log(
                {
                    "type": "response",
                    "session_id": response.session_id,
                    "image_id": response.image_id,
                    "chosen_label": response.chosen_label,
                    "response_ms": response.response_ms,
                    "served_at": response.served_at,
                    "flash_ms": response.flash_ms,
                }
            )
            self.responses.append(response)
            self.answered[session_id].add(image_id)
            session.cursor += 1
            return {
                "ok": True,
                "index": session.cursor,
                "total": len(session.order),
                "done": session.cursor >= len(session.order),
            }

    def image_path(self, image_id: str) -> Path:
        record = self.manifest.by_id().get(image_id)
        if record is None:
            raise NotFoundError(f"unknown image {image_id!r}")
        return self.dataset_root / record.path

    def export_predictions(self, session_ids: list[str] | None = None) -> str:
        return responses_to_csv(self.responses, session_ids)


def responses_to_csv(responses: list[TrialResponse], session_ids: list[str] | None = None) -> str:
    """Render responses in the standard predictions CSV schema."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["image_id", "predicted", "rank2", "rank3", "rank4", "rank5", "rank6", "response_ms", "source"]
    )
    wanted = set(session_ids) if session_ids is not None else None
    for response in responses:
        if wanted is not None and response.session_id not in wanted:
            continue
        writer.writerow(
            [
                response.image_id,
                response.chosen_label,
                "",
                "",
                "",
                "",
                "",
                repr(response.response_ms),
                f"human:{response.session_id}",
            ]
        )
    return out.getvalue()


def export_responses_csv(log_path: str | Path, session_ids: list[str] | None = None) -> str:
    """Export straight from a response log, without a dataset on hand."""
    responses = []
    with open(log_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            if entry["type"] == "response":
                responses.append(
                    TrialResponse(
                        session_id=entry["session_id"],
                        image_id=entry["image_id"],
                        chosen_label=entry["chosen_label"],
                        response_ms=entry["response_ms"],
                        served_at=entry["served_at"],
                        flash_ms=entry.get("flash_ms"),
                    )
                )
    return responses_to_csv(responses, session_ids)


def create_app(store: TrialStore, ui_dir: str | Path | None = None):
    """FastAPI app exposing the trial protocol over JSON."""
    from fastapi import FastAPI, HTTPException, Query, Response
    from fastapi.middleware.cors import CORSMiddleware
    from pydantic import BaseModel

    class CreateSessionBody(BaseModel):
        exposure_ms: int
        filter: dict | None = None
        seed: int = 0

    class ResponseBody(BaseModel):
        session_id: str | None = None
        image_id: str
        chosen_label: int
        response_ms: float
        flash_ms: float | None = None

    app = FastAPI(title="polydegrade trial service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/health")
    def health():
        return {"status": "ok", "records": len(store.manifest.records)}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        try:
            session = store.create_session(body.exposure_ms, body.filter, body.seed)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {
            "session_id": session.session_id,
            "exposure_ms": session.exposure_ms,
            "total": len(session.order),
            "choices": store.choices,
            "created_at": session.created_at,
        }

    @app.get("/sessions/{session_id}/next")
    def next_stimulus(session_id: str):
        try:
            return store.next_stimulus(session_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/sessions/{session_id}/responses")
    def record_response(session_id: str, body: ResponseBody):
        if body.session_id is not None and body.session_id != session_id:
            raise HTTPException(status_code=400, detail="session_id mismatch")
        try:
            return store.record_response(
                session_id, body.image_id, body.chosen_label, body.response_ms, body.flash_ms
            )
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/images/{image_id}")
    def image(image_id: str):
        try:
            path = store.image_path(image_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail=f"image file missing for {image_id}")
        return Response(content=data, media_type="image/png")

    @app.get("/export")
    def export(session: list[str] | None = Query(default=None)):
        csv_text = store.export_predictions(session)
        return Response(content=csv_text, media_type="text/csv")

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
