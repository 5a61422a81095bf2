"""HTTP service: datasets, sessions, suggestions, and analytics.

Sessions are mutated only through client event batches; each event
carries a client-assigned sequence number, so retries are idempotent
(already-applied sequence numbers are skipped). With persistence on,
every applied event is appended to a session log file and sessions are
rebuilt by replay on startup, so the HTTP-visible state always equals
the replay of the log.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .analytics import throughput_metrics
from .data import Dataset, load_dataset
from .errors import ForageError, ProtocolError
from .policies import PolicySpec
from .session import InteractionEvent, Session
from .text import HashedVectors, load_embedding_table

NDJSON = "application/x-ndjson"


@dataclass
class ServiceConfig:
    data_dir: Path | None = None
    persist: bool = False
    default_policy: PolicySpec = field(default_factory=lambda: PolicySpec("one_step"))
    default_batch_size: int = 10
    embed_dim: int = 32
    embedding_table: Path | None = None

    def __post_init__(self):
        if self.data_dir is not None:
            self.data_dir = Path(self.data_dir)
        if self.persist and self.data_dir is None:
            raise ValueError("persistence requires a data directory")


@dataclass
class _SessionEntry:
    session: Session
    lock: threading.Lock
    applied_seq: int
    dataset_id: str
    path: Path | None


class ServiceState:
    """In-memory stores plus optional on-disk persistence."""

    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.datasets: dict[str, Dataset] = {}
        self.sessions: dict[str, _SessionEntry] = {}
        self._store_lock = threading.Lock()
        if cfg.embedding_table is not None:
            self.table = load_embedding_table(cfg.embedding_table)
        else:
            self.table = HashedVectors(cfg.embed_dim)
        if cfg.persist:
            (cfg.data_dir / "datasets").mkdir(parents=True, exist_ok=True)
            (cfg.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
            self._recover()

    # -- datasets ------------------------------------------------------

    def add_dataset(self, raw: bytes, fmt: str) -> str:
        digest = hashlib.sha256(raw).hexdigest()[:16]
        with self._store_lock:
            if digest in self.datasets:
                return digest
        ds = load_dataset(raw, fmt, table=self.table)
        with self._store_lock:
            self.datasets[digest] = ds
        if self.cfg.persist:
            path = self.cfg.data_dir / "datasets" / f"{digest}.{fmt}"
            if not path.exists():
                path.write_bytes(raw)
        return digest

    def dataset(self, dataset_id: str) -> Dataset:
        ds = self.datasets.get(dataset_id)
        if ds is None:
            raise HTTPException(404, f"unknown dataset {dataset_id}")
        return ds

    # -- sessions ------------------------------------------------------

    def create_session(
        self,
        dataset_id: str,
        policy: PolicySpec,
        batch_size: int,
        budget_ms: int,
        session_id: str | None,
    ) -> _SessionEntry:
        ds = self.dataset(dataset_id)
        with self._store_lock:
            if session_id and session_id in self.sessions:
                return self.sessions[session_id]
            session = Session(
                ds,
                policy,
                batch_size=batch_size,
                budget_ms=budget_ms,
                session_id=session_id,
                dataset_ref=dataset_id,
            )
            path = None
            if self.cfg.persist:
                path = self.cfg.data_dir / "sessions" / f"{session.id}.jsonl"
                header = dict(session.export_header())
                header["dataset_id"] = dataset_id
                path.write_text(json.dumps(header) + "\n", encoding="utf-8")
            entry = _SessionEntry(session, threading.Lock(), 0, dataset_id, path)
            self.sessions[session.id] = entry
            return entry

    def entry(self, session_id: str) -> _SessionEntry:
        entry = self.sessions.get(session_id)
        if entry is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return entry

    def _recover(self) -> None:
        for path in sorted((self.cfg.data_dir / "datasets").glob("*")):
            fmt = path.suffix.lstrip(".")
            if fmt in ("csv", "jsonl"):
                self.add_dataset(path.read_bytes(), fmt)
        for path in sorted((self.cfg.data_dir / "sessions").glob("*.jsonl")):
            lines = path.read_text(encoding="utf-8").splitlines()
            if not lines:
                continue
            header = json.loads(lines[0])
            dataset_id = header.get("dataset_id", "")
            ds = self.datasets.get(dataset_id)
            if ds is None:
                continue
            session = Session(
                ds,
                PolicySpec.from_dict(header["policy"]),
                batch_size=header["batch_size"],
                budget_ms=header["budget_ms"],
                session_id=header["session_id"],
                dataset_ref=dataset_id,
            )
            applied = 0
            for raw in lines[1:]:
                rec = json.loads(raw)
                session.apply_event(
                    InteractionEvent(
                        kind=rec["kind"], point_id=rec.get("point_id"), at=rec["at"]
                    )
                )
                applied = max(applied, int(rec["seq"]))
            self.sessions[session.id] = _SessionEntry(
                session, threading.Lock(), applied, dataset_id, path
            )


def _parse_event(raw: dict) -> tuple[int, InteractionEvent]:
    try:
        seq = int(raw["seq"])
        event = InteractionEvent(
            kind=raw["kind"],
            point_id=raw.get("point_id"),
            at=int(raw["at"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise HTTPException(422, f"malformed event: {exc}") from exc
    return seq, event


def create_app(cfg: ServiceConfig | None = None) -> FastAPI:
    cfg = cfg or ServiceConfig()
    app = FastAPI(title="activeforage", version="0.1.0")
    state = ServiceState(cfg)
    app.state.forage = state

    @app.exception_handler(ForageError)
    def _forage_error(_request: Request, exc: ForageError):
        status = 409 if isinstance(exc, ProtocolError) else 422
        return JSONResponse({"detail": str(exc)}, status_code=status)

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "datasets": len(state.datasets),
            "sessions": len(state.sessions),
        }

    @app.post("/datasets")
    async def upload_dataset(request: Request, format: str = Query("csv")):
        raw = await request.body()
        if not raw:
            raise HTTPException(422, "empty dataset upload")
        dataset_id = state.add_dataset(raw, format)
        return {"dataset_id": dataset_id, "points": len(state.dataset(dataset_id))}

    @app.get("/datasets/{dataset_id}/points")
    def dataset_points(dataset_id: str):
        ds = state.dataset(dataset_id)
        # text withheld here; it is fetched per point on hover
        lines = (
            json.dumps({"id": p.id, "x": p.x, "y": p.y}) for p in ds
        )
        return PlainTextResponse("\n".join(lines) + "\n", media_type=NDJSON)

    @app.get("/datasets/{dataset_id}/points/{point_id}")
    def dataset_point(dataset_id: str, point_id: int):
        ds = state.dataset(dataset_id)
        try:
            p = ds.by_id(point_id)
        except KeyError:
            raise HTTPException(404, f"unknown point {point_id}")
        rec = {"id": p.id, "x": p.x, "y": p.y, "text": p.text}
        if p.truth is not None:
            rec["truth"] = p.truth
        return rec

    @app.post("/sessions")
    def create_session(body: dict):
        dataset_id = body.get("dataset_id")
        if not dataset_id:
            raise HTTPException(422, "dataset_id is required")
        policy = (
            PolicySpec.from_dict(body["policy"])
            if "policy" in body
            else cfg.default_policy
        )
        entry = state.create_session(
            dataset_id,
            policy,
            int(body.get("batch_size", cfg.default_batch_size)),
            int(body.get("budget_ms", 600_000)),
            body.get("session_id"),
        )
        return {
            "session_id": entry.session.id,
            "policy": entry.session.policy.to_dict(),
            "batch_size": entry.session.batch_size,
            "budget_ms": entry.session.budget_ms,
        }

    def _suggestions_payload(session: Session) -> list[dict]:
        return [
            {"point_id": pid, "score": score}
            for pid, score in session.suggestions()
        ]

    @app.post("/sessions/{session_id}/events")
    def post_events(session_id: str, events: list[dict]):
        entry = state.entry(session_id)
        accepted = 0
        with entry.lock:
            for raw in events:
                seq, event = _parse_event(raw)
                if seq <= entry.applied_seq:
                    continue  # idempotent retry
                entry.session.apply_event(event)
                entry.applied_seq = seq
                accepted += 1
                if entry.path is not None:
                    with entry.path.open("a", encoding="utf-8") as fh:
                        fh.write(
                            json.dumps(
                                {
                                    "seq": seq,
                                    "kind": event.kind,
                                    "point_id": event.point_id,
                                    "at": event.at,
                                }
                            )
                            + "\n"
                        )
            return {
                "accepted": accepted,
                "applied_seq": entry.applied_seq,
                "utility": entry.session.utility(),
                "suggestions": _suggestions_payload(entry.session),
            }

    @app.get("/sessions/{session_id}/suggestions")
    def get_suggestions(session_id: str):
        entry = state.entry(session_id)
        with entry.lock:
            return {"suggestions": _suggestions_payload(entry.session)}

    @app.get("/sessions/{session_id}/export")
    def get_export(session_id: str):
        entry = state.entry(session_id)
        with entry.lock:
            lines = entry.session.export_lines()
        return PlainTextResponse("\n".join(lines) + "\n", media_type=NDJSON)

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        entry = state.entry(session_id)
        with entry.lock:
            session = entry.session
            out = {
                "session_id": session.id,
                "utility": session.utility(),
                "events": len(session.log),
                "closed": session.closed,
            }
            ds = session.ds
            if ds.has_truth and session.log:
                from .analytics import parse_export

                export = parse_export(session.export_lines())
                tm = throughput_metrics(export, ds.truth_map())
                out["throughput"] = {
                    name: getattr(tm, name)
                    for name in (
                        "hovers_per_min",
                        "relevant_hovers_per_min",
                        "hover_purity",
                        "bookmarks_per_min",
                        "relevant_bookmarks_per_min",
                        "bookmark_purity",
                        "active_minutes",
                    )
                }
        return out

    return app
