"""HTTP facade and live channel.

Every mutating route resolves the caller's token to a principal and goes
through the permission matrix (inside the module operations) before any
state changes.  Error mapping: Forbidden -> 403, unknown resources -> 404,
validation -> 400, conflicts (lock held, username taken) -> 409, closed
session -> 410, missing/expired token -> 401.

Construction snapshots travel in the kernel's canonical JSON text; chat and
lock changes are pushed immediately over the live channel while group
constructions synchronize on the periodic tick.  The polling fallback
(`GET /api/sessions/{id}/events?after=`) reads the same per-member event
log as the websocket, so a client can switch transports freely.
"""

from __future__ import annotations

import asyncio
import contextlib
import threading
import time
from typing import Optional

from fastapi import Depends, FastAPI, Header, Query, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .. import kernel, recording, sessions, storage
from ..accounts import (
    Action,
    AuthDenied,
    Directory,
    Forbidden,
    NotPending,
    OverlappingGroups,
    NonMember,
    Principal,
    Role,
    UnknownClass,
    UnknownConstruction,
    UnknownToken,
    UnknownUser,
    UsernameTaken,
    authorize,
)
from ..clock import Clock, SystemClock
from ..recording import Recorder
from ..sessions import SessionConfig, SessionEngine
from .config import ServerConfig

_ERROR_STATUS = [
    (UnknownToken, 401),
    (AuthDenied, 401),
    (Forbidden, 403),
    (sessions.NotJoined, 403),
    (UnknownUser, 404),
    (UnknownClass, 404),
    (UnknownConstruction, 404),
    (sessions.UnknownSession, 404),
    (sessions.UnknownGroup, 404),
    (sessions.UnknownTask, 404),
    (recording.UnknownLog, 404),
    (UsernameTaken, 409),
    (NotPending, 409),
    (sessions.NotHolder, 409),
    (sessions.SessionClosed, 410),  # covers AlreadyClosed
    (kernel.ParseError, 400),
    (sessions.NoGroupsDefined, 400),
    (sessions.EmptyMessage, 400),
    (sessions.MessageTooLong, 400),
    (OverlappingGroups, 400),
    (NonMember, 400),
    (recording.RecordingError, 400),
    (storage.StorageError, 500),
]


class SyncScheduler(threading.Thread):
    """Drives the periodic snapshot broadcast for every open session."""

    def __init__(self, engine: SessionEngine, poll_interval_s: float = 0.02):
        super().__init__(daemon=True, name="geolab-sync")
        self.engine = engine
        self.poll_interval_s = poll_interval_s
        self._stop_requested = threading.Event()

    def run(self):
        while not self._stop_requested.is_set():
            self.engine.run_due_ticks()
            self._stop_requested.wait(self.poll_interval_s)

    def stop(self):
        self._stop_requested.set()


# -- wire encodings ---------------------------------------------------------


def snapshot_obj(snap: sessions.Snapshot) -> dict:
    return {
        "group_id": snap.group_id,
        "version": snap.version,
        "payload": snap.payload.decode("utf-8"),
        "produced_ts": snap.produced_ts,
    }


def chat_obj(msg: sessions.ChatMessage) -> dict:
    return {"message_id": msg.message_id, "author_id": msg.author_id,
            "ts": msg.ts, "text": msg.text}


def value_obj(v: kernel.GeometryValue) -> dict:
    if isinstance(v, kernel.Point):
        return {"type": "point", "x": v.x, "y": v.y}
    if isinstance(v, kernel.Line):
        return {"type": "line", "a": v.a, "b": v.b, "c": v.c}
    if isinstance(v, kernel.Circle):
        return {"type": "circle", "cx": v.cx, "cy": v.cy, "r": v.r}
    if isinstance(v, kernel.Segment):
        return {"type": "segment", "x1": v.x1, "y1": v.y1, "x2": v.x2, "y2": v.y2}
    return {"type": "undefined"}


def evaluation_obj(values: kernel.Evaluation) -> dict:
    return {str(k): value_obj(v) for k, v in values.items()}


def construction_record_obj(rec) -> dict:
    return {
        "construction_id": rec.construction_id, "owner_id": rec.owner_id,
        "title": rec.title, "payload": rec.payload.decode("utf-8"),
        "shared": rec.shared, "scrapbook": rec.scrapbook,
        "created_ts": rec.created_ts, "modified_ts": rec.modified_ts,
    }


# -- request bodies ---------------------------------------------------------


class Credentials(BaseModel):
    username: str
    password: str


class ClassBody(BaseModel):
    name: str


class GroupsBody(BaseModel):
    groups: list[list[str]]


class ConstructionBody(BaseModel):
    title: str
    payload: str
    shared: bool = False


class SessionBody(BaseModel):
    class_id: str
    task_ids: list[str] = []
    sync_interval_ms: Optional[int] = None
    lock_idle_timeout_ms: Optional[int] = None


class PayloadBody(BaseModel):
    payload: str


class ChatBody(BaseModel):
    text: str
    group_id: Optional[str] = None


class LogStartBody(BaseModel):
    context: str = ""


class LogEventBody(BaseModel):
    event: dict


def create_app(config: ServerConfig, *, clock: Optional[Clock] = None) -> FastAPI:
    clock = clock or SystemClock()
    store = storage.Store(config.data_dir)
    directory = Directory(
        store, clock=clock, pepper=config.pepper,
        token_idle_ms=config.session_idle_expiry_ms, scrypt_n=config.scrypt_n,
    )
    directory.bootstrap_admin(config.admin_username, config.admin_password)
    engine = SessionEngine(
        directory, store, clock=clock,
        default_config=SessionConfig(
            sync_interval_ms=config.sync_interval_ms,
            lock_idle_timeout_ms=config.lock_idle_timeout_ms,
        ),
    )
    recorder = Recorder(store, clock=clock)
    scheduler = SyncScheduler(engine)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        scheduler.start()
        try:
            yield
        finally:
            scheduler.stop()
            scheduler.join(timeout=2)
            for log_id in recorder.unfinished_log_ids():
                recorder.seal_unfinished(log_id)
            for session in engine.sessions.values():
                engine._persist(session)
            store.close()

    app = FastAPI(title="geolab", lifespan=lifespan)
    app.state.store = store
    app.state.directory = directory
    app.state.engine = engine
    app.state.recorder = recorder
    app.state.config = config

    for exc_type, status in _ERROR_STATUS:
        def handler(request: Request, exc: Exception, _status=status):
            return JSONResponse(
                status_code=_status,
                content={"error": type(exc).__name__, "detail": str(exc)},
            )
        app.add_exception_handler(exc_type, handler)

    def principal(authorization: Optional[str] = Header(None)) -> Principal:
        if not authorization or not authorization.lower().startswith("bearer "):
            raise UnknownToken("missing bearer token")
        return directory.resolve(authorization.split(" ", 1)[1])

    # -- auth ---------------------------------------------------------------

    @app.post("/api/register", status_code=201)
    def register(body: Credentials):
        acct = directory.register_teacher(body.username, body.password)
        return {"user_id": acct.user_id, "status": acct.status.value}

    @app.post("/api/login")
    def login(body: Credentials):
        token = directory.authenticate(body.username, body.password)
        p = directory.resolve(token)
        return {"token": token, "user_id": p.user_id, "role": p.role.value}

    @app.post("/api/login/anonymous")
    def login_anonymous():
        token = directory.login_anonymous()
        p = directory.resolve(token)
        return {"token": token, "user_id": p.user_id, "role": p.role.value}

    @app.post("/api/logout")
    def logout(authorization: Optional[str] = Header(None)):
        if authorization and authorization.lower().startswith("bearer "):
            directory.logout(authorization.split(" ", 1)[1])
        return {}

    # -- admin --------------------------------------------------------------

    @app.post("/api/admin/teachers/{user_id}/confirm")
    def confirm_teacher(user_id: str, p: Principal = Depends(principal)):
        acct = directory.confirm_teacher(p, user_id)
        return {"user_id": acct.user_id, "status": acct.status.value}

    @app.get("/api/admin/login-log")
    def login_log(p: Principal = Depends(principal)):
        if not authorize(p, Action.VIEW_LOGIN_LOG):
            raise Forbidden("administrators only")
        return {"entries": [
            {"user_id": e.user_id, "ts": e.ts, "event": e.event.value}
            for e in directory.login_log
        ]}

    # -- classes & groups ---------------------------------------------------

    @app.post("/api/classes", status_code=201)
    def create_class(body: ClassBody, p: Principal = Depends(principal)):
        sc = directory.create_class(p, body.name)
        return {"class_id": sc.class_id, "name": sc.name, "teacher_id": sc.teacher_id}

    @app.get("/api/classes")
    def list_classes(p: Principal = Depends(principal)):
        return {"classes": [
            {"class_id": sc.class_id, "name": sc.name,
             "members": sorted(sc.member_student_ids)}
            for sc in directory.classes.values() if sc.teacher_id == p.user_id
        ]}

    @app.post("/api/classes/{class_id}/students", status_code=201)
    def create_student(class_id: str, body: Credentials, p: Principal = Depends(principal)):
        acct = directory.create_student(p, class_id, body.username, body.password)
        return {"user_id": acct.user_id, "username": acct.username,
                "teacher_id": acct.teacher_id}

    @app.post("/api/classes/{class_id}/groups", status_code=201)
    def form_groups(class_id: str, body: GroupsBody, p: Principal = Depends(principal)):
        groups = directory.form_groups(p, class_id, [set(g) for g in body.groups])
        return {"groups": [
            {"group_id": g.group_id, "members": sorted(g.member_student_ids)}
            for g in groups
        ]}

    # -- constructions ------------------------------------------------------

    @app.post("/api/constructions", status_code=201)
    def create_construction(body: ConstructionBody, p: Principal = Depends(principal)):
        rec = directory.create_construction(
            p, body.title, body.payload.encode("utf-8"), shared=body.shared)
        return construction_record_obj(rec)

    @app.get("/api/constructions")
    def list_constructions(p: Principal = Depends(principal)):
        return {"constructions": [
            construction_record_obj(r) for r in directory.constructions_of(p.user_id)
        ]}

    @app.get("/api/constructions/shared")
    def list_shared(p: Principal = Depends(principal)):
        if not authorize(p, Action.READ_SHARED_CONSTRUCTION):
            raise Forbidden("registered users only")
        return {"constructions": [
            construction_record_obj(r) for r in directory.shared_constructions()
        ]}

    # -- sessions -----------------------------------------------------------

    @app.post("/api/sessions", status_code=201)
    def open_session(body: SessionBody, p: Principal = Depends(principal)):
        cfg = None
        if body.sync_interval_ms is not None or body.lock_idle_timeout_ms is not None:
            cfg = SessionConfig(
                sync_interval_ms=body.sync_interval_ms or config.sync_interval_ms,
                lock_idle_timeout_ms=body.lock_idle_timeout_ms or config.lock_idle_timeout_ms,
            )
        session = engine.open_session(p, body.class_id, body.task_ids, cfg)
        return {
            "session_id": session.session_id,
            "class_id": session.class_id,
            "groups": sorted(session.workspaces),
            "sync_interval_ms": session.config.sync_interval_ms,
        }

    @app.post("/api/sessions/{session_id}/join")
    def join_session(session_id: str, p: Principal = Depends(principal)):
        group_id, snap = engine.join_session(p, session_id)
        if group_id is None:  # teacher: observer attachment to every group
            return {"group_id": None,
                    "snapshots": {gid: snapshot_obj(s) for gid, s in snap.items()}}
        return {"group_id": group_id, "snapshot": snapshot_obj(snap)}

    @app.post("/api/sessions/{session_id}/close")
    def close_session(session_id: str, p: Principal = Depends(principal)):
        engine.close_session(p, session_id)
        return {"state": "closed"}

    @app.post("/api/sessions/{session_id}/lock")
    def claim_lock(session_id: str, p: Principal = Depends(principal)):
        res = engine.claim_lock(p, session_id)
        if not res.granted:
            return JSONResponse(status_code=409,
                                content={"error": "LockHeld", "holder": res.holder})
        return {"granted": True, "holder": res.holder}

    @app.delete("/api/sessions/{session_id}/lock")
    def release_lock(session_id: str, p: Principal = Depends(principal)):
        engine.release_lock(p, session_id)
        return {"released": True}

    @app.put("/api/sessions/{session_id}/group-construction")
    def export_group(session_id: str, body: PayloadBody, p: Principal = Depends(principal)):
        version = engine.export_to_group(p, session_id, body.payload.encode("utf-8"))
        return {"version": version}

    @app.post("/api/sessions/{session_id}/import")
    def import_group(session_id: str, p: Principal = Depends(principal)):
        return {"snapshot": snapshot_obj(engine.import_from_group(p, session_id))}

    @app.post("/api/sessions/{session_id}/individual")
    def save_individual(session_id: str, body: PayloadBody, p: Principal = Depends(principal)):
        engine.save_individual(p, session_id, body.payload.encode("utf-8"))
        return {"saved": True}

    @app.get("/api/sessions/{session_id}/group/{group_id}/snapshot")
    def poll_snapshot(session_id: str, group_id: str,
                      version: int = Query(-1), p: Principal = Depends(principal)):
        snap = engine.get_snapshot(p, session_id, group_id)
        if snap.version <= version:
            return Response(status_code=204)
        return snapshot_obj(snap)

    @app.post("/api/sessions/{session_id}/chat", status_code=201)
    def post_chat(session_id: str, body: ChatBody, p: Principal = Depends(principal)):
        msg = engine.post_chat(p, session_id, body.text, group_id=body.group_id)
        return chat_obj(msg)

    @app.get("/api/sessions/{session_id}/chat")
    def read_chat(session_id: str, after: int = Query(0),
                  group_id: Optional[str] = Query(None),
                  p: Principal = Depends(principal)):
        msgs = engine.read_chat(p, session_id, after=after, group_id=group_id)
        return {"messages": [chat_obj(m) for m in msgs]}

    @app.post("/api/sessions/{session_id}/scrapbook", status_code=201)
    def save_scrapbook(session_id: str, p: Principal = Depends(principal)):
        return construction_record_obj(engine.save_scrapbook(p, session_id))

    @app.get("/api/sessions/{session_id}/observe/{group_id}")
    def observe(session_id: str, group_id: str, p: Principal = Depends(principal)):
        snap, individuals = engine.observe(p, session_id, group_id)
        return {
            "snapshot": snapshot_obj(snap),
            "individuals": {uid: payload.decode("utf-8")
                            for uid, payload in individuals.items()},
        }

    @app.get("/api/sessions/{session_id}/events")
    def poll_events(session_id: str, after: int = Query(0),
                    p: Principal = Depends(principal)):
        if not engine.is_attached(session_id, p.user_id):
            raise Forbidden("join the session first")
        return {"events": engine.events_for(session_id, p.user_id, after=after)}

    # -- recording & replay -------------------------------------------------

    @app.post("/api/logs", status_code=201)
    def start_log(body: LogStartBody, p: Principal = Depends(principal)):
        return {"log_id": recorder.start_recording(p, body.context)}

    @app.post("/api/logs/{log_id}/events", status_code=201)
    def append_log_event(log_id: str, body: LogEventBody, p: Principal = Depends(principal)):
        log = recorder.get_log(log_id)
        if log.student_id != p.user_id:
            raise Forbidden("not your recording")
        position = recorder.append_event(log_id, recording.event_from_obj(body.event))
        return {"position": position}

    @app.post("/api/logs/{log_id}/finish")
    def finish_log(log_id: str, p: Principal = Depends(principal)):
        log = recorder.get_log(log_id)
        if log.student_id != p.user_id:
            raise Forbidden("not your recording")
        recorder.finish_recording(log_id)
        return {"finished": True}

    def _replayable_log(p: Principal, log_id: str) -> recording.SessionLog:
        log = recorder.get_log(log_id)
        if not authorize(p, Action.OPEN_REPLAY,
                         recording._replay_resource(directory, log)):
            raise Forbidden("only the student's own teacher may replay")
        return log

    @app.get("/api/logs")
    def list_logs(student: str = Query(...), p: Principal = Depends(principal)):
        acct = directory.users.get(student)
        if acct is None:
            raise UnknownUser(student)
        if not authorize(p, Action.OPEN_REPLAY, recording.ResourceCtx(
                log_student_id=acct.user_id, log_student_teacher_id=acct.teacher_id)):
            raise Forbidden("only the student's own teacher lists logs")
        return {"logs": [
            {"log_id": l.log_id, "started_ts": l.started_ts,
             "context": l.context, "finished": l.finished,
             "event_count": len(l.events)}
            for l in recorder.logs_of_student(student)
        ]}

    @app.get("/api/logs/{log_id}")
    def export_session_log(log_id: str, p: Principal = Depends(principal)):
        log = _replayable_log(p, log_id)
        return PlainTextResponse(recording.export_log(log).decode("utf-8"),
                                 media_type="application/x-ndjson")

    @app.get("/api/logs/{log_id}/reconstruct")
    def reconstruct(log_id: str, index: int = Query(...), p: Principal = Depends(principal)):
        log = _replayable_log(p, log_id)
        c, values = recording.reconstruct_at(log, index)
        return {
            "index": index,
            "event_count": len(log.events),
            "construction": kernel.serialize_construction(c).decode("utf-8"),
            "values": evaluation_obj(values),
        }

    @app.get("/api/logs/{log_id}/schedule")
    def schedule(log_id: str, speed: float = Query(1.0), p: Principal = Depends(principal)):
        log = _replayable_log(p, log_id)
        return {"schedule": [
            {"delay_ms": d, "index": i}
            for d, i in recording.replay_schedule(log, speed)
        ]}

    # -- live channel -------------------------------------------------------

    @app.websocket("/api/sessions/{session_id}/channel")
    async def live_channel(ws: WebSocket, session_id: str):
        token = ws.query_params.get("token", "")
        resume_after = ws.query_params.get("resume_after")
        try:
            p = directory.resolve(token)
        except UnknownToken:
            await ws.close(code=4401)
            return
        if not engine.is_attached(session_id, p.user_id):
            await ws.close(code=4403)
            return
        await ws.accept()
        uid = p.user_id
        if resume_after is not None:
            for e in engine.resume_events(session_id, uid, int(resume_after)):
                await ws.send_json(e)
            cursor = engine._seq.get((session_id, uid), 0)
        else:
            cursor = 0

        def handle(msg: dict):
            kind = msg.get("type")
            if kind == "ping":
                engine._enqueue(session_id, uid, "pong", {})
            elif kind == "chat_post":
                engine.post_chat(p, session_id, msg.get("text", ""),
                                 group_id=msg.get("group_id"))
            elif kind == "lock_claim":
                res = engine.claim_lock(p, session_id)
                if not res.granted:
                    engine._enqueue(session_id, uid, "lock_denied",
                                    {"holder": res.holder})
            elif kind == "lock_release":
                engine.release_lock(p, session_id)
            elif kind == "export":
                version = engine.export_to_group(
                    p, session_id, msg.get("payload", "").encode("utf-8"))
                engine._enqueue(session_id, uid, "export_ack", {"version": version})
            else:
                engine._enqueue(session_id, uid, "error",
                                {"detail": f"unknown message type {kind!r}"})

        recv_task = asyncio.create_task(ws.receive_json())
        try:
            while True:
                for e in engine.events_for(session_id, uid, after=cursor):
                    await ws.send_json(e)
                    cursor = e["seq"]
                    if e["type"] == "session_closed":
                        await ws.close(code=4000, reason="session_closed")
                        return
                done, _ = await asyncio.wait({recv_task}, timeout=0.02)
                if recv_task in done:
                    try:
                        msg = recv_task.result()
                    except (WebSocketDisconnect, RuntimeError):
                        return
                    try:
                        handle(msg)
                    except (sessions.SessionError, Forbidden, kernel.ParseError) as exc:
                        engine._enqueue(session_id, uid, "error",
                                        {"error": type(exc).__name__,
                                         "detail": str(exc)})
                    recv_task = asyncio.create_task(ws.receive_json())
        finally:
            recv_task.cancel()

    # -- misc ---------------------------------------------------------------

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    if config.static_dir:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True),
                  name="static")
    else:
        @app.get("/")
        def landing():
            return {"service": "geolab", "docs": "/docs", "health": "/api/health"}

    return app
