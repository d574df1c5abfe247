"""Recording and replay of stand-alone work sessions.

A session log is an append-only stream interleaving navigation events
(page visits with enter/exit timestamps) and geometry events (the kernel
mutations: add, remove, drag), ordered by timestamp.  Logs are event
sourced: replaying the geometry events over an empty construction
reproduces the student's construction exactly, so storage stays small and
reconstruction is byte-exact.

Appends are validated against a running reconstruction (an event that could
not apply is rejected) and made durable through the storage module before
being acknowledged.  Replay is read-only: cursors and the pure pacing
schedule never touch the log.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

from . import kernel
from .accounts import (
    Action,
    Directory,
    Forbidden,
    Principal,
    ResourceCtx,
    authorize,
)
from .clock import Clock, SystemClock
from .storage import Store

LOG_FORMAT_NAME = "geolab-log"
LOG_FORMAT_VERSION = 1


class RecordingError(Exception):
    pass


class UnknownLog(RecordingError):
    pass


class LogFinished(RecordingError):
    pass


class UnfinishedLog(RecordingError):
    pass


class TimestampRegression(RecordingError):
    pass


class InvalidEvent(RecordingError):
    pass


class EndOfLog(RecordingError):
    pass


class IndexOutOfRange(RecordingError):
    pass


class NonPositiveSpeed(RecordingError):
    pass


@dataclass(frozen=True)
class NavigationEvent:
    page_id: str
    enter_ts: int
    exit_ts: Optional[int] = None

    def __post_init__(self):
        if self.exit_ts is not None and self.exit_ts < self.enter_ts:
            raise InvalidEvent("exit_ts before enter_ts")

    @property
    def ts(self) -> int:
        return self.enter_ts


@dataclass(frozen=True)
class AddStepAction:
    kind: kernel.StepKind
    inputs: Tuple[int, ...]
    params: Tuple[float, ...]
    branch: Optional[int] = None


@dataclass(frozen=True)
class RemoveStepAction:
    step_id: int


@dataclass(frozen=True)
class MoveFreePointAction:
    step_id: int
    x: float
    y: float


GeoAction = Union[AddStepAction, RemoveStepAction, MoveFreePointAction]


@dataclass(frozen=True)
class GeometryEvent:
    ts: int
    action: GeoAction


SessionEvent = Union[NavigationEvent, GeometryEvent]


@dataclass
class SessionLog:
    log_id: str
    student_id: str
    started_ts: int
    context: str = ""
    events: List[SessionEvent] = field(default_factory=list)
    finished: bool = False


def apply_geometry_event(c: kernel.Construction, action: GeoAction) -> kernel.Construction:
    try:
        if isinstance(action, AddStepAction):
            c, _ = kernel.add_step(c, action.kind, action.inputs, action.params,
                                   branch=action.branch)
            return c
        if isinstance(action, RemoveStepAction):
            c, _ = kernel.remove_step_cascade(c, action.step_id)
            return c
        if isinstance(action, MoveFreePointAction):
            return kernel.move_free_point(c, action.step_id, action.x, action.y)
    except kernel.KernelError as exc:
        raise InvalidEvent(str(exc)) from exc
    raise InvalidEvent(f"unknown action {action!r}")


# ---------------------------------------------------------------------------
# wire encoding (one JSON object per event; export is JSON lines)


def event_to_obj(ev: SessionEvent) -> dict:
    if isinstance(ev, NavigationEvent):
        return {"ts": ev.enter_ts, "type": "nav", "page": ev.page_id,
                "enter_ts": ev.enter_ts, "exit_ts": ev.exit_ts}
    a = ev.action
    if isinstance(a, AddStepAction):
        obj = {"ts": ev.ts, "type": "geo", "action": "add", "kind": a.kind.value,
               "inputs": list(a.inputs), "params": [float(p) for p in a.params]}
        if a.branch is not None:
            obj["branch"] = a.branch
        return obj
    if isinstance(a, RemoveStepAction):
        return {"ts": ev.ts, "type": "geo", "action": "remove", "id": a.step_id}
    return {"ts": ev.ts, "type": "geo", "action": "move", "id": a.step_id,
            "x": float(a.x), "y": float(a.y)}


def event_from_obj(obj: dict) -> SessionEvent:
    try:
        if obj["type"] == "nav":
            return NavigationEvent(obj["page"], int(obj["enter_ts"]),
                                   obj.get("exit_ts"))
        if obj["type"] == "geo":
            act = obj["action"]
            if act == "add":
                kind = kernel.StepKind(obj["kind"])
                return GeometryEvent(int(obj["ts"]), AddStepAction(
                    kind, tuple(obj["inputs"]), tuple(float(p) for p in obj["params"]),
                    obj.get("branch"),
                ))
            if act == "remove":
                return GeometryEvent(int(obj["ts"]), RemoveStepAction(int(obj["id"])))
            if act == "move":
                return GeometryEvent(int(obj["ts"]), MoveFreePointAction(
                    int(obj["id"]), float(obj["x"]), float(obj["y"])))
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidEvent(f"bad event object: {exc}") from exc
    raise InvalidEvent(f"unrecognized event {obj!r}")


def export_log(log: SessionLog) -> bytes:
    manifest = {"format": LOG_FORMAT_NAME, "version": LOG_FORMAT_VERSION,
                "log_id": log.log_id, "student": log.student_id,
                "started_ts": log.started_ts, "context": log.context,
                "finished": log.finished}
    lines = [json.dumps(manifest, separators=(",", ":"))]
    lines += [json.dumps(event_to_obj(e), separators=(",", ":")) for e in log.events]
    return ("\n".join(lines) + "\n").encode("utf-8")


def import_log(data: bytes) -> SessionLog:
    lines = data.decode("utf-8").splitlines()
    if not lines:
        raise InvalidEvent("empty log file")
    manifest = json.loads(lines[0])
    if manifest.get("format") != LOG_FORMAT_NAME:
        raise InvalidEvent("not a session log")
    if manifest.get("version") != LOG_FORMAT_VERSION:
        raise InvalidEvent(f"unsupported log version {manifest.get('version')!r}")
    log = SessionLog(
        log_id=manifest["log_id"], student_id=manifest["student"],
        started_ts=manifest["started_ts"], context=manifest.get("context", ""),
        finished=manifest.get("finished", False),
    )
    log.events = [event_from_obj(json.loads(line)) for line in lines[1:]]
    return log


# ---------------------------------------------------------------------------
# recorder


class Recorder:
    """Durable event recording; one serialized writer per log."""

    def __init__(self, store: Optional[Store] = None, *, clock: Optional[Clock] = None):
        self.store = store
        self.clock = clock or SystemClock()
        self._mutex = threading.Lock()
        self.logs: Dict[str, SessionLog] = {}
        self._reconstructions: Dict[str, kernel.Construction] = {}
        if store is not None:
            self._restore()

    def _restore(self) -> None:
        for log_id in self.store.list("logs"):
            records = self.store.read_stream("logs", log_id)
            if not records:
                continue
            manifest = json.loads(records[0])
            log = SessionLog(
                log_id=log_id, student_id=manifest["student"],
                started_ts=manifest["started_ts"], context=manifest.get("context", ""),
            )
            c = kernel.EMPTY
            for raw in records[1:]:
                obj = json.loads(raw)
                if obj.get("type") == "seal":
                    log.finished = obj.get("finished", True)
                    continue
                ev = event_from_obj(obj)
                if isinstance(ev, GeometryEvent):
                    c = apply_geometry_event(c, ev.action)
                log.events.append(ev)
            self.logs[log_id] = log
            self._reconstructions[log_id] = c

    def start_recording(self, actor: Principal, context: str = "") -> str:
        if not authorize(actor, Action.START_RECORDING):
            raise Forbidden("role may not record sessions")
        with self._mutex:
            log = SessionLog(
                log_id=uuid.uuid4().hex[:16],
                student_id=actor.user_id,
                started_ts=self.clock.now_ms(),
                context=context,
            )
            if self.store is not None:
                self.store.append("logs", log.log_id, json.dumps({
                    "format": LOG_FORMAT_NAME, "version": LOG_FORMAT_VERSION,
                    "student": log.student_id, "started_ts": log.started_ts,
                    "context": context,
                }).encode("utf-8"))
            self.logs[log.log_id] = log
            self._reconstructions[log.log_id] = kernel.EMPTY
            return log.log_id

    def append_event(self, log_id: str, event: SessionEvent) -> int:
        with self._mutex:
            log = self.logs.get(log_id)
            if log is None:
                raise UnknownLog(log_id)
            if log.finished:
                raise LogFinished(log_id)
            if log.events and event.ts < log.events[-1].ts:
                raise TimestampRegression(f"{event.ts} < {log.events[-1].ts}")
            if isinstance(event, GeometryEvent):
                # validate against the running reconstruction before accepting
                updated = apply_geometry_event(self._reconstructions[log_id], event.action)
            else:
                updated = self._reconstructions[log_id]
            # durable before acknowledgment
            if self.store is not None:
                self.store.append("logs", log_id,
                                  json.dumps(event_to_obj(event),
                                             separators=(",", ":")).encode("utf-8"))
            log.events.append(event)
            self._reconstructions[log_id] = updated
            return len(log.events) - 1

    def finish_recording(self, log_id: str) -> SessionLog:
        return self._seal(log_id, finished=True)

    def seal_unfinished(self, log_id: str) -> SessionLog:
        """Seal a log left open by a shutdown; marked as not cleanly finished."""
        return self._seal(log_id, finished=False)

    def _seal(self, log_id: str, *, finished: bool) -> SessionLog:
        with self._mutex:
            log = self.logs.get(log_id)
            if log is None:
                raise UnknownLog(log_id)
            if log.finished:
                raise LogFinished(log_id)
            if self.store is not None:
                self.store.append("logs", log_id, json.dumps(
                    {"type": "seal", "finished": finished}).encode("utf-8"))
            log.finished = True
            return log

    def unfinished_log_ids(self) -> List[str]:
        return sorted(l.log_id for l in self.logs.values() if not l.finished)

    def get_log(self, log_id: str) -> SessionLog:
        log = self.logs.get(log_id)
        if log is None:
            raise UnknownLog(log_id)
        return log

    def logs_of_student(self, student_id: str) -> List[SessionLog]:
        return sorted(
            (l for l in self.logs.values() if l.student_id == student_id),
            key=lambda l: l.started_ts,
        )

    def final_construction(self, log_id: str) -> kernel.Construction:
        if log_id not in self._reconstructions:
            raise UnknownLog(log_id)
        return self._reconstructions[log_id]


# ---------------------------------------------------------------------------
# replay


@dataclass(frozen=True)
class ReplayCursor:
    log_id: str
    position: int
    reconstructed: kernel.Construction


def _replay_resource(directory: Directory, log: SessionLog) -> ResourceCtx:
    student = directory.users.get(log.student_id)
    return ResourceCtx(
        log_student_id=log.student_id,
        log_student_teacher_id=student.teacher_id if student else None,
    )


def open_replay(actor: Principal, directory: Directory, recorder: Recorder,
                log_id: str) -> ReplayCursor:
    log = recorder.get_log(log_id)
    if not authorize(actor, Action.OPEN_REPLAY, _replay_resource(directory, log)):
        raise Forbidden("only the student's own teacher may replay")
    return ReplayCursor(log_id=log_id, position=0, reconstructed=kernel.EMPTY)


def replay_step(recorder: Recorder, cursor: ReplayCursor):
    """Advance one event; returns (cursor', event, evaluation)."""
    log = recorder.get_log(cursor.log_id)
    if cursor.position >= len(log.events):
        raise EndOfLog(cursor.log_id)
    event = log.events[cursor.position]
    reconstructed = cursor.reconstructed
    if isinstance(event, GeometryEvent):
        reconstructed = apply_geometry_event(reconstructed, event.action)
    cursor = replace(cursor, position=cursor.position + 1, reconstructed=reconstructed)
    return cursor, event, kernel.evaluate(reconstructed)


def replay_schedule(log: SessionLog, speed: float) -> List[Tuple[int, int]]:
    """Pure pacing plan: (delay_ms, event_index) pairs; the caller waits."""
    if not speed > 0:
        raise NonPositiveSpeed(repr(speed))
    if not log.finished:
        raise UnfinishedLog(log.log_id)
    out: List[Tuple[int, int]] = []
    prev_ts: Optional[int] = None
    for i, ev in enumerate(log.events):
        delay = 0 if prev_ts is None else round((ev.ts - prev_ts) / speed)
        out.append((delay, i))
        prev_ts = ev.ts
    return out


def reconstruct_at(log: SessionLog, index: int):
    """Construction and evaluation after the first `index` events."""
    if not 0 <= index <= len(log.events):
        raise IndexOutOfRange(f"{index} not in 0..{len(log.events)}")
    c = kernel.EMPTY
    for ev in log.events[:index]:
        if isinstance(ev, GeometryEvent):
            c = apply_geometry_event(c, ev.action)
    return c, kernel.evaluate(c)
