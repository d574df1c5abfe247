"""Collaborative group sessions: one shared construction per group behind a
single-writer lock, periodic snapshot synchronization, individual
workspaces, chat, teacher observation and scrapbook saving.

Synchronization model: the group construction is replaced wholesale by the
lock holder's export; non-holders receive versioned snapshots on a periodic
sync tick (default every 20 s).  There is deliberately no operational
transform or merge machinery — the lock is the whole concurrency story.

All mutations of one session are serialized through the session's mutex
(the logical single-writer command queue); distinct sessions proceed in
parallel.  Delivery to members goes through per-member event logs with
strictly increasing sequence numbers; the server's live channel and the
polling fallback both read from those logs, which also makes resumption
after a dropped connection trivial.
"""

from __future__ import annotations

import base64
import json
import threading
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from . import kernel
from .accounts import (
    Action,
    ConstructionRecord,
    Directory,
    Forbidden,
    Principal,
    ResourceCtx,
    Role,
    UnknownClass,
    authorize,
)
from .clock import Clock, SystemClock
from .storage import Store

DEFAULT_SYNC_INTERVAL_MS = 20_000
MAX_CHAT_CHARS = 2000


class SessionError(Exception):
    pass


class UnknownSession(SessionError):
    pass


class UnknownGroup(SessionError):
    pass


class UnknownTask(SessionError):
    pass


class NoGroupsDefined(SessionError):
    pass


class SessionClosed(SessionError):
    pass


class AlreadyClosed(SessionClosed):
    pass


class NotHolder(SessionError):
    pass


class NotJoined(SessionError):
    pass


class EmptyMessage(SessionError):
    pass


class MessageTooLong(SessionError):
    pass


@dataclass
class SessionConfig:
    sync_interval_ms: int = DEFAULT_SYNC_INTERVAL_MS
    lock_idle_timeout_ms: Optional[int] = None

    def __post_init__(self):
        if self.sync_interval_ms <= 0:
            raise ValueError("sync_interval_ms must be positive")
        if self.lock_idle_timeout_ms is not None and self.lock_idle_timeout_ms <= 0:
            raise ValueError("lock_idle_timeout_ms must be positive")


class SessionState(Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True)
class Snapshot:
    group_id: str
    version: int
    payload: bytes
    produced_ts: int


@dataclass(frozen=True)
class ChatMessage:
    message_id: int
    author_id: str
    ts: int
    text: str


@dataclass(frozen=True)
class LockResult:
    granted: bool
    holder: str


@dataclass
class GroupWorkspace:
    group_id: str
    member_ids: frozenset
    payload: bytes
    version: int = 0
    lock_holder: Optional[str] = None
    lock_activity_ms: int = 0
    chat: List[ChatMessage] = field(default_factory=list)
    individual: Dict[str, bytes] = field(default_factory=dict)
    attached: set = field(default_factory=set)
    last_synced_version: int = 0


@dataclass
class CollabSession:
    session_id: str
    teacher_id: str
    class_id: str
    task_ids: List[str]
    config: SessionConfig
    state: SessionState = SessionState.OPEN
    workspaces: Dict[str, GroupWorkspace] = field(default_factory=dict)
    teacher_attached: bool = False
    mutex: threading.RLock = field(default_factory=threading.RLock, repr=False)
    last_tick_ms: int = 0


class SessionEngine:
    def __init__(
        self,
        directory: Directory,
        store: Optional[Store] = None,
        *,
        clock: Optional[Clock] = None,
        default_config: Optional[SessionConfig] = None,
    ):
        self.directory = directory
        self.store = store
        self.clock = clock or SystemClock()
        self.default_config = default_config or SessionConfig()
        self.sessions: Dict[str, CollabSession] = {}
        self._events: Dict[Tuple[str, str], List[dict]] = {}
        self._seq: Dict[Tuple[str, str], int] = {}
        self.audit: List[dict] = []
        if store is not None:
            self._restore()

    # -- event delivery ------------------------------------------------------

    def _enqueue(self, session_id: str, user_id: str, kind: str, body: dict) -> None:
        key = (session_id, user_id)
        seq = self._seq.get(key, 0) + 1
        self._seq[key] = seq
        self._events.setdefault(key, []).append({"type": kind, "seq": seq, "body": body})

    def events_for(self, session_id: str, user_id: str, after: int = 0) -> List[dict]:
        return [e for e in self._events.get((session_id, user_id), []) if e["seq"] > after]

    def resume_events(self, session_id: str, user_id: str, after: int) -> List[dict]:
        """Missed chat and lock envelopes plus the latest snapshot only."""
        missed = self.events_for(session_id, user_id, after)
        out = [e for e in missed if e["type"] in ("chat", "lock", "session_closed")]
        snapshots = [e for e in missed if e["type"] == "snapshot"]
        if snapshots:
            out.append(snapshots[-1])
        out.sort(key=lambda e: e["seq"])
        return out

    def _broadcast(self, session: CollabSession, ws: GroupWorkspace, kind: str, body: dict) -> None:
        for uid in ws.attached:
            self._enqueue(session.session_id, uid, kind, body)
        if session.teacher_attached:
            self._enqueue(session.session_id, session.teacher_id, kind, body)

    # -- helpers -------------------------------------------------------------

    def _session(self, session_id: str) -> CollabSession:
        s = self.sessions.get(session_id)
        if s is None:
            raise UnknownSession(session_id)
        return s

    def _open_session_checked(self, session_id: str) -> CollabSession:
        s = self._session(session_id)
        if s.state is SessionState.CLOSED:
            raise SessionClosed(session_id)
        return s

    def _member_workspace(self, session: CollabSession, user_id: str) -> GroupWorkspace:
        for ws in session.workspaces.values():
            if user_id in ws.member_ids:
                return ws
        raise Forbidden("not a member of this session")

    def _all_member_ids(self, session: CollabSession) -> frozenset:
        out = set()
        for ws in session.workspaces.values():
            out |= ws.member_ids
        return frozenset(out)

    def _snapshot(self, ws: GroupWorkspace) -> Snapshot:
        return Snapshot(ws.group_id, ws.version, ws.payload, self.clock.now_ms())

    def _expire_idle_lock(self, session: CollabSession, ws: GroupWorkspace) -> None:
        timeout = session.config.lock_idle_timeout_ms
        if timeout is None or ws.lock_holder is None:
            return
        if self.clock.now_ms() - ws.lock_activity_ms >= timeout:
            holder = ws.lock_holder
            ws.lock_holder = None
            self._broadcast(session, ws, "lock", {
                "event": "release", "group_id": ws.group_id,
                "holder": None, "previous": holder, "reason": "idle_timeout",
            })

    # -- operations ----------------------------------------------------------

    def open_session(
        self,
        actor: Principal,
        class_id: str,
        task_ids: Sequence[str] = (),
        config: Optional[SessionConfig] = None,
    ) -> CollabSession:
        sc = self.directory.classes.get(class_id)
        if sc is None:
            raise UnknownClass(class_id)
        if not authorize(actor, Action.OPEN_SESSION, ResourceCtx(class_teacher_id=sc.teacher_id)):
            raise Forbidden("only the owning teacher opens sessions")
        groups = self.directory.groups_of_class(class_id)
        if not groups:
            raise NoGroupsDefined(class_id)
        payloads = []
        for tid in task_ids:
            rec = self.directory.constructions.get(tid)
            if rec is None or not (rec.owner_id == actor.user_id or rec.shared):
                raise UnknownTask(tid)
            payloads.append(rec.payload)
        initial = payloads[0] if payloads else kernel.serialize_construction(kernel.EMPTY)
        session = CollabSession(
            session_id=uuid.uuid4().hex[:16],
            teacher_id=actor.user_id,
            class_id=class_id,
            task_ids=list(task_ids),
            config=config or self.default_config,
        )
        now = self.clock.now_ms()
        session.last_tick_ms = now
        for g in groups:
            session.workspaces[g.group_id] = GroupWorkspace(
                group_id=g.group_id,
                member_ids=frozenset(g.member_student_ids),
                payload=initial,
            )
        self.sessions[session.session_id] = session
        self._persist(session)
        return session

    def join_session(self, actor: Principal, session_id: str):
        """Students get (group_id, snapshot); the teacher gets (None, {group_id:
        snapshot}) and observer attachment to every group."""
        session = self._open_session_checked(session_id)
        with session.mutex:
            res = ResourceCtx(
                session_teacher_id=session.teacher_id,
                session_member_ids=self._all_member_ids(session),
            )
            if not authorize(actor, Action.JOIN_SESSION, res):
                raise Forbidden("cannot join this session")
            if actor.role is Role.TEACHER:
                session.teacher_attached = True
                return None, {gid: self._snapshot(ws) for gid, ws in session.workspaces.items()}
            ws = self._member_workspace(session, actor.user_id)
            ws.attached.add(actor.user_id)
            ws.individual.setdefault(
                actor.user_id, kernel.serialize_construction(kernel.EMPTY)
            )
            return ws.group_id, self._snapshot(ws)

    def claim_lock(self, actor: Principal, session_id: str) -> LockResult:
        session = self._open_session_checked(session_id)
        with session.mutex:
            if not authorize(actor, Action.CLAIM_LOCK, ResourceCtx(
                    session_member_ids=self._all_member_ids(session))):
                raise Forbidden("cannot claim the lock")
            ws = self._member_workspace(session, actor.user_id)
            if actor.user_id not in ws.attached:
                raise NotJoined("join the session first")
            self._expire_idle_lock(session, ws)
            if ws.lock_holder is None:
                ws.lock_holder = actor.user_id
                ws.lock_activity_ms = self.clock.now_ms()
                self.audit.append({"op": "claim", "sid": session_id,
                                   "gid": ws.group_id, "actor": actor.user_id,
                                   "granted": True})
                self._broadcast(session, ws, "lock", {
                    "event": "grant", "group_id": ws.group_id, "holder": actor.user_id,
                })
                return LockResult(True, actor.user_id)
            if ws.lock_holder == actor.user_id:
                ws.lock_activity_ms = self.clock.now_ms()
                self.audit.append({"op": "claim", "sid": session_id,
                                   "gid": ws.group_id, "actor": actor.user_id,
                                   "granted": True})
                return LockResult(True, actor.user_id)
            self.audit.append({"op": "claim", "sid": session_id, "gid": ws.group_id,
                               "actor": actor.user_id, "granted": False})
            return LockResult(False, ws.lock_holder)

    def release_lock(self, actor: Principal, session_id: str) -> None:
        session = self._open_session_checked(session_id)
        with session.mutex:
            ws = self._member_workspace(session, actor.user_id)
            if ws.lock_holder != actor.user_id:
                raise NotHolder("lock not held by caller")
            ws.lock_holder = None
            self.audit.append({"op": "release", "sid": session_id,
                               "gid": ws.group_id, "actor": actor.user_id})
            self._broadcast(session, ws, "lock", {
                "event": "release", "group_id": ws.group_id,
                "holder": None, "previous": actor.user_id,
            })

    def export_to_group(self, actor: Principal, session_id: str, payload: bytes) -> int:
        session = self._open_session_checked(session_id)
        with session.mutex:
            ws = self._member_workspace(session, actor.user_id)
            if ws.lock_holder != actor.user_id:
                raise NotHolder("only the lock holder exports")
            kernel.parse_construction(payload)  # reject before touching state
            ws.payload = bytes(payload)
            ws.version += 1
            ws.lock_activity_ms = self.clock.now_ms()
            self.audit.append({"op": "export", "sid": session_id, "gid": ws.group_id,
                               "actor": actor.user_id, "version": ws.version})
            self._persist(session)
            return ws.version

    def import_from_group(self, actor: Principal, session_id: str) -> Snapshot:
        session = self._open_session_checked(session_id)
        with session.mutex:
            ws = self._member_workspace(session, actor.user_id)
            if actor.user_id not in ws.attached:
                raise NotJoined("join the session first")
            snap = self._snapshot(ws)
            ws.individual[actor.user_id] = snap.payload
            return snap

    def save_individual(self, actor: Principal, session_id: str, payload: bytes) -> None:
        session = self._open_session_checked(session_id)
        with session.mutex:
            ws = self._member_workspace(session, actor.user_id)
            if actor.user_id not in ws.attached:
                raise NotJoined("join the session first")
            kernel.parse_construction(payload)
            ws.individual[actor.user_id] = bytes(payload)
            self._persist(session)

    def save_scrapbook(self, actor: Principal, session_id: str) -> ConstructionRecord:
        session = self._open_session_checked(session_id)
        with session.mutex:
            if not authorize(actor, Action.SAVE_SCRAPBOOK, ResourceCtx(
                    session_member_ids=self._all_member_ids(session))):
                raise Forbidden("cannot save scrapbook")
            ws = self._member_workspace(session, actor.user_id)
            title = f"scrapbook {session_id} v{ws.version} @{self.clock.now_ms()}"
            return self.directory.create_construction(
                actor, title, ws.payload, shared=False, scrapbook=True,
            )

    def post_chat(
        self, actor: Principal, session_id: str, text: str,
        group_id: Optional[str] = None,
    ) -> ChatMessage:
        session = self._open_session_checked(session_id)
        with session.mutex:
            ws = self._chat_workspace(session, actor, group_id)
            if not text:
                raise EmptyMessage()
            if len(text) > MAX_CHAT_CHARS:
                raise MessageTooLong(f"{len(text)} > {MAX_CHAT_CHARS}")
            msg = ChatMessage(
                message_id=len(ws.chat) + 1,
                author_id=actor.user_id,
                ts=self.clock.now_ms(),
                text=text,
            )
            ws.chat.append(msg)
            if ws.lock_holder == actor.user_id:
                ws.lock_activity_ms = msg.ts
            self._broadcast(session, ws, "chat", {
                "group_id": ws.group_id, "message_id": msg.message_id,
                "author_id": msg.author_id, "ts": msg.ts, "text": msg.text,
            })
            return msg

    def read_chat(
        self, actor: Principal, session_id: str, after: int = 0,
        group_id: Optional[str] = None,
    ) -> List[ChatMessage]:
        session = self._session(session_id)
        with session.mutex:
            ws = self._chat_workspace(session, actor, group_id)
            return [m for m in ws.chat if m.message_id > after]

    def _chat_workspace(self, session, actor, group_id):
        if actor.role is Role.TEACHER:
            if actor.user_id != session.teacher_id:
                raise Forbidden("not this session's teacher")
            if group_id is None:
                raise UnknownGroup("teacher chat requires a group id")
            ws = session.workspaces.get(group_id)
            if ws is None:
                raise UnknownGroup(group_id)
            return ws
        ws = self._member_workspace(session, actor.user_id)
        if group_id is not None and group_id != ws.group_id:
            raise Forbidden("not a member of that group")
        return ws

    def sync_tick(self, session_id: str, group_id: Optional[str] = None) -> List[Snapshot]:
        """Broadcast one snapshot per (changed) group; no-op for unchanged ones."""
        session = self._open_session_checked(session_id)
        with session.mutex:
            session.last_tick_ms = self.clock.now_ms()
            targets = [group_id] if group_id else list(session.workspaces)
            out = []
            for gid in targets:
                ws = session.workspaces.get(gid)
                if ws is None:
                    raise UnknownGroup(gid)
                self._expire_idle_lock(session, ws)
                if ws.version == ws.last_synced_version:
                    continue
                snap = self._snapshot(ws)
                ws.last_synced_version = ws.version
                self._broadcast(session, ws, "snapshot", {
                    "group_id": gid, "version": snap.version,
                    "payload": snap.payload.decode("utf-8"),
                    "produced_ts": snap.produced_ts,
                })
                out.append(snap)
            return out

    def get_snapshot(self, actor: Principal, session_id: str, group_id: str) -> Snapshot:
        """Read-only snapshot for the polling fallback: group members and the
        session's teacher only."""
        session = self._session(session_id)
        with session.mutex:
            ws = session.workspaces.get(group_id)
            if ws is None:
                raise UnknownGroup(group_id)
            if actor.user_id != session.teacher_id and actor.user_id not in ws.member_ids:
                raise Forbidden("not a member of that group")
            return self._snapshot(ws)

    def is_attached(self, session_id: str, user_id: str) -> bool:
        session = self.sessions.get(session_id)
        if session is None:
            return False
        if user_id == session.teacher_id and session.teacher_attached:
            return True
        return any(user_id in ws.attached for ws in session.workspaces.values())

    def observe(self, actor: Principal, session_id: str, group_id: str):
        session = self._session(session_id)
        with session.mutex:
            if not authorize(actor, Action.OBSERVE_GROUP,
                             ResourceCtx(session_teacher_id=session.teacher_id)):
                raise Forbidden("only the session's teacher observes")
            ws = session.workspaces.get(group_id)
            if ws is None:
                raise UnknownGroup(group_id)
            return self._snapshot(ws), dict(ws.individual)

    def close_session(self, actor: Principal, session_id: str) -> None:
        session = self._session(session_id)
        with session.mutex:
            if not authorize(actor, Action.CLOSE_SESSION,
                             ResourceCtx(session_teacher_id=session.teacher_id)):
                raise Forbidden("only the session's teacher closes it")
            if session.state is SessionState.CLOSED:
                raise AlreadyClosed(session_id)
            session.state = SessionState.CLOSED
            for ws in session.workspaces.values():
                ws.lock_holder = None
                self._broadcast(session, ws, "session_closed", {"group_id": ws.group_id})
            if self.store is not None:
                for ws in session.workspaces.values():
                    for msg in ws.chat:
                        self.store.append("chats", f"{session_id}/{ws.group_id}", json.dumps({
                            "message_id": msg.message_id, "author_id": msg.author_id,
                            "ts": msg.ts, "text": msg.text,
                        }).encode("utf-8"))
            self._persist(session)

    # -- scheduling ----------------------------------------------------------

    def run_due_ticks(self) -> None:
        """Tick every open session whose sync interval has elapsed."""
        now = self.clock.now_ms()
        for session in list(self.sessions.values()):
            if session.state is SessionState.OPEN and (
                now - session.last_tick_ms >= session.config.sync_interval_ms
            ):
                self.sync_tick(session.session_id)

    # -- persistence ---------------------------------------------------------

    def _persist(self, session: CollabSession) -> None:
        if self.store is None:
            return
        doc = {
            "session_id": session.session_id,
            "teacher_id": session.teacher_id,
            "class_id": session.class_id,
            "task_ids": session.task_ids,
            "state": session.state.value,
            "config": {
                "sync_interval_ms": session.config.sync_interval_ms,
                "lock_idle_timeout_ms": session.config.lock_idle_timeout_ms,
            },
            "workspaces": {
                gid: {
                    "member_ids": sorted(ws.member_ids),
                    "payload": base64.b64encode(ws.payload).decode("ascii"),
                    "version": ws.version,
                    "chat": [
                        {"message_id": m.message_id, "author_id": m.author_id,
                         "ts": m.ts, "text": m.text}
                        for m in ws.chat
                    ],
                    "individual": {
                        uid: base64.b64encode(p).decode("ascii")
                        for uid, p in ws.individual.items()
                    },
                }
                for gid, ws in session.workspaces.items()
            },
        }
        self.store.put("sessions", session.session_id,
                       json.dumps(doc).encode("utf-8"))

    def _restore(self) -> None:
        # locks deliberately come back unheld: a restored stale holder could
        # deadlock a group whose member never reconnects
        for key in self.store.list("sessions"):
            doc = json.loads(self.store.get("sessions", key))
            session = CollabSession(
                session_id=doc["session_id"],
                teacher_id=doc["teacher_id"],
                class_id=doc["class_id"],
                task_ids=doc["task_ids"],
                config=SessionConfig(
                    sync_interval_ms=doc["config"]["sync_interval_ms"],
                    lock_idle_timeout_ms=doc["config"]["lock_idle_timeout_ms"],
                ),
                state=SessionState(doc["state"]),
            )
            session.last_tick_ms = self.clock.now_ms()
            for gid, w in doc["workspaces"].items():
                ws = GroupWorkspace(
                    group_id=gid,
                    member_ids=frozenset(w["member_ids"]),
                    payload=base64.b64decode(w["payload"]),
                    version=w["version"],
                )
                ws.last_synced_version = ws.version
                ws.chat = [
                    ChatMessage(m["message_id"], m["author_id"], m["ts"], m["text"])
                    for m in w["chat"]
                ]
                ws.individual = {
                    uid: base64.b64decode(p) for uid, p in w["individual"].items()
                }
                session.workspaces[gid] = ws
            self.sessions[session.session_id] = session
