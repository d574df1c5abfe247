"""Accounts, classes, groups and the permission matrix.

Four roles: administrators manage teachers and see the login log; teachers
own classes, students, groups, sessions and replays of their own students;
students do the actual geometry; anonymous visitors get a stand-alone
sandbox and nothing collaborative.

``authorize`` is a pure decision function over (principal, action,
resource); every mutating server route consults it before touching a
module.  ``Directory`` holds the account state, persists it through the
storage module, and owns credential hashing (scrypt, salted, with a
per-deployment pepper) and the opaque session tokens.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import secrets
import threading
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Set

from . import kernel
from .clock import Clock, SystemClock
from .storage import Store

DEFAULT_TOKEN_IDLE_MS = 12 * 3600 * 1000
ANONYMOUS_USER_ID = "anonymous"


class AccountsError(Exception):
    pass


class UsernameTaken(AccountsError):
    pass


class Forbidden(AccountsError):
    pass


class NotPending(AccountsError):
    pass


class AuthDenied(AccountsError):
    pass


class UnknownToken(AccountsError):
    pass


class UnknownUser(AccountsError):
    pass


class UnknownClass(AccountsError):
    pass


class UnknownConstruction(AccountsError):
    pass


class OverlappingGroups(AccountsError):
    pass


class NonMember(AccountsError):
    pass


class Role(Enum):
    ADMINISTRATOR = "administrator"
    TEACHER = "teacher"
    STUDENT = "student"
    ANONYMOUS = "anonymous"


class Status(Enum):
    PENDING = "pending"
    ACTIVE = "active"


class LoginEvent(Enum):
    SUCCESS = "LoginSuccess"
    FAILURE = "LoginFailure"
    LOGOUT = "Logout"


@dataclass
class UserAccount:
    user_id: str
    username: str
    credential_digest: str
    role: Role
    teacher_id: Optional[str] = None
    status: Status = Status.ACTIVE


@dataclass
class SchoolClass:
    class_id: str
    teacher_id: str
    name: str
    member_student_ids: Set[str] = field(default_factory=set)


@dataclass
class WorkGroup:
    group_id: str
    class_id: str
    member_student_ids: Set[str]


@dataclass
class ConstructionRecord:
    construction_id: str
    owner_id: str
    title: str
    payload: bytes
    shared: bool
    created_ts: int
    modified_ts: int
    scrapbook: bool = False


@dataclass(frozen=True)
class LoginLogEntry:
    user_id: str
    ts: int
    event: LoginEvent


@dataclass(frozen=True)
class Principal:
    user_id: str
    role: Role
    teacher_id: Optional[str] = None


# ---------------------------------------------------------------------------
# authorization


class Action(Enum):
    CONFIRM_TEACHER = "ConfirmTeacher"
    VIEW_LOGIN_LOG = "ViewLoginLog"
    CREATE_CLASS = "CreateClass"
    CREATE_STUDENT = "CreateStudent"
    FORM_GROUPS = "FormGroups"
    CREATE_CONSTRUCTION = "CreateConstruction"
    MODIFY_CONSTRUCTION = "ModifyConstruction"
    READ_SHARED_CONSTRUCTION = "ReadSharedConstruction"
    OPEN_SESSION = "OpenSession"
    JOIN_SESSION = "JoinSession"
    CLOSE_SESSION = "CloseSession"
    OBSERVE_GROUP = "ObserveGroup"
    CLAIM_LOCK = "ClaimLock"
    RELEASE_LOCK = "ReleaseLock"
    EXPORT_GROUP = "ExportToGroup"
    IMPORT_GROUP = "ImportFromGroup"
    SAVE_INDIVIDUAL = "SaveIndividual"
    SAVE_SCRAPBOOK = "SaveScrapbook"
    POST_CHAT = "PostChat"
    READ_CHAT = "ReadChat"
    START_RECORDING = "StartRecording"
    OPEN_REPLAY = "OpenReplay"


@dataclass(frozen=True)
class ResourceCtx:
    """Ownership facts authorize may need; leave fields None when the check
    is purely role-level."""

    owner_id: Optional[str] = None
    shared: Optional[bool] = None
    class_teacher_id: Optional[str] = None
    session_teacher_id: Optional[str] = None
    session_member_ids: Optional[frozenset] = None
    group_member_ids: Optional[frozenset] = None
    log_student_id: Optional[str] = None
    log_student_teacher_id: Optional[str] = None


_STUDENT_SESSION_ACTIONS = frozenset({
    Action.CLAIM_LOCK, Action.RELEASE_LOCK, Action.EXPORT_GROUP,
    Action.IMPORT_GROUP, Action.SAVE_INDIVIDUAL, Action.SAVE_SCRAPBOOK,
})


def authorize(p: Principal, action: Action, res: Optional[ResourceCtx] = None) -> bool:
    """Pure permission decision; True = Allow."""
    role = p.role
    if action in (Action.CONFIRM_TEACHER, Action.VIEW_LOGIN_LOG):
        return role is Role.ADMINISTRATOR
    if action is Action.CREATE_CLASS:
        return role is Role.TEACHER
    if action in (Action.CREATE_STUDENT, Action.FORM_GROUPS):
        if role is not Role.TEACHER:
            return False
        return res is None or res.class_teacher_id == p.user_id
    if action is Action.OPEN_SESSION:
        if role is not Role.TEACHER:
            return False
        return res is None or res.class_teacher_id == p.user_id
    if action in (Action.CLOSE_SESSION, Action.OBSERVE_GROUP):
        if role is not Role.TEACHER:
            return False
        return res is None or res.session_teacher_id == p.user_id
    if action is Action.JOIN_SESSION:
        if role is Role.TEACHER:
            return res is None or res.session_teacher_id == p.user_id
        if role is Role.STUDENT:
            return res is None or res.session_member_ids is None or (
                p.user_id in res.session_member_ids
            )
        return False
    if action in _STUDENT_SESSION_ACTIONS:
        if role is not Role.STUDENT:
            return False
        return res is None or res.session_member_ids is None or (
            p.user_id in res.session_member_ids
        )
    if action in (Action.POST_CHAT, Action.READ_CHAT):
        if role is Role.TEACHER:
            return res is None or res.session_teacher_id == p.user_id
        if role is Role.STUDENT:
            return res is None or res.group_member_ids is None or (
                p.user_id in res.group_member_ids
            )
        return False
    if action is Action.CREATE_CONSTRUCTION:
        return role in (Role.TEACHER, Role.STUDENT, Role.ANONYMOUS)
    if action is Action.MODIFY_CONSTRUCTION:
        if role is Role.ADMINISTRATOR:
            return False
        return res is None or res.owner_id == p.user_id
    if action is Action.READ_SHARED_CONSTRUCTION:
        # shared = readable by every registered user; anonymous is not registered
        return role in (Role.TEACHER, Role.STUDENT, Role.ADMINISTRATOR)
    if action is Action.START_RECORDING:
        return role in (Role.STUDENT, Role.ANONYMOUS)
    if action is Action.OPEN_REPLAY:
        if role is not Role.TEACHER:
            return False
        if res is None:
            return True
        if res.log_student_id == ANONYMOUS_USER_ID:
            return False  # anonymous logs are never exposed to teachers
        return res.log_student_teacher_id == p.user_id
    raise AssertionError(f"unhandled action {action}")


# ---------------------------------------------------------------------------
# credential hashing


def hash_credential(password: str, pepper: str, *, n: int = 2 ** 14) -> str:
    salt = secrets.token_bytes(16)
    dk = hashlib.scrypt(
        (password + pepper).encode("utf-8"), salt=salt, n=n, r=8, p=1, dklen=32
    )
    return "scrypt$%d$8$1$%s$%s" % (
        n, base64.b16encode(salt).decode(), base64.b16encode(dk).decode()
    )


def verify_credential(password: str, pepper: str, digest: str) -> bool:
    try:
        scheme, n, r, p, salt_hex, dk_hex = digest.split("$")
        if scheme != "scrypt":
            return False
        salt = base64.b16decode(salt_hex)
        want = base64.b16decode(dk_hex)
        got = hashlib.scrypt(
            (password + pepper).encode("utf-8"), salt=salt,
            n=int(n), r=int(r), p=int(p), dklen=len(want),
        )
        return hmac.compare_digest(got, want)
    except (ValueError, TypeError):
        return False


# ---------------------------------------------------------------------------
# directory


@dataclass
class _TokenEntry:
    user_id: str
    last_seen_ms: int


class Directory:
    """Account, class, group and construction registry.

    Mutations are serialized by an internal mutex and written through to the
    store (when one is attached); tokens and the in-memory login log mirror
    live only, the durable login log goes through the store's append stream.
    """

    def __init__(
        self,
        store: Optional[Store] = None,
        *,
        clock: Optional[Clock] = None,
        pepper: str = "",
        token_idle_ms: int = DEFAULT_TOKEN_IDLE_MS,
        scrypt_n: int = 2 ** 14,
    ):
        self.store = store
        self.clock = clock or SystemClock()
        self.pepper = pepper
        self.token_idle_ms = token_idle_ms
        self.scrypt_n = scrypt_n
        self._mutex = threading.RLock()
        self.users: Dict[str, UserAccount] = {}
        self.classes: Dict[str, SchoolClass] = {}
        self.groups: Dict[str, WorkGroup] = {}
        self.constructions: Dict[str, ConstructionRecord] = {}
        self.login_log: List[LoginLogEntry] = []
        self._by_username: Dict[str, str] = {}
        self._tokens: Dict[str, _TokenEntry] = {}
        if store is not None:
            self._load()
        self._ensure_anonymous()

    # -- persistence --------------------------------------------------------

    def _load(self) -> None:
        for key in self.store.list("users"):
            d = json.loads(self.store.get("users", key))
            acct = UserAccount(
                user_id=d["user_id"], username=d["username"],
                credential_digest=d["digest"], role=Role(d["role"]),
                teacher_id=d.get("teacher_id"), status=Status(d["status"]),
            )
            self.users[acct.user_id] = acct
            self._by_username[acct.username] = acct.user_id
        for key in self.store.list("classes"):
            d = json.loads(self.store.get("classes", key))
            self.classes[key] = SchoolClass(
                class_id=d["class_id"], teacher_id=d["teacher_id"],
                name=d["name"], member_student_ids=set(d["members"]),
            )
        for key in self.store.list("groups"):
            d = json.loads(self.store.get("groups", key))
            self.groups[key] = WorkGroup(
                group_id=d["group_id"], class_id=d["class_id"],
                member_student_ids=set(d["members"]),
            )
        for ns in ("constructions", "scrapbooks"):
            for key in self.store.list(ns):
                d = json.loads(self.store.get(ns, key))
                self.constructions[key] = ConstructionRecord(
                    construction_id=d["construction_id"], owner_id=d["owner_id"],
                    title=d["title"],
                    payload=base64.b64decode(d["payload"]),
                    shared=d["shared"], created_ts=d["created_ts"],
                    modified_ts=d["modified_ts"], scrapbook=d.get("scrapbook", False),
                )
        for raw in self.store.read_stream("login_log", "all"):
            d = json.loads(raw)
            self.login_log.append(
                LoginLogEntry(d["user_id"], d["ts"], LoginEvent(d["event"]))
            )

    def _save_user(self, acct: UserAccount) -> None:
        if self.store is None:
            return
        self.store.put("users", acct.user_id, json.dumps({
            "user_id": acct.user_id, "username": acct.username,
            "digest": acct.credential_digest, "role": acct.role.value,
            "teacher_id": acct.teacher_id, "status": acct.status.value,
        }).encode("utf-8"))

    def _save_class(self, sc: SchoolClass) -> None:
        if self.store is None:
            return
        self.store.put("classes", sc.class_id, json.dumps({
            "class_id": sc.class_id, "teacher_id": sc.teacher_id,
            "name": sc.name, "members": sorted(sc.member_student_ids),
        }).encode("utf-8"))

    def _save_group(self, g: WorkGroup) -> None:
        if self.store is None:
            return
        self.store.put("groups", g.group_id, json.dumps({
            "group_id": g.group_id, "class_id": g.class_id,
            "members": sorted(g.member_student_ids),
        }).encode("utf-8"))

    def _save_construction(self, rec: ConstructionRecord) -> None:
        if self.store is None:
            return
        ns = "scrapbooks" if rec.scrapbook else "constructions"
        self.store.put(ns, rec.construction_id, json.dumps({
            "construction_id": rec.construction_id, "owner_id": rec.owner_id,
            "title": rec.title,
            "payload": base64.b64encode(rec.payload).decode("ascii"),
            "shared": rec.shared, "created_ts": rec.created_ts,
            "modified_ts": rec.modified_ts, "scrapbook": rec.scrapbook,
        }).encode("utf-8"))

    def _log_login(self, user_id: str, event: LoginEvent) -> None:
        entry = LoginLogEntry(user_id, self.clock.now_ms(), event)
        self.login_log.append(entry)
        if self.store is not None:
            self.store.append("login_log", "all", json.dumps({
                "user_id": entry.user_id, "ts": entry.ts, "event": entry.event.value,
            }).encode("utf-8"))

    def _ensure_anonymous(self) -> None:
        if ANONYMOUS_USER_ID not in self.users:
            acct = UserAccount(
                user_id=ANONYMOUS_USER_ID, username=ANONYMOUS_USER_ID,
                credential_digest="", role=Role.ANONYMOUS,
            )
            self.users[acct.user_id] = acct
            self._by_username[acct.username] = acct.user_id

    # -- registration & user management -------------------------------------

    def _new_id(self) -> str:
        return uuid.uuid4().hex[:16]

    def bootstrap_admin(self, username: str, password: str) -> UserAccount:
        """Create the initial administrator if no admin exists yet."""
        with self._mutex:
            for acct in self.users.values():
                if acct.role is Role.ADMINISTRATOR:
                    return acct
            acct = UserAccount(
                user_id=self._new_id(), username=username,
                credential_digest=hash_credential(password, self.pepper, n=self.scrypt_n),
                role=Role.ADMINISTRATOR,
            )
            self.users[acct.user_id] = acct
            self._by_username[username] = acct.user_id
            self._save_user(acct)
            return acct

    def register_teacher(self, username: str, password: str) -> UserAccount:
        with self._mutex:
            if username in self._by_username:
                raise UsernameTaken(username)
            acct = UserAccount(
                user_id=self._new_id(), username=username,
                credential_digest=hash_credential(password, self.pepper, n=self.scrypt_n),
                role=Role.TEACHER, status=Status.PENDING,
            )
            self.users[acct.user_id] = acct
            self._by_username[username] = acct.user_id
            self._save_user(acct)
            return acct

    def confirm_teacher(self, actor: Principal, target_id: str) -> UserAccount:
        if not authorize(actor, Action.CONFIRM_TEACHER):
            raise Forbidden("only administrators confirm teachers")
        with self._mutex:
            acct = self.users.get(target_id)
            if acct is None:
                raise UnknownUser(target_id)
            if acct.role is not Role.TEACHER or acct.status is not Status.PENDING:
                raise NotPending(target_id)
            acct.status = Status.ACTIVE
            self._save_user(acct)
            return acct

    def create_student(
        self, actor: Principal, class_id: str, username: str, password: str
    ) -> UserAccount:
        with self._mutex:
            sc = self.classes.get(class_id)
            if sc is None:
                raise UnknownClass(class_id)
            if not authorize(actor, Action.CREATE_STUDENT,
                             ResourceCtx(class_teacher_id=sc.teacher_id)):
                raise Forbidden("not the owning teacher")
            if username in self._by_username:
                raise UsernameTaken(username)
            acct = UserAccount(
                user_id=self._new_id(), username=username,
                credential_digest=hash_credential(password, self.pepper, n=self.scrypt_n),
                role=Role.STUDENT, teacher_id=actor.user_id,
            )
            self.users[acct.user_id] = acct
            self._by_username[username] = acct.user_id
            sc.member_student_ids.add(acct.user_id)
            self._save_user(acct)
            self._save_class(sc)
            return acct

    # -- classes & groups ----------------------------------------------------

    def create_class(self, actor: Principal, name: str) -> SchoolClass:
        if not authorize(actor, Action.CREATE_CLASS):
            raise Forbidden("only teachers create classes")
        with self._mutex:
            sc = SchoolClass(class_id=self._new_id(), teacher_id=actor.user_id, name=name)
            self.classes[sc.class_id] = sc
            self._save_class(sc)
            return sc

    def form_groups(
        self, actor: Principal, class_id: str, partition: Sequence[Set[str]]
    ) -> List[WorkGroup]:
        with self._mutex:
            sc = self.classes.get(class_id)
            if sc is None:
                raise UnknownClass(class_id)
            if not authorize(actor, Action.FORM_GROUPS,
                             ResourceCtx(class_teacher_id=sc.teacher_id)):
                raise Forbidden("not the owning teacher")
            seen: Set[str] = set()
            for members in partition:
                if not members:
                    raise NonMember("empty group")
                if seen & set(members):
                    raise OverlappingGroups(sorted(seen & set(members)))
                if not set(members) <= sc.member_student_ids:
                    raise NonMember(sorted(set(members) - sc.member_student_ids))
                seen |= set(members)
            # replace the class's previous partition
            for gid in [g for g, grp in self.groups.items() if grp.class_id == class_id]:
                del self.groups[gid]
                if self.store is not None:
                    self.store.delete("groups", gid)
            out = []
            for members in partition:
                g = WorkGroup(group_id=self._new_id(), class_id=class_id,
                              member_student_ids=set(members))
                self.groups[g.group_id] = g
                self._save_group(g)
                out.append(g)
            return out

    def groups_of_class(self, class_id: str) -> List[WorkGroup]:
        return sorted(
            (g for g in self.groups.values() if g.class_id == class_id),
            key=lambda g: g.group_id,
        )

    # -- constructions -------------------------------------------------------

    def create_construction(
        self, actor: Principal, title: str, payload: bytes, *,
        shared: bool = False, scrapbook: bool = False,
    ) -> ConstructionRecord:
        if not authorize(actor, Action.CREATE_CONSTRUCTION):
            raise Forbidden("role may not create constructions")
        kernel.parse_construction(payload)  # reject malformed payloads early
        with self._mutex:
            now = self.clock.now_ms()
            rec = ConstructionRecord(
                construction_id=self._new_id(), owner_id=actor.user_id,
                title=title, payload=bytes(payload), shared=shared,
                created_ts=now, modified_ts=now, scrapbook=scrapbook,
            )
            self.constructions[rec.construction_id] = rec
            self._save_construction(rec)
            return rec

    def get_construction(self, actor: Principal, construction_id: str) -> ConstructionRecord:
        rec = self.constructions.get(construction_id)
        if rec is None:
            raise UnknownConstruction(construction_id)
        if rec.owner_id == actor.user_id:
            return rec
        if rec.shared and authorize(actor, Action.READ_SHARED_CONSTRUCTION):
            return rec
        raise Forbidden("construction is not shared with you")

    def constructions_of(self, owner_id: str) -> List[ConstructionRecord]:
        return sorted(
            (r for r in self.constructions.values() if r.owner_id == owner_id),
            key=lambda r: r.created_ts,
        )

    def shared_constructions(self) -> List[ConstructionRecord]:
        return sorted(
            (r for r in self.constructions.values() if r.shared),
            key=lambda r: r.created_ts,
        )

    # -- authentication ------------------------------------------------------

    def authenticate(self, username: str, password: str) -> str:
        """Verify credentials and mint a session token."""
        with self._mutex:
            user_id = self._by_username.get(username)
            acct = self.users.get(user_id) if user_id else None
            ok = (
                acct is not None
                and acct.role is not Role.ANONYMOUS
                and verify_credential(password, self.pepper, acct.credential_digest)
                and acct.status is Status.ACTIVE
            )
            self._log_login(user_id or username, LoginEvent.SUCCESS if ok else LoginEvent.FAILURE)
            if not ok:
                if acct is not None and acct.status is Status.PENDING:
                    raise AuthDenied("account pending confirmation")
                raise AuthDenied("bad username or password")
            return self._mint_token(acct.user_id)

    def login_anonymous(self) -> str:
        with self._mutex:
            self._log_login(ANONYMOUS_USER_ID, LoginEvent.SUCCESS)
            return self._mint_token(ANONYMOUS_USER_ID)

    def logout(self, token: str) -> None:
        with self._mutex:
            entry = self._tokens.pop(token, None)
            if entry is not None:
                self._log_login(entry.user_id, LoginEvent.LOGOUT)

    def _mint_token(self, user_id: str) -> str:
        token = secrets.token_hex(16)  # 128-bit opaque token
        self._tokens[token] = _TokenEntry(user_id, self.clock.now_ms())
        return token

    def resolve(self, token: str) -> Principal:
        with self._mutex:
            entry = self._tokens.get(token)
            if entry is None:
                raise UnknownToken("unknown token")
            now = self.clock.now_ms()
            if now - entry.last_seen_ms > self.token_idle_ms:
                del self._tokens[token]
                raise UnknownToken("token expired")
            entry.last_seen_ms = now
            acct = self.users[entry.user_id]
            return Principal(acct.user_id, acct.role, acct.teacher_id)

    def principal_of(self, user_id: str) -> Principal:
        acct = self.users.get(user_id)
        if acct is None:
            raise UnknownUser(user_id)
        return Principal(acct.user_id, acct.role, acct.teacher_id)
