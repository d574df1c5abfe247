"""Embedded durable store: log-structured files per namespace with an
in-memory index rebuilt on open.

Each namespace directory holds a MANIFEST naming the active segment and one
append-only segment file.  Every committed transaction (or appended record)
is a single checksummed line; recovery replays the segment and truncates at
the first torn or corrupt line, which gives all-or-none visibility per
commit without any further machinery.

Values are opaque bytes; the owning modules define their own encodings.
One logical writer per namespace (a mutex); reads come from the in-memory
index and may run concurrently.
"""

from __future__ import annotations

import base64
import json
import os
import threading
import zlib
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

NAMESPACES = (
    "users", "classes", "groups", "constructions", "sessions",
    "chats", "logs", "scrapbooks", "login_log",
)
APPEND_NAMESPACES = frozenset({"logs", "login_log", "chats"})

SEGMENT_NAME = "segment-000001.log"


class StorageError(Exception):
    pass


class StoreClosed(StorageError):
    pass


class IoFailure(StorageError):
    pass


class NamespaceMisuse(StorageError):
    """Append on a key-value namespace or vice versa."""


class UnknownNamespace(StorageError):
    pass


# test hook: receives (fileobj, data) and must perform the write; it may
# write a partial prefix and raise to simulate a crash mid-record.
WriteHook = Callable[[object, bytes], None]


def _encode_record(obj: dict) -> bytes:
    payload = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return b"%08x " % crc + payload + b"\n"


def _decode_line(line: bytes) -> Optional[dict]:
    if len(line) < 10 or line[8:9] != b" ":
        return None
    try:
        crc = int(line[:8], 16)
    except ValueError:
        return None
    payload = line[9:]
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        return None
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None


class Store:
    def __init__(self, data_dir, *, write_hook: Optional[WriteHook] = None):
        self.data_dir = Path(data_dir)
        self._write_hook = write_hook
        self._closed = False
        self._locks = {ns: threading.Lock() for ns in NAMESPACES}
        self._files: Dict[str, object] = {}
        self._kv: Dict[str, Dict[str, bytes]] = {ns: {} for ns in NAMESPACES}
        self._streams: Dict[str, Dict[str, List[bytes]]] = {
            ns: {} for ns in APPEND_NAMESPACES
        }
        for ns in NAMESPACES:
            self._open_namespace(ns)

    # -- lifecycle ----------------------------------------------------------

    def _open_namespace(self, ns: str) -> None:
        nsdir = self.data_dir / ns
        nsdir.mkdir(parents=True, exist_ok=True)
        manifest = nsdir / "MANIFEST"
        if not manifest.exists():
            manifest.write_text(SEGMENT_NAME + "\n", encoding="utf-8")
        segment = nsdir / manifest.read_text(encoding="utf-8").strip()
        valid_end = 0
        if segment.exists():
            raw = segment.read_bytes()
            pos = 0
            while True:
                nl = raw.find(b"\n", pos)
                if nl < 0:
                    break
                record = _decode_line(raw[pos:nl])
                if record is None:
                    break
                self._apply(ns, record)
                pos = nl + 1
                valid_end = pos
            if valid_end < len(raw):
                with open(segment, "r+b") as f:
                    f.truncate(valid_end)
        self._files[ns] = open(segment, "ab")

    def _apply(self, ns: str, record: dict) -> None:
        if record.get("t") == "txn":
            for mut in record["m"]:
                if mut[0] == "p":
                    self._kv[ns][mut[1]] = base64.b64decode(mut[2])
                elif mut[0] == "d":
                    self._kv[ns].pop(mut[1], None)
        elif record.get("t") == "a":
            self._streams[ns].setdefault(record["k"], []).append(
                base64.b64decode(record["v"])
            )

    def close(self) -> None:
        self._closed = True
        for f in self._files.values():
            try:
                f.flush()
                os.fsync(f.fileno())
            except OSError:
                pass
            f.close()
        self._files.clear()

    def _check_open(self, ns: str) -> None:
        if self._closed:
            raise StoreClosed("store is closed")
        if ns not in self._locks:
            raise UnknownNamespace(f"unknown namespace {ns!r}")

    def _write(self, ns: str, data: bytes) -> None:
        f = self._files[ns]
        try:
            if self._write_hook is not None:
                self._write_hook(f, data)
            else:
                f.write(data)
            f.flush()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    # -- key-value ----------------------------------------------------------

    def put(self, ns: str, key: str, value: bytes) -> None:
        self.commit(ns, [("p", key, value)])

    def delete(self, ns: str, key: str) -> None:
        self.commit(ns, [("d", key)])

    def commit(self, ns: str, mutations: Sequence[Tuple]) -> None:
        """Atomically apply a list of ('p', key, bytes) / ('d', key) mutations."""
        self._check_open(ns)
        if ns in APPEND_NAMESPACES:
            raise NamespaceMisuse(f"{ns} is append-only")
        encoded = []
        for mut in mutations:
            if mut[0] == "p":
                encoded.append(["p", mut[1], base64.b64encode(mut[2]).decode("ascii")])
            elif mut[0] == "d":
                encoded.append(["d", mut[1]])
            else:
                raise ValueError(f"unknown mutation {mut[0]!r}")
        record = _encode_record({"t": "txn", "m": encoded})
        with self._locks[ns]:
            self._write(ns, record)
            for mut in mutations:
                if mut[0] == "p":
                    self._kv[ns][mut[1]] = bytes(mut[2])
                else:
                    self._kv[ns].pop(mut[1], None)

    def get(self, ns: str, key: str) -> Optional[bytes]:
        self._check_open(ns)
        return self._kv[ns].get(key)

    def list(self, ns: str, prefix: str = "") -> List[str]:
        self._check_open(ns)
        if ns in APPEND_NAMESPACES:
            keys = self._streams[ns].keys()
        else:
            keys = self._kv[ns].keys()
        return sorted(k for k in keys if k.startswith(prefix))

    # -- append streams -----------------------------------------------------

    def append(self, ns: str, key: str, record: bytes) -> int:
        self._check_open(ns)
        if ns not in APPEND_NAMESPACES:
            raise NamespaceMisuse(f"{ns} is not an append namespace")
        encoded = _encode_record(
            {"t": "a", "k": key, "v": base64.b64encode(record).decode("ascii")}
        )
        with self._locks[ns]:
            self._write(ns, encoded)
            stream = self._streams[ns].setdefault(key, [])
            stream.append(bytes(record))
            return len(stream) - 1

    def read_stream(self, ns: str, key: str) -> List[bytes]:
        self._check_open(ns)
        if ns not in APPEND_NAMESPACES:
            raise NamespaceMisuse(f"{ns} is not an append namespace")
        return list(self._streams[ns].get(key, []))
