"""Server configuration: file < environment < command-line flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from ..sessions import DEFAULT_SYNC_INTERVAL_MS


@dataclass
class ServerConfig:
    port: int = 8080
    data_dir: str = "geolab-data"
    sync_interval_ms: int = DEFAULT_SYNC_INTERVAL_MS
    session_idle_expiry_ms: int = 12 * 3600 * 1000
    lock_idle_timeout_ms: Optional[int] = None
    admin_username: str = "admin"
    admin_password: str = "change-me"
    pepper: str = ""
    static_dir: Optional[str] = None
    scrypt_n: int = 2 ** 14


def load_config(
    config_file: Optional[str] = None,
    env: Optional[dict] = None,
    **flag_overrides,
) -> ServerConfig:
    env = os.environ if env is None else env
    values: dict = {}
    if config_file:
        raw = json.loads(Path(config_file).read_text(encoding="utf-8"))
        known = {f.name for f in fields(ServerConfig)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
    if "GEOLAB_PORT" in env:
        values["port"] = int(env["GEOLAB_PORT"])
    if "GEOLAB_DATA_DIR" in env:
        values["data_dir"] = env["GEOLAB_DATA_DIR"]
    for key, val in flag_overrides.items():
        if val is not None:
            values[key] = val
    return ServerConfig(**values)
