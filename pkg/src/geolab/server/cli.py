"""Command line entry point for the collaboration server."""

from __future__ import annotations

import argparse
import os
import socket
import sys

from .config import load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geolab-server",
        description="Collaborative dynamic-geometry laboratory server.",
    )
    parser.add_argument("--port", type=int, default=None)
    parser.add_argument("--data-dir", default=None)
    parser.add_argument("--sync-interval-ms", type=int, default=None)
    parser.add_argument("--lock-timeout-ms", type=int, default=None)
    parser.add_argument("--config", default=None, metavar="FILE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(
            args.config,
            port=args.port,
            data_dir=args.data_dir,
            sync_interval_ms=args.sync_interval_ms,
            lock_idle_timeout_ms=args.lock_timeout_ms,
        )
    except (ValueError, OSError) as exc:
        print(f"geolab-server: bad configuration: {exc}", file=sys.stderr)
        return 2

    os.makedirs(config.data_dir, exist_ok=True)
    if not os.access(config.data_dir, os.W_OK):
        print(f"geolab-server: data dir not writable: {config.data_dir}",
              file=sys.stderr)
        return 2
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            probe.bind(("0.0.0.0", config.port))
        except OSError:
            print(f"geolab-server: port {config.port} already in use",
                  file=sys.stderr)
            return 2

    import uvicorn

    from .app import create_app

    uvicorn.run(create_app(config), host="0.0.0.0", port=config.port,
                log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
