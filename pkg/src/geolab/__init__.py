"""Collaborative geometry laboratory: construction kernel, accounts,
group sessions with a single-writer lock, session recording and replay,
embedded storage, and an HTTP/WebSocket server tying them together."""

__version__ = "0.1.0"
