from .config import ServerConfig
from .app import create_app

__all__ = ["ServerConfig", "create_app"]
