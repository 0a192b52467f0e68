"""HTTP service layer wrapping the reconstruction core."""

from .app import app

__all__ = ["app"]
