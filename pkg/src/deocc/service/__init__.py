"""HTTP service layer: FastAPI app plus the pydantic wire schemas."""

from .app import app

__all__ = ["app"]
