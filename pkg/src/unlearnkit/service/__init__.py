from . import schemas, stages
from .app import app

__all__ = ["app", "schemas", "stages"]
