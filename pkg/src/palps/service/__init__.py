"""HTTP annotation service: FastAPI app plus the run/queue machinery."""

from .app import create_app
from .runs import RunManager, ServiceError

__all__ = ["create_app", "RunManager", "ServiceError"]
