from .app import create_app
from .controller import RunController

__all__ = ["create_app", "RunController"]
