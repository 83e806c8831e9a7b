"""Figure regeneration from gibbsim experiment CSV/JSON outputs."""

from .figures import FigureSpec, render
from .schema import KINDS, SchemaError

__all__ = ["FigureSpec", "render", "KINDS", "SchemaError"]
__version__ = "0.1.0"
