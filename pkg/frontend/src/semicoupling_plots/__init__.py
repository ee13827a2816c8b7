"""Figure rendering for semicoupling run directories.

Consumes only the documented CSV and JSON report files written by the
solver pipeline; the solver package itself is never imported.
"""

__version__ = "0.1.0"

from .render import KINDS, FigureSpec, render
from .schemas import SchemaVersionError

__all__ = ["KINDS", "FigureSpec", "render", "SchemaVersionError", "__version__"]
