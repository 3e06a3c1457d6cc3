"""Target-and-command-oriented quadrotor aerobatics workbench."""

from .backend import HAVE_COMPILED, select_backend

__version__ = "0.1.0"

__all__ = ["HAVE_COMPILED", "select_backend", "__version__"]
