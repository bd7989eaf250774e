"""Verification toolkit for steady Darcy flow in heterogeneous aquifers."""

from ._backend import backend_name

__version__ = "0.1.0"
__all__ = ["backend_name", "__version__"]
