"""Symbolic checker for Lie algebroid connections and bundle cocycles."""

__version__ = "0.1.0"

from ._kernel import BACKEND as KERNEL_BACKEND  # noqa: F401
