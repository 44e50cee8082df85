"""Pseudo-annotation pipeline for entity-level ADR classification."""

from adrpipe._core import *  # noqa: F401,F403
from adrpipe._core import __doc__  # noqa: F401
