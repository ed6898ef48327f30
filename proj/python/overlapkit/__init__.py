"""Eigenvector overlaps of truncated rectangular random matrices."""

from ._overlapkit import *  # noqa: F401,F403
from ._overlapkit import __version__  # noqa: F401
