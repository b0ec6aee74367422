from __future__ import annotations

import numpy as np

from .geometry import GeometryError

__all__ = ["ConfigError", "GeometryError", "SingularityError"]


class ConfigError(ValueError):
    """Invalid experiment or search configuration."""


class SingularityError(np.linalg.LinAlgError):
    """A bound matrix is singular or too badly conditioned to invert."""

    def __init__(self, message: str, condition: float | None = None, rank: int | None = None):
        super().__init__(message)
        self.condition = condition
        self.rank = rank
