"""Belief map container shared by both filters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BeliefMap:
    """Per-cell belief field plus its thresholded view (cell true iff field > threshold)."""

    field: np.ndarray
    threshold: float = 0.5

    @property
    def binary(self) -> np.ndarray:
        return self.field > self.threshold

    @property
    def shape(self):
        return self.field.shape

    @classmethod
    def empty(cls, shape) -> BeliefMap:
        return cls(np.zeros(shape))


def cells_within_radius(x: float, y: float, radius: float, shape, cell_size: float) -> np.ndarray:
    """Flat indices of cells whose centre lies within ``radius`` of ground point (x, y)."""
    h, w = shape
    i0 = max(int(np.floor((x - radius) / cell_size)), 0)
    i1 = min(int(np.floor((x + radius) / cell_size)) + 1, h)
    j0 = max(int(np.floor((y - radius) / cell_size)), 0)
    j1 = min(int(np.floor((y + radius) / cell_size)) + 1, w)
    if i0 >= i1 or j0 >= j1:
        return np.zeros(0, dtype=np.int64)
    ii, jj = np.mgrid[i0:i1, j0:j1]
    d2 = ((ii + 0.5) * cell_size - x) ** 2 + ((jj + 0.5) * cell_size - y) ** 2
    keep = d2 <= radius * radius
    return (ii[keep] * w + jj[keep]).astype(np.int64)
