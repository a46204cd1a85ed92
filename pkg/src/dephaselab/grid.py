"""Ordered multi-time grids ``t_0 <= t_1 <= ... <= t_{m-1}``."""

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ModelError


@dataclass(frozen=True)
class TimeGrid:
    """Nonnegative nondecreasing time points.

    ``increments[0] = t_0`` and ``increments[k] = t_k - t_{k-1}``; the grid
    spans ``m = len(points)`` intervals.
    """

    points: tuple

    def __init__(self, points):
        pts = tuple(float(p) for p in np.atleast_1d(np.asarray(points, dtype=float)))
        if len(pts) == 0:
            raise ModelError("time grid needs at least one point")
        if pts[0] < 0 or any(b < a for a, b in zip(pts, pts[1:])):
            raise ModelError(f"time grid must be nonnegative and nondecreasing, got {pts}")
        object.__setattr__(self, "points", pts)

    @property
    def m(self):
        return len(self.points)

    @property
    def increments(self):
        return np.diff(np.concatenate([[0.0], self.points]))

    @property
    def edges(self):
        """``(0, t_0, ..., t_{m-1})``."""
        return np.concatenate([[0.0], self.points])

    def prefix(self, m):
        """Grid of the first ``m`` points."""
        return TimeGrid(self.points[:m])

    def __iter__(self) -> Iterator[float]:
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    @classmethod
    def random(cls, rng, m, lo=0.05, hi=1.0):
        """Grid with increments drawn uniformly from ``[lo, hi]``."""
        return cls(np.cumsum(rng.uniform(lo, hi, size=m)))


def as_grid(grid):
    return grid if isinstance(grid, TimeGrid) else TimeGrid(grid)


def check_tuple(tup, m, d):
    """Validate an index tuple ``(j_0, l_0, ..., j_{m-1}, l_{m-1})``."""
    tup = tuple(int(i) for i in tup)
    if len(tup) != 2 * m:
        raise ModelError(f"index tuple of length {len(tup)} does not match a grid of {m} intervals")
    if any(i < 0 or i >= d for i in tup):
        raise ModelError(f"index tuple {tup} out of range for d={d}")
    return tup
