"""Vector arithmetic, box feasible sets, and the clipping operators.

All decision arithmetic is plain float64 ``numpy`` on 1-D arrays. The
feasible set is an axis-aligned box; its Euclidean projection is the
coordinate-wise clamp, which keeps every operation exact and cheap. Ball or
polytope sets would slot in behind :func:`project_box` later.
"""

from dataclasses import dataclass

import numpy as np


def as_vector(v, name="vector"):
    """Coerce to a finite 1-D float64 array."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned box {x : lower <= x <= upper}, coordinate-wise."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_vector(self.lower, "lower")
        hi = as_vector(self.upper, "upper")
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same length")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, half_width, dim):
        """The box [-half_width, half_width]^dim."""
        if half_width < 0:
            raise ValueError("half_width must be nonnegative")
        return cls(np.full(dim, -float(half_width)), np.full(dim, float(half_width)))

    @property
    def dim(self):
        return self.lower.shape[0]

    def radius(self):
        """sup of the Euclidean norm over the box (attained at a corner)."""
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


def project_box(x, box):
    """Euclidean projection onto a box: the coordinate-wise clamp."""
    x = np.asarray(x, dtype=float)
    if x.shape != box.lower.shape:
        raise ValueError(
            f"dimension mismatch: point has {x.shape}, box has {box.lower.shape}"
        )
    return np.clip(x, box.lower, box.upper)


def pos_part(v):
    """Coordinate-wise max(v, 0), the projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def euclid_norm(v):
    """Euclidean norm as a float."""
    return float(np.linalg.norm(np.asarray(v, dtype=float)))
