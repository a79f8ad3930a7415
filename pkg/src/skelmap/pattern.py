"""Ordered vector representation of a first-map winner trajectory.

A sequence's frames trace a path of winner neurons on the first map.
Repeated consecutive winners are collapsed into key activations, and the
resulting polyline is resampled to ``K`` points at equal arc-length spacing,
so a pattern vector has a fixed length regardless of how long or how fast
the action was performed.
"""

from __future__ import annotations

import numpy as np

from . import som
from .errors import ValidationError
from .som import Lattice


def trace(lattice: Lattice, inputs) -> np.ndarray:
    """Winner coordinates ``(i, j)`` for each input row, shape ``(T, 2)`` float."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != lattice.dim:
        raise ValidationError(f"inputs must be (T, {lattice.dim})")
    win = som.best_matching_many(lattice, x)
    return np.stack(np.divmod(win, lattice.cols), axis=1).astype(np.float64)


def compress(points) -> np.ndarray:
    """Drop points equal to their predecessor."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(p) == 0:
        return p
    keep = np.ones(len(p), dtype=bool)
    keep[1:] = np.any(p[1:] != p[:-1], axis=1)
    return p[keep]


def resample_points(points, k: int) -> np.ndarray:
    """``k`` points spaced evenly by arc length along the polyline, shape ``(k, 2)``."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(p) == 0:
        raise ValidationError("cannot resample an empty trace")
    if k < 2:
        raise ValidationError("K must be >= 2")
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] == 0.0:
        return np.repeat(p[:1], k, axis=0)
    target = np.linspace(0.0, arc[-1], k)
    # zero-length segments would make np.interp ambiguous
    keep = np.concatenate([[True], seg > 0])
    arc, p = arc[keep], p[keep]
    return np.stack([np.interp(target, arc, p[:, 0]), np.interp(target, arc, p[:, 1])], axis=1)


def normalize(points: np.ndarray, rows: int, cols: int) -> np.ndarray:
    scale = np.array([max(rows - 1, 1), max(cols - 1, 1)], dtype=np.float64)
    return points / scale


def resample(points, k: int, rows: int, cols: int) -> np.ndarray:
    """Pattern vector ``(i1, j1, ..., iK, jK)`` in [0, 1] from a trace on a rows x cols map."""
    return normalize(resample_points(compress(points), k), rows, cols).ravel()


def pattern_vector(lattice: Lattice, inputs, k: int) -> np.ndarray:
    return resample(trace(lattice, inputs), k, lattice.rows, lattice.cols)
