"""Empirical measures, projections and one-dimensional quantile machinery.

Every distance in :mod:`swest.transport` reduces to sorted one-dimensional
samples. Quantiles are piecewise linear through the order statistics with
knots at ``i / (k - 1)``, so ``quantile(0)`` is the minimum, ``quantile(1)``
the maximum, and :func:`cdf` is the functional inverse of :func:`quantile`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    DataParseError,
    DimensionMismatch,
    EmptyInput,
    NonFiniteInput,
    OutOfRange,
)

UNIT_NORM_TOL = 1e-12


def _frozen_array(values, ndim):
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyInput("empty input")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("input contains NaN or infinite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Uniformly weighted atoms at the rows of an ``(n, d)`` matrix."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 2 and pts.shape[0] == 0:
            raise EmptyInput("an empirical measure needs at least one point")
        object.__setattr__(self, "points", _frozen_array(pts, 2))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"EmpiricalMeasure(n={self.n}, d={self.d})"


def make_measure(points) -> EmpiricalMeasure:
    """Wrap an ``(n, d)`` array-like as an :class:`EmpiricalMeasure`.

    A 1-d input is read as ``n`` points in dimension 1.
    """
    if isinstance(points, EmpiricalMeasure):
        return points
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return EmpiricalMeasure(arr)


def as_points(X) -> np.ndarray:
    """Return the point matrix of a measure or array-like."""
    if isinstance(X, EmpiricalMeasure):
        return X.points
    return make_measure(X).points


@dataclass(frozen=True, eq=False)
class SortedSample1D:
    """Ascending sample of reals with interpolated CDF and quantile."""

    values: np.ndarray

    def __post_init__(self):
        vals = _frozen_array(self.values, 1)
        if np.any(np.diff(vals) < 0):
            raise ValueError("values must be sorted ascending")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_unsorted(cls, values) -> "SortedSample1D":
        return cls(np.sort(np.asarray(values, dtype=float)))

    @property
    def k(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.k

    def quantile(self, t):
        return quantile(self, t)

    def cdf(self, x):
        return cdf(self, x)


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    """``L`` unit directions in R^d stored as rows."""

    directions: np.ndarray

    def __post_init__(self):
        dirs = np.asarray(self.directions, dtype=float)
        if dirs.ndim == 1:
            dirs = dirs[None, :]
        dirs = _frozen_array(dirs, 2)
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValueError("every projection direction must have unit norm")
        object.__setattr__(self, "directions", dirs)

    @property
    def L(self) -> int:
        return self.directions.shape[0]

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def __len__(self):
        return self.L


def as_projection_set(proj) -> ProjectionSet:
    if isinstance(proj, ProjectionSet):
        return proj
    return ProjectionSet(proj)


def _check_direction(u, d):
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != d:
        raise DimensionMismatch(f"direction has dimension {u.shape[0]}, measure has {d}")
    if abs(np.linalg.norm(u) - 1.0) > UNIT_NORM_TOL:
        raise ValueError("projection direction must have unit norm")
    return u


def project(mu, u) -> SortedSample1D:
    """Sorted inner products ``<u, x_i>`` of every atom of ``mu``."""
    pts = as_points(mu)
    u = _check_direction(u, pts.shape[1])
    return SortedSample1D(np.sort(pts @ u))


def project_sorted(points, directions) -> np.ndarray:
    """Project ``(n, d)`` points on ``(L, d)`` directions; rows sorted.

    Vectorized counterpart of :func:`project` returning an ``(L, n)`` array.
    """
    points = np.asarray(points, dtype=float)
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if points.shape[1] != directions.shape[1]:
        raise DimensionMismatch(
            f"points have dimension {points.shape[1]}, "
            f"projections have dimension {directions.shape[1]}"
        )
    return np.sort(directions @ points.T, axis=1)


def interp_quantile(sorted_rows, t):
    """Interpolated quantiles of each row of ``sorted_rows``.

    ``sorted_rows`` has shape ``(..., k)``; ``t`` broadcasts against the
    leading axes with its last axis holding query levels in [0, 1].
    """
    sorted_rows = np.asarray(sorted_rows, dtype=float)
    t = np.asarray(t, dtype=float)
    k = sorted_rows.shape[-1]
    if k == 1:
        if sorted_rows.ndim == 1:
            return np.full(t.shape, sorted_rows[0])
        return np.broadcast_to(sorted_rows, np.broadcast_shapes(sorted_rows.shape, t.shape)).copy()
    pos = t * (k - 1)
    lo = np.clip(np.floor(pos).astype(np.intp), 0, k - 2)
    frac = pos - lo
    if sorted_rows.ndim == 1:
        a = sorted_rows[lo]
        b = sorted_rows[lo + 1]
    else:
        lead = np.broadcast_shapes(sorted_rows.shape[:-1], t.shape[:-1])
        rows = np.broadcast_to(sorted_rows, lead + (k,))
        idx = np.broadcast_to(lo, lead + (lo.shape[-1],))
        a = np.take_along_axis(rows, idx, axis=-1)
        b = np.take_along_axis(rows, idx + 1, axis=-1)
    # this form stays within [a, b] under rounding
    return np.minimum(a + frac * (b - a), b)


def quantile(s: SortedSample1D, t):
    """Piecewise-linear quantile of ``s`` at level(s) ``t`` in [0, 1]."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(t_arr)) or np.any((t_arr < 0.0) | (t_arr > 1.0)):
        raise OutOfRange("quantile level must lie in [0, 1]")
    out = interp_quantile(s.values, t_arr)
    return float(out) if np.ndim(out) == 0 else out


def interp_cdf(values, x):
    """Inverse of :func:`interp_quantile` for one sorted row.

    Flat runs of tied values map to the largest level reaching them; a single
    atom has CDF 0 below, 0.5 at, and 1 above it.
    """
    values = np.asarray(values, dtype=float)
    x = np.asarray(x, dtype=float)
    k = values.shape[0]
    if k == 1:
        v = values[0]
        return np.where(x < v, 0.0, np.where(x > v, 1.0, 0.5))
    j = np.searchsorted(values, x, side="right") - 1
    inner = np.clip(j, 0, k - 2)
    lo = values[inner]
    hi = values[inner + 1]
    # j in [0, k-2] implies lo <= x < hi, hence hi > lo
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(hi > lo, (x - lo) / (hi - lo), 0.0)
    t = (inner + frac) / (k - 1)
    return np.where(j < 0, 0.0, np.where(j >= k - 1, 1.0, t))


def cdf(s: SortedSample1D, x):
    """Piecewise-linear CDF of ``s``, clamped to [0, 1]."""
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise NonFiniteInput("cdf argument must be finite")
    out = interp_cdf(s.values, x_arr)
    return float(out) if np.ndim(out) == 0 else out


def read_csv_measure(path) -> EmpiricalMeasure:
    """Load a headerless CSV of decimal floats, one point per row.

    Raises :class:`DataParseError` naming the offending (1-based) row.
    """
    path = Path(path)
    rows = []
    width = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                vals = [float(cell) for cell in row]
            except ValueError:
                raise DataParseError(f"{path}: row {lineno}: non-numeric entry", row=lineno) from None
            if not all(np.isfinite(vals)):
                raise DataParseError(f"{path}: row {lineno}: non-finite entry", row=lineno)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DataParseError(
                    f"{path}: row {lineno}: expected {width} columns, found {len(vals)}", row=lineno
                )
            rows.append(vals)
    if not rows:
        raise DataParseError(f"{path}: no data rows", row=None)
    return EmpiricalMeasure(np.array(rows))
