"""Sorted support-point sets with cached log-target values."""

from bisect import bisect_left
import math

import numpy as np

from .errors import DuplicatePoint, NonFiniteValue, TooFewPoints


def default_min_separation(points):
    """Duplicate tolerance scaled to the spread of ``points``."""
    return 1e-9 * max(1.0, abs(max(points) - min(points)))


class SupportSet:
    """Immutable sorted abscissae ``points`` with ``log_values = log π̃(points)``.

    Instances behave as values: :meth:`insert` returns a new set and leaves
    the original untouched.  The lists are plain Python floats because the
    samplers touch them once per iteration.
    """

    __slots__ = ("points", "log_values", "min_separation")

    def __init__(self, points, log_values, min_separation):
        self.points = points
        self.log_values = log_values
        self.min_separation = min_separation

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __eq__(self, other):
        if not isinstance(other, SupportSet):
            return NotImplemented
        return self.points == other.points and self.log_values == other.log_values

    def __repr__(self):
        return f"SupportSet(m={len(self.points)}, points={self.points!r})"

    def as_arrays(self):
        return np.asarray(self.points), np.asarray(self.log_values)

    def locate_interval(self, x):
        """Index ``j`` with ``s_j < x <= s_{j+1}`` (``0`` left of ``s_1``, ``m`` right of ``s_m``)."""
        return bisect_left(self.points, x)

    def find_duplicate(self, z):
        """Return True if ``z`` lies within ``min_separation`` of a stored point."""
        pts = self.points
        k = bisect_left(pts, z)
        tol = self.min_separation
        if k < len(pts) and pts[k] - z < tol:
            return True
        return k > 0 and z - pts[k - 1] < tol

    def insert(self, z, v):
        """New set with ``(z, v)`` added in sorted position.

        Raises DuplicatePoint when ``z`` is too close to an existing point and
        NonFiniteValue when ``v`` is not finite.
        """
        if not math.isfinite(v):
            raise NonFiniteValue(f"log-target at {z!r} is {v!r}")
        if self.find_duplicate(z):
            raise DuplicatePoint(f"{z!r} is within {self.min_separation:g} of a support point")
        k = bisect_left(self.points, z)
        points = self.points[:k] + [z] + self.points[k:]
        values = self.log_values[:k] + [v] + self.log_values[k:]
        return SupportSet(points, values, self.min_separation)


def new_support_set(points, log_target, min_separation=None):
    """Sort ``points`` and cache ``log_target`` at each of them.

    Parameters
    ----------
    points : sequence of float
        At least two distinct finite abscissae, in any order.
    log_target : callable
        Scalar log-density ``V = log π̃``.
    min_separation : float, optional
        Duplicate tolerance; defaults to ``1e-9 * max(1, s_m - s_1)``.
    """
    pts = sorted(float(p) for p in points)
    if len(pts) < 2:
        raise TooFewPoints("a support set needs at least two points")
    if not all(math.isfinite(p) for p in pts):
        raise NonFiniteValue("support points must be finite")
    if min_separation is None:
        min_separation = default_min_separation(pts)
    for a, b in zip(pts, pts[1:]):
        if b - a < min_separation:
            raise DuplicatePoint(f"points {a!r} and {b!r} are closer than {min_separation:g}")
    values = []
    for p in pts:
        v = float(log_target(p))
        if not math.isfinite(v):
            raise NonFiniteValue(f"log-target at {p!r} is {v!r}")
        values.append(v)
    return SupportSet(pts, values, float(min_separation))


def insert(support, z, v):
    return support.insert(z, v)


def locate_interval(support, x):
    return support.locate_interval(x)
