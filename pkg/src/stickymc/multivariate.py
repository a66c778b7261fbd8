"""Multivariate use of the sticky kernels.

Two routes are provided:

* :func:`gibbs_sweep` runs a few sticky iterations on each full conditional,
  restarting the support set at every coordinate visit.
* :class:`GridProposal` is a piecewise-constant proposal on a bounded box
  whose cells are products of per-axis support intervals.
"""

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
import itertools
import math
from typing import Optional

import numpy as np

from .adaptation import UpdateRule
from .errors import DuplicatePoint, EmptyAxis, PreconditionError
from .samplers import KernelSpec, init_state, make_step


@dataclass
class GibbsConfig:
    """Settings for sticky-within-Gibbs.

    ``initial_sets[j]`` is the support set used every time coordinate ``j``
    is visited; ``inner_steps`` is the number of sticky iterations per visit.
    """

    dimension: int
    initial_sets: list
    inner_steps: int = 20
    kernel: KernelSpec = field(default_factory=KernelSpec)
    bounds: Optional[list] = None

    def __post_init__(self):
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if len(self.initial_sets) != self.dimension:
            raise ValueError("need one initial support set per coordinate")
        if self.kernel.kind not in ("asm", "asmtm"):
            raise ValueError("Gibbs updates use the asm or asmtm kernels")


class _Conditional:
    """Full conditional of coordinate ``j`` given the other coordinates of ``x``."""

    imh_proposal = None

    def __init__(self, log_target, x, j, support):
        self._f = log_target
        self._x = list(x)
        self._j = j
        self.support = support
        self.label = f"conditional[{j}]"

    def log_density(self, v):
        self._x[self._j] = v
        return self._f(self._x)


def _check_reset(points, value, j):
    pts = sorted(points)
    tol = 1e-9 * max(1.0, pts[-1] - pts[0])
    if any(abs(p - value) < tol for p in pts):
        raise PreconditionError(f"initial support set of coordinate {j} contains the current value {value!r}")


def gibbs_sweep(x, log_target, cfg, rng):
    """One systematic-scan sweep; returns the new state as a list.

    ``log_target`` maps a length-``L`` sequence to ``log π̃``.
    """
    x = [float(v) for v in x]
    bounds = cfg.bounds or [(-math.inf, math.inf)] * cfg.dimension
    for j in range(cfg.dimension):
        s0 = cfg.initial_sets[j]
        _check_reset(s0, x[j], j)
        cond = _Conditional(log_target, x, j, tuple(bounds[j]))
        step = make_step(cfg.kernel, cond)
        state = init_state(cfg.kernel, cond, x[j], s0)
        for _ in range(cfg.inner_steps):
            state, _ = step(state, rng)
        x[j] = state.x
    return x


def run_gibbs(log_target, x0, cfg, sweeps, rng):
    """Array of shape ``(sweeps, L)`` with the state after each sweep."""
    out = np.empty((sweeps, cfg.dimension))
    x = list(x0)
    for t in range(sweeps):
        x = gibbs_sweep(x, log_target, cfg, rng)
        out[t] = x
    return out


# ---------------------------------------------------------------------------
# grid proposal on a bounded box


def _corner_max(values):
    """Maximum over the ``2**L`` corners of every cell of a vertex array."""
    out = None
    for corner in itertools.product((0, 1), repeat=values.ndim):
        sl = tuple(slice(c, n - 1 + c) for c, n in zip(corner, values.shape))
        out = values[sl] if out is None else np.maximum(out, values[sl])
    return out


class GridProposal:
    """Piecewise-constant density on a box, one height per grid cell.

    A cell's height is the largest target value over its corners.
    """

    def __init__(self, axes, vertex_values, heights, log_target):
        self.axes = axes
        self.vertex_values = vertex_values
        self.log_heights = heights
        self.log_target = log_target
        widths = [np.log(np.diff(a)) for a in axes]
        log_vol = widths[0]
        for w in widths[1:]:
            log_vol = np.add.outer(log_vol, w)
        self.log_masses = heights + log_vol
        flat = self.log_masses.ravel()
        top = flat.max()
        self._cum = np.cumsum(np.exp(flat - top))
        self.log_total = float(top + math.log(self._cum[-1]))

    @property
    def dimension(self):
        return len(self.axes)

    @property
    def n_cells(self):
        return self.log_heights.size

    @property
    def total_mass(self):
        return math.exp(self.log_total)

    def _cell(self, x):
        idx = []
        for a, v in zip(self.axes, x):
            if not a[0] <= v <= a[-1]:
                return None
            idx.append(min(max(bisect_left(a, v) - 1, 0), len(a) - 2))
        return tuple(idx)

    def log_density(self, x):
        cell = self._cell(x)
        return -math.inf if cell is None else float(self.log_heights[cell])

    def sample(self, rng):
        i = int(np.searchsorted(self._cum, rng.random() * self._cum[-1], side="right"))
        cell = np.unravel_index(min(i, self.n_cells - 1), self.log_heights.shape)
        return [a[c] + rng.random_open() * (a[c + 1] - a[c]) for a, c in zip(self.axes, cell)]


def _vertex_grid(axes, log_target):
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    flat = mesh.reshape(-1, len(axes))
    return np.asarray(log_target(flat), dtype=float).reshape(mesh.shape[:-1])


def build_grid_proposal(axis_sets, log_target, box):
    """Grid proposal from per-axis point sets on ``box = [(a_1, b_1), ...]``.

    Box endpoints are added to each axis.  ``log_target`` must accept an
    ``(N, L)`` array and return ``N`` log-densities.
    """
    axes = []
    for j, (pts, (a, b)) in enumerate(zip(axis_sets, box)):
        inner = [float(p) for p in pts if a < p < b]
        axis = np.array(sorted({float(a), float(b), *inner}))
        if len(axis) < 2 or not a < b:
            raise EmptyAxis(f"axis {j} has no interval")
        axes.append(axis)
    vertex = _vertex_grid(axes, log_target)
    return GridProposal(axes, vertex, _corner_max(vertex), log_target)


def grid_insert(gp, point):
    """Insert each coordinate of ``point`` into its axis and rebuild the touched slabs.

    Coordinates that duplicate an existing axis value are skipped.
    """
    axes = list(gp.axes)
    vertex = gp.vertex_values
    heights = gp.log_heights
    for j, v in enumerate(point):
        a = axes[j]
        if not a[0] < v < a[-1]:
            raise ValueError(f"coordinate {j} = {v!r} is not strictly inside the box")
        tol = 1e-9 * max(1.0, a[-1] - a[0])
        k = bisect_right(a.tolist(), v)
        if v - a[k - 1] < tol or a[k] - v < tol:
            continue
        axes[j] = np.insert(a, k, v)
        # vertex values on the new hyperplane x_j = v
        plane_axes = [ax if i != j else np.array([v]) for i, ax in enumerate(axes)]
        plane = _vertex_grid(plane_axes, gp.log_target)
        vertex = np.concatenate([np.take(vertex, range(k), axis=j), plane,
                                 np.take(vertex, range(k, vertex.shape[j]), axis=j)], axis=j)
        slab = _corner_max(np.take(vertex, range(k - 1, k + 2), axis=j))
        heights = np.concatenate([np.take(heights, range(k - 1), axis=j), slab,
                                  np.take(heights, range(k, heights.shape[j]), axis=j)], axis=j)
    return GridProposal(axes, vertex, heights, gp.log_target)


def run_grid_chain(log_target, box, axis_sets, T, rng, rule=None, x0=None):
    """Sticky independence sampler on a box with the grid proposal.

    The non-retained point is offered to a single-candidate update test and,
    when included, all its coordinates join the axes.  Returns
    ``(states, proposal)``.
    """
    rule = rule or UpdateRule()
    gp = build_grid_proposal(axis_sets, log_target, box)

    def lp_of(p):
        return float(log_target(np.asarray(p, dtype=float)[None, :])[0])

    x = list(x0) if x0 is not None else [0.5 * (a + b) for a, b in box]
    lp_x = lp_of(x)
    out = np.empty((T, len(box)))
    for t in range(T):
        xp = gp.sample(rng)
        lp_new = lp_of(xp)
        lq_new = gp.log_density(xp)
        lq_old = gp.log_density(x)
        log_ratio = (lp_new - lq_new) - (lp_x - lq_old)
        u = rng.random()
        if log_ratio >= 0 or u < math.exp(log_ratio):
            z, lp_z, lq_z = x, lp_x, lq_old
            x, lp_x = xp, lp_new
        else:
            z, lp_z, lq_z = xp, lp_new, lq_new
        if rng.random() < rule.log_eta(lp_z, lq_z) and math.isfinite(lp_z):
            try:
                gp = grid_insert(gp, z)
            except (DuplicatePoint, ValueError):
                pass
        out[t] = x
    return out, gp
