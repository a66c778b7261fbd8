"""Sticky piecewise proposal densities.

A proposal is a mixture of simple pieces tiling the target support.  Four
constructions are available, all built from the support set ``S`` and the
cached log-target values ``V(s_i)``:

``c1``
    ARMS log-domain construction: on each interval the log-density is
    ``max{L_{j,j+1}, min{L_{j-1,j}, L_{j+1,j+2}}}`` of secant lines, giving up
    to three exponential sub-pieces per interval.
``c2``
    One exponential per interval following the secant through its endpoints.
``c3``
    Uniform pieces at the larger of the two endpoint heights.
``c4``
    Trapezoids joining the endpoint heights in the density domain.

Every construction shares the same exponential tails, which extend the first
and last secants to infinity.  A target with bounded support replaces the
infinite tails by finite exponential pieces, or drops them when a support
point sits on the boundary.

Pieces are stored as tuples ``(kind, lo, hi, pa, pb, pc)``:

* ``EXP``/``UNIF``: log-density ``pb + pc * (x - pa)`` (anchor, log height, slope)
* ``TRAP``: ``pa``/``pb`` are the log heights at ``lo``/``hi``

Each piece covers ``(lo, hi]``; the leftmost one also includes a finite ``lo``.
"""

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from itertools import accumulate
import math

import numpy as np

from .errors import InvalidTailSlope, NonIntegrable, OutOfSupport, TooFewPoints

EXP, UNIF, TRAP = 0, 1, 2
KIND_NAMES = {EXP: "exponential", UNIF: "uniform", TRAP: "trapezoid"}

SLOPE_EPS = 1e-12
SNAP_TOL = 1e-12
INF = math.inf

CONSTRUCTIONS = ("c1", "c2", "c3", "c4")


def parse_construction(value):
    """Accept ``"c1"``..``"c4"`` (any case) or an integer 1..4."""
    if isinstance(value, str):
        s = value.strip().lower()
        if s in CONSTRUCTIONS:
            return int(s[1])
    elif int(value) in (1, 2, 3, 4):
        return int(value)
    raise ValueError(f"unknown construction {value!r}; expected one of {CONSTRUCTIONS}")


@dataclass(frozen=True)
class Piece:
    """Public view of one mixture component.

    ``params`` holds ``(a, b)`` for an exponential density ``exp(a + b x)``,
    ``(h,)`` for a uniform of height ``h`` and ``(y_left, y_right)`` for a
    trapezoid.  Heights are on the linear scale.
    """

    kind: str
    lo: float
    hi: float
    params: tuple

    @property
    def mass(self):
        return piece_mass(self)


def _exp_logmass(lo, hi, x0, v0, b):
    if abs(b) < SLOPE_EPS:
        if math.isinf(lo) or math.isinf(hi):
            raise NonIntegrable("flat exponential piece with an infinite bound")
        return v0 + b * (0.5 * (lo + hi) - x0) + math.log(hi - lo)
    if b > 0:
        if hi == INF:
            raise NonIntegrable("increasing exponential piece extends to +inf")
        top = v0 + b * (hi - x0)
        return top - math.log(b) + math.log(-math.expm1(-b * (hi - lo)))
    if lo == -INF:
        raise NonIntegrable("decreasing exponential piece extends to -inf")
    top = v0 + b * (lo - x0)
    return top - math.log(-b) + math.log(-math.expm1(b * (hi - lo)))


def _log_add(a, b):
    if a < b:
        a, b = b, a
    if b == -INF:
        return a
    return a + math.log1p(math.exp(b - a))


def _raw_logmass(piece):
    kind, lo, hi, pa, pb, pc = piece
    if kind == TRAP:
        return math.log(0.5 * (hi - lo)) + _log_add(pa, pb)
    if kind == UNIF:
        return pb + math.log(hi - lo)
    return _exp_logmass(lo, hi, pa, pb, pc)


def piece_log_mass(piece):
    """Log of the integral of a :class:`Piece` density over ``(lo, hi]``."""
    lo, hi = piece.lo, piece.hi
    if piece.kind == "exponential":
        a, b = piece.params
        return _exp_logmass(lo, hi, 0.0, a, b)
    if piece.kind == "uniform":
        (h,) = piece.params
        return math.log(h) + math.log(hi - lo)
    yl, yr = piece.params
    return math.log(0.5 * (yl + yr) * (hi - lo))


def piece_mass(piece):
    """Closed-form integral of a :class:`Piece` density over ``(lo, hi]``."""
    return math.exp(piece_log_mass(piece))


# ---------------------------------------------------------------------------
# construction of the pieces of one interval


def _line(pts, vals, k):
    """Secant through support points ``k`` and ``k + 1`` as (anchor, value, slope)."""
    x0 = pts[k]
    return (x0, vals[k], (vals[k + 1] - vals[k]) / (pts[k + 1] - x0))


def _line_at(line, x):
    return line[1] + line[2] * (x - line[0])


def _crossing(l1, l2):
    db = l1[2] - l2[2]
    if db == 0.0:
        return None
    x = (l2[1] - l1[1] + l1[2] * l1[0] - l2[2] * l2[0]) / db
    return x if math.isfinite(x) else None


def _maxmin_pieces(lo, hi, a, b, c):
    """Exponential pieces of ``max{a, min{b, c}}`` over ``(lo, hi]``."""
    tol = SNAP_TOL * (hi - lo)
    cuts = []
    for l1, l2 in ((a, b), (a, c), (b, c)):
        if l1 is l2:
            continue
        x = _crossing(l1, l2)
        if x is not None and lo + tol < x < hi - tol:
            cuts.append(x)
    cuts.sort()
    edges = [lo] + cuts + [hi]
    pieces = []
    last = None
    for left, right in zip(edges, edges[1:]):
        if right <= left:
            continue
        mid = 0.5 * (left + right)
        vb, vc = _line_at(b, mid), _line_at(c, mid)
        low, vlow = (b, vb) if vb <= vc else (c, vc)
        active = a if _line_at(a, mid) >= vlow else low
        if active is last:
            p = pieces[-1]
            pieces[-1] = (EXP, p[1], right, p[3], p[4], p[5])
        else:
            pieces.append((EXP, left, right, active[0], active[1], active[2]))
            last = active
    return pieces


def _interval_pieces(construction, pts, vals, j, bounds):
    """Pieces covering interval ``j`` of the support set (0 = left tail, m = right tail)."""
    m = len(pts)
    if j == 0:
        lo_b = bounds[0]
        if lo_b >= pts[0]:
            return []
        x0, v0, b = _line(pts, vals, 0)
        if lo_b == -INF and b <= SLOPE_EPS:
            raise InvalidTailSlope(f"left tail slope {b:.6g} does not decay")
        return [(EXP, lo_b, pts[0], x0, v0, b)]
    if j == m:
        hi_b = bounds[1]
        if hi_b <= pts[-1]:
            return []
        x0, v0, b = _line(pts, vals, m - 2)
        if hi_b == INF and b >= -SLOPE_EPS:
            raise InvalidTailSlope(f"right tail slope {b:.6g} does not decay")
        return [(EXP, pts[-1], hi_b, x0, v0, b)]
    lo, hi = pts[j - 1], pts[j]
    if construction == 2:
        return [(EXP, lo, hi) + _line(pts, vals, j - 1)]
    if construction == 3:
        return [(UNIF, lo, hi, lo, max(vals[j - 1], vals[j]), 0.0)]
    if construction == 4:
        return [(TRAP, lo, hi, vals[j - 1], vals[j], 0.0)]
    here = _line(pts, vals, j - 1)
    if j == 1:
        other = _line(pts, vals, 1)
        return _maxmin_pieces(lo, hi, here, other, other)
    if j == m - 1:
        other = _line(pts, vals, m - 3)
        return _maxmin_pieces(lo, hi, here, other, other)
    return _maxmin_pieces(lo, hi, here, _line(pts, vals, j - 2), _line(pts, vals, j))


def _check_size(construction, m):
    need = 3 if construction == 1 else 2
    if m < need:
        raise TooFewPoints(f"construction c{construction} needs at least {need} support points, got {m}")


# ---------------------------------------------------------------------------


class PiecewiseProposal:
    """Normalizable mixture density ``q̃_t`` built from a support set.

    Use :func:`build_proposal` to create one.  Instances are treated as
    immutable; :meth:`insert` returns a new proposal that shares the
    untouched pieces with the old one.
    """

    __slots__ = ("construction", "bounds", "raw", "counts", "his", "logmass",
                 "cum", "log_total", "_arrays")

    def __init__(self, construction, bounds, raw, counts):
        self.construction = construction
        self.bounds = bounds
        self.raw = raw
        self.counts = counts
        self.his = [p[2] for p in raw]
        self.logmass = [_raw_logmass(p) for p in raw]
        top = max(self.logmass)
        self.cum = list(accumulate(math.exp(lm - top) for lm in self.logmass))
        self.log_total = top + math.log(self.cum[-1])
        self._arrays = None

    # -- summary quantities -------------------------------------------------

    @property
    def total_mass(self):
        """``c_t``, the integral of ``q̃_t``."""
        return math.exp(self.log_total)

    @property
    def n_pieces(self):
        return len(self.raw)

    @property
    def n_breakpoints(self):
        """Intersection abscissae that split an interval into several pieces (c1 only)."""
        return sum(c - 1 for c in self.counts if c > 1)

    @property
    def cumulative_masses(self):
        scale = math.exp(self.log_total) / self.cum[-1]
        return [c * scale for c in self.cum]

    @property
    def pieces(self):
        out = []
        for kind, lo, hi, pa, pb, pc in self.raw:
            if kind == EXP:
                out.append(Piece("exponential", lo, hi, (pb - pc * pa, pc)))
            elif kind == UNIF:
                out.append(Piece("uniform", lo, hi, (math.exp(pb),)))
            else:
                out.append(Piece("trapezoid", lo, hi, (math.exp(pa), math.exp(pb))))
        return out

    def piece_rows(self):
        """Rows ``(kind, lo, hi, params, mass)`` for a CSV dump."""
        return [(p.kind, p.lo, p.hi, " ".join(repr(float(v)) for v in p.params), math.exp(lm))
                for p, lm in zip(self.pieces, self.logmass)]

    # -- evaluation ----------------------------------------------------------

    def log_density(self, x):
        """``log q̃_t(x)``; ``-inf`` outside a bounded support."""
        i = bisect_left(self.his, x)
        if i == len(self.raw):
            return -INF
        kind, lo, hi, pa, pb, pc = self.raw[i]
        if x < lo:
            return -INF
        if kind == TRAP:
            t = (x - lo) / (hi - lo)
            if t <= 0.0:
                return pa
            if t >= 1.0:
                return pb
            return _log_add(pa + math.log1p(-t), pb + math.log(t))
        return pb + pc * (x - pa)

    def eval_unnormalized(self, x):
        """``q̃_t(x)``; raises OutOfSupport outside a bounded support."""
        lo, hi = self.bounds
        if not lo <= x <= hi:
            raise OutOfSupport(f"{x!r} outside [{lo}, {hi}]")
        return math.exp(self.log_density(x))

    def _numpy_view(self):
        if self._arrays is None:
            arr = np.array(self.raw, dtype=float).reshape(-1, 6)
            self._arrays = (np.array(self.his), arr)
        return self._arrays

    def log_density_many(self, xs):
        """Vectorized :meth:`log_density`."""
        xs = np.asarray(xs, dtype=float)
        his, arr = self._numpy_view()
        idx = np.searchsorted(his, xs, side="left")
        inside = idx < len(his)
        idx = np.minimum(idx, len(his) - 1)
        kind, lo, hi, pa, pb, pc = (arr[idx, k] for k in range(6))
        inside &= xs >= lo
        out = np.full(xs.shape, -np.inf)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lin = pb + pc * (xs - pa)
            t = np.clip((xs - lo) / (hi - lo), 0.0, 1.0)
            trap = np.logaddexp(pa + np.log1p(-t), pb + np.log(t))
        is_trap = kind == TRAP
        out[inside & ~is_trap] = lin[inside & ~is_trap]
        out[inside & is_trap] = trap[inside & is_trap]
        return out

    # -- sampling ----------------------------------------------------------

    def sample(self, rng):
        """One draw from ``q_t``.  Always consumes exactly four uniforms."""
        cum = self.cum
        i = bisect_right(cum, rng.random() * cum[-1])
        if i >= len(cum):
            i = len(cum) - 1
        u1 = rng.random_open()
        u2 = rng.random_open()
        u3 = rng.random()
        kind, lo, hi, pa, pb, pc = self.raw[i]
        if kind == TRAP:
            w = hi - lo
            x1 = lo + u1 * w
            x2 = lo + u2 * w
            # pick the smaller of the two with probability y_left / (y_left + y_right)
            if u3 < math.exp(pa - _log_add(pa, pb)):
                return x1 if x1 < x2 else x2
            return x1 if x1 > x2 else x2
        if kind == UNIF or abs(pc) < SLOPE_EPS:
            return lo + u1 * (hi - lo)
        if pc > 0:
            x = hi + math.log(u1 + (1.0 - u1) * math.exp(-pc * (hi - lo))) / pc
        else:
            x = lo + math.log(u1 + (1.0 - u1) * math.exp(pc * (hi - lo))) / pc
        if x < lo:
            return lo
        return hi if x > hi else x

    def sample_many(self, rng, n):
        return np.array([self.sample(rng) for _ in range(n)])

    # -- adaptation --------------------------------------------------------

    def insert(self, support, z, v):
        """Add ``(z, v)`` to ``support`` and update only the affected pieces.

        Returns ``(proposal, support)``.  DuplicatePoint from the support set
        propagates unchanged.
        """
        k = support.locate_interval(z)
        new_support = support.insert(z, v)
        m_old = len(support)
        m_new = m_old + 1
        if self.construction == 1:
            j_lo, j_hi = max(0, k - 1), min(m_new, k + 2)
        else:
            j_lo = 0 if k <= 1 else k
            j_hi = m_new if k >= m_old - 1 else k + 1
        pts, vals = new_support.points, new_support.log_values
        fresh = []
        fresh_counts = []
        for j in range(j_lo, j_hi + 1):
            ps = _interval_pieces(self.construction, pts, vals, j, self.bounds)
            fresh.extend(ps)
            fresh_counts.append(len(ps))
        start = sum(self.counts[:j_lo])
        stop = start + sum(self.counts[j_lo:j_hi])
        raw = self.raw[:start] + fresh + self.raw[stop:]
        counts = self.counts[:j_lo] + fresh_counts + self.counts[j_hi:]
        return PiecewiseProposal(self.construction, self.bounds, raw, counts), new_support


def build_proposal(support, construction, bounds=(-INF, INF)):
    """Build the proposal of the given construction from a support set.

    Parameters
    ----------
    support : SupportSet
    construction : str or int
        ``"c1"`` .. ``"c4"``.
    bounds : (float, float)
        Support of the target.  Infinite bounds get secant tails that must
        decay (InvalidTailSlope otherwise).
    """
    c = parse_construction(construction)
    pts, vals = support.points, support.log_values
    _check_size(c, len(pts))
    bounds = (float(bounds[0]), float(bounds[1]))
    raw = []
    counts = []
    for j in range(len(pts) + 1):
        ps = _interval_pieces(c, pts, vals, j, bounds)
        raw.extend(ps)
        counts.append(len(ps))
    return PiecewiseProposal(c, bounds, raw, counts)


def insert_support_point(p, support, z, v):
    return p.insert(support, z, v)


def eval_unnormalized(p, x):
    return p.eval_unnormalized(x)


def sample(p, rng):
    return p.sample(rng)


# ---------------------------------------------------------------------------
# distances to the target


@dataclass(frozen=True)
class QuadratureGrid:
    """Integration range split into ``cells`` panels with ``nodes`` Gauss-Legendre points each.

    Piece boundaries inside the range are always added as panel edges, so
    the integrand is smooth on every panel except where ``q̃`` crosses ``π̃``.
    """

    lo: float
    hi: float
    cells: int = 4000
    nodes: int = 8


def _grid_for(p, target, grid):
    if grid is None:
        lo, hi = target.quad_range
        grid = QuadratureGrid(lo, hi)
    edges = np.linspace(grid.lo, grid.hi, grid.cells + 1)
    inner = [h for h in p.his if grid.lo < h < grid.hi]
    edges = np.unique(np.concatenate([edges, inner]))
    t, w = np.polynomial.legendre.leggauss(grid.nodes)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    return (mid + half * t).ravel(), (half * w).ravel()


def l1_distance(p, target, grid=None):
    """Estimate of ``∫ |q̃_t(x) - π̃(x)| dx`` over the whole line.

    Quadrature covers the grid range; the proposal mass outside it is added
    exactly, the target being taken as negligible there.
    """
    xs, ws = _grid_for(p, target, grid)
    q = np.exp(p.log_density_many(xs))
    f = np.exp(target.log_density_vec(xs))
    outside = max(0.0, p.total_mass - float(np.sum(ws * q)))
    return float(np.sum(ws * np.abs(q - f))) + outside


def estimate_doeblin_coefficient(p, target, grid=None):
    """``min q_t(x)/π(x)`` over grid points where ``π > 0``, clamped to [0, 1].

    Both densities are normalized: ``q̃_t`` by ``c_t`` and ``π̃`` by a
    quadrature estimate of its normalizing constant.
    """
    xs, _ = _grid_for(p, target, grid)
    lp = target.log_density_vec(xs)
    keep = np.isfinite(lp)
    log_ratio = (p.log_density_many(xs[keep]) - p.log_total) - (lp[keep] - target.log_normalizer())
    return float(np.clip(np.exp(np.min(log_ratio)), 0.0, 1.0))


def refinement_error_bound(support, order, curvature):
    """Interpolation error bound ``sum_i C * h_i**(order+2) / (order+2)!`` over the intervals.

    ``curvature`` bounds the ``order+2``-th derivative of the target.  The
    bound can only shrink when points are added, which is what makes the
    proposal converge when the support set becomes dense.
    """
    pts = support.points
    k = order + 2
    return curvature * sum((b - a) ** k for a, b in zip(pts, pts[1:])) / math.factorial(k)
