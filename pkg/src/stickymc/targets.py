"""Target densities used in the experiments.

Each target is a :class:`TargetModel` holding a scalar log-density (pure
``math``, used inside the samplers), a vectorized twin for quadrature, and
reference quantities obtained analytically or by adaptive quadrature.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, InvalidShape

LOG_2PI = math.log(2.0 * math.pi)
NEG_INF = -math.inf

# mass left out when heavy GEP tails are truncated to a finite support
GEP_TAIL_TOL = 1e-8


@dataclass
class TargetModel:
    """Unnormalized log-density ``log π̃`` with metadata.

    Parameters
    ----------
    label : str
    log_density : callable
        Scalar ``float -> float``; ``-inf`` outside ``support``.
    log_density_vec : callable
        Vectorized version over numpy arrays.
    support : (float, float)
        Declared support; finite ends make proposals drop or truncate tails.
    quad_range : (float, float)
        Finite window holding all but a negligible part of the mass.
    quad_points : tuple
        Kinks and modes handed to the adaptive integrator.
    """

    label: str
    log_density: Callable[[float], float]
    log_density_vec: Callable[[np.ndarray], np.ndarray]
    support: tuple = (-math.inf, math.inf)
    quad_range: tuple = (-50.0, 50.0)
    quad_points: tuple = ()
    default_x0: float = 0.0
    default_s0: tuple = ()
    exact_mean: Optional[float] = None
    imh_proposal: Optional[object] = None
    params: dict = field(default_factory=dict)

    def pdf(self, x):
        return np.exp(self.log_density_vec(np.asarray(x, dtype=float)))

    @cached_property
    def _shift(self):
        xs = np.linspace(*self.quad_range, 20001)
        xs = np.concatenate([xs, np.asarray(self.quad_points, dtype=float)])
        return float(np.max(self.log_density_vec(xs)))

    def _integrate(self, fn, lo=None, hi=None):
        lo = self.quad_range[0] if lo is None else lo
        hi = self.quad_range[1] if hi is None else hi
        edges = sorted({lo, hi, *(p for p in self.quad_points if lo < p < hi)})
        total = 0.0
        for a, b in zip(edges, edges[1:]):
            val, _ = integrate.quad(fn, a, b, limit=500, epsabs=0.0, epsrel=1e-12)
            total += val
        return total

    def _scaled_pdf(self, x):
        return math.exp(self.log_density(x) - self._shift)

    @cached_property
    def _log_norm(self):
        return self._shift + math.log(self._integrate(self._scaled_pdf))

    def log_normalizer(self):
        """``log c_π`` by adaptive quadrature over ``quad_range``."""
        return self._log_norm

    def normalizer(self):
        return math.exp(self._log_norm)

    def expectation(self, fn):
        """``E_π[fn(X)]`` by quadrature."""
        scale = math.exp(self._log_norm - self._shift)
        return self._integrate(lambda x: fn(x) * self._scaled_pdf(x)) / scale

    def cdf(self, q):
        scale = math.exp(self._log_norm - self._shift)
        return self._integrate(self._scaled_pdf, hi=q) / scale

    def quantile(self, p):
        lo, hi = self.quad_range
        return optimize.brentq(lambda q: self.cdf(q) - p, lo, hi, xtol=1e-12, rtol=1e-12)

    @cached_property
    def true_moments(self):
        """Mean, variance, skewness, Pearson kurtosis and 95% quantile by quadrature."""
        mean = self.exact_mean if self.exact_mean is not None else self.expectation(lambda x: x)
        var = self.expectation(lambda x: (x - mean) ** 2)
        m3 = self.expectation(lambda x: (x - mean) ** 3)
        m4 = self.expectation(lambda x: (x - mean) ** 4)
        return {
            "mean": mean,
            "variance": var,
            "skewness": m3 / var**1.5,
            "kurtosis": m4 / var**2,
            "q95": self.quantile(0.95),
        }

    @property
    def true_mean(self):
        if self.exact_mean is not None:
            return self.exact_mean
        return self.true_moments["mean"]


def true_mean(model):
    return model.true_mean


# ---------------------------------------------------------------------------
# Gaussian mixtures


def _prepare_components(components):
    out = []
    for w, m, v in components:
        if w <= 0 or v <= 0:
            raise DomainError("mixture weights and variances must be positive")
        out.append((math.log(w) - 0.5 * (LOG_2PI + math.log(v)), float(m), 0.5 / v))
    return out


def gaussian_mixture_logpdf(x, components):
    """``log Σ w_k N(x; m_k, v_k)`` for ``components = [(w, m, v), ...]``."""
    terms = [c - h * (x - m) ** 2 for c, m, h in _prepare_components(components)]
    top = max(terms)
    return top + math.log(math.fsum(math.exp(t - top) for t in terms))


def gaussian_mixture(components, label="gmix"):
    prepared = _prepare_components(components)
    consts = np.array([p[0] for p in prepared])
    means = np.array([p[1] for p in prepared])
    halves = np.array([p[2] for p in prepared])

    if len(prepared) == 2:
        (c0, m0, h0), (c1, m1, h1) = prepared

        def logpdf(x):
            a = c0 - h0 * (x - m0) ** 2
            b = c1 - h1 * (x - m1) ** 2
            if a < b:
                a, b = b, a
            return a + math.log1p(math.exp(b - a))
    else:
        def logpdf(x):
            terms = [c - h * (x - m) ** 2 for c, m, h in prepared]
            top = max(terms)
            return top + math.log(math.fsum(math.exp(t - top) for t in terms))

    def logpdf_vec(xs):
        xs = np.asarray(xs, dtype=float)
        return special.logsumexp(consts - halves * (xs[..., None] - means) ** 2, axis=-1)

    weights = [w for w, _, _ in components]
    mean = math.fsum(w * m for w, m, _ in components) / math.fsum(weights)
    sd = max(math.sqrt(v) for _, _, v in components)
    lo = min(m for _, m, _ in components) - 12 * sd
    hi = max(m for _, m, _ in components) + 12 * sd
    return TargetModel(label, logpdf, logpdf_vec, quad_range=(lo, hi),
                       quad_points=tuple(m for _, m, _ in components), exact_mean=mean,
                       params={"components": list(components)})


def gmix61():
    """``0.5 N(7, 1) + 0.5 N(-7, 0.1)``: two well-separated modes, mean 0."""
    t = gaussian_mixture([(0.5, 7.0, 1.0), (0.5, -7.0, 0.1)], label="gmix61")
    t.default_s0 = (-10.0, -8.0, 5.0, 10.0)
    t.default_x0 = 0.0
    return t


# ---------------------------------------------------------------------------
# generalized exponential power mixtures


@dataclass(frozen=True)
class GepParams:
    """Location ``mu``, scale ``sigma``, shape ``alpha`` and asymmetry ``kappa``."""

    mu: float = 0.0
    sigma: float = 1.0
    alpha: float = 2.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0 and self.alpha > 0 and self.kappa > 0):
            raise DomainError("GEP sigma, alpha and kappa must be positive")

    @property
    def log_const(self):
        a, s, k = self.alpha, self.sigma, self.kappa
        return math.log(a / (s * math.gamma(1.0 / a))) + math.log(k / (1.0 + k * k))

    @property
    def right_rate(self):
        """Coefficient of ``((x-mu)^+)^alpha`` in the exponent."""
        return (self.kappa / self.sigma) ** self.alpha

    @property
    def left_rate(self):
        return 1.0 / (self.sigma * self.kappa) ** self.alpha

    @property
    def mean(self):
        a, s, k = self.alpha, self.sigma, self.kappa
        # each half is a scaled Gamma(1/alpha)^(1/alpha) variable
        ratio = math.gamma(2.0 / a) / math.gamma(1.0 / a)
        return self.mu + s * ratio * (1.0 / k - k**3) / (1.0 + k * k)

    def tail_width(self, tol=GEP_TAIL_TOL):
        """Distances beyond ``mu`` (left, right) past which each half keeps mass < tol."""
        g = float(special.gammainccinv(1.0 / self.alpha, tol)) ** (1.0 / self.alpha)
        return g * self.sigma * self.kappa, g * self.sigma / self.kappa


def gep_logpdf(x, p):
    d = x - p.mu
    if d >= 0:
        return p.log_const - p.right_rate * d**p.alpha
    return p.log_const - p.left_rate * (-d) ** p.alpha


def gep_pdf(x, p):
    """Density of the generalized exponential power law at ``x``."""
    return math.exp(gep_logpdf(x, p))


def gep_mixture(weighted, label, truncate=True):
    """Mixture ``Σ w_k GEP(p_k)`` from ``[(w, GepParams), ...]``.

    With ``truncate`` the support is cut where every component keeps less than
    ``GEP_TAIL_TOL`` of its half-mass, so proposal tails are finite pieces.
    """
    comps = [(math.log(w) + p.log_const, p.mu, p.left_rate, p.right_rate, p.alpha) for w, p in weighted]

    def logpdf(x):
        if not lo <= x <= hi:
            return NEG_INF
        terms = []
        for c, mu, lr, rr, a in comps:
            d = x - mu
            terms.append(c - rr * d**a if d >= 0 else c - lr * (-d) ** a)
        top = max(terms)
        return top + math.log(math.fsum(math.exp(t - top) for t in terms))

    def logpdf_vec(xs):
        xs = np.asarray(xs, dtype=float)
        terms = []
        for c, mu, lr, rr, a in comps:
            d = xs - mu
            terms.append(np.where(d >= 0, c - rr * np.abs(d) ** a, c - lr * np.abs(d) ** a))
        out = special.logsumexp(np.stack(terms), axis=0)
        return np.where((xs >= lo) & (xs <= hi), out, -np.inf)

    if truncate:
        lo = min(p.mu - p.tail_width()[0] for _, p in weighted)
        hi = max(p.mu + p.tail_width()[1] for _, p in weighted)
    else:
        lo, hi = -math.inf, math.inf
    wsum = math.fsum(w for w, _ in weighted)
    untruncated_mean = math.fsum(w * p.mean for w, p in weighted) / wsum
    qlo = lo if truncate else min(p.mu - p.tail_width()[0] for _, p in weighted)
    qhi = hi if truncate else max(p.mu + p.tail_width()[1] for _, p in weighted)
    t = TargetModel(label, logpdf, logpdf_vec, support=(lo, hi), quad_range=(qlo, qhi),
                    quad_points=tuple(sorted({p.mu for _, p in weighted})),
                    exact_mean=None if truncate else untruncated_mean,
                    params={"components": [(w, p) for w, p in weighted],
                            "untruncated_mean": untruncated_mean})
    t.default_s0 = (-1.0, 1.0, 20.0)
    t.default_x0 = 0.0
    return t


def mix1():
    """Heavy-tailed plus Gaussian symmetric components; mean 20."""
    return gep_mixture([(0.6, GepParams(0.0, 1.0, 0.5, 1.0)), (0.4, GepParams(50.0, 1.0, 2.0, 1.0))], "mix1")


def mix2(kappa):
    """Heavy-tailed asymmetric mixture indexed by the asymmetry ``kappa`` of its second component."""
    return gep_mixture([(0.4, GepParams(0.0, 1.0, 0.5, 2.0)), (0.6, GepParams(50.0, 1.0, 0.5, float(kappa)))],
                       f"mix2:{kappa:g}")


# ---------------------------------------------------------------------------
# Makeham and Gompertz residual lifetimes


@dataclass(frozen=True)
class MakehamParams:
    A: float = 0.001
    B: float = 7.0848535e-6
    C: float = 1.1194379
    age: float = 50.0

    def __post_init__(self):
        if not (self.B > 0 and self.A > -self.B and self.C >= 1 and self.age >= 0):
            raise DomainError("Makeham parameters need B > 0, A > -B, C >= 1, age >= 0")


def makeham_logpdf(z, p):
    """Log-density of the residual lifetime ``T(x)`` at ``z``."""
    if z < 0:
        return NEG_INF
    log_c = math.log(p.C)
    bcx = p.B * p.C**p.age
    if log_c == 0.0:
        cum = z
    else:
        e = z * log_c
        if e > 700.0:
            return NEG_INF
        cum = math.expm1(e) / log_c
    return -p.A * z - bcx * cum + math.log(p.A + bcx * math.exp(z * log_c))


def makeham_pdf(z, p):
    return math.exp(makeham_logpdf(z, p))


def makeham(params=None, label="makeham"):
    p = params or MakehamParams()
    log_c = math.log(p.C)
    bcx = p.B * p.C**p.age

    def logpdf_vec(zs):
        zs = np.asarray(zs, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            e = np.minimum(zs * log_c, 700.0)
            cum = np.expm1(e) / log_c if log_c > 0 else zs
            out = -p.A * zs - bcx * cum + np.log(p.A + bcx * np.exp(e))
        return np.where(zs >= 0, out, -np.inf)

    # upper quadrature end: where the cumulative hazard reaches 800
    hi = math.log1p(800.0 * log_c / bcx) / log_c if log_c > 0 else 800.0 / max(p.A + p.B, 1e-12)
    t = TargetModel(label, lambda z: makeham_logpdf(z, p), logpdf_vec, support=(0.0, math.inf),
                    quad_range=(0.0, hi), default_x0=30.0, default_s0=(0.0, 20.0, 40.0, 60.0),
                    params={"makeham": p})
    return t


def gompertz(params=None):
    p = params or MakehamParams()
    return makeham(MakehamParams(0.0, p.B, p.C, p.age), label="gompertz")


DISCOUNT_RATE = math.log(1.025)


def lifetime_functionals(samples, rate=DISCOUNT_RATE):
    """Present value ``Z = exp(-δ T)`` and annuity ``Y = (1 - Z)/δ`` for lifetime samples ``T``."""
    t = np.asarray(samples, dtype=float)
    z = np.exp(-rate * t)
    return {"T": t, "Z": z, "Y": -np.expm1(-rate * t) / rate}


# ---------------------------------------------------------------------------
# stochastic volatility full conditional


@dataclass(frozen=True)
class SvParams:
    """Parameters of the volatility full conditional.

    ``logh_prev``/``logh_next`` are the neighbouring log-volatilities.  The
    defaults place both at the stationary level ``alpha/(1 - delta)``.
    """

    alpha: float = -0.356
    delta: float = 0.95
    psi: float = -0.15
    omega: float = 0.043
    y: float = 0.001
    y_next: float = 0.001
    logh_prev: Optional[float] = None
    logh_next: Optional[float] = None

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError("omega must be positive")
        stationary = self.alpha / (1.0 - self.delta)
        if self.logh_prev is None:
            object.__setattr__(self, "logh_prev", stationary)
        if self.logh_next is None:
            object.__setattr__(self, "logh_next", stationary)

    @property
    def mu(self):
        a, d = self.alpha, self.delta
        return (a * (1.0 - d) + d * (self.logh_next + self.logh_prev)) / (1.0 + d * d)


def _sv_terms(p):
    power = -1.5 - p.delta * p.psi * p.y_next / (p.omega * math.exp(0.5 * p.logh_next))
    quad = (1.0 + p.delta**2) / (2.0 * p.omega)
    inv = 0.5 * p.y**2 * (1.0 + p.psi**2 / p.omega)
    lev = p.psi * p.y / p.omega
    shift = p.alpha + p.delta * p.logh_prev
    return power, quad, inv, lev, shift


def sv_full_conditional_logpdf(h, p):
    """Unnormalized log full conditional of the volatility ``h > 0`` (``-inf`` otherwise)."""
    if h <= 0:
        return NEG_INF
    power, quad, inv, lev, shift = _sv_terms(p)
    lh = math.log(h)
    return power * lh - inv / h - quad * (lh - p.mu) ** 2 + lev * (lh - shift) / math.sqrt(h)


def sv_ig_proposal_params(p):
    """Shape and scale ``(φ_t, θ_t)`` of the inverse-gamma independence proposal."""
    c = p.omega / (1.0 + p.delta**2)
    ratio = (1.0 - 2.0 * math.exp(c)) / (1.0 - math.exp(c)) - 1.0
    phi = p.psi * p.delta * p.y_next / (p.omega * math.exp(0.5 * p.logh_next)) - 0.5 + ratio
    theta = 0.5 * p.y**2 * (1.0 + p.psi**2 / p.omega) + ratio * math.exp(p.mu + 0.5 * c)
    if not phi > 0:
        raise InvalidShape(f"inverse-gamma shape {phi!r} is not positive")
    return phi, theta


class InverseGamma:
    """Inverse-gamma law with shape ``phi`` and scale ``theta``."""

    def __init__(self, phi, theta):
        self.phi, self.theta = phi, theta
        self._const = phi * math.log(theta) - math.lgamma(phi)

    def log_density(self, h):
        if h <= 0:
            return NEG_INF
        return self._const - (self.phi + 1.0) * math.log(h) - self.theta / h

    def sample(self, rng):
        return rng.inverse_gamma(self.phi, self.theta)


def stochastic_volatility(params=None, label="sv"):
    p = params or SvParams()
    power, quad, inv, lev, shift = _sv_terms(p)
    mu = p.mu

    def logpdf(h):
        if h <= 0:
            return NEG_INF
        lh = math.log(h)
        return power * lh - inv / h - quad * (lh - mu) ** 2 + lev * (lh - shift) / math.sqrt(h)

    def logpdf_vec(hs):
        hs = np.asarray(hs, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lh = np.log(hs)
            out = power * lh - inv / hs - quad * (lh - mu) ** 2 + lev * (lh - shift) / np.sqrt(hs)
        return np.where(hs > 0, out, -np.inf)

    # the log-volatility is close to Gaussian around mu with variance omega/(1+delta^2)
    sd = math.sqrt(p.omega / (1.0 + p.delta**2))
    centre = math.exp(mu)
    t = TargetModel(label, logpdf, logpdf_vec, support=(0.0, math.inf),
                    quad_range=(0.0, math.exp(mu + 40 * sd)),
                    quad_points=(math.exp(mu - 10 * sd), centre, math.exp(mu + 10 * sd)),
                    default_x0=centre, default_s0=(0.0001, 0.001, 0.005, 1.0),
                    params={"sv": p})
    try:
        t.imh_proposal = InverseGamma(*sv_ig_proposal_params(p))
    except InvalidShape:
        t.imh_proposal = None
    return t


# ---------------------------------------------------------------------------
# fixture where the ARMS proposal can never adapt inside one interval


APPB_POINTS = (-2.0, 0.0, 2.0, 4.0, 6.0)


def _appb_log(x):
    if x <= 0.0:
        return 0.75 * x
    if x <= 1.0:
        return x
    if x <= 2.0:
        return 2.0 - x
    if x <= 3.0:
        return 2.0 * (x - 2.0)
    return 2.0 - (x - 3.0)


def stuck_interval_fixture():
    """Piecewise log-linear density with a bump above the ARMS envelope on ``(0, 2]``.

    With support points ``APPB_POINTS`` the c1 log-proposal over ``(0, 2]``
    is the flat secant through ``(0, 0)`` and ``(2, 0)`` whichever points are
    added outside that interval, while the target rises to ``1`` at ``x = 1``.
    """
    vec = np.vectorize(_appb_log, otypes=[float])
    return TargetModel("appb", _appb_log, vec, quad_range=(-60.0, 60.0),
                       quad_points=(0.0, 1.0, 2.0, 3.0), default_x0=1.0, default_s0=APPB_POINTS)


# ---------------------------------------------------------------------------


def get_target(name):
    """Look up a target by registry name (see :data:`TARGET_NAMES`)."""
    key, _, arg = str(name).strip().lower().partition(":")
    if key == "gmix61" and not arg:
        return gmix61()
    if key == "mix1" and not arg:
        return mix1()
    if key == "mix2":
        return mix2(float(arg) if arg else 0.1)
    if key == "makeham" and not arg:
        return makeham()
    if key == "gompertz" and not arg:
        return gompertz()
    if key == "sv" and not arg:
        return stochastic_volatility()
    if key == "sv-literal" and not arg:
        a = SvParams().alpha
        return stochastic_volatility(SvParams(logh_prev=a, logh_next=a), label="sv-literal")
    if key == "appb" and not arg:
        return stuck_interval_fixture()
    raise KeyError(f"unknown target {name!r}")


TARGET_NAMES = {
    "gmix61": "0.5 N(7,1) + 0.5 N(-7,0.1), bimodal, mean 0",
    "mix1": "0.6 GEP(0,1,1/2,1) + 0.4 GEP(50,1,2,1), truncated heavy tails, mean 20",
    "mix2:<kappa>": "0.4 GEP(0,1,1/2,2) + 0.6 GEP(50,1,1/2,kappa), truncated heavy tails",
    "makeham": "Makeham residual lifetime at age 50",
    "gompertz": "Gompertz residual lifetime at age 50 (Makeham with A = 0)",
    "sv": "volatility full conditional, neighbours at the stationary log-volatility",
    "sv-literal": "volatility full conditional, neighbour log-volatilities equal to alpha",
    "appb": "piecewise log-linear fixture where ARMS cannot adapt inside (0, 2]",
}
