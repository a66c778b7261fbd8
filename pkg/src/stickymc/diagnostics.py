"""Summary statistics for replicated chain runs."""

from dataclasses import asdict, dataclass, fields
import math
from typing import Optional
import warnings

import numpy as np

from .errors import DegenerateTrace

ACF_LAGS = (1, 10, 50)


def acf(trace, lags=ACF_LAGS):
    """Biased sample autocorrelation ``Σ(x_t - x̄)(x_{t+k} - x̄) / Σ(x_t - x̄)²``."""
    x = np.asarray(trace, dtype=float)
    lags = [int(k) for k in np.atleast_1d(lags)]
    if len(x) <= max(lags):
        raise ValueError(f"trace of length {len(x)} too short for lag {max(lags)}")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom == 0.0:
        raise DegenerateTrace("trace has zero variance")
    n = len(x)
    return np.array([float(np.dot(d[: n - k], d[k:])) / denom for k in lags])


def running_means(traces):
    x = np.atleast_2d(np.asarray(traces, dtype=float))
    return np.cumsum(x, axis=1) / np.arange(1, x.shape[1] + 1)


def mse_trace(runs, true_mean):
    """Per-iteration mean over runs of ``(running mean - true_mean)²``."""
    return np.mean((running_means(runs) - true_mean) ** 2, axis=0)


def acceptance_rate_trace(events):
    """Cumulative acceptance rate from events or a boolean acceptance array."""
    acc = np.array([getattr(e, "accepted", e) for e in events], dtype=float)
    return np.cumsum(acc) / np.arange(1, len(acc) + 1)


def nsp_trace(trace):
    """Support size per iteration (for c1 including active breakpoints)."""
    return np.asarray(trace.nsp)


def sample_moments(x):
    """Mean, variance, skewness, Pearson kurtosis and 95% order-statistic quantile.

    Moments use the plain ``1/n`` central-moment estimators.  A constant
    sample has undefined skewness and kurtosis; those come back as NaN with
    a warning.
    """
    x = np.asarray(x, dtype=float).ravel()
    mean = float(x.mean())
    d = x - mean
    var = float(np.mean(d * d))
    if var == 0.0:
        warnings.warn("constant sample: skewness and kurtosis undefined", RuntimeWarning)
        skew = kurt = math.nan
    else:
        skew = float(np.mean(d**3)) / var**1.5
        kurt = float(np.mean(d**4)) / var**2
    srt = np.sort(x)
    q95 = float(srt[min(len(srt) - 1, max(0, math.ceil(0.95 * len(srt)) - 1))])
    return {"mean": mean, "variance": var, "skewness": skew, "kurtosis": kurt, "q95": q95}


@dataclass
class SummaryRow:
    """One line of a results table, aggregated over replications."""

    algorithm: str
    construction: str
    runs: int
    T: int
    mse: Optional[float]
    acf1: float
    acf10: float
    acf50: float
    m_T: float
    acc_T: float
    elapsed: float
    ei: float
    mean: float
    sd_mean: float
    sd: float
    skewness: float
    kurtosis: float
    q95: float
    c_T_min: float
    c_T_max: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def as_dict(self):
        return asdict(self)


def _safe_acf(x, lags):
    try:
        return acf(x, lags)
    except DegenerateTrace:
        return np.full(len(lags), np.nan)


def summarize_run(traces, target=None, algorithm="", construction="", values=None):
    """Aggregate replicated traces into a :class:`SummaryRow`.

    ACF, ``m_T``, acceptance, time and EI are averaged over runs.  Moments
    and the quantile are averaged per-run estimates; ``sd_mean`` is the
    standard deviation of the per-run means.  ``values`` optionally
    replaces the state arrays (for transformed functionals).
    """
    traces = list(traces)
    xs = np.array([t.states for t in traces] if values is None else values, dtype=float)
    lags = [k for k in ACF_LAGS if k < xs.shape[1]]
    acfs = np.array([_safe_acf(x, lags) for x in xs])
    acf_mean = np.nanmean(acfs, axis=0) if len(lags) else []
    acf_vals = dict(zip(lags, acf_mean))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        moments = [sample_moments(x) for x in xs]
    means = np.array([m["mean"] for m in moments])
    mse = None
    if target is not None and values is None:
        mu = target.true_mean
        if mu is not None:
            mse = float(np.mean((means - mu) ** 2))
    c_T = np.array([math.exp(t.log_mass[-1]) for t in traces])

    def avg(key):
        return float(np.mean([m[key] for m in moments]))

    return SummaryRow(
        algorithm=algorithm,
        construction=construction,
        runs=len(traces),
        T=xs.shape[1],
        mse=mse,
        acf1=float(acf_vals.get(1, math.nan)),
        acf10=float(acf_vals.get(10, math.nan)),
        acf50=float(acf_vals.get(50, math.nan)),
        m_T=float(np.mean([t.nsp[-1] for t in traces])),
        acc_T=float(np.mean([t.acc_cum[-1] for t in traces])),
        elapsed=float(np.mean([t.elapsed for t in traces])),
        ei=float(np.mean([t.ei for t in traces])),
        mean=float(means.mean()),
        sd_mean=float(means.std(ddof=1)) if len(means) > 1 else 0.0,
        sd=float(np.sqrt(avg("variance"))),
        skewness=avg("skewness"),
        kurtosis=avg("kurtosis"),
        q95=avg("q95"),
        c_T_min=float(c_T.min()),
        c_T_max=float(c_T.max()),
    )
