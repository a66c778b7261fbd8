import math

import numpy as np
import pytest
from scipy import stats

from stickymc.diagnostics import (
    SummaryRow,
    acceptance_rate_trace,
    acf,
    mse_trace,
    running_means,
    sample_moments,
    summarize_run,
)
from stickymc.errors import DegenerateTrace
from stickymc.rng import derive_run_seed
from stickymc.samplers import KernelSpec, run_chain
from stickymc.targets import get_target


def naive_acf(x, k):
    n = len(x)
    m = sum(x) / n
    num = sum((x[t] - m) * (x[t + k] - m) for t in range(n - k))
    return num / sum((v - m) ** 2 for v in x)


def test_acf_hand_example():
    assert acf([1.0, 2.0, 3.0, 4.0], [1]) == pytest.approx([0.25])
    assert acf([1.0, 2.0, 3.0, 4.0], [0])[0] == pytest.approx(1.0)


def test_acf_matches_naive_loop():
    x = np.random.default_rng(0).normal(size=400).cumsum().tolist()
    got = acf(x, [1, 5, 17, 50])
    assert got == pytest.approx([naive_acf(x, k) for k in (1, 5, 17, 50)], rel=1e-12)


def test_acf_white_noise_and_ar1():
    gen = np.random.default_rng(1)
    n = 100_000
    e = gen.normal(size=n)
    assert np.all(np.abs(acf(e)) < 4 / math.sqrt(n))
    x = np.empty(n)
    x[0] = e[0]
    for t in range(1, n):
        x[t] = 0.7 * x[t - 1] + e[t]
    a1, a10 = acf(x, [1, 10])
    assert a1 == pytest.approx(0.7, abs=0.01)
    assert a10 == pytest.approx(0.7**10, abs=0.02)


def test_acf_errors():
    with pytest.raises(DegenerateTrace):
        acf(np.ones(100), [1])
    with pytest.raises(ValueError):
        acf(np.arange(10.0), [50])


def test_mse_trace_example():
    runs = [[1.0, 3.0], [-1.0, -1.0]]
    np.testing.assert_allclose(running_means(runs), [[1.0, 2.0], [-1.0, -1.0]])
    np.testing.assert_allclose(mse_trace(runs, 0.0), [1.0, 2.5])


def test_acceptance_rate_trace():
    np.testing.assert_allclose(acceptance_rate_trace([True, False, True, True]), [1, 0.5, 2 / 3, 0.75])


def test_sample_moments_against_scipy():
    x = np.random.default_rng(2).gamma(2.0, size=5000)
    m = sample_moments(x)
    assert m["mean"] == pytest.approx(x.mean())
    assert m["variance"] == pytest.approx(x.var())
    assert m["skewness"] == pytest.approx(stats.skew(x))
    assert m["kurtosis"] == pytest.approx(stats.kurtosis(x, fisher=False))
    assert sample_moments(np.arange(1.0, 101.0))["q95"] == 95.0


def test_constant_sample_warns():
    with pytest.warns(RuntimeWarning):
        m = sample_moments(np.full(10, 2.0))
    assert math.isnan(m["skewness"]) and math.isnan(m["kurtosis"])


def test_summary_row_from_runs():
    target = get_target("gmix61")
    traces = [run_chain(KernelSpec.parse("asm", "c4"), target, 0.0, target.default_s0, 300, derive_run_seed(3, r))
              for r in range(4)]
    row = summarize_run(traces, target, algorithm="ASM-4", construction="c4")
    assert isinstance(row, SummaryRow)
    assert row.runs == 4 and row.T == 300
    means = np.array([t.states.mean() for t in traces])
    assert row.mean == pytest.approx(means.mean())
    assert row.sd_mean == pytest.approx(means.std(ddof=1))
    assert row.mse == pytest.approx(np.mean(means**2))
    assert row.m_T == pytest.approx(np.mean([t.nsp[-1] for t in traces]))
    assert row.ei == 300
    assert row.acf1 == pytest.approx(np.mean([acf(t.states, [1])[0] for t in traces]))
    assert row.c_T_min <= row.c_T_max
    assert list(row.as_dict()) == SummaryRow.columns()
