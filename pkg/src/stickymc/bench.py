"""Replicated experiment runner and the built-in presets."""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field, replace
import logging
import math
import os
from pathlib import Path

import numpy as np

from .adaptation import UpdateRule
from .config import AlgorithmSpec, ExperimentConfig
from .diagnostics import ACF_LAGS, SummaryRow, acf, mse_trace, summarize_run
from .errors import DegenerateTrace, StickyError
from .rng import derive_run_seed
from .samplers import run_chain
from .targets import get_target, lifetime_functionals

log = logging.getLogger(__name__)

FIGURE_ACF_LAGS = 50


def draw_initial_support(spec, seed, run_index):
    """Support points for one replication from a fixed list or a ``uniform:a,b,m`` spec."""
    if not isinstance(spec, str):
        return list(spec)
    a, b, m = spec.partition(":")[2].split(",")
    rng = derive_run_seed(seed, run_index, chain=1)
    a, b = float(a), float(b)
    return sorted(a + (b - a) * rng.random() for _ in range(int(m)))


def run_replication(target_name, algorithm, rule, s0, x0, T, seed, run_index, max_support=None):
    """One seeded chain; returns a trace without the heavy final proposal."""
    target = get_target(target_name)
    kernel = algorithm.kernel_spec(rule, max_support)
    pts = draw_initial_support(s0 if s0 is not None else target.default_s0, seed, run_index)
    start = target.default_x0 if x0 is None else x0
    trace = run_chain(kernel, target, start, pts, T, derive_run_seed(seed, run_index))
    trace.final = replace(trace.final, support=None, proposal=None)
    return trace


def _replication_job(args):
    try:
        return run_replication(*args), None
    except StickyError as exc:
        return None, f"{type(exc).__name__}: {exc}"


@dataclass
class GroupResult:
    algorithm: AlgorithmSpec
    rule: str
    eps: object
    traces: list
    failures: list = field(default_factory=list)
    row: SummaryRow = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    groups: list
    out_dir: Path

    @property
    def rows(self):
        return [g.row for g in self.groups if g.row is not None]

    @property
    def failures(self):
        return [(g.algorithm.label, g.eps, i, msg) for g in self.groups for i, msg in g.failures]


def _groups(cfg):
    for algo in cfg.algorithms:
        if cfg.eps_sweep is None:
            yield algo, algo.rule, None
        else:
            for eps in cfg.eps_sweep:
                yield algo, str(UpdateRule("threshold", eps)), eps


def run_group(cfg, algo, rule, eps, workers=1):
    jobs = [(cfg.target, algo, rule, cfg.s0, cfg.x0, cfg.T, cfg.seed, r, cfg.max_support)
            for r in range(cfg.runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replication_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_replication_job(j) for j in jobs]
    group = GroupResult(algo, rule, eps, [])
    for r, (trace, err) in enumerate(results):
        if err is None:
            group.traces.append((r, trace))
        else:
            group.failures.append((r, err))
            log.warning("run %d of %s failed: %s", r, algo.label, err)
    return group


def _tag(algo, eps):
    name = f"{algo.kernel.replace(':', '')}_{algo.construction}"
    return name if eps is None else f"{name}_eps{eps:g}"


def _write_csv(path, header, rows, comment=None):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def _figure_rows(traces, target_mean):
    states = np.array([t.states for t in traces])
    T = states.shape[1]
    mse = mse_trace(states, target_mean) if target_mean is not None else np.full(T, np.nan)
    acc = np.mean([t.acc_cum for t in traces], axis=0)
    nsp = np.mean([t.nsp for t in traces], axis=0)
    fig = [(t + 1, _fmt(float(mse[t])), _fmt(float(acc[t])), _fmt(float(nsp[t]))) for t in range(T)]
    lags = list(range(min(FIGURE_ACF_LAGS, T - 1) + 1))
    vals = []
    for s in states:
        try:
            vals.append(acf(s, lags))
        except DegenerateTrace:
            pass
    mean_acf = np.mean(vals, axis=0) if vals else np.full(len(lags), np.nan)
    return fig, [(k, _fmt(float(a))) for k, a in zip(lags, mean_acf)]


def run_experiment(cfg, workers=None):
    """Run every algorithm group of ``cfg`` and write the CSV outputs.

    Files written under ``cfg.out``:

    * ``summary.csv``: one :class:`SummaryRow` per group plus config hash and seed
    * ``traces/<group>_run<r>.csv``: iter, state, accepted, nsp, acc_cum, c_t
    * ``figures/<group>.csv``: iter, mse, acc, nsp averaged over runs
    * ``figures/<group>_acf.csv``: lag, acf averaged over runs
    * ``functionals.csv`` for lifetime targets, ``failures.csv`` if any run failed
    """
    workers = workers or cfg.workers
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    target = get_target(cfg.target)
    true_mean = target.true_mean
    header_note = f"seed={cfg.seed} config_hash={cfg.hash}"
    groups = []
    summary = []
    functionals = []
    for algo, rule, eps in _groups(cfg):
        g = run_group(cfg, algo, rule, eps, workers)
        groups.append(g)
        tag = _tag(algo, eps)
        traces = [t for _, t in g.traces]
        for r, t in g.traces[: cfg.trace_runs]:
            rows = zip(range(1, t.T + 1), map(_fmt, t.states.tolist()), t.accepted.astype(int).tolist(),
                       t.nsp.tolist(), map(_fmt, t.acc_cum.tolist()), map(_fmt, t.c_t.tolist()))
            _write_csv(out / "traces" / f"{tag}_run{r}.csv",
                       ["iter", "state", "accepted", "nsp", "acc_cum", "c_t"], rows,
                       f"{header_note} run={r}")
        if not traces:
            continue
        kernel = algo.kernel_spec(rule)
        g.row = summarize_run(traces, target, algorithm=algo.label, construction=algo.construction)
        summary.append([cfg.hash, cfg.seed, cfg.target, kernel.name, rule, "" if eps is None else eps]
                       + [_fmt(v) for v in g.row.as_dict().values()])
        fig, acf_rows = _figure_rows(traces, true_mean)
        _write_csv(out / "figures" / f"{tag}.csv", ["iter", "mse", "acc", "nsp"], fig, header_note)
        _write_csv(out / "figures" / f"{tag}_acf.csv", ["lag", "acf"], acf_rows, header_note)
        if cfg.functionals == "lifetime":
            values = [lifetime_functionals(t.states) for t in traces]
            for key in ("T", "Z", "Y"):
                row = summarize_run(traces, None, algorithm=algo.label, construction=algo.construction,
                                    values=[v[key] for v in values])
                functionals.append([cfg.hash, cfg.seed, algo.label, key, _fmt(row.mean), _fmt(row.sd_mean),
                                    _fmt(row.sd), _fmt(row.skewness), _fmt(row.kurtosis), _fmt(row.q95)])
    _write_csv(out / "summary.csv",
               ["config_hash", "seed", "target", "kernel", "rule", "eps"] + SummaryRow.columns(), summary)
    if functionals:
        _write_csv(out / "functionals.csv",
                   ["config_hash", "seed", "algorithm", "quantity", "mean", "sd_mean", "sd",
                    "skewness", "kurtosis", "q95"], functionals)
    result = ExperimentResult(cfg, groups, out)
    if result.failures:
        _write_csv(out / "failures.csv", ["algorithm", "eps", "run", "error"], result.failures)
    return result


# ---------------------------------------------------------------------------
# presets


def _algos(*pairs):
    return tuple(AlgorithmSpec(k, c) for k, c in pairs)


_TABLE_ALGOS = _algos(("arms", "c1"), ("asm", "c4"), ("asmtm:10", "c4"))


def _preset_table():
    full = tuple(AlgorithmSpec(k, c) for k in ("arms", "asm", "asmtm:10") for c in ("c1", "c2", "c3", "c4"))
    p = {
        "gmix61": ExperimentConfig("gmix61", full, name="gmix61", s0=(-10.0, -8.0, 5.0, 10.0)),
        "eps-sweep": ExperimentConfig("gmix61", _algos(*[("asm", c) for c in ("c1", "c2", "c3", "c4")]),
                                      name="eps-sweep", s0=(-10.0, -8.0, 5.0, 10.0),
                                      eps_sweep=(0.005, 0.01, 0.1, 0.2)),
        "mix1-a": ExperimentConfig("mix1", _TABLE_ALGOS, name="mix1-a", s0=(-1.0, 1.0, 20.0)),
        "mix1-b": ExperimentConfig("mix1", _TABLE_ALGOS, name="mix1-b", s0=(-1.0, 1.0, 70.0)),
        "mix1-c": ExperimentConfig("mix1", _TABLE_ALGOS, name="mix1-c", s0="uniform:-70,70,3"),
        "makeham-a": ExperimentConfig("makeham", _TABLE_ALGOS, name="makeham-a", s0=(20.0, 40.0, 60.0),
                                      functionals="lifetime"),
        "makeham-b": ExperimentConfig("makeham", _TABLE_ALGOS, name="makeham-b", s0=(0.0, 20.0, 40.0, 60.0),
                                      functionals="lifetime"),
        "sv-a": ExperimentConfig("sv", _algos(("imh", "c4")) + _TABLE_ALGOS, name="sv-a",
                                 s0=(0.0001, 0.001, 0.005, 1.0)),
        "sv-b": ExperimentConfig("sv", _algos(("imh", "c4")) + _TABLE_ALGOS, name="sv-b",
                                 s0=(0.0001, 0.0003, 0.005, 1.0)),
    }
    for kappa in ("0.01", "0.1", "0.4"):
        p[f"mix2-{kappa}"] = ExperimentConfig(f"mix2:{kappa}", _TABLE_ALGOS, name=f"mix2-{kappa}",
                                              s0=(-1.0, 1.0, 20.0))
    return p


PRESETS = _preset_table()


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None


def default_workers():
    return max(1, min(8, os.cpu_count() or 1))
