import math

import numpy as np
import pytest

from stickymc.adaptation import (
    ABS_DIFF,
    RATIO_COMPLEMENT,
    UpdateRule,
    choose_candidate,
    eval_distance,
    eval_eta,
    mtm_update_probabilities,
    run_update_test,
)
from stickymc.errors import DomainError, UndefinedRatio
from stickymc.proposal import build_proposal
from stickymc.rng import derive_run_seed
from stickymc.support import new_support_set


def test_ratio_power_examples():
    d = eval_distance(RATIO_COMPLEMENT, 1.0, 0.5)
    assert d == pytest.approx(0.5)
    assert eval_eta(UpdateRule("ratio-power", 1.0), d) == pytest.approx(0.5)
    assert eval_eta(UpdateRule("ratio-power", 2.0), d) == pytest.approx(0.25)
    # symmetric in its arguments
    assert eval_distance(RATIO_COMPLEMENT, 0.5, 1.0) == d


def test_random_exp_example():
    d = eval_distance(ABS_DIFF, 2.0, 1.0)
    assert eval_eta(UpdateRule.parse("random-exp"), d) == pytest.approx(0.6321205588285577)


def test_threshold_is_strict():
    rule = UpdateRule.parse("threshold:0.1")
    assert eval_eta(rule, 0.1) == 0.0
    assert eval_eta(rule, 0.1000001) == 1.0
    assert eval_eta(rule, 0.0) == 0.0


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_eta(UpdateRule(), -0.1)
    with pytest.raises(DomainError):
        eval_eta(UpdateRule(), 1.5)


def test_both_zero_ratio_warns():
    with pytest.warns(UndefinedRatio):
        assert eval_distance(RATIO_COMPLEMENT, 0.0, 0.0) == 0.0


def test_parse_and_format():
    assert UpdateRule.parse("ratio-power") == UpdateRule("ratio-power", 1.0)
    assert UpdateRule.parse("threshold") == UpdateRule("threshold", 0.1)
    for text in ("random-exp", "threshold:0.005", "ratio-power:2"):
        assert str(UpdateRule.parse(text)) == text
    for bad in ("bogus", "ratio-power:0", "threshold:-1", "random-exp:3"):
        with pytest.raises(ValueError):
            UpdateRule.parse(bad)
    assert UpdateRule.frozen().is_frozen


@pytest.mark.parametrize("rule", ["random-exp", "threshold:0.2", "ratio-power:1", "ratio-power:0.5"])
def test_eta_monotone_in_distance(rule):
    r = UpdateRule.parse(rule)
    ds = np.linspace(0, 1, 201)
    etas = [r.eta(d) for d in ds]
    assert all(b >= a for a, b in zip(etas, etas[1:]))
    assert all(0.0 <= e <= 1.0 for e in etas)


@pytest.mark.parametrize("rule", ["random-exp", "threshold:0.05", "ratio-power:1", "ratio-power:3"])
def test_log_route_matches_linear_route(rule):
    r = UpdateRule.parse(rule)
    gen = np.random.default_rng(3)
    for lp, lq in gen.normal(-1, 1.5, size=(300, 2)):
        d = eval_distance(r.distance_kind, math.exp(lp), math.exp(lq))
        assert r.log_eta(lp, lq) == pytest.approx(eval_eta(r, d), rel=1e-12, abs=1e-12)


def test_mtm_probabilities_example():
    etas, keep = mtm_update_probabilities([2.0, 0.5, 1.0])
    assert etas == pytest.approx([0.2, 0.2, 0.0])
    assert keep == pytest.approx(0.6)


def test_mtm_probabilities_sum_to_one():
    gen = np.random.default_rng(8)
    for _ in range(100):
        w = np.exp(gen.normal(0, 3, size=gen.integers(2, 12)))
        etas, keep = mtm_update_probabilities(w.tolist())
        assert math.fsum(etas) + keep == pytest.approx(1.0, abs=1e-12)
        assert min(etas) >= 0.0


def test_mtm_invariant_to_inverting_weights():
    w = [3.0, 0.25, 1.7, 0.9]
    a, ka = mtm_update_probabilities(w)
    b, kb = mtm_update_probabilities([1.0 / x for x in w])
    assert a == pytest.approx(b, rel=1e-12)
    assert ka == pytest.approx(kb, rel=1e-12)


def test_mtm_log_weights_avoid_overflow():
    etas, keep = mtm_update_probabilities(log_weights=[2000.0, 0.0, -5.0])
    assert etas[0] == pytest.approx(1.0)
    assert keep == pytest.approx(0.0, abs=1e-300)


def test_single_candidate_inclusion_frequency():
    rule = UpdateRule.parse("ratio-power:1")
    lp, lq = 0.0, math.log(0.3)
    eta = rule.log_eta(lp, lq)
    rng = derive_run_seed(12, 0)
    n = 100_000
    hits = sum(choose_candidate(rule, [lp], [lq], rng.random()) == 0 for _ in range(n))
    assert abs(hits / n - eta) < 4 * math.sqrt(eta * (1 - eta) / n)


def test_mtm_inclusion_frequency():
    rule = UpdateRule()
    lps = [0.0, 0.0, 0.0, 0.0]
    lqs = [math.log(x) for x in (0.5, 2.0, 1.0, 0.1)]
    etas, keep = mtm_update_probabilities(log_weights=[a - b for a, b in zip(lps, lqs)])
    rng = derive_run_seed(13, 0)
    n = 100_000
    counts = np.zeros(5)
    for _ in range(n):
        i = choose_candidate(rule, lps, lqs, rng.random())
        counts[4 if i is None else i] += 1
    expect = np.array(etas + [keep])
    sd = np.sqrt(expect * (1 - expect) / n)
    assert np.all(np.abs(counts / n - expect) <= 4 * sd + 1e-12)


def test_mtm_requires_ratio_rule():
    with pytest.raises(ValueError):
        choose_candidate(UpdateRule.parse("threshold:0.1"), [0.0, 0.0], [0.0, 1.0], 0.5)


def _setup():
    target = lambda x: -0.5 * x * x
    s = new_support_set([-3.0, 0.0, 3.0], target)
    return target, s, build_proposal(s, "c4")


def test_update_test_inserts_and_consumes_one_uniform():
    target, s, p = _setup()
    rng, ref = derive_run_seed(1, 0), derive_run_seed(1, 0)
    z = 1.5
    s2, p2, idx = run_update_test(s, p, [z], [target(z)], [p.log_density(z)], UpdateRule.parse("threshold:0"), rng)
    ref.random()
    assert idx == 0 and z in s2.points and len(s2) == 4
    assert rng.random() == ref.random()
    assert p2.log_density(z) == pytest.approx(target(z))


def test_frozen_rule_never_inserts():
    target, s, p = _setup()
    rng, ref = derive_run_seed(2, 0), derive_run_seed(2, 0)
    for z in np.linspace(-5, 5, 37):
        s2, p2, idx = run_update_test(s, p, [z], [target(z)], [p.log_density(z)], UpdateRule.frozen(), rng)
        ref.random()
        assert idx is None and s2 is s and p2 is p
    assert rng.random() == ref.random()


def test_max_support_caps_growth():
    target, s, p = _setup()
    rule = UpdateRule.parse("threshold:0")
    s2, _, idx = run_update_test(s, p, [1.0], [target(1.0)], [p.log_density(1.0)], rule, derive_run_seed(3, 0),
                                 max_support=3)
    assert idx is None and len(s2) == 3


def test_duplicate_candidate_is_skipped():
    target, s, p = _setup()
    z = 3.0 + 1e-14
    s2, p2, idx = run_update_test(s, p, [z], [target(z)], [p.log_density(z) - 1.0],
                                  UpdateRule.parse("threshold:0"), derive_run_seed(4, 0))
    assert idx == -1 and s2 is s and p2 is p
