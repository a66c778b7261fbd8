"""Transition kernels and the chain driver.

Kernels
-------
``asm``
    Independence Metropolis-Hastings with a sticky proposal; the point that is
    not retained is offered to the update test.
``asmtm:<M>``
    Multiple-try version drawing ``M`` candidates per iteration and offering
    all ``M`` discarded points to the update test.
``arms``
    Adaptive rejection Metropolis sampling: points are added only when the
    rejection-sampling prefilter rejects them.
``imh``
    Plain independence Metropolis-Hastings with a fixed proposal supplied by
    the target (used as a reference for the volatility example).

Every kernel works in log space.  For a candidate ``x'`` the importance
weight is ``w(x') = π̃(x')/q̃_t(x')``.
"""

from dataclasses import dataclass, field
import math
import time
from typing import Optional

import numpy as np

from .adaptation import UpdateRule, run_update_test
from .errors import DuplicatePoint, RsLoopStall
from .proposal import build_proposal, parse_construction
from .support import new_support_set

RS_LOOP_CAP = 10_000
NEG_INF = -math.inf


def _logsumexp(values):
    if len(values) == 1:
        return values[0]
    top = max(values)
    if top == NEG_INF:
        return NEG_INF
    return top + math.log(math.fsum(math.exp(v - top) for v in values))


def _accept(log_ratio, u):
    """Acceptance decision and probability for ``min(1, exp(log_ratio))``."""
    if log_ratio >= 0.0:
        return True, 1.0
    alpha = math.exp(log_ratio)
    return u < alpha, alpha


@dataclass(slots=True)
class ChainState:
    """Current point plus the adaptive structures.

    ``log_pi`` caches ``log π̃(x)`` so the target is evaluated once per
    candidate only.  ``eval_count`` counts target evaluations and
    ``candidate_count`` counts proposal draws (the EI numerator).
    """

    x: float
    log_pi: float
    support: object
    proposal: object
    iter: int = 0
    eval_count: int = 0
    candidate_count: int = 0

    @property
    def nsp(self):
        """Support points plus active intersection breakpoints of the proposal."""
        return len(self.support) + self.proposal.n_breakpoints


@dataclass(slots=True)
class StepEvent:
    accepted: bool
    candidates: tuple
    acceptance_prob: float
    z_tested: Optional[tuple] = None
    z_included: bool = False
    rs_rejections: int = 0


def asm_step(state, target, rule, rng, max_support=None):
    """One iteration of the single-candidate sticky sampler.

    Draw order: four uniforms for the candidate, one for acceptance, one for
    the update test.
    """
    p = state.proposal
    x_old, lp_old = state.x, state.log_pi
    xp = p.sample(rng)
    lp_new = target.log_density(xp)
    lq_new = p.log_density(xp)
    lq_old = p.log_density(x_old)
    accepted, alpha = _accept((lp_new - lq_new) - (lp_old - lq_old), rng.random())
    if accepted:
        x, lp, z, lp_z, lq_z = xp, lp_new, x_old, lp_old, lq_old
    else:
        x, lp, z, lp_z, lq_z = x_old, lp_old, xp, lp_new, lq_new
    support, proposal, included = _update(state, [z], [lp_z], [lq_z], rule, rng, max_support)
    new = ChainState(x, lp, support, proposal, state.iter + 1,
                     state.eval_count + 1, state.candidate_count + 1)
    return new, StepEvent(accepted, (xp,), alpha, (z,), included is not None and included >= 0)


def _update(state, zs, lps, lqs, rule, rng, max_support):
    if all(math.isfinite(v) for v in lps):
        return run_update_test(state.support, state.proposal, zs, lps, lqs, rule, rng, max_support)
    # points outside the target support can never join the set
    keep = [i for i, v in enumerate(lps) if math.isfinite(v)]
    if not keep:
        rng.random()
        return state.support, state.proposal, None
    support, proposal, i = run_update_test(
        state.support, state.proposal, [zs[i] for i in keep], [lps[i] for i in keep],
        [lqs[i] for i in keep], rule, rng, max_support)
    return support, proposal, (keep[i] if i is not None and i >= 0 else i)


def mtm_acceptance(proposal_weights=None, reference_weights=None, log_proposal=None, log_reference=None):
    """``min(1, Σ w(x'_i) / Σ w(x*_i))``, optionally from log weights."""
    if log_proposal is None:
        log_proposal = [math.log(w) if w > 0 else NEG_INF for w in proposal_weights]
        log_reference = [math.log(w) if w > 0 else NEG_INF for w in reference_weights]
    num = _logsumexp(log_proposal)
    den = _logsumexp(log_reference)
    if num == NEG_INF:
        return 0.0
    return min(1.0, math.exp(num - den))


def asmtm_step(state, target, rule, tries, rng, max_support=None):
    """One iteration of the multiple-try sticky sampler with ``tries`` candidates.

    With ``tries == 1`` this is exactly :func:`asm_step`, including the draw
    sequence, so both kernels give identical trajectories from one seed.
    """
    if tries == 1:
        return asm_step(state, target, rule, rng, max_support)
    p = state.proposal
    x_old, lp_old = state.x, state.log_pi
    xs = [p.sample(rng) for _ in range(tries)]
    lps = [target.log_density(x) for x in xs]
    lqs = [p.log_density(x) for x in xs]
    lws = [a - b for a, b in zip(lps, lqs)]
    total = _logsumexp(lws)
    u = rng.random()
    if total == NEG_INF:
        j = min(int(u * tries), tries - 1)
    else:
        target_mass = u * math.fsum(math.exp(lw - total) for lw in lws)
        acc = 0.0
        j = tries - 1
        for i, lw in enumerate(lws):
            acc += math.exp(lw - total)
            if target_mass < acc:
                j = i
                break
    lq_old = p.log_density(x_old)
    ref = list(lws)
    ref[j] = lp_old - lq_old
    log_ratio = total - _logsumexp(ref) if total != NEG_INF else NEG_INF
    accepted, alpha = _accept(log_ratio, rng.random())
    zs, zlp, zlq = list(xs), list(lps), list(lqs)
    if accepted:
        x, lp = xs[j], lps[j]
        zs[j], zlp[j], zlq[j] = x_old, lp_old, lq_old
    else:
        x, lp = x_old, lp_old
    support, proposal, included = _update(state, zs, zlp, zlq, rule, rng, max_support)
    new = ChainState(x, lp, support, proposal, state.iter + 1,
                     state.eval_count + tries, state.candidate_count + tries)
    return new, StepEvent(accepted, tuple(xs), alpha, tuple(zs), included is not None and included >= 0)


def arms_step(state, target, rng, max_support=None):
    """One ARMS iteration: rejection prefilter with adaptation, then an MH correction."""
    p, support = state.proposal, state.support
    x_old, lp_old = state.x, state.log_pi
    draws = 0
    rejections = 0
    while True:
        xp = p.sample(rng)
        draws += 1
        lp = target.log_density(xp)
        lq = p.log_density(xp)
        u = rng.random()
        if lp >= lq or u < math.exp(lp - lq):
            break
        rejections += 1
        if rejections >= RS_LOOP_CAP:
            raise RsLoopStall(f"{rejections} consecutive rejections at iteration {state.iter + 1}")
        if math.isfinite(lp) and (max_support is None or len(support) < max_support):
            try:
                p, support = p.insert(support, xp, lp)
            except DuplicatePoint:
                pass
    lq_old = p.log_density(x_old)
    # grouped so that each bracket is exactly 0 where the proposal covers the target
    log_ratio = (lp - min(lp, lq)) - (lp_old - min(lp_old, lq_old))
    accepted, alpha = _accept(log_ratio, rng.random())
    x, lpx = (xp, lp) if accepted else (x_old, lp_old)
    new = ChainState(x, lpx, support, p, state.iter + 1,
                     state.eval_count + draws, state.candidate_count + draws)
    return new, StepEvent(accepted, (xp,), alpha, None, rejections > 0, rejections)


def independence_mh_step(state, target, proposal_sampler, proposal_logdensity, rng):
    """Independence MH with a fixed proposal ``g``: ``α = min(1, π̃(x')g(x)/(π̃(x)g(x')))``."""
    xp = proposal_sampler(rng)
    lp = target.log_density(xp)
    log_ratio = (lp - proposal_logdensity(xp)) - (state.log_pi - proposal_logdensity(state.x))
    accepted, alpha = _accept(log_ratio, rng.random())
    x, lpx = (xp, lp) if accepted else (state.x, state.log_pi)
    new = ChainState(x, lpx, state.support, state.proposal, state.iter + 1,
                     state.eval_count + 1, state.candidate_count + 1)
    return new, StepEvent(accepted, (xp,), alpha)


# ---------------------------------------------------------------------------


KERNELS = ("asm", "asmtm", "arms", "imh")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice plus its proposal construction and update rule."""

    kind: str = "asm"
    tries: int = 1
    construction: str = "c4"
    rule: UpdateRule = field(default_factory=UpdateRule)
    max_support: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.tries < 1:
            raise ValueError("tries must be >= 1")
        parse_construction(self.construction)
        if (self.kind == "asmtm" and self.tries > 1 and self.rule.kind != "ratio-power"
                and not self.rule.is_frozen):
            raise ValueError("multiple-try kernels support only the ratio-power update rule")

    @classmethod
    def parse(cls, text, construction="c4", rule=None, max_support=None):
        """Build from ``"asm"``, ``"asmtm:<M>"``, ``"arms"`` or ``"imh"``."""
        name, _, arg = str(text).strip().lower().partition(":")
        if name == "asmtm":
            tries = int(arg) if arg else 10
        elif arg:
            raise ValueError(f"kernel {name!r} takes no argument")
        else:
            tries = 1
        if isinstance(rule, str):
            rule = UpdateRule.parse(rule)
        return cls(name, tries, construction, rule or UpdateRule(), max_support)

    @property
    def name(self):
        return f"asmtm:{self.tries}" if self.kind == "asmtm" else self.kind

    @property
    def label(self):
        """Table label such as ``ASM-4`` or ``ARMS-1``."""
        if self.kind == "imh":
            return "IMH"
        return f"{self.kind.upper()}-{parse_construction(self.construction)}"


@dataclass
class ChainTrace:
    """Per-iteration record of a chain of length ``T`` (the starting point is excluded)."""

    states: np.ndarray
    accepted: np.ndarray
    nsp: np.ndarray
    log_mass: np.ndarray
    final: ChainState
    elapsed: float
    events: Optional[list] = None

    @property
    def T(self):
        return len(self.states)

    @property
    def acc_cum(self):
        return np.cumsum(self.accepted) / np.arange(1, self.T + 1)

    @property
    def c_t(self):
        # an early proposal with rising end pieces on a wide bounded support can exceed float range
        with np.errstate(over="ignore"):
            return np.exp(self.log_mass)

    @property
    def ei(self):
        return self.final.candidate_count


def init_state(kernel, target, x0, s0):
    """Starting state: support set and proposal from ``s0``, cached ``log π̃(x0)``."""
    lp0 = target.log_density(x0)
    if kernel.kind == "imh":
        return ChainState(float(x0), lp0, (), _NoProposal(), 0, 1, 0)
    support = new_support_set(s0, target.log_density)
    proposal = build_proposal(support, kernel.construction, target.support)
    return ChainState(float(x0), lp0, support, proposal, 0, len(support) + 1, 0)


class _NoProposal:
    n_breakpoints = 0
    log_total = NEG_INF


def make_step(kernel, target):
    """Return ``step(state, rng) -> (state, event)`` for a kernel spec."""
    if kernel.kind == "asm":
        return lambda s, r: asm_step(s, target, kernel.rule, r, kernel.max_support)
    if kernel.kind == "asmtm":
        return lambda s, r: asmtm_step(s, target, kernel.rule, kernel.tries, r, kernel.max_support)
    if kernel.kind == "arms":
        return lambda s, r: arms_step(s, target, r, kernel.max_support)
    g = target.imh_proposal
    if g is None:
        raise ValueError(f"target {target.label!r} has no fixed independence proposal")
    return lambda s, r: independence_mh_step(s, target, g.sample, g.log_density, r)


def run_chain(kernel, target, x0, s0, T, rng, keep_events=False):
    """Run ``T`` iterations of ``kernel`` from ``x0`` with initial support ``s0``.

    No burn-in is discarded.  The same ``rng`` state always gives the same
    trace.
    """
    if isinstance(kernel, str):
        kernel = KernelSpec.parse(kernel)
    step = make_step(kernel, target)
    state = init_state(kernel, target, x0, s0)
    states = np.empty(T)
    accepted = np.empty(T, dtype=bool)
    nsp = np.empty(T, dtype=np.int64)
    log_mass = np.empty(T)
    events = [] if keep_events else None
    start = time.perf_counter()
    for t in range(T):
        state, ev = step(state, rng)
        states[t] = state.x
        accepted[t] = ev.accepted
        nsp[t] = len(state.support) + state.proposal.n_breakpoints
        log_mass[t] = state.proposal.log_total
        if keep_events:
            events.append(ev)
    return ChainTrace(states, accepted, nsp, log_mass, state, time.perf_counter() - start, events)
