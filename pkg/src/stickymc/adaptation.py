"""Update tests deciding whether a discarded point joins the support set."""

from dataclasses import dataclass
import math
import warnings

from .errors import DomainError, DuplicatePoint, UndefinedRatio

ABS_DIFF = "abs-diff"
RATIO_COMPLEMENT = "ratio-complement"

RANDOM_EXP = "random-exp"
THRESHOLD = "threshold"
RATIO_POWER = "ratio-power"


@dataclass(frozen=True)
class UpdateRule:
    """Inclusion probability ``η`` as a function of a distance ``d``.

    ``random-exp``
        ``η = 1 - exp(-d)`` with ``d = |π̃ - q̃|``.
    ``threshold:<ε>``
        ``η = 1`` when ``d > ε`` and 0 otherwise, with ``d = |π̃ - q̃|``.
    ``ratio-power:<β>``
        ``η = d**β`` with ``d = 1 - min(π̃, q̃)/max(π̃, q̃)``.
    """

    kind: str = RATIO_POWER
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in (RANDOM_EXP, THRESHOLD, RATIO_POWER):
            raise ValueError(f"unknown update rule {self.kind!r}")
        if self.kind == THRESHOLD and not self.param >= 0:
            raise ValueError("threshold ε must be >= 0")
        if self.kind == RATIO_POWER and not self.param > 0:
            raise ValueError("ratio-power β must be > 0")

    @classmethod
    def parse(cls, text):
        """Parse ``"random-exp"``, ``"threshold:<ε>"`` or ``"ratio-power[:<β>]"``."""
        name, _, arg = str(text).strip().lower().partition(":")
        if name == RANDOM_EXP and not arg:
            return cls(RANDOM_EXP, 0.0)
        if name == THRESHOLD:
            return cls(THRESHOLD, float(arg) if arg else 0.1)
        if name == RATIO_POWER:
            return cls(RATIO_POWER, float(arg) if arg else 1.0)
        raise ValueError(f"cannot parse update rule {text!r}")

    @classmethod
    def frozen(cls):
        """A rule that never fires, which freezes the proposal."""
        return cls(THRESHOLD, math.inf)

    def __str__(self):
        if self.kind == RANDOM_EXP:
            return RANDOM_EXP
        return f"{self.kind}:{self.param:g}"

    @property
    def distance_kind(self):
        return RATIO_COMPLEMENT if self.kind == RATIO_POWER else ABS_DIFF

    @property
    def is_frozen(self):
        return self.kind == THRESHOLD and self.param == math.inf

    def eta(self, d):
        return eval_eta(self, d)

    def log_eta(self, log_pi, log_q):
        """``η`` straight from the two log densities, without warnings (hot path)."""
        if self.kind == RATIO_POWER:
            if log_pi == log_q:
                return 0.0
            d = -math.expm1(-abs(log_pi - log_q))
            return d if self.param == 1.0 else d ** self.param
        d = abs(_safe_exp(log_pi) - _safe_exp(log_q))
        if self.kind == RANDOM_EXP:
            return -math.expm1(-d)
        return 1.0 if d > self.param else 0.0


def _safe_exp(v):
    return math.exp(v) if v < 709.0 else math.inf


def eval_distance(kind, target_value, proposal_value):
    """Distance between ``π̃(z)`` and ``q̃_t(z)`` on the linear scale."""
    a, b = float(target_value), float(proposal_value)
    if kind == ABS_DIFF:
        return abs(a - b)
    if kind != RATIO_COMPLEMENT:
        raise ValueError(f"unknown distance kind {kind!r}")
    hi = max(a, b)
    if hi == 0.0:
        warnings.warn(UndefinedRatio("ratio distance with both densities zero; using 0"))
        return 0.0
    return 1.0 - min(a, b) / hi


def eval_eta(rule, d):
    """Inclusion probability for distance ``d``."""
    if d < 0:
        raise DomainError(f"distance must be >= 0, got {d!r}")
    if rule.kind == RANDOM_EXP:
        return -math.expm1(-d)
    if rule.kind == THRESHOLD:
        return 1.0 if d > rule.param else 0.0
    if d > 1.0:
        raise DomainError(f"ratio distance must be <= 1, got {d!r}")
    return d ** rule.param


def mtm_update_probabilities(weights=None, log_weights=None):
    """Inclusion probabilities for the multiple-candidate update.

    With ``φ_i = max(w_i, 1/w_i)`` candidate ``i`` is included with
    probability ``(φ_i - 1)/Σφ`` and nothing is added with probability
    ``M/Σφ``.  Pass ``log_weights`` to avoid overflow.

    Returns
    -------
    (list of float, float)
        Per-candidate probabilities and the probability of keeping the set.
    """
    if log_weights is None:
        log_weights = [math.log(w) for w in weights]
    log_phi = [abs(lw) for lw in log_weights]
    top = max(log_phi)
    # scaled φ_i and scaled 1, both divided by exp(top)
    scaled = [math.exp(lp - top) for lp in log_phi]
    unit = math.exp(-top)
    total = math.fsum(scaled)
    etas = [-math.expm1(-lp) * s / total for lp, s in zip(log_phi, scaled)]
    keep = len(scaled) * unit / total
    return etas, keep


def choose_candidate(rule, log_pis, log_qs, u):
    """Index of the candidate to include given one uniform ``u``, or None.

    A single candidate uses ``η(d)``; several candidates use the ratio-power
    weighting of :func:`mtm_update_probabilities`, each share scaled by
    ``d_i**(β-1)`` so that ``β = 1`` reproduces it exactly.
    """
    if len(log_pis) == 1:
        return 0 if u < rule.log_eta(log_pis[0], log_qs[0]) else None
    if rule.kind != RATIO_POWER:
        raise ValueError("multiple-candidate updates require the ratio-power rule")
    etas, _ = mtm_update_probabilities(log_weights=[a - b for a, b in zip(log_pis, log_qs)])
    if rule.param != 1.0:
        etas = [e * rule.log_eta(a, b) ** (rule.param - 1.0) if e > 0 else 0.0
                for e, a, b in zip(etas, log_pis, log_qs)]
    acc = 0.0
    for i, e in enumerate(etas):
        acc += e
        if u < acc:
            return i
    return None


def run_update_test(support, proposal, candidates, log_pis, log_qs, rule, rng, max_support=None):
    """Possibly add one of ``candidates`` to the support set.

    Consumes exactly one uniform draw.  Returns ``(support, proposal, index)``
    where ``index`` is the included candidate or None.  A candidate too close
    to an existing point is skipped (DuplicatePoint is swallowed) and
    reported as index ``-1``.
    """
    u = rng.random()
    if rule.is_frozen:
        return support, proposal, None
    i = choose_candidate(rule, log_pis, log_qs, u)
    if i is None:
        return support, proposal, None
    if max_support is not None and len(support) >= max_support:
        return support, proposal, None
    try:
        proposal, support = proposal.insert(support, candidates[i], log_pis[i])
    except DuplicatePoint:
        return support, proposal, -1
    return support, proposal, i
