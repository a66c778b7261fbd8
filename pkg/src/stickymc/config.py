"""TOML experiment configuration.

A minimal file names a target and a kernel::

    target = "gmix61"
    kernel = "asm"

Everything else has a default.  Several algorithms can be listed either as
a product (``kernel``/``construction`` given as lists) or explicitly::

    [[algorithm]]
    kernel = "arms"
    construction = "c1"

    [[algorithm]]
    kernel = "asmtm:10"
    construction = "c4"
"""

from dataclasses import asdict, dataclass, replace
import hashlib
import sys
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .adaptation import UpdateRule
from .errors import ParseError, ValidationError
from .proposal import parse_construction
from .samplers import KernelSpec
from .targets import get_target

DEFAULT_T = 5000
DEFAULT_RUNS = 200
PAPER_RUNS = 2000
DEFAULT_RULE = "ratio-power:1"
DEFAULT_CONSTRUCTION = "c4"

_TOP_KEYS = {"name", "target", "kernel", "construction", "rule", "algorithm", "s0", "x0", "T",
             "runs", "seed", "out", "eps_sweep", "workers", "max_support", "trace_runs", "functionals"}


@dataclass(frozen=True)
class AlgorithmSpec:
    kernel: str
    construction: str = DEFAULT_CONSTRUCTION
    rule: str = DEFAULT_RULE

    def kernel_spec(self, rule=None, max_support=None):
        return KernelSpec.parse(self.kernel, self.construction, rule or self.rule, max_support)

    @property
    def label(self):
        spec = self.kernel_spec()
        return spec.label if spec.kind != "asmtm" else f"{spec.label}(M={spec.tries})"


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    ``s0`` is either a list of points or ``"uniform:<a>,<b>,<m>"`` meaning
    ``m`` points drawn afresh for each replication.  ``x0`` and ``s0`` default
    to the target's own defaults when left as None.
    """

    target: str
    algorithms: tuple
    name: str = "experiment"
    s0: object = None
    x0: Optional[float] = None
    T: int = DEFAULT_T
    runs: int = DEFAULT_RUNS
    seed: int = 0
    out: str = "results"
    eps_sweep: Optional[tuple] = None
    workers: int = 1
    max_support: Optional[int] = None
    trace_runs: int = 1
    functionals: Optional[str] = None

    def to_dict(self):
        d = {"name": self.name, "target": self.target, "T": self.T, "runs": self.runs,
             "seed": self.seed, "out": self.out, "workers": self.workers, "trace_runs": self.trace_runs}
        if self.s0 is not None:
            d["s0"] = self.s0 if isinstance(self.s0, str) else list(self.s0)
        if self.x0 is not None:
            d["x0"] = self.x0
        if self.eps_sweep is not None:
            d["eps_sweep"] = list(self.eps_sweep)
        if self.max_support is not None:
            d["max_support"] = self.max_support
        if self.functionals is not None:
            d["functionals"] = self.functionals
        d["algorithm"] = [asdict(a) for a in self.algorithms]
        return d

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @property
    def hash(self):
        """Short digest of the settings that determine the results."""
        d = self.to_dict()
        for k in ("out", "workers", "trace_runs"):
            d.pop(k, None)
        return hashlib.sha256(tomli_w.dumps(d).encode()).hexdigest()[:12]


def serialize(cfg):
    """TOML text that :func:`parse_text` maps back to ``cfg``."""
    return tomli_w.dumps(cfg.to_dict())


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _check_algorithm(a):
    try:
        parse_construction(a.construction)
        a.kernel_spec()
    except ValueError as exc:
        raise ValidationError("algorithm", str(exc)) from None
    return a


def _check_s0(s0):
    if s0 is None:
        return None
    if isinstance(s0, str):
        kind, _, arg = s0.partition(":")
        try:
            a, b, m = arg.split(",")
            a, b, m = float(a), float(b), int(m)
        except ValueError:
            raise ValidationError("s0", f"cannot parse {s0!r}; expected 'uniform:<a>,<b>,<m>'") from None
        if kind != "uniform" or not a < b or m < 2:
            raise ValidationError("s0", f"invalid random support spec {s0!r}")
        return f"uniform:{a:g},{b:g},{m}"
    pts = tuple(float(p) for p in s0)
    if len(pts) < 2 or len(set(pts)) != len(pts):
        raise ValidationError("s0", "need at least two distinct points")
    return pts


def from_dict(d):
    """Validate a parsed mapping and fill in defaults."""
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown key")
    if "target" not in d:
        raise ValidationError("target", "missing")
    try:
        get_target(d["target"])
    except (KeyError, ValueError) as exc:
        raise ValidationError("target", str(exc)) from None
    rule = d.get("rule", DEFAULT_RULE)
    try:
        rule = str(UpdateRule.parse(rule))
    except ValueError as exc:
        raise ValidationError("rule", str(exc)) from None
    if "algorithm" in d:
        if "kernel" in d or "construction" in d:
            raise ValidationError("algorithm", "use either [[algorithm]] tables or kernel/construction, not both")
        algos = []
        for i, a in enumerate(d["algorithm"]):
            if "kernel" not in a:
                raise ValidationError(f"algorithm[{i}].kernel", "missing")
            extra = set(a) - {"kernel", "construction", "rule"}
            if extra:
                raise ValidationError(f"algorithm[{i}].{sorted(extra)[0]}", "unknown key")
            algos.append(AlgorithmSpec(a["kernel"], a.get("construction", DEFAULT_CONSTRUCTION),
                                       str(UpdateRule.parse(a.get("rule", rule)))))
    elif "kernel" in d:
        algos = [AlgorithmSpec(k, c, rule) for k in _as_list(d["kernel"])
                 for c in _as_list(d.get("construction", DEFAULT_CONSTRUCTION))]
    else:
        raise ValidationError("kernel", "missing")
    algos = tuple(_check_algorithm(a) for a in algos)
    if not algos:
        raise ValidationError("algorithm", "at least one algorithm is required")

    T = d.get("T", DEFAULT_T)
    if not isinstance(T, int) or T < 1:
        raise ValidationError("T", f"must be a positive integer, got {T!r}")
    runs = d.get("runs", DEFAULT_RUNS)
    if not isinstance(runs, int) or runs < 1:
        raise ValidationError("runs", f"must be a positive integer, got {runs!r}")
    workers = d.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ValidationError("workers", "must be a positive integer")
    eps = d.get("eps_sweep")
    if eps is not None:
        eps = tuple(float(e) for e in eps)
        if not eps or any(e < 0 for e in eps):
            raise ValidationError("eps_sweep", "needs non-negative thresholds")
    x0 = d.get("x0")
    max_support = d.get("max_support")
    if max_support is not None and (not isinstance(max_support, int) or max_support < 3):
        raise ValidationError("max_support", "must be an integer >= 3")
    functionals = d.get("functionals")
    if functionals not in (None, "lifetime"):
        raise ValidationError("functionals", "only 'lifetime' is supported")
    return ExperimentConfig(
        target=str(d["target"]), algorithms=algos, name=str(d.get("name", "experiment")),
        s0=_check_s0(d.get("s0")), x0=None if x0 is None else float(x0), T=T, runs=runs,
        seed=int(d.get("seed", 0)), out=str(d.get("out", "results")), eps_sweep=eps,
        workers=workers, max_support=max_support, trace_runs=int(d.get("trace_runs", 1)),
        functionals=functionals)


def parse_text(text):
    try:
        d = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(str(exc)) from None
    return from_dict(d)


def parse_config(path):
    """Read and validate a TOML experiment file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 ({exc})") from None
    return parse_text(text)
