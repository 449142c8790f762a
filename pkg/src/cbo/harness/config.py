"""
Flat ``key=value`` experiment configuration.

One pair per line; ``#`` starts a comment; blank lines are ignored. Keys
are case-sensitive. Unknown keys, malformed values and violated
constraints raise :class:`ConfigError` carrying the line number.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields, replace
from typing import Optional

__all__ = ["ConfigError", "ExperimentConfig", "InitSpec", "parse_config", "load_config", "SCHEMES"]

SCHEMES = ("cbo", "cbo_heaviside", "porous", "chi")
OBJECTIVES = ("ackley", "quadratic")

# particle schemes run to this horizon when neither T_max nor max_steps is set
DEFAULT_T_MAX = 10.0
# the quantile solver stops by its own rule; this only caps runaway runs
DEFAULT_CHI_MAX_STEPS = 100000


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else "line %d: %s" % (line, message))


@dataclass(frozen=True)
class InitSpec:
    """Initial law, ``uniform(a, b)`` or ``gaussian(mean, std)`` per coordinate."""

    kind: str = "uniform"
    a: float = -3.0
    b: float = 3.0

    def __str__(self):
        return "%s(%.17g,%.17g)" % (self.kind, self.a, self.b)


_INIT_RE = re.compile(r"^\s*(uniform|gaussian)\s*\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)\s*$")


def _parse_init(text):
    m = _INIT_RE.match(text)
    if not m:
        raise ValueError("expected uniform(a,b) or gaussian(mean,std), got %r" % text)
    kind, a, b = m.group(1), float(m.group(2)), float(m.group(3))
    if kind == "uniform" and not a < b:
        raise ValueError("uniform(a,b) needs a < b")
    if kind == "gaussian" and not b > 0:
        raise ValueError("gaussian(mean,std) needs std > 0")
    return InitSpec(kind, a, b)


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str = "cbo"
    objective: str = "ackley"
    dim: int = 1
    shift: float = 1.0
    N: int = 500
    K: int = 200
    lam: float = 1.0
    sigma: float = 0.8
    alpha: float = 30.0
    dt: float = 2.5e-3
    p: Optional[float] = None
    tol: float = 1e-6
    stop_tol: float = 1e-8
    heaviside_eps: Optional[float] = None
    mollifier_eps: float = 0.1
    gap_floor: float = 1e-6
    init: InitSpec = InitSpec()
    T_max: Optional[float] = None
    max_steps: Optional[int] = None
    record_every: int = 1
    snapshot_every: int = 400
    mc_runs: int = 1
    seed: int = 0
    out_dir: str = "runs/run"
    workers: int = 1

    @property
    def p_exponent(self):
        """Porous exponent; defaults to 2 for the mollified scheme and 1 otherwise."""
        if self.p is not None:
            return float(self.p)
        return 2.0 if self.scheme == "porous" else 1.0

    @property
    def gate_eps(self):
        """Heaviside width; the gated scheme defaults to ``1e-2``, the others to no gate."""
        if self.heaviside_eps is not None:
            return float(self.heaviside_eps)
        return 1e-2 if self.scheme == "cbo_heaviside" else 0.0

    @property
    def steps(self):
        if self.max_steps is not None:
            return int(self.max_steps)
        if self.T_max is not None:
            return int(round(self.T_max / self.dt))
        if self.scheme == "chi":
            return DEFAULT_CHI_MAX_STEPS
        return int(round(DEFAULT_T_MAX / self.dt))

    @property
    def deterministic(self):
        return self.scheme in ("porous", "chi")

    def items(self):
        """``(key, text)`` pairs in file order, using the config-file spelling."""
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            key = _ATTR_TO_KEY.get(f.name, f.name)
            if value is None:
                continue
            if isinstance(value, float):
                text = "%.17g" % value
            else:
                text = str(value)
            out.append((key, text))
        return out

    def to_text(self):
        return "".join("%s=%s\n" % kv for kv in self.items())


_KEY_TO_ATTR = {"lambda": "lam"}
_ATTR_TO_KEY = {v: k for k, v in _KEY_TO_ATTR.items()}

_INT_KEYS = {"dim", "N", "K", "max_steps", "record_every", "snapshot_every", "mc_runs", "seed", "workers"}
_FLOAT_KEYS = {"shift", "lam", "sigma", "alpha", "dt", "p", "tol", "stop_tol", "heaviside_eps", "mollifier_eps", "gap_floor", "T_max"}


def _convert(attr, raw):
    if attr in _INT_KEYS:
        try:
            return int(raw, 10)
        except ValueError:
            raise ValueError("expected an integer, got %r" % raw)
    if attr in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ValueError("expected a number, got %r" % raw)
    if attr == "init":
        return _parse_init(raw)
    return raw


# (attribute, predicate, description); checked in this order
_CONSTRAINTS = [
    ("scheme", lambda v: v in SCHEMES, "must be one of %s" % ", ".join(SCHEMES)),
    ("objective", lambda v: v in OBJECTIVES, "must be one of %s" % ", ".join(OBJECTIVES)),
    ("dim", lambda v: v >= 1, "must be >= 1"),
    ("N", lambda v: v >= 1, "must be >= 1"),
    ("K", lambda v: v >= 2, "must be >= 2"),
    ("lam", lambda v: v > 0, "must be positive"),
    ("sigma", lambda v: v >= 0, "must be nonnegative"),
    ("alpha", lambda v: v > 0, "must be positive"),
    ("dt", lambda v: v > 0, "must be positive"),
    ("p", lambda v: v is None or v >= 1, "must be >= 1"),
    ("tol", lambda v: v > 0, "must be positive"),
    ("stop_tol", lambda v: v >= 0, "must be nonnegative"),
    ("heaviside_eps", lambda v: v is None or v >= 0, "must be nonnegative"),
    ("mollifier_eps", lambda v: v > 0, "must be positive"),
    ("gap_floor", lambda v: v > 0, "must be positive"),
    ("T_max", lambda v: v is None or v >= 0, "must be nonnegative"),
    ("max_steps", lambda v: v is None or v >= 0, "must be nonnegative"),
    ("record_every", lambda v: v >= 1, "must be >= 1"),
    ("snapshot_every", lambda v: v >= 1, "must be >= 1"),
    ("mc_runs", lambda v: v >= 1, "must be >= 1"),
    ("seed", lambda v: 0 <= v < 2**64, "must be a 64-bit unsigned integer"),
    ("workers", lambda v: v >= 1, "must be >= 1"),
]


def _validate(cfg, lines):
    for attr, ok, what in _CONSTRAINTS:
        value = getattr(cfg, attr)
        if not ok(value):
            key = _ATTR_TO_KEY.get(attr, attr)
            raise ConfigError("%s=%s: %s %s" % (key, value, key, what), lines.get(attr))
    if cfg.scheme == "cbo_heaviside" and cfg.heaviside_eps is not None and not cfg.heaviside_eps > 0:
        raise ConfigError("heaviside_eps must be positive for scheme=cbo_heaviside", lines.get("heaviside_eps"))
    if cfg.scheme == "cbo" and cfg.heaviside_eps:
        raise ConfigError("scheme=cbo is ungated; use scheme=cbo_heaviside for heaviside_eps > 0", lines.get("heaviside_eps"))
    if cfg.scheme == "chi" and cfg.heaviside_eps:
        raise ConfigError("the quantile solver has no Heaviside gate; drop heaviside_eps", lines.get("heaviside_eps"))
    if cfg.scheme == "chi" and cfg.dim != 1:
        raise ConfigError("scheme=chi is one-dimensional; dim must be 1", lines.get("dim"))
    if cfg.objective == "quadratic" and not cfg.shift > 0:
        raise ConfigError("shift=%s: the quadratic objective needs shift > 0" % cfg.shift, lines.get("shift"))
    if cfg.T_max is not None and cfg.max_steps is not None:
        line = max(lines.get("T_max", 0), lines.get("max_steps", 0)) or None
        raise ConfigError("set T_max or max_steps, not both", line)


def parse_config(text):
    """
    Parse configuration text; defaults fill every key not given.

    Examples
    --------
    >>> parse_config("sigma=0.8\\nalpha=30").alpha
    30.0
    """
    values = {}
    lines = {}
    known = {f.name for f in fields(ExperimentConfig)}
    for number, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected key=value, got %r" % body, number)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key in _ATTR_TO_KEY:
            # the attribute name is not a config key
            raise ConfigError("unknown key %r (did you mean %r?)" % (key, _ATTR_TO_KEY[key]), number)
        attr = _KEY_TO_ATTR.get(key, key)
        if attr not in known:
            raise ConfigError("unknown key %r" % key, number)
        if attr in values:
            raise ConfigError("duplicate key %r (first set on line %d)" % (key, lines[attr]), number)
        try:
            values[attr] = _convert(attr, raw)
        except ValueError as exc:
            raise ConfigError("%s: %s" % (key, exc), number)
        lines[attr] = number
    cfg = replace(ExperimentConfig(), **values)
    _validate(cfg, lines)
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
