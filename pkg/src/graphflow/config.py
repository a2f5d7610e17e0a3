"""Plain-text run configuration.

    # comment
    [domain]
    kind = ball
    n = 4
    h = 0.125

    [scenario]
    name = hopf_quadratic
    R = 0.0068

Sections are domain, scenario, stepping, monitors and output.  Vectors are
comma separated, matrix rows are separated by ';'.  Unknown sections or
keys, duplicates and type mismatches are errors carrying the line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from . import scenarios
from .domain import DomainError, DomainSpec
from .flow import StepConfig
from .serialize import CSV_COLUMNS_BASE


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class MonitorConfig:
    strict: bool = False
    area_tol: float = 1e-6
    mp_eps: float | None = None
    cadence: int = 1
    seed: int = 0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    snapshot_every: int = 100
    plot: str = "area"


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec
    scenario: str
    scenario_params: dict = field(default_factory=dict)
    stepping: StepConfig = field(default_factory=StepConfig)
    monitors: MonitorConfig = field(default_factory=MonitorConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def make_scenario(self):
        return scenarios.make(self.scenario, **self.scenario_params)


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"{s!r} is not finite")
    return v


def _int(s):
    return int(s)


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


def _vector(s):
    return tuple(_float(p) for p in s.split(","))


def _matrix(s):
    rows = [tuple(_float(p) for p in r.split(",")) for r in s.split(";")]
    if len({len(r) for r in rows}) != 1:
        raise ValueError("matrix rows differ in length")
    return rows


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"{s!r} is not one of {', '.join(options)}")
        return s

    return parse


def _dt(s):
    return s if s == "auto" else _float(s)


def _optional_float(s):
    return None if s == "none" else _float(s)


def _text(s):
    if not s:
        raise ValueError("empty value")
    return s


SCHEMA = {
    "domain": {
        "kind": _choice("box", "ball"),
        "n": _int,
        "h": _float,
        "lower": _vector,
        "upper": _vector,
        "center": _vector,
        "radius": _float,
    },
    "stepping": {
        "scheme": _choice("explicit", "semi_implicit"),
        "dt": _dt,
        "safety": _float,
        "solver_tol": _float,
        "picard_iters": _int,
        "t_end": _float,
        "steady_tol": _optional_float,
        "max_steps": _int,
        "workers": _int,
    },
    "monitors": {
        "strict": _bool,
        "area_tol": _float,
        "mp_eps": _optional_float,
        "cadence": _int,
        "seed": _int,
    },
    "output": {"directory": _text, "snapshot_every": _int, "plot": _text},
}

_PARAM_TYPES = {"float": _float, "int": _int, "vector": _vector, "matrix": _matrix}
REQUIRED = {"domain": ("kind", "h"), "scenario": ("name",), "monitors": ("seed",), "output": ("directory",)}


def _tokenize(text):
    section = None
    out = {}
    where = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA and section != "scenario":
                raise ConfigError(f"unknown section [{section}]", lineno)
            if section in out:
                raise ConfigError(f"duplicate section [{section}]", lineno)
            out[section] = {}
            where[section] = lineno
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError("key outside any section", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key in out[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        out[section][key] = (value, lineno)
    return out, where


def _convert(section, key, value, lineno, parser):
    try:
        return parser(value)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}", lineno) from None


def parse_config(text: str) -> RunConfig:
    raw, where = _tokenize(text)
    for sec, keys in REQUIRED.items():
        if sec not in raw:
            raise ConfigError(f"missing section [{sec}]")
        for k in keys:
            if k not in raw[sec]:
                raise ConfigError(f"[{sec}] missing required key {k!r}", where[sec])

    vals = {}
    for sec, schema in SCHEMA.items():
        vals[sec] = {}
        for key, (value, lineno) in raw.get(sec, {}).items():
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", lineno)
            vals[sec][key] = (_convert(sec, key, value, lineno, schema[key]), lineno)

    d = {k: v for k, (v, _) in vals["domain"].items()}
    dline = where["domain"]
    try:
        if d["kind"] == "box":
            for k in ("n", "center", "radius"):
                if k in d:
                    raise ConfigError(f"[domain] key {k!r} does not apply to boxes", vals["domain"][k][1])
            if "lower" not in d or "upper" not in d:
                raise ConfigError("[domain] a box needs lower and upper", dline)
            domain = DomainSpec.box(d["lower"], d["upper"], d["h"])
        else:
            for k in ("lower", "upper"):
                if k in d:
                    raise ConfigError(f"[domain] key {k!r} does not apply to balls", vals["domain"][k][1])
            if "n" not in d:
                raise ConfigError("[domain] a ball needs n", dline)
            domain = DomainSpec.ball(d["n"], d["h"], d.get("radius", 1.0), d.get("center"))
    except DomainError as exc:
        raise ConfigError(f"[domain] {exc}", dline) from None

    sc = raw["scenario"]
    name, name_line = sc["name"]
    if name not in scenarios.REGISTRY:
        raise ConfigError(f"unknown scenario {name!r}", name_line)
    schema = scenarios.REGISTRY[name][1]
    params = {}
    for key, (value, lineno) in sc.items():
        if key == "name":
            continue
        if key not in schema:
            raise ConfigError(f"unknown parameter {key!r} for scenario {name}", lineno)
        params[key] = _convert("scenario", key, value, lineno, _PARAM_TYPES[schema[key][0]])
    for key, (_, default) in schema.items():
        if default is None and key not in params:
            raise ConfigError(f"[scenario] {name} needs parameter {key!r}", where["scenario"])
    try:
        sc_obj = scenarios.make(name, **params)
        sc_obj.validate_domain(domain)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"[scenario] {exc}", where["scenario"]) from None

    def build(cls, sec):
        kw = {k: v for k, (v, _) in vals[sec].items()}
        try:
            obj = cls(**kw)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {exc}", where.get(sec)) from None
        return obj

    stepping = build(StepConfig, "stepping")
    monitors = build(MonitorConfig, "monitors")
    output = build(OutputConfig, "output")
    mline = where["monitors"]
    if monitors.area_tol <= 0 or (monitors.mp_eps is not None and monitors.mp_eps <= 0):
        raise ConfigError("[monitors] tolerances must be positive", mline)
    if monitors.cadence < 1:
        raise ConfigError("[monitors] cadence must be >= 1", mline)
    if output.snapshot_every < 1:
        raise ConfigError("[output] snapshot_every must be >= 1", where["output"])
    if output.plot not in CSV_COLUMNS_BASE and not output.plot.startswith(("f_max_", "f_min_")):
        raise ConfigError(f"[output] plot: unknown diagnostics column {output.plot!r}", where["output"])
    return RunConfig(domain, name, params, stepping, monitors, output)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)) and v and isinstance(v[0], (tuple, list)):
        return "; ".join(", ".join(repr(float(x)) for x in row) for row in v)
    if isinstance(v, (tuple, list)):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of parse_config: every field written explicitly."""
    d = cfg.domain
    lines = ["[domain]", f"kind = {d.kind}"]
    if d.kind == "box":
        lines += [f"lower = {_fmt(d.lower)}", f"upper = {_fmt(d.upper)}"]
    else:
        lines += [f"n = {d.n}", f"center = {_fmt(d.center)}", f"radius = {_fmt(d.radius)}"]
    lines.append(f"h = {_fmt(d.h)}")
    lines += ["", "[scenario]", f"name = {cfg.scenario}"]
    lines += [f"{k} = {_fmt(v)}" for k, v in cfg.scenario_params.items()]
    for sec, obj in (("stepping", cfg.stepping), ("monitors", cfg.monitors), ("output", cfg.output)):
        lines += ["", f"[{sec}]"]
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, int) and not isinstance(v, bool) and f.type in ("float", "float | str", "float | None"):
                v = float(v)
            lines.append(f"{f.name} = {_fmt(v)}")
    return "\n".join(lines) + "\n"
