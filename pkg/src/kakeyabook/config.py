"""Experiment configs: schema, YAML loading with line-numbered errors, and the
report-embedded config block used by replay."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import yaml

from .errors import ConfigError, FormatError

COMMANDS = ("fan", "book", "boxdim", "lift", "certify-l1", "certify-book", "spaghetti", "adversarial")
FORMATS = ("csv", "json")
BEGIN = "--- config ---"
END = "--- end config ---"


@dataclass(frozen=True)
class Field:
    kind: str  # float | int | str | bool | floats | section
    default: Any = None
    required: bool = False
    check: Optional[Callable[[Any], Optional[str]]] = None
    choices: tuple = ()
    section: Optional[dict] = None
    nullable: bool = False


def _open_unit(x):
    return None if 0 < x < 1 else "must lie in (0, 1)"


def _positive(x):
    return None if x > 0 else "must be positive"


def _nonneg(x):
    return None if x >= 0 else "must be non-negative"


def _at_least(m):
    return lambda x: None if x >= m else f"must be at least {m}"


def _between(a, b):
    return lambda x: None if a <= x <= b else f"must lie in [{a}, {b}]"


def _angle_budget(x):
    return None if 0 < x <= 2 * math.pi else "must lie in (0, 2pi]"


def _eps_grid(xs):
    if len(xs) < 2:
        return "needs at least two values"
    if any(not 0 < x < 1 for x in xs):
        return "values must lie in (0, 1)"
    if any(b >= a for a, b in zip(xs, xs[1:])):
        return "must be strictly decreasing"
    if any(abs(math.log2(x) - round(math.log2(x))) > 1e-12 for x in xs):
        return "values must be powers of two"
    return None


def _small_deltas(xs):
    if not xs:
        return "needs at least one value"
    return None if all(0 < x < 0.5 for x in xs) else "values must lie in (0, 0.5)"


PLACEMENT = {
    "kind": Field("str", "through_origin", choices=("through_origin", "random_ball", "explicit", "adversarial")),
    "radius": Field("float", 1.0, check=_nonneg),
    "seed": Field("int", 0, check=_nonneg),
    "iterations": Field("int", 200, check=_at_least(1)),
    "centers": Field("floats", None, nullable=True),
}

DIM = Field("int", 2, check=_between(2, 6))
ALPHA = Field("float", required=True, check=_open_unit)
C = Field("float", math.pi / 2, check=_angle_budget)
EPS_GRID = Field("floats", required=True, check=_eps_grid)
BETA = Field("float", None, check=_open_unit, nullable=True)

SCHEMAS: dict[str, dict[str, Field]] = {
    "fan": {
        "n": DIM,
        "alpha": ALPHA,
        "c": C,
        "eps_grid": EPS_GRID,
        "placement": Field("section", section=PLACEMENT),
        "engine": Field("str", "boundary", choices=("boundary", "raster")),
        "pairs": Field("str", "auto", choices=("auto", "linear", "exact", "slab")),
        "raster_tol": Field("float", 1e-4, check=_positive),
        "cap": Field("int", 50_000, check=_at_least(1)),
        "page_phase": Field("float", 0.0),
    },
    "book": {
        "n": Field("int", 3, check=_between(2, 6)),
        "alpha": ALPHA,
        "beta": BETA,
        "c": Field("float", math.pi, check=_angle_budget),
        "eps_grid": EPS_GRID,
        "placement": Field("str", "through_origin", choices=("random", "through_origin")),
        "bound_C": Field("float", 2.0, check=_positive),
        "page_span": Field("float", math.pi, check=_angle_budget),
        "page_phase": Field("float", 0.0),
    },
    "boxdim": {
        "corpus": Field("str", "segment", choices=("point", "segment", "square", "cantor")),
        "n": DIM,
        "angle": Field("float", 0.3),
        "spacing_exp": Field("int", 12, check=_between(2, 14)),
        "levels": Field("int", 7, check=_between(1, 9)),
        "base": Field("int", 2, choices=(2, 4)),
        "k_min": Field("int", 2, check=_nonneg),
        "k_max": Field("int", 10, check=_at_least(1)),
        "skip": Field("int", 2, check=_nonneg),
        "expected": Field("float", None, nullable=True),
        "tolerance": Field("float", 0.05, check=_positive),
        "r2_min": Field("float", 0.99, check=_between(0, 1)),
    },
    "lift": {
        "n": DIM,
        "count": Field("int", 1000, check=_at_least(1)),
        "margin": Field("float", 0.5, check=_open_unit),
        "center_range": Field("float", 1.0, check=_nonneg),
        "deltas": Field("floats", [0.1, 0.05, 0.01, 0.005, 0.001], check=_small_deltas),
        "bound_factor": Field("float", 10.0, check=_positive),
    },
    "certify-l1": {
        "alpha": ALPHA,
        "c": C,
        "eps_grid": EPS_GRID,
        "placement": Field("section", section=PLACEMENT),
        "engine": Field("str", "boundary", choices=("boundary", "raster")),
        "slack": Field("float", 0.1, check=_nonneg),
        "pairs": Field("str", "linear", choices=("linear", "exact")),
        "r2_min": Field("float", 0.95, check=_between(0, 1)),
    },
    "certify-book": {
        "alpha": ALPHA,
        "beta": BETA,
        "eps_grid": EPS_GRID,
        "placement": Field("str", "through_origin", choices=("random", "through_origin")),
        "c": Field("float", math.pi, check=_angle_budget),
        "page_span": Field("float", math.pi, check=_angle_budget),
        "bound_C": Field("float", 2.0, check=_positive),
        "skeleton": Field("bool", True),
        "min_dimension": Field("float", 2.7),
        "r2_min": Field("float", 0.95, check=_between(0, 1)),
    },
    "spaghetti": {
        "n": DIM,
        "count": Field("int", 1000, check=_at_least(2)),
        "cap_radius": Field("float", math.acos(0.5), check=_between(1e-6, math.pi / 2)),
        "center_radius": Field("float", 0.0, check=_nonneg),
        "length": Field("float", 1.0, check=_positive),
        "direction_samples": Field("int", 1000, check=_at_least(1)),
        "sector_samples": Field("int", 1000, check=_at_least(1)),
        "min_members": Field("int", 16, check=_at_least(2)),
        "fill_factor": Field("float", 4.0, check=_positive),
        "shell_width": Field("float", 0.5, check=_positive),
        "k_min": Field("int", 2, check=_nonneg),
        "k_max": Field("int", 8, check=_at_least(1)),
        "skip": Field("int", 2, check=_nonneg),
        "dimension_slack": Field("float", 0.1, check=_nonneg),
        "r2_min": Field("float", 0.95, check=_between(0, 1)),
        "distance_tol": Field("float", 1e-9, check=_positive),
    },
    "adversarial": {
        "alpha": ALPHA,
        "c": C,
        "eps": Field("float", required=True, check=_open_unit),
        "iterations": Field("int", 200, check=_at_least(1)),
        "sigma": Field("float", 0.05, check=_positive),
        "decay": Field("float", 0.9, check=_open_unit),
        "domain_radius": Field("float", 2.0, check=_positive),
        "init_radius": Field("float", 1.0, check=_nonneg),
    },
}

TOP = {
    "command": Field("str", required=True, choices=COMMANDS),
    "seed": Field("int", 0, check=_between(0, 2**64 - 1)),
    "samples": Field("int", 1_000_000, check=_at_least(10_000)),
    "threads": Field("int", 1, check=_at_least(1)),
    "format": Field("str", "csv", choices=FORMATS),
}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    samples: int = 1_000_000
    threads: int = 1
    format: str = "csv"

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "samples": self.samples,
            "threads": self.threads,
            "format": self.format,
            "params": _plain(self.params),
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        for k, v in kw.items():
            if v is not None:
                d[k] = v
        return validate(d)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


# line tracking ------------------------------------------------------------------

def _line_map(node, path=(), out=None) -> dict:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
            out[path + (key,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Validator:
    def __init__(self, lines: dict):
        self.lines = lines

    def fail(self, path, msg):
        line = None
        for cut in range(len(path), -1, -1):
            if path[:cut] in self.lines:
                line = self.lines[path[:cut]]
                break
        where = ".".join(str(p) for p in path) or "<root>"
        prefix = f"line {line}: " if line is not None else ""
        raise ConfigError(f"{prefix}{where}: {msg}")

    def value(self, spec: Field, v, path):
        if v is None:
            if spec.nullable or (spec.default is None and not spec.required):
                return None
            self.fail(path, "must not be null")
        kind = spec.kind
        if kind == "float":
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                self.fail(path, f"expected a number, got {v!r}")
            v = float(v)
            if not math.isfinite(v):
                self.fail(path, "must be finite")
        elif kind == "int":
            if isinstance(v, bool) or not isinstance(v, int):
                self.fail(path, f"expected an integer, got {v!r}")
        elif kind == "str":
            if not isinstance(v, str):
                self.fail(path, f"expected a string, got {v!r}")
        elif kind == "bool":
            if not isinstance(v, bool):
                self.fail(path, f"expected true or false, got {v!r}")
        elif kind == "floats":
            if not isinstance(v, list):
                self.fail(path, "expected a list")
            out = []
            for i, x in enumerate(v):
                if isinstance(x, list):
                    out.append([self.value(Field("float"), y, path + (i, j)) for j, y in enumerate(x)])
                else:
                    out.append(self.value(Field("float"), x, path + (i,)))
            v = out
        elif kind == "section":
            return self.section(spec.section, {} if v is None else v, path)
        if spec.choices and v not in spec.choices:
            self.fail(path, f"must be one of {', '.join(map(str, spec.choices))}; got {v!r}")
        if spec.check is not None:
            msg = spec.check(v)
            if msg:
                self.fail(path, msg)
        return v

    def section(self, schema: dict, raw, path) -> dict:
        if not isinstance(raw, dict):
            self.fail(path, "expected a mapping")
        unknown = sorted(set(raw) - set(schema))
        if unknown:
            self.fail(path + (unknown[0],), "unknown key")
        out = {}
        for key, spec in schema.items():
            if key in raw:
                out[key] = self.value(spec, raw[key], path + (key,))
            elif spec.required:
                self.fail(path, f"missing required key {key!r}")
            elif spec.kind == "section":
                out[key] = self.section(spec.section, {}, path + (key,))
            else:
                out[key] = spec.default
        return out


def validate(raw: Any, lines: Optional[dict] = None) -> ExperimentConfig:
    v = _Validator(lines or {})
    if not isinstance(raw, dict):
        v.fail((), "config must be a mapping")
    top_raw = {k: raw[k] for k in raw if k != "params"}
    top = v.section(TOP, top_raw, ())
    params = v.section(SCHEMAS[top["command"]], raw.get("params") or {}, ("params",))
    _cross_checks(top["command"], params, v)
    return ExperimentConfig(top["command"], params, top["seed"], top["samples"], top["threads"], top["format"])


def _cross_checks(command: str, p: dict, v: _Validator) -> None:
    if "k_min" in p and p["k_max"] - p["k_min"] + 1 < 4:
        v.fail(("params", "k_max"), "needs at least four scales between k_min and k_max")
    pl = p.get("placement")
    if isinstance(pl, dict) and pl["kind"] == "explicit" and not pl["centers"]:
        v.fail(("params", "placement", "centers"), "explicit placement needs centers")
    if command == "fan" and p["n"] > 2:
        if p["pairs"] == "exact":
            v.fail(("params", "pairs"), "exact pair areas are planar only")
        if pl["kind"] == "adversarial":
            v.fail(("params", "placement", "kind"), "adversarial placement is planar only")


def loads(text: str) -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{line}invalid YAML: {getattr(e, 'problem', e)}") from None
    if node is None:
        raise ConfigError("line 1: empty config")
    return validate(raw, _line_map(node))


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


# report embedding ------------------------------------------------------------------

def embed(config: ExperimentConfig) -> str:
    return f"{BEGIN}\n{config.dump()}{END}\n"


def extract(report_text: str) -> ExperimentConfig:
    """The config embedded in a report; FormatError if the block is missing or corrupt."""
    lines = report_text.splitlines()
    try:
        a = lines.index(BEGIN)
        b = lines.index(END, a + 1)
    except ValueError:
        raise FormatError("report has no complete config block") from None
    try:
        return loads("\n".join(lines[a + 1:b]) + "\n")
    except ConfigError as e:
        raise FormatError(f"corrupt config block: {e}") from None
