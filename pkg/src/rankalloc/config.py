"""Experiment configuration: one YAML file with a section per module.

Every field has a default, so an empty file (or no file) is a valid config.
Errors are raised as ``ConfigError`` carrying ``file:line`` of the offending key.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields, replace

import yaml

from .bidding import HeuristicWeights
from .domain import ConfigError
from .learner import TrainConfig
from .workload import PRESETS, FleetConfig, WorkloadConfig

BIDDER_NAMES = ("heuristic_b0", "heuristic_b1", "heuristic_b2", "regression", "ranking")
SECTIONS = ("workload", "scenarios", "fleet", "bidding", "learner", "experiment")

# config key -> HeuristicWeights attribute, where they differ
_WEIGHT_KEYS = {"lambda": "lam"}


@dataclass(frozen=True)
class ExperimentConfig:
    workload: WorkloadConfig = WorkloadConfig()
    # scenario name -> fully resolved workload
    scenarios: dict = field(default_factory=lambda: dict(PRESETS))
    fleet: FleetConfig = FleetConfig()
    weights: HeuristicWeights = HeuristicWeights()
    train: TrainConfig = TrainConfig()
    bidders: tuple = BIDDER_NAMES
    seeds: tuple = tuple(range(30))
    output_dir: str = "out"
    # seed-paired comparison reported in paired.csv and slope.csv: (a, b)
    paired: tuple = ("heuristic_b2", "ranking")
    charts: bool = True
    jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        for wl in self.scenarios.values():
            wl.validate()
        self.fleet.validate()
        self.train.validate()
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        if not self.bidders:
            raise ConfigError("at least one bidder is required")
        for b in self.bidders:
            if b not in BIDDER_NAMES:
                raise ConfigError(f"unknown bidder {b!r}; choose from {', '.join(BIDDER_NAMES)}")
        if len(set(self.bidders)) != len(self.bidders):
            raise ConfigError("bidders must not repeat")
        if len(self.paired) != 2 or any(b not in BIDDER_NAMES for b in self.paired):
            raise ConfigError("paired must name two bidders")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds) or min(self.seeds) < 0:
            raise ConfigError("seeds must be distinct non-negative integers")
        if len(self.seeds) < 2:
            raise ConfigError("at least two seeds are required (sample std over seeds)")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return self

    def to_dict(self) -> dict:
        """Nested plain-data form; ``from_dict(to_dict())`` round-trips."""
        weights = {}
        for f in fields(HeuristicWeights):
            key = {v: k for k, v in _WEIGHT_KEYS.items()}.get(f.name, f.name)
            weights[key] = getattr(self.weights, f.name)
        return {
            "workload": _plain(self.workload),
            "scenarios": {name: _diff(self.workload, wl) for name, wl in self.scenarios.items()},
            "fleet": _plain(self.fleet),
            "bidding": _listify(weights),
            "learner": _plain(self.train),
            "experiment": {
                "bidders": list(self.bidders),
                "seeds": list(self.seeds),
                "output_dir": self.output_dir,
                "paired": list(self.paired),
                "charts": self.charts,
                "jobs": self.jobs,
            },
        }

    def hash(self) -> str:
        """Digest of every setting that can change results (not where or how fast they are written)."""
        d = self.to_dict()
        del d["experiment"]["output_dir"], d["experiment"]["jobs"]
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _listify(v):
    if isinstance(v, tuple):
        return [_listify(x) for x in v]
    if isinstance(v, dict):
        return {k: _listify(x) for k, x in v.items()}
    return v


def _plain(obj) -> dict:
    return {f.name: _listify(getattr(obj, f.name)) for f in fields(obj) if f.name != "seed"}


def _diff(base, other) -> dict:
    a, b = _plain(base), _plain(other)
    return {k: v for k, v in b.items() if a[k] != v}


class _Lines:
    """Maps key paths to 1-based source lines."""

    def __init__(self, source: str, node=None):
        self.source = source
        self.lines = {}
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.lines.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (str(k.value),)
                self.lines[p] = k.start_mark.line + 1
                self._walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def error(self, path, msg) -> ConfigError:
        path = tuple(path)
        while path and path not in self.lines:
            path = path[:-1]
        line = self.lines.get(path)
        where = f"{self.source}:{line}" if line else self.source
        dotted = ".".join(str(p) for p in path)
        return ConfigError(f"{where}: {dotted + ': ' if dotted else ''}{msg}")


def _coerce(value, default, path, lines):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise lines.error(path, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise lines.error(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise lines.error(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise lines.error(path, f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise lines.error(path, f"expected a list, got {value!r}")
        if default:
            return tuple(_coerce(v, default[0], path + (i,), lines) for i, v in enumerate(value))
        return tuple(value)
    return value


def _section(cls, base, data, path, lines, rename=None):
    """Apply the mapping ``data`` onto dataclass instance ``base``."""
    if data is None:
        return base
    if not isinstance(data, dict):
        raise lines.error(path, "expected a mapping")
    rename = rename or {}
    public = {rename.get(k, k): k for k in rename}
    known = sorted(public.get(f.name, f.name) for f in fields(cls) if f.name != "seed")
    changes = {}
    for key, value in data.items():
        if key not in known:
            hint = "; seeds belong under experiment.seeds" if key == "seed" else ""
            raise lines.error(path + (key,), f"unknown key; expected one of {', '.join(known)}{hint}")
        attr = rename.get(key, key)
        default = getattr(base, attr)
        if attr == "priority_weight":
            if value is not None and not isinstance(value, dict):
                raise lines.error(path + (key,), "expected a mapping priority -> weight or null")
            changes[attr] = value
        else:
            changes[attr] = _coerce(value, default, path + (key,), lines)
    try:
        out = replace(base, **changes)
        return out.validate() if hasattr(out, "validate") else out
    except (ConfigError, TypeError, ValueError) as exc:
        named = [k for k in data if rename.get(k, k) in str(exc)]
        raise lines.error(path + tuple(named[:1]), str(exc)) from None


def _seeds(value, path, lines):
    if isinstance(value, list):
        return _coerce(value, (0,), path, lines)
    if isinstance(value, dict):
        extra = set(value) - {"base", "count"}
        if extra:
            raise lines.error(path + (sorted(extra)[0],), "unknown key; expected base, count")
        base = _coerce(value.get("base", 0), 0, path + ("base",), lines)
        count = _coerce(value.get("count", 30), 0, path + ("count",), lines)
        if count < 1:
            raise lines.error(path + ("count",), "count must be >= 1")
        return tuple(range(base, base + count))
    raise lines.error(path, "seeds must be a list or a mapping with base and count")


def from_dict(data, lines: _Lines = None) -> ExperimentConfig:
    lines = lines or _Lines("<config>")
    data = data or {}
    if not isinstance(data, dict):
        raise lines.error((), "top level must be a mapping of sections")
    for key in data:
        if key not in SECTIONS:
            raise lines.error((key,), f"unknown section; expected one of {', '.join(SECTIONS)}")

    cfg = ExperimentConfig()
    workload = _section(WorkloadConfig, WorkloadConfig(), data.get("workload"), ("workload",), lines)
    scenarios = {name: _section(WorkloadConfig, workload, _diff(WorkloadConfig(), preset), (), lines)
                 for name, preset in PRESETS.items()}
    if "scenarios" in data:
        raw = data["scenarios"]
        if not isinstance(raw, dict) or not raw:
            raise lines.error(("scenarios",), "expected a nonempty mapping name -> overrides")
        scenarios = {str(name): _section(WorkloadConfig, workload, over, ("scenarios", str(name)), lines)
                     for name, over in raw.items()}
    fleet = _section(FleetConfig, cfg.fleet, data.get("fleet"), ("fleet",), lines)
    weights = _section(HeuristicWeights, cfg.weights, data.get("bidding"), ("bidding",), lines,
                       rename=_WEIGHT_KEYS)
    train = _section(TrainConfig, cfg.train, data.get("learner"), ("learner",), lines)

    exp = data.get("experiment") or {}
    if not isinstance(exp, dict):
        raise lines.error(("experiment",), "expected a mapping")
    changes = {}
    for key, value in exp.items():
        path = ("experiment", key)
        if key == "seeds":
            changes["seeds"] = _seeds(value, path, lines)
        elif key in ("bidders", "paired"):
            changes[key] = _coerce(value, ("",), path, lines)
        elif key in ("output_dir", "charts", "jobs"):
            changes[key] = _coerce(value, getattr(cfg, key), path, lines)
        else:
            raise lines.error(path, "unknown key; expected one of bidders, charts, jobs, output_dir, paired, seeds")

    cfg = replace(cfg, workload=workload, scenarios=scenarios, fleet=fleet, weights=weights, train=train, **changes)
    try:
        return cfg.validate()
    except ConfigError as exc:
        raise lines.error(_guess_path(str(exc)), str(exc)) from None


def _guess_path(msg: str):
    # point validation failures at the most specific section the message names
    for sec, attrs in (("experiment", ("bidder", "seeds", "paired", "jobs", "scenario")),
                       ("learner", ("train.",)), ("fleet", ("machine_count", "speed_range", "energy_range",
                                                            "capability_rule", "cover"))):
        if any(a in msg for a in attrs):
            return (sec,)
    return ("workload",)


def loads(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else "?"
        raise ConfigError(f"{source}:{line}: {exc.problem or exc}") from None
    return from_dict(data, _Lines(source, node))


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return loads(text, str(path))


def dumps(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return dataclasses.replace(cfg, **changes).validate()
