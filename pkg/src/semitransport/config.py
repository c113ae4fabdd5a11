"""Scenario and convergence-study configuration files (YAML).

Scenario grammar (all keys top level)::

    scale: "stopstart(0.5, 0.5, 6)"    # or a literal list [[0, 0.5], [1, 1.5], 2]
    periodic: false                    # repeat the last gap+component pattern up to t_max
    t_max: 5.5                         # required; must belong to the (extended) scale
    k: 1.0
    A: 1.0
    mu_x: 1.0
    initial: point                     # or a list C_m, placed from initial_offset upward
    initial_offset: 0
    h_out: null                        # default: each interval / 64
    tail_tol: 1.0e-12
    quad_tol: 1.0e-10
    outputs:
      field: true
      time_sections: [0, 1, 2]
      space_sections: [1.0, 2.5]
      conservation: true
      pdf_check: true

Convergence grammar::

    rate: 1.0
    steps: [4, 8, 16]
    target_time: 1.0
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .timescale import TimeScale, parse_scale
from .transport import TransportProblem

OUTPUT_KEYS = ("field", "time_sections", "space_sections", "conservation", "pdf_check")


@dataclass(frozen=True)
class Outputs:
    field: bool = True
    time_sections: tuple[int, ...] = ()
    space_sections: tuple[float, ...] = ()
    conservation: bool = True
    pdf_check: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    scale: str | list
    t_max: float
    k: float = 1.0
    A: float = 1.0
    mu_x: float = 1.0
    initial: str | tuple[float, ...] = "point"
    initial_offset: int = 0
    periodic: bool = False
    h_out: float | None = None
    tail_tol: float = 1e-12
    quad_tol: float = 1e-10
    outputs: Outputs = field(default_factory=Outputs)

    def time_scale(self) -> TimeScale:
        return parse_scale(self.scale).with_horizon(self.t_max, self.periodic)

    def problem(self) -> TransportProblem:
        initial = None
        if self.initial != "point":
            initial = {self.initial_offset + j: c for j, c in enumerate(self.initial)}
        return TransportProblem(
            k=self.k, mu_x=self.mu_x, scale=self.time_scale(), A=self.A,
            initial=initial, tail_tol=self.tail_tol,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outputs"]["time_sections"] = list(self.outputs.time_sections)
        d["outputs"]["space_sections"] = list(self.outputs.space_sections)
        if self.initial != "point":
            d["initial"] = list(self.initial)
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    @classmethod
    def from_dict(cls, raw) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping of keys to values")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown key(s): {', '.join(sorted(unknown))}")
        if "scale" not in raw:
            raise ConfigError("scale: required")
        if "t_max" not in raw:
            raise ConfigError("t_max: required")
        scale = raw["scale"]
        if not isinstance(scale, (str, list)):
            raise ConfigError("scale: must be a shorthand string or a list of [a, b] / a entries")
        try:
            parse_scale(scale)
        except ValueError as exc:
            raise ConfigError(f"scale: {exc}") from None

        t_max = _number(raw, "t_max", positive=True)
        k = _number(raw, "k", 1.0, positive=True)
        A = _number(raw, "A", 1.0, positive=True)
        mu_x = _number(raw, "mu_x", 1.0, positive=True)
        tail_tol = _number(raw, "tail_tol", 1e-12, positive=True)
        quad_tol = _number(raw, "quad_tol", 1e-10, positive=True)
        h_out = None if raw.get("h_out") is None else _number(raw, "h_out", positive=True)
        periodic = raw.get("periodic", False)
        if not isinstance(periodic, bool):
            raise ConfigError("periodic: must be true or false")

        initial = raw.get("initial", "point")
        if initial != "point":
            if not isinstance(initial, list) or not initial:
                raise ConfigError("initial: must be 'point' or a non-empty list of numbers")
            try:
                initial = tuple(float(c) for c in initial)
            except (TypeError, ValueError):
                raise ConfigError("initial: entries must be numbers") from None
            if not all(math.isfinite(c) for c in initial):
                raise ConfigError("initial: entries must be finite")
        offset = raw.get("initial_offset", 0)
        if isinstance(offset, bool) or not isinstance(offset, int):
            raise ConfigError("initial_offset: must be an integer")

        outputs = _outputs(raw.get("outputs", {}))
        cfg = cls(scale, t_max, k, A, mu_x, initial, offset, periodic, h_out, tail_tol, quad_tol, outputs)
        try:
            scale = cfg.time_scale()
        except ValueError as exc:
            raise ConfigError(f"t_max: {exc}") from None
        for t in outputs.space_sections:
            if t not in scale:
                raise ConfigError(f"outputs.space_sections: t={t!r} is not in the time scale")
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_dict(_read_yaml(path))


@dataclass(frozen=True)
class ConvergenceStudyConfig:
    rate: float
    steps: tuple[int, ...]
    target_time: float = 1.0

    @classmethod
    def from_dict(cls, raw) -> "ConvergenceStudyConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping of keys to values")
        unknown = set(raw) - {"rate", "steps", "target_time"}
        if unknown:
            raise ConfigError(f"unknown key(s): {', '.join(sorted(unknown))}")
        rate = _number(raw, "rate", nonnegative=True)
        target = _number(raw, "target_time", 1.0, positive=True)
        steps = raw.get("steps")
        if not isinstance(steps, list) or not steps:
            raise ConfigError("steps: must be a non-empty list of integers")
        for n in steps:
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise ConfigError(f"steps: every n must be an integer >= 1, got {n!r}")
        return cls(rate, tuple(steps), target)

    @classmethod
    def load(cls, path: str | Path) -> "ConvergenceStudyConfig":
        return cls.from_dict(_read_yaml(path))

    def dump(self) -> str:
        return yaml.safe_dump(
            {"rate": self.rate, "steps": list(self.steps), "target_time": self.target_time},
            sort_keys=False, default_flow_style=None,
        )


def _read_yaml(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None


def _number(raw, key, default=None, positive=False, nonnegative=False) -> float:
    if key not in raw or raw[key] is None:
        if default is None:
            raise ConfigError(f"{key}: required")
        return default
    v = raw[key]
    if isinstance(v, str):
        # PyYAML reads exponents without a dot ("1e-12") as strings
        try:
            v = float(v)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw[key]!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key}: expected a finite number, got {raw[key]!r}")
    if positive and not v > 0:
        raise ConfigError(f"{key}: must be > 0, got {v!r}")
    if nonnegative and not v >= 0:
        raise ConfigError(f"{key}: must be >= 0, got {v!r}")
    return float(v)


def _outputs(raw) -> Outputs:
    if not isinstance(raw, dict):
        raise ConfigError("outputs: must be a mapping")
    unknown = set(raw) - set(OUTPUT_KEYS)
    if unknown:
        raise ConfigError(f"outputs: unknown key(s) {', '.join(sorted(unknown))}")
    flags = {}
    for key in ("field", "conservation", "pdf_check"):
        v = raw.get(key, getattr(Outputs, key))
        if not isinstance(v, bool):
            raise ConfigError(f"outputs.{key}: must be true or false")
        flags[key] = v
    tsec = raw.get("time_sections", [])
    if not isinstance(tsec, list) or any(isinstance(m, bool) or not isinstance(m, int) or m < 0 for m in tsec):
        raise ConfigError("outputs.time_sections: must be a list of integers >= 0")
    ssec = raw.get("space_sections", [])
    if not isinstance(ssec, list) or any(isinstance(t, bool) or not isinstance(t, (int, float)) for t in ssec):
        raise ConfigError("outputs.space_sections: must be a list of times")
    return Outputs(flags["field"], tuple(tsec), tuple(float(t) for t in ssec), flags["conservation"], flags["pdf_check"])


PRESETS: dict[str, ScenarioConfig] = {
    "poisson": ScenarioConfig(
        scale="interval(10)", t_max=10.0,
        outputs=Outputs(time_sections=(0, 1, 2), space_sections=(1.0, 5.0, 10.0), pdf_check=True),
    ),
    "bernoulli": ScenarioConfig(
        scale="uniform(0.25, 80)", t_max=20.0,
        outputs=Outputs(time_sections=(0, 1, 2), space_sections=(1.0, 5.0), pdf_check=True),
    ),
    "harmonic": ScenarioConfig(
        scale="harmonic(60)", t_max=TimeScale.harmonic(60).t_max,
        outputs=Outputs(time_sections=(0, 1), space_sections=(TimeScale.harmonic(60).components[10].start,), pdf_check=True),
    ),
    "stopstart": ScenarioConfig(
        scale="stopstart(0.5, 0.5, 2)", periodic=True, t_max=30.5,
        outputs=Outputs(time_sections=(0, 1, 2, 3), space_sections=(0.5, 1.0, 5.25), pdf_check=True),
    ),
}
