"""Scenario configuration files.

Format: INI-style sections with `key = value` lines, parsed by configparser.

    [scenario]     name = detector | flat-decay | cavity | bayes | projection
                   plus scenario keys (n_max, t1, n1, a, dt, t_zoom, resolved)
    [params]       any ModelParams field, gamma_d, or D / Dprime as a shortcut
    [grid]         n_levels, half_bandwidth, taper
    [integration]  method, tolerance, step, t_end, n_outputs, max_steps
    [sweep]        parameter, values
    [output]       format (csv | json), path
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import InvalidParams, ModelParams, derived_rates, validate_params
from .integrator import DEFAULT_LEVELS, IntegrationControl

SCENARIOS = {
    "detector": "counting statistics of the bare point contact",
    "flat-decay": "dot decaying into a flat continuum under measurement",
    "cavity": "dot coupled to a cavity level; Zeno and anti-Zeno regimes",
    "bayes": "count distribution conditioned on an intermediate readout",
    "projection": "survival under repeated projective checks",
}

SECTIONS = ("scenario", "params", "grid", "integration", "sweep", "output")

# scenario-specific keys of [scenario] and their types
SCENARIO_KEYS = {
    "detector": {"n_max": int},
    "flat-decay": {"resolved": bool, "n_max": int},
    "cavity": {"t_zoom": float},
    "bayes": {"t1": float, "n1": int, "n_max": int},
    "projection": {"a": float, "dt": "floats"},
}
NEEDS_TIME = {"detector", "flat-decay", "cavity", "bayes"}
SWEEPABLE = {"flat-decay", "cavity"}


class ConfigError(ValueError):
    """Bad configuration; carries the offending field and line when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class GridConfig:
    n_levels: int = DEFAULT_LEVELS
    half_bandwidth: float | None = None
    taper: float = 0.0


@dataclass(frozen=True)
class IntegrationConfig:
    method: str = "rk45"
    tolerance: float | None = None
    step: float | None = None
    t_end: float | None = None
    n_outputs: int = 101
    max_steps: int = 2_000_000

    def control(self) -> IntegrationControl:
        kw = {"method": self.method, "step": self.step, "max_steps": self.max_steps}
        if self.tolerance is not None:
            kw["tol"] = self.tolerance
        return IntegrationControl(**kw)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_outputs)


@dataclass(frozen=True)
class SweepConfig:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class OutputConfig:
    format: str = "csv"
    path: str = "out.csv"


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    params: ModelParams
    gamma_d: float | None = None
    grid: GridConfig = field(default_factory=GridConfig)
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    sweep: SweepConfig | None = None
    output: OutputConfig = field(default_factory=OutputConfig)
    options: tuple = ()

    def option(self, key, default=None):
        return dict(self.options).get(key, default)

    def with_value(self, parameter: str, value: float) -> "ScenarioConfig":
        """Copy with one sweep parameter set and the sweep block dropped."""
        if parameter == "gamma_d":
            return replace(self, gamma_d=value, sweep=None)
        return replace(self, params=self.params.with_(**{parameter: value}), sweep=None)

    def to_text(self) -> str:
        """Canonical rendering; parse_config(to_text()) gives back an equal config."""
        lines = ["[scenario]", f"name = {self.scenario}"]
        for key, value in self.options:
            lines.append(f"{key} = {_fmt(value)}")
        lines.append("")
        lines.append("[params]")
        for name in ModelParams.field_names():
            lines.append(f"{name} = {_fmt(getattr(self.params, name))}")
        if self.gamma_d is not None:
            lines.append(f"gamma_d = {_fmt(self.gamma_d)}")
        lines += ["", "[grid]", f"n_levels = {self.grid.n_levels}"]
        if self.grid.half_bandwidth is not None:
            lines.append(f"half_bandwidth = {_fmt(self.grid.half_bandwidth)}")
        lines.append(f"taper = {_fmt(self.grid.taper)}")
        it = self.integration
        lines += ["", "[integration]", f"method = {it.method}"]
        for key in ("tolerance", "step", "t_end"):
            if getattr(it, key) is not None:
                lines.append(f"{key} = {_fmt(getattr(it, key))}")
        lines += [f"n_outputs = {it.n_outputs}", f"max_steps = {it.max_steps}"]
        if self.sweep is not None:
            lines += ["", "[sweep]", f"parameter = {self.sweep.parameter}",
                      f"values = {_fmt(self.sweep.values)}"]
        lines += ["", "[output]", f"format = {self.output.format}", f"path = {self.output.path}"]
        return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return " ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# -- parsing -----------------------------------------------------------------

def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return i
        elif current == section and key is not None and "=" in s:
            if s.split("=", 1)[0].strip() == key:
                return i
    return None


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, text: str):
        self.cp = cp
        self.text = text
        self.used: set = set()

    def error(self, section, key, message):
        return ConfigError(message, field=f"{section}.{key}" if key else section,
                           line=_line_of(self.text, section, key))

    def raw(self, section, key):
        if not self.cp.has_option(section, key):
            return None
        self.used.add((section, key))
        return self.cp.get(section, key).strip()

    def get(self, section, key, kind, default=None, required=False):
        raw = self.raw(section, key)
        if raw is None or raw == "":
            if required:
                raise self.error(section, key, "required value missing")
            return default
        try:
            if kind is bool:
                low = raw.lower()
                if low not in ("true", "false", "yes", "no", "1", "0"):
                    raise ValueError(raw)
                return low in ("true", "yes", "1")
            if kind == "floats":
                values = tuple(float(v) for v in raw.replace(",", " ").split())
                if not values:
                    raise ValueError(raw)
                return values
            if kind is int:
                value = float(raw)
                if value != int(value):
                    raise ValueError(raw)
                return int(value)
            if kind is float:
                value = float(raw)
                if not math.isfinite(value):
                    raise ValueError(raw)
                return value
            return kind(raw)
        except ValueError:
            raise self.error(section, key, f"cannot read {raw!r} as {getattr(kind, '__name__', kind)}")


def _allowed_keys(scenario: str) -> dict:
    return {
        "scenario": {"name", *SCENARIO_KEYS[scenario]},
        "params": {*ModelParams.field_names(), "gamma_d", "D", "Dprime"},
        "grid": {"n_levels", "half_bandwidth", "taper"},
        "integration": {"method", "tolerance", "step", "t_end", "n_outputs", "max_steps"},
        "sweep": {"parameter", "values"},
        "output": {"format", "path"},
    }


def parse_config(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", field=f"{exc.section}.{exc.option}",
                          line=exc.lineno)
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", field=exc.section, line=exc.lineno)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section]", line=exc.lineno)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line=line)

    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", field=section,
                              line=_line_of(text, section))
    r = _Reader(cp, text)

    if not cp.has_section("scenario"):
        raise ConfigError("missing [scenario] section", field="scenario")
    scenario = r.get("scenario", "name", str, required=True)
    if scenario not in SCENARIOS:
        raise r.error("scenario", "name",
                      f"unknown scenario {scenario!r}; choose one of {', '.join(SCENARIOS)}")
    allowed = _allowed_keys(scenario)
    for section in cp.sections():
        for key in cp.options(section):
            if key not in allowed[section]:
                raise r.error(section, key, "unknown key")
    options = []
    for key, kind in SCENARIO_KEYS[scenario].items():
        value = r.get("scenario", key, kind)
        if value is not None:
            options.append((key, value))

    params, gamma_d = _read_params(r)
    grid = GridConfig(
        n_levels=r.get("grid", "n_levels", int, DEFAULT_LEVELS),
        half_bandwidth=r.get("grid", "half_bandwidth", float),
        taper=r.get("grid", "taper", float, 0.0),
    )
    integration = IntegrationConfig(
        method=r.get("integration", "method", str, "rk45"),
        tolerance=r.get("integration", "tolerance", float),
        step=r.get("integration", "step", float),
        t_end=r.get("integration", "t_end", float),
        n_outputs=r.get("integration", "n_outputs", int, 101),
        max_steps=r.get("integration", "max_steps", int, 2_000_000),
    )
    sweep = None
    if cp.has_section("sweep"):
        sweep = SweepConfig(
            parameter=r.get("sweep", "parameter", str, required=True),
            values=r.get("sweep", "values", "floats", required=True),
        )
    output = OutputConfig(
        format=r.get("output", "format", str, "csv"),
        path=r.get("output", "path", str, f"{scenario}.csv"),
    )

    cfg = ScenarioConfig(scenario, params, gamma_d, grid, integration, sweep, output,
                         tuple(options))
    _validate(cfg, r)
    return cfg


def _read_params(r: _Reader):
    values = {}
    for name in ModelParams.field_names():
        v = r.get("params", name, float)
        if v is not None:
            values[name] = v
    gamma_d = r.get("params", "gamma_d", float)
    D = r.get("params", "D", float)
    Dprime = r.get("params", "Dprime", float)
    if (D is None) != (Dprime is None):
        raise r.error("params", "D" if D is None else "Dprime", "D and Dprime go together")
    try:
        if D is not None:
            if "omega_pc" in values or "delta_omega" in values:
                raise r.error("params", "D", "give either D/Dprime or omega_pc/delta_omega")
            if D < 0 or Dprime < 0:
                raise r.error("params", "D", "detector rates must be nonnegative")
            if Dprime > D:
                raise r.error("params", "Dprime",
                              "Dprime above D (the occupied dot must reduce the current)")
            params = ModelParams.from_detector_rates(D, Dprime, **values)
        else:
            params = ModelParams(**values)
        validate_params(params)
    except InvalidParams as exc:
        key = str(exc).split()[0]
        raise r.error("params", key if key in ModelParams.field_names() else None, str(exc))
    if gamma_d is not None and gamma_d < 0:
        raise r.error("params", "gamma_d", "gamma_d must be nonnegative")
    return params, gamma_d


def _validate(cfg: ScenarioConfig, r: _Reader) -> None:
    it = cfg.integration
    if it.method not in ("rk45", "rk4"):
        raise r.error("integration", "method", f"unknown method {it.method!r}")
    if it.method == "rk4" and it.step is None:
        raise r.error("integration", "step", "rk4 needs a step size")
    if it.tolerance is not None and not it.tolerance > 0:
        raise r.error("integration", "tolerance", "tolerance must be positive")
    if it.step is not None and not it.step > 0:
        raise r.error("integration", "step", "step must be positive")
    if it.max_steps < 1:
        raise r.error("integration", "max_steps", "max_steps must be positive")
    if cfg.scenario in NEEDS_TIME:
        if it.t_end is None:
            raise r.error("integration", "t_end", f"scenario {cfg.scenario} needs t_end")
        if not it.t_end > 0:
            raise r.error("integration", "t_end", "t_end must be positive")
        if it.n_outputs < 2:
            raise r.error("integration", "n_outputs", "need at least 2 outputs")
    if cfg.grid.n_levels < 2:
        raise r.error("grid", "n_levels", "need at least 2 levels")
    if cfg.grid.half_bandwidth is not None and not cfg.grid.half_bandwidth > 0:
        raise r.error("grid", "half_bandwidth", "half_bandwidth must be positive")
    if not 0 <= cfg.grid.taper <= 1:
        raise r.error("grid", "taper", "taper must lie in [0, 1]")
    if cfg.output.format not in ("csv", "json"):
        raise r.error("output", "format", f"format must be csv or json, got {cfg.output.format!r}")

    if cfg.scenario == "flat-decay" and cfg.gamma_d is not None and cfg.params.omega_pc > 0:
        gd = derived_rates(cfg.params)[2]
        if not math.isclose(gd, cfg.gamma_d, rel_tol=1e-9, abs_tol=1e-12):
            raise r.error("params", "gamma_d",
                          f"gamma_d = {cfg.gamma_d} contradicts the detector rates (gives {gd})")
    if cfg.scenario == "cavity" and not cfg.params.gamma1 > 0:
        raise r.error("params", "gamma1", "the cavity needs gamma1 > 0")
    if cfg.scenario == "flat-decay" and not cfg.params.gamma0 > 0:
        raise r.error("params", "gamma0", "flat decay needs gamma0 > 0")
    if cfg.scenario == "bayes":
        t1, n1 = cfg.option("t1"), cfg.option("n1")
        if t1 is None or n1 is None:
            raise r.error("scenario", "t1" if t1 is None else "n1", "bayes needs t1 and n1")
        if not 0 <= t1 < it.t_end:
            raise r.error("scenario", "t1", "need 0 <= t1 < t_end")
        if n1 < 0:
            raise r.error("scenario", "n1", "n1 must be nonnegative")
    if cfg.scenario == "projection":
        a, dts = cfg.option("a"), cfg.option("dt")
        if a is None or dts is None:
            raise r.error("scenario", "a" if a is None else "dt", "projection needs a and dt")
        if it.t_end is None or not it.t_end > 0:
            raise r.error("integration", "t_end", "projection needs a positive t_end")
        if a <= 0 or any(d <= 0 or a * d * d >= 1 for d in dts):
            raise r.error("scenario", "dt", "need a > 0 and 0 < a dt^2 < 1")
    n_max = cfg.option("n_max")
    if n_max is not None and n_max < 0:
        raise r.error("scenario", "n_max", "n_max must be nonnegative")

    if cfg.sweep is not None:
        name = cfg.sweep.parameter
        if name != "gamma_d" and name not in ModelParams.field_names():
            raise r.error("sweep", "parameter",
                          f"{name!r} is neither a ModelParams field nor gamma_d")
        if cfg.scenario not in SWEEPABLE:
            raise r.error("sweep", "parameter",
                          f"sweeps are supported for {', '.join(sorted(SWEEPABLE))}")
        if name == "gamma_d" and cfg.scenario == "flat-decay" and cfg.params.omega_pc > 0:
            raise r.error("sweep", "parameter",
                          "gamma_d is fixed by the detector rates; sweep omega_pc instead")
        if len(set(cfg.sweep.values)) != len(cfg.sweep.values):
            raise r.error("sweep", "values", "duplicate sweep values")
        for v in cfg.sweep.values:
            try:
                point = cfg.with_value(name, v)
                validate_params(point.params)
            except InvalidParams as exc:
                raise r.error("sweep", "values", f"value {v}: {exc}")
            if name == "gamma_d" and v < 0:
                raise r.error("sweep", "values", "gamma_d must be nonnegative")


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", field=str(path))
    return parse_config(text)


def provenance_text(lines) -> str:
    """Recover the embedded config from the '# ' comment lines of an output file."""
    body = [ln[2:] if ln.startswith("# ") else ln[1:] for ln in lines if ln.startswith("#")]
    return "\n".join(body) + "\n"
