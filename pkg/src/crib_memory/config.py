"""Run description: sectioned key-value configuration and its validation.

A configuration file is an INI document with the sections ``pulse``,
``medium``, ``broadening``, ``protocol``, ``noise``,
``deterministic_phases``, ``numerics`` and ``output``.  Every key is
optional; unknown sections or keys are rejected.  Example::

    [medium]
    optical_depth = 4.5

    [noise]
    k3 = 5
"""
from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .bloch import LevelPhases
from .errors import ConfigError
from .medium import MODES, WEAK, InhomogeneousProfile, build_detuning_grid
from .noise import NoiseParams
from .propagation import BACKWARD, DIRECTIONS, PulseSpec

SCHEMA_VERSION = 1

#: Half-width (in T0) of the pulse support that must fit inside the absorption window.
PULSE_SUPPORT = 4.0


@dataclass(frozen=True)
class MediumSpec:
    optical_depth: float = 4.5
    n_z: int = 100

    def __post_init__(self):
        if not self.optical_depth >= 0:
            raise ConfigError(f"optical_depth must be >= 0, got {self.optical_depth}")
        if self.n_z < 2:
            raise ConfigError(f"n_z must be >= 2, got {self.n_z}")


@dataclass(frozen=True)
class BroadeningSpec:
    half_width: float = 10.0
    n_classes: int = 201
    shape: str = "rectangular"

    def __post_init__(self):
        if self.n_classes % 2 == 0:
            raise ConfigError(f"n_classes must be odd, got {self.n_classes}")
        InhomogeneousProfile(self.half_width, self.shape)

    @property
    def profile(self) -> InhomogeneousProfile:
        return InhomogeneousProfile(self.half_width, self.shape)


@dataclass(frozen=True)
class ProtocolSpec:
    direction: str = BACKWARD
    storage_time: float = 5.0
    #: defaults to True for backward and False for forward retrieval
    phase_matching: bool | None = None

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if not self.storage_time >= 0:
            raise ConfigError(f"storage_time must be >= 0, got {self.storage_time}")
        wanted = self.direction == BACKWARD
        if self.phase_matching is None:
            object.__setattr__(self, "phase_matching", wanted)
        elif self.phase_matching != wanted:
            raise ConfigError("phase matching is required for backward and forbidden for forward retrieval")


@dataclass(frozen=True)
class NumericsSpec:
    dt: float = 0.02
    t_start: float = -15.0
    t_end: float = 15.0
    mode: str = WEAK
    weak_field_threshold: float = 1e-3
    population_threshold: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.t_start < 0 < self.t_end):
            raise ConfigError("the time window must straddle the reversal time t = 0")
        if not (self.weak_field_threshold > 0 and self.population_threshold > 0):
            raise ConfigError("thresholds must be > 0")

    @property
    def window(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "results"
    write_grids: bool = True


def _steps(span: float, dt: float, what: str) -> int:
    n = span / dt
    if abs(n - round(n)) > 1e-6:
        raise ConfigError(f"{what} ({span}) is not a whole number of time steps dt = {dt}")
    return int(round(n))


@dataclass(frozen=True)
class RunSpec:
    """Complete declarative description of one protocol run."""

    pulse: PulseSpec = field(default_factory=PulseSpec)
    medium: MediumSpec = field(default_factory=MediumSpec)
    broadening: BroadeningSpec = field(default_factory=BroadeningSpec)
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    noise: NoiseParams = field(default_factory=NoiseParams)
    deterministic_phases: LevelPhases = field(default_factory=LevelPhases)
    numerics: NumericsSpec = field(default_factory=NumericsSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def __post_init__(self):
        num, prot = self.numerics, self.protocol
        gamma = self.broadening.half_width
        if num.dt * gamma > 0.5 + 1e-12:
            raise ConfigError(f"dt * half_width = {num.dt * gamma:.3g} exceeds the stability bound 0.5")
        build_detuning_grid(self.broadening.profile, self.broadening.n_classes, num.window)
        absorb_end = -prot.storage_time
        if not (num.t_start + PULSE_SUPPORT <= self.pulse.center <= absorb_end - PULSE_SUPPORT):
            raise ConfigError(
                f"pulse centre {self.pulse.center} must lie {PULSE_SUPPORT} T0 inside the "
                f"absorption window [{num.t_start}, {absorb_end}]")
        _steps(absorb_end - num.t_start, num.dt, "absorption window")
        _steps(num.t_end, num.dt, "retrieval window")
        self.broadening.profile.check_bandwidth()

    # time grids ---------------------------------------------------------
    def absorption_times(self) -> np.ndarray:
        n = _steps(-self.protocol.storage_time - self.numerics.t_start, self.numerics.dt, "absorption window")
        return self.numerics.t_start + self.numerics.dt * np.arange(n + 1)

    def retrieval_times(self) -> np.ndarray:
        n = _steps(self.numerics.t_end, self.numerics.dt, "retrieval window")
        return self.numerics.dt * np.arange(n + 1)

    # conversions --------------------------------------------------------
    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    def updated(self, **sections) -> "RunSpec":
        """Copy with some keys replaced, e.g. ``spec.updated(noise={"k3": 5.0})``."""
        parts = {}
        for name, changes in sections.items():
            if name not in SECTIONS:
                raise ConfigError(f"unknown section {name!r}")
            unknown = set(changes) - {f.name for f in fields(SECTIONS[name])}
            if unknown:
                raise ConfigError(f"unknown key(s) {sorted(unknown)} in section [{name}]")
            current = getattr(self, name)
            if name == "protocol" and "direction" in changes and "phase_matching" not in changes:
                changes = dict(changes, phase_matching=None)
            parts[name] = replace(current, **changes)
        return replace(self, **parts)


SECTIONS = {
    "pulse": PulseSpec,
    "medium": MediumSpec,
    "broadening": BroadeningSpec,
    "protocol": ProtocolSpec,
    "noise": NoiseParams,
    "deterministic_phases": LevelPhases,
    "numerics": NumericsSpec,
    "output": OutputSpec,
}


def _convert(cls, key: str, raw: str):
    default = {f.name: f for f in fields(cls)}[key]
    kind = type(default.default) if default.default is not None else bool
    if default.default is None or kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from exc
    return raw.strip()


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys like s_L are case sensitive
    return cp


def parse_config_text(text: str) -> RunSpec:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    sections = {}
    for name in cp.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        cls = SECTIONS[name]
        known = {f.name for f in fields(cls)}
        values = {}
        for key, raw in cp.items(name):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")
            values[key] = _convert(cls, key, raw)
        sections[name] = values
    try:
        return RunSpec().updated(**sections) if sections else RunSpec()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> RunSpec:
    """Read and validate a configuration file."""
    if not os.path.isfile(path):
        raise ConfigError(f"configuration file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def dump_config(spec: RunSpec) -> str:
    """Serialize ``spec`` so that ``parse_config_text(dump_config(s)) == s``."""
    cp = _parser()
    for name, values in spec.to_dict().items():
        cp[name] = {k: _format(v) for k, v in values.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
