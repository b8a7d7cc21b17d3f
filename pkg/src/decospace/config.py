"""Experiment configuration: TOML sections mirroring the modules, strict about unknown keys."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .errors import ConfigError


@dataclass
class GridSection:
    d: int = 1
    n: int = 2048
    L: float = 16.0


@dataclass
class CoveringSection:
    kind: str = "besov"
    alpha: float = 0.0
    r: float = 1.25
    xi: float = 64.0
    j_max: int | None = 6


@dataclass
class PartitionSection:
    kind: str = "poly"
    N: int = 6


@dataclass
class SpaceSection:
    p: float = 2.0
    q: float = 2.0
    s: float = 0.0
    mu: float = 0.0


@dataclass
class PrototypeSection:
    kind: str = "gaussian"
    a: float = 0.25
    order: int = 3
    N: int = 6
    R: float = 0.5
    s: float = 1.5


@dataclass
class FrameSection:
    delta: float = 0.0625
    deltas: list = field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125])
    tol: float = 1e-8
    max_iter: int = 100
    trials: int = 5


@dataclass
class CriteriaSection:
    p0: float = 1.0
    q0: float = 1.0
    eps: float = 0.5
    mu0: float = 0.0
    s0: float = 0.0
    s1: float = 0.0
    nodes: int = 64
    kind: str = "frame"
    xi: float = 64.0
    threshold: float = 1.05


@dataclass
class SeedsSection:
    seed: int = 0
    fields: int = 3


@dataclass
class OutputSection:
    dir: str = "out"
    emit: str = "json"


SECTIONS = {
    "grid": GridSection,
    "covering": CoveringSection,
    "partition": PartitionSection,
    "space": SpaceSection,
    "prototype": PrototypeSection,
    "frame": FrameSection,
    "criteria": CriteriaSection,
    "seeds": SeedsSection,
    "output": OutputSection,
}


@dataclass
class ExperimentConfig:
    grid: GridSection = field(default_factory=GridSection)
    covering: CoveringSection = field(default_factory=CoveringSection)
    partition: PartitionSection = field(default_factory=PartitionSection)
    space: SpaceSection = field(default_factory=SpaceSection)
    prototype: PrototypeSection = field(default_factory=PrototypeSection)
    frame: FrameSection = field(default_factory=FrameSection)
    criteria: CriteriaSection = field(default_factory=CriteriaSection)
    seeds: SeedsSection = field(default_factory=SeedsSection)
    output: OutputSection = field(default_factory=OutputSection)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(section: str, key: str, value, default):
    where = f"{section}.{key}"
    if default is None or isinstance(default, (int, float)) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(f"{where}: expected a number, got {value!r}", invariant="field-type")
        if isinstance(value, str):
            if value.lower() in ("inf", "infinity"):
                return math.inf
            raise ConfigError(f"{where}: expected a number, got {value!r}", invariant="field-type")
        if isinstance(default, int) and not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}", invariant="field-type")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{where}: expected a list of numbers", invariant="field-type")
        return [float(v) for v in value]
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}", invariant="field-type")
    return value


def from_mapping(raw: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for name, body in raw.items():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]; expected one of {sorted(SECTIONS)}", invariant="unknown-key")
        if not isinstance(body, dict):
            raise ConfigError(f"[{name}] must be a table", invariant="field-type")
        section = getattr(cfg, name)
        known = {f.name for f in dataclasses.fields(section)}
        for key, value in body.items():
            if key not in known:
                raise ConfigError(f"unknown key {name}.{key}; expected one of {sorted(known)}", invariant="unknown-key")
            setattr(section, key, _coerce(name, key, value, getattr(section, key)))
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    def bad(where, msg):
        raise ConfigError(f"{where}: {msg}", invariant="consistency")

    if cfg.grid.d not in (1, 2):
        bad("grid.d", "the runner supports dimensions 1 and 2")
    if cfg.grid.n < 8 or cfg.grid.n & (cfg.grid.n - 1):
        bad("grid.n", "need a power of two >= 8")
    if not cfg.grid.L > 0:
        bad("grid.L", "half-width must be positive")
    if cfg.covering.kind not in ("besov", "alpha", "uniform"):
        bad("covering.kind", "expected besov, alpha or uniform")
    if not 0 <= cfg.covering.alpha < 1:
        bad("covering.alpha", "must lie in [0, 1)")
    if cfg.partition.kind not in ("poly", "smooth"):
        bad("partition.kind", "expected poly or smooth")
    if not 1 <= cfg.partition.N <= 12:
        bad("partition.N", "ramp order must lie in [1, 12]")
    if cfg.prototype.kind not in ("gaussian", "bspline", "cutoff"):
        bad("prototype.kind", "expected gaussian, bspline or cutoff")
    for where, val in (("frame.delta", cfg.frame.delta), *((f"frame.deltas[{k}]", v) for k, v in enumerate(cfg.frame.deltas))):
        if not 0 < val <= 1:
            bad(where, f"density must lie in (0, 1], got {val}")
    if not (cfg.space.p > 0 and cfg.space.q > 0):
        bad("space", "p and q must be positive")
    if not (0 < cfg.criteria.p0 <= 1 and 0 < cfg.criteria.q0 <= 1):
        bad("criteria", "p0 and q0 must lie in (0, 1]")
    if cfg.criteria.s0 > cfg.criteria.s1:
        bad("criteria", "need s0 <= s1")
    if cfg.criteria.kind not in ("frame", "atomic"):
        bad("criteria.kind", "expected frame or atomic")
    if cfg.output.emit not in ("json", "csv"):
        bad("output.emit", "expected json or csv")


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return from_mapping({})
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", invariant="parse") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}", invariant="parse") from exc
    return from_mapping(raw)
