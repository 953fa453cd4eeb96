"""Run configuration: INI sections, unknown-key rejection and environment overrides.

Every key may be overridden by ``SWLAB_<SECTION>_<KEY>`` (upper case), for
example ``SWLAB_SOLVER_DT=0.005``. Values are re-validated after overrides.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, fields, asdict, replace
from pathlib import Path
from typing import Mapping

from .errors import ConfigurationError
from .spectral import DyadicPartition, Grid2D, make_partition

__all__ = [
    "GridSection",
    "PartitionSection",
    "WeightsSection",
    "SolverSection",
    "IterationSection",
    "CorpusSection",
    "OutputSection",
    "RunConfig",
    "load_config",
    "ENV_PREFIX",
]

ENV_PREFIX = "SWLAB"


@dataclass(frozen=True)
class GridSection:
    n_points: int = 256
    period: float = 16 * math.pi


@dataclass(frozen=True)
class PartitionSection:
    k_min: int = -4
    k_max: int = 2


@dataclass(frozen=True)
class WeightsSection:
    c: float = 0.125
    T: float = 0.5


@dataclass(frozen=True)
class SolverSection:
    nu: float = 1.0
    dt: float = 0.01
    c_cfl: float = 0.5


@dataclass(frozen=True)
class IterationSection:
    N: int = 8
    eta: float = 0.05
    K: float = 4.0
    gate_C: float = 1.0
    max_iters: int = 15
    conv_tol: float = 1e-12
    hbar0: float = 1.0
    amplitude: float = 1e-5


@dataclass(frozen=True)
class CorpusSection:
    seed: int = 0
    count: int = 16
    decay: float = 0.5
    refine_count: int = 4
    n_points: int = 512


@dataclass(frozen=True)
class OutputSection:
    directory: str = "swlab-out"
    experiment: str = "run"


_SECTIONS = {
    "grid": GridSection,
    "partition": PartitionSection,
    "weights": WeightsSection,
    "solver": SolverSection,
    "iteration": IterationSection,
    "corpus": CorpusSection,
    "output": OutputSection,
}


def _convert(kind, raw: str, where: str):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return str(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{where}: cannot parse {raw!r} as {kind.__name__}") from exc


@dataclass(frozen=True)
class RunConfig:
    """All run parameters, grouped by section."""

    grid: GridSection = field(default_factory=GridSection)
    partition: PartitionSection = field(default_factory=PartitionSection)
    weights: WeightsSection = field(default_factory=WeightsSection)
    solver: SolverSection = field(default_factory=SolverSection)
    iteration: IterationSection = field(default_factory=IterationSection)
    corpus: CorpusSection = field(default_factory=CorpusSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        self.validate()

    def validate(self):
        try:
            self.make_partition()
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        for name in ("c", "T"):
            if not getattr(self.weights, name) > 0:
                raise ConfigurationError(f"weights.{name} must be positive")
        s = self.solver
        if not (s.nu > 0 and s.dt > 0 and s.c_cfl > 0):
            raise ConfigurationError("solver.nu, solver.dt and solver.c_cfl must be positive")
        n = round(self.weights.T / s.dt)
        if abs(n * s.dt - self.weights.T) > 1e-9 * self.weights.T:
            raise ConfigurationError("weights.T must be a multiple of solver.dt")
        it = self.iteration
        if it.N < 0 or it.max_iters < 1:
            raise ConfigurationError("iteration.N must be >= 0 and iteration.max_iters >= 1")
        for name in ("eta", "K", "gate_C", "conv_tol", "hbar0", "amplitude"):
            if not getattr(it, name) > 0:
                raise ConfigurationError(f"iteration.{name} must be positive")
        cp = self.corpus
        if cp.count < 1 or cp.refine_count < 0:
            raise ConfigurationError("corpus.count must be >= 1 and corpus.refine_count >= 0")
        if not (cp.decay >= 0):
            raise ConfigurationError("corpus.decay must be nonnegative")

    def make_grid(self) -> Grid2D:
        return Grid2D(self.grid.n_points, self.grid.period)

    def make_partition(self) -> DyadicPartition:
        return make_partition(self.make_grid(), self.partition.k_min, self.partition.k_max)

    def iteration_config(self):
        from .iteration import IterationConfig

        it = self.iteration
        return IterationConfig(N=it.N, T=self.weights.T, eta=it.eta, K=it.K, nu=self.solver.nu,
                               hbar0=it.hbar0, max_iters=it.max_iters, conv_tol=it.conv_tol,
                               c=self.weights.c, dt=self.solver.dt, gate_C=it.gate_C,
                               c_cfl=self.solver.c_cfl)

    def with_seed(self, seed: int | None) -> "RunConfig":
        if seed is None:
            return self
        return replace(self, corpus=replace(self.corpus, seed=int(seed)))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Mapping[str, str]], env: Mapping[str, str] | None = None,
                     source: str = "<mapping>") -> "RunConfig":
        """Build from raw section/key strings, then apply environment overrides."""
        values: dict[str, dict] = {}
        for sec, keys in data.items():
            if sec not in _SECTIONS:
                raise ConfigurationError(f"{source}: unknown section [{sec}]")
            known = {f.name: f for f in fields(_SECTIONS[sec])}
            for key, raw in keys.items():
                if key not in known:
                    raise ConfigurationError(f"{source}: unknown key {key!r} in [{sec}]")
                values.setdefault(sec, {})[key] = _convert(_type_of(known[key]), raw, f"{sec}.{key}")
        env = os.environ if env is None else env
        prefix = ENV_PREFIX + "_"
        for name, raw in sorted(env.items()):
            if not name.startswith(prefix):
                continue
            rest = name[len(prefix):].lower()
            sec = next((s for s in _SECTIONS if rest.startswith(s + "_")), None)
            if sec is None:
                continue
            key_l = rest[len(sec) + 1:]
            known = {f.name.lower(): f for f in fields(_SECTIONS[sec])}
            if key_l not in known:
                raise ConfigurationError(f"environment: unknown key {name}")
            f = known[key_l]
            values.setdefault(sec, {})[f.name] = _convert(_type_of(f), raw, name)
        kwargs = {sec: _SECTIONS[sec](**vals) for sec, vals in values.items()}
        return cls(**kwargs)


def _type_of(f) -> type:
    t = f.type
    if isinstance(t, type):
        return t
    return {"int": int, "float": float, "str": str}[str(t)]


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> RunConfig:
    """Read an INI file (optional) and apply ``SWLAB_*`` environment overrides."""
    data: dict[str, dict[str, str]] = {}
    source = "<defaults>"
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        source = str(path)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config {path}: {exc}") from exc
        data = {s: dict(parser.items(s)) for s in parser.sections()}
    return RunConfig.from_mapping(data, env=env, source=source)
