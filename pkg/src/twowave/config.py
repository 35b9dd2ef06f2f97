"""TOML run configuration.

Every block has explicit defaults; ``template()`` renders all of them.
Unknown keys are rejected so that typos do not silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli
import tomli_w

from .errors import DataFileError, ValidationError
from .evolution import EvolutionConfig
from .functionals import PhysParams
from .groundstate import FlowConfig
from .radial import RadialGrid, make_grid

EXPERIMENTS = ("ground-state", "evolve", "standing-wave", "blowup-classify", "instability", "sweep")
METHODS = ("variational", "shooting", "both")
FAMILIES = ("gaussian", "seeded-c1", "ground-state", "scaled-ground-state", "file")
SWEEP_AXES = ("lambda", "dim", "amplitude")
SWEEP_EXPERIMENTS = ("instability", "evolve", "blowup-classify")


@dataclass
class GridBlock:
    n_points: int = 2000
    r_max: float = 20.0


@dataclass
class SolverBlock:
    method: str = "variational"
    guess: list = field(default_factory=lambda: [30.0, 40.0])
    step0: float = 1e-2
    tol: float = 1e-9
    max_iter: int = 5000
    amplitude: float = 3.0
    newton_tol: float = 1e-10
    ground_state_file: str = ""


@dataclass
class EvolutionBlock:
    dt0: float = 1e-3
    t_end: float = 2.0
    cfl_safety: float = 1.0
    blowup_threshold: float = 1e3
    snapshot_stride: int = 500
    adaptive: bool = False


@dataclass
class InitialBlock:
    family: str = "ground-state"
    amp_phi: float = 6.0
    amp_psi: float = -6.0
    width: float = 1.0
    chirp: float = 0.0
    lam: float = 1.2
    file: str = ""


@dataclass
class InstabilityBlock:
    lam: float = 1.2


@dataclass
class SweepBlock:
    experiment: str = "instability"
    axis: str = "lambda"
    values: list = field(default_factory=lambda: [1.01, 1.1, 1.2, 1.5])


@dataclass
class RunConfig:
    experiment: str = "ground-state"
    output_dir: str = "out"
    seed: int = 0
    params: PhysParams = field(default_factory=PhysParams)
    grid: GridBlock = field(default_factory=GridBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    evolution: EvolutionBlock = field(default_factory=EvolutionBlock)
    initial: InitialBlock = field(default_factory=InitialBlock)
    instability: InstabilityBlock = field(default_factory=InstabilityBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)

    def make_grid(self) -> RadialGrid:
        return make_grid(self.grid.n_points, self.grid.r_max, self.params.dim)

    def flow_config(self) -> FlowConfig:
        s = self.solver
        return FlowConfig(step0=s.step0, tol=s.tol, max_iter=s.max_iter, amplitude=s.amplitude,
                          newton_tol=s.newton_tol)

    def evolution_config(self) -> EvolutionConfig:
        return EvolutionConfig(**asdict(self.evolution))

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> RunConfig:
        _choice("experiment", self.experiment, EXPERIMENTS)
        _choice("solver.method", self.solver.method, METHODS)
        _choice("initial.family", self.initial.family, FAMILIES)
        _choice("sweep.axis", self.sweep.axis, SWEEP_AXES)
        _choice("sweep.experiment", self.sweep.experiment, SWEEP_EXPERIMENTS)
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if len(self.solver.guess) != 2:
            raise ValidationError("solver.guess must have two entries")
        if self.experiment == "sweep" and not self.sweep.values:
            raise ValidationError("sweep.values must not be empty")
        self.make_grid()
        self.flow_config()
        self.evolution_config()
        return self


_BLOCKS = {
    "params": PhysParams,
    "grid": GridBlock,
    "solver": SolverBlock,
    "evolution": EvolutionBlock,
    "initial": InitialBlock,
    "instability": InstabilityBlock,
    "sweep": SweepBlock,
}


def _choice(name, value, allowed):
    if value not in allowed:
        raise ValidationError(f"{name} must be one of {', '.join(allowed)}; got {value!r}")


def _coerce(name: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValidationError(f"{name} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{name} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{name} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ValidationError(f"{name} must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ValidationError(f"{name} must be a list")
        return [float(v) if isinstance(v, int) and not isinstance(v, bool) else v for v in value]
    return value


def _build(cls, data: dict, prefix: str):
    defaults = cls()
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown keys in [{prefix}]: {', '.join(sorted(unknown))}")
    kwargs = {k: _coerce(f"{prefix}.{k}", v, getattr(defaults, k)) for k, v in data.items()}
    return cls(**{**{f.name: getattr(defaults, f.name) for f in fields(cls)}, **kwargs})


def config_from_dict(data: dict) -> RunConfig:
    top = {k: v for k, v in data.items() if k not in _BLOCKS}
    base = RunConfig()
    unknown = set(top) - {"experiment", "output_dir", "seed"}
    if unknown:
        raise ValidationError(f"unknown top-level keys: {', '.join(sorted(unknown))}")
    kwargs = {k: _coerce(k, v, getattr(base, k)) for k, v in top.items()}
    for name, cls in _BLOCKS.items():
        block = data.get(name, {})
        if not isinstance(block, dict):
            raise ValidationError(f"[{name}] must be a table")
        kwargs[name] = _build(cls, block, name)
    return RunConfig(**kwargs).validate()


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise DataFileError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ValidationError(f"config {path} is not valid TOML: {exc}") from exc
    return config_from_dict(data)


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def template(experiment: str = "ground-state") -> str:
    cfg = RunConfig(experiment=experiment).validate()
    head = (
        "# twowave run configuration; every value below is the default.\n"
        f"# experiment: {' | '.join(EXPERIMENTS)}\n"
        f"# solver.method: {' | '.join(METHODS)}\n"
        f"# initial.family: {' | '.join(FAMILIES)}\n"
        f"# sweep.axis: {' | '.join(SWEEP_AXES)}; sweep.experiment: {' | '.join(SWEEP_EXPERIMENTS)}\n\n"
    )
    return head + dumps(cfg)
