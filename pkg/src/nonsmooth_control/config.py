"""Run configuration: an INI file with ``[problem]``, ``[solver]`` and
``[output]`` sections, resolved into typed settings and a
:class:`~nonsmooth_control.objective.ControlProblem`.

Fields that hold nodal data (``target``, ``control``, ``reaction``) accept
either an expression over the coordinates or ``file:<path>`` pointing to a
grid-function file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .curvature import default_t_sequence
from .expressions import ExpressionError, sample_expression
from .grid import Grid, assemble_operator, build_grid, read_grid_function
from .nonsmooth import (BreakpointError, PiecewiseSmoothFunction, max_function,
                        piecewise_linear, piecewise_polynomial)
from .objective import ControlProblem, tracking_problem
from .optimizer import default_schedule


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class ProblemConfig:
    domain: tuple[float, ...] = (0.0, 1.0)
    n: tuple[int, ...] = (199,)
    diffusion: tuple[float, ...] = (1.0,)
    reaction: str = "0"
    nonlinearity: str = "max"
    breakpoints: tuple[float, ...] = ()
    slopes: tuple[float, ...] = ()
    value_at_first: float = 0.0
    coefficients: tuple[tuple[float, ...], ...] = ()
    target: str = "4*x*(1 - x) - 0.3"
    control: str = "0"
    nu: float = 1e-2
    kappa: float = 5e-3
    alpha: float = -2.0
    beta: float = 2.0


@dataclass(frozen=True)
class SolverConfig:
    eps_start: float = 0.1
    eps_floor: float = 1e-6
    eps_factor: float = 2.0
    stage_tol: float = 1e-8
    final_tol: float = 1e-9
    max_iter: int = 5000
    t_min: float = 1e-3
    t_count: int = 8
    probe_count: int = 50
    growth_samples: int = 100
    kappas: tuple[float, ...] = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    mollifier_eps: tuple[float, ...] = (0.1, 0.05, 0.025, 0.0125)
    state_eps: tuple[float, ...] = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    lemma_n: int = 10_000
    lemma_tau: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    figures: bool = True


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: Path = field(default=Path("."), compare=False)

    def with_overrides(self, **changes) -> "RunConfig":
        """Apply flat overrides such as ``kappa=...`` or ``seed=...``; ``None`` is skipped."""
        cfg = self
        for key, value in changes.items():
            if value is None:
                continue
            for name in ("problem", "solver", "output"):
                section = getattr(cfg, name)
                if key in {f.name for f in fields(section)}:
                    cfg = replace(cfg, **{name: replace(section, **{key: value})})
                    break
            else:
                raise ConfigError(f"unknown override {key!r}")
        validate(cfg)
        return cfg

    def to_ini(self) -> str:
        """Resolved configuration in the same INI format it was read from."""
        parser = configparser.ConfigParser()
        for name in ("problem", "solver", "output"):
            section = getattr(self, name)
            parser[name] = {f.name: _format(getattr(section, f.name)) for f in fields(section)}
        lines = []
        for name in parser.sections():
            lines.append(f"[{name}]")
            lines += [f"{k} = {v}" for k, v in parser[name].items()]
            lines.append("")
        return "\n".join(lines)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(_format(v) for v in value)
        return " ".join(_format(v) for v in value)
    return str(value)


def _parse(kind, text: str, key: str):
    try:
        if kind is bool:
            low = text.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind == "floats":
            return tuple(float(v) for v in text.replace(",", " ").split())
        if kind == "ints":
            return tuple(int(v) for v in text.replace(",", " ").split())
        if kind == "rows":
            return tuple(tuple(float(v) for v in row.replace(",", " ").split())
                         for row in text.split(";") if row.strip())
        return text.strip()
    except ValueError:
        raise ConfigError(f"cannot read {key} = {text!r}") from None


_KINDS = {
    "domain": "floats", "n": "ints", "diffusion": "floats", "breakpoints": "floats",
    "slopes": "floats", "coefficients": "rows", "kappas": "floats",
    "mollifier_eps": "floats", "state_eps": "floats",
}


def _section(cls, parser: configparser.ConfigParser, name: str):
    if not parser.has_section(name):
        return cls()
    known = {f.name: f for f in fields(cls)}
    values = {}
    for key, text in parser[name].items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        default = getattr(cls(), key)
        kind = _KINDS.get(key, type(default))
        values[key] = _parse(kind, text, key)
    return cls(**values)


def validate(cfg: RunConfig) -> None:
    p, s = cfg.problem, cfg.solver
    if len(p.domain) not in (2, 4):
        raise ConfigError("domain needs 2 (interval) or 4 (rectangle) numbers")
    dim = len(p.domain) // 2
    if len(p.n) not in (1, dim):
        raise ConfigError(f"n needs 1 or {dim} entries")
    if not (p.nu > 0 and p.kappa > 0 and p.alpha < 0 < p.beta):
        raise ConfigError("need nu > 0, kappa > 0 and alpha < 0 < beta")
    positive = ["eps_start", "eps_floor", "stage_tol", "final_tol", "t_min"]
    if any(getattr(s, k) <= 0 for k in positive):
        raise ConfigError("tolerances, schedule bounds and t_min must be positive")
    if s.eps_factor <= 1 or s.eps_floor > s.eps_start:
        raise ConfigError("need eps_factor > 1 and eps_floor <= eps_start")
    if s.t_count < 4 or s.max_iter < 1 or s.seed < 0:
        raise ConfigError("need t_count >= 4, max_iter >= 1 and seed >= 0")
    if any(b <= a for a, b in zip(s.kappas, s.kappas[1:])) or any(k <= 0 for k in s.kappas):
        raise ConfigError("kappas must be positive and increasing")
    for key in ("mollifier_eps", "state_eps"):
        vals = getattr(s, key)
        if len(vals) < 2 or any(v <= 0 for v in vals):
            raise ConfigError(f"{key} needs at least 2 positive values")


def load_config(path: str | Path | None) -> RunConfig:
    """Read and validate a configuration file; ``None`` gives the defaults."""
    parser = configparser.ConfigParser()
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        unknown = set(parser.sections()) - {"problem", "solver", "output"}
        if unknown:
            raise ConfigError(f"unknown sections {sorted(unknown)}")
        base = path.parent
    cfg = RunConfig(_section(ProblemConfig, parser, "problem"),
                    _section(SolverConfig, parser, "solver"),
                    _section(OutputConfig, parser, "output"), base)
    validate(cfg)
    return cfg


# --- resolution into numerical objects -------------------------------------------------

def make_grid(cfg: RunConfig, n: tuple[int, ...] | None = None) -> Grid:
    p = cfg.problem
    bounds = [tuple(p.domain[i:i + 2]) for i in range(0, len(p.domain), 2)]
    n = p.n if n is None else n
    n = n * len(bounds) if len(n) == 1 else n
    try:
        return build_grid(bounds, n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def make_nonlinearity(cfg: RunConfig) -> PiecewiseSmoothFunction:
    p = cfg.problem
    try:
        if p.nonlinearity == "max":
            return max_function()
        if p.nonlinearity == "piecewise-linear":
            return piecewise_linear(p.breakpoints, p.slopes, p.value_at_first)
        if p.nonlinearity in ("piecewise-cubic", "piecewise-polynomial"):
            return piecewise_polynomial(p.breakpoints, p.coefficients, name=p.nonlinearity)
    except (BreakpointError, ValueError) as exc:
        raise ConfigError(f"invalid nonlinearity: {exc}") from None
    raise ConfigError(f"unknown nonlinearity {p.nonlinearity!r}")


def resolve_field(cfg: RunConfig, grid: Grid, spec: str, name: str) -> np.ndarray:
    """Expression or ``file:<path>`` (relative to the config file) on ``grid``."""
    if spec.startswith("file:"):
        path = Path(spec[5:].strip())
        path = path if path.is_absolute() else cfg.base_dir / path
        try:
            file_grid, values = read_grid_function(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read {name} from {path}: {exc}") from None
        if file_grid != grid:
            raise ConfigError(f"{name} file {path} lives on a different grid")
        return values
    try:
        return sample_expression(grid, spec)
    except ExpressionError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def make_problem(cfg: RunConfig, grid: Grid | None = None) -> ControlProblem:
    p = cfg.problem
    grid = make_grid(cfg) if grid is None else grid
    if len(p.diffusion) == 1:
        diffusion = p.diffusion[0]
    elif len(p.diffusion) == 3 and grid.dim == 2:
        a11, a12, a22 = p.diffusion
        diffusion = np.array([[a11, a12], [a12, a22]])
    else:
        raise ConfigError("diffusion needs 1 number, or 3 (a11 a12 a22) in 2D")
    reaction = resolve_field(cfg, grid, p.reaction, "reaction")
    try:
        operator = assemble_operator(grid, diffusion, reaction)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    target = resolve_field(cfg, grid, p.target, "target")
    return tracking_problem(operator, make_nonlinearity(cfg), target, p.nu, p.kappa,
                            p.alpha, p.beta)


def schedule(cfg: RunConfig) -> list[float]:
    s = cfg.solver
    return default_schedule(s.eps_start, s.eps_floor, s.eps_factor)


def t_sequence(cfg: RunConfig) -> np.ndarray:
    return default_t_sequence(cfg.solver.t_min, cfg.solver.t_count)
