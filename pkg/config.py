"""
Run configuration loaded from an INI file

Frequencies are written in units of pi (omega_lo = 0.5 means 0.5*pi).
An empty value means "absent".
"""
import configparser
import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, TypeVar

from array_model import ArrayGrid, MainlobePhaseModel, SamplingSpec, TdlConfig, build_grid
from design_cs import DesignSpec
from ga_baseline import GaConfig
from socp import SolverSettings
from utils import ConfigError


SCHEMA_VERSION = 1
RUN_MODES = ("design", "reweighted", "ga")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

T = TypeVar("T")

KNOWN_KEYS: Dict[str, Tuple[str, ...]] = {
    "run": ("schema_version", "mode", "out"),
    "grid": ("aperture", "count"),
    "tdl": ("taps",),
    "sampling": ("omega_lo", "omega_hi", "omega_step", "omega_ref", "mainlobe_deg",
                 "mainlobe_halfwidth_deg", "sidelobe_regions", "angle_step_deg", "mainlobe_phase"),
    "design": ("alpha", "sigma", "use_rv", "epsilon", "max_reweight_iters", "stable_iters",
               "activity_threshold_rel", "rv_angles", "formulation"),
    "solver": ("max_iters", "tol_feas", "tol_gap", "verbose", "refinement"),
    "ga": ("n_sensors", "aperture", "population", "generations", "crossover_rate", "mutation_rate",
           "mutation_sigma", "tournament_size", "blend_alpha", "min_spacing", "seed", "anchor_first",
           "workers"),
    "evaluation": ("dense", "angle_step_deg", "omega_step"),
    "logging": ("level", "file"),
}


@dataclass
class EvaluationConfig:
    dense: bool = False
    angle_step_deg: float = 0.5
    omega_step: float = 0.025 * math.pi


@dataclass
class RunConfig:
    grid: ArrayGrid
    tdl: TdlConfig = field(default_factory=TdlConfig)
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    design: DesignSpec = field(default_factory=DesignSpec)
    use_rv: bool = True
    solver: SolverSettings = field(default_factory=SolverSettings)
    ga: GaConfig = field(default_factory=GaConfig)
    ga_sensors: int = 11
    ga_aperture: float = 6.16
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    mode: str = "reweighted"
    out_dir: str = "results"
    log_level: str = "INFO"
    log_file: Optional[str] = None
    schema_version: int = SCHEMA_VERSION


def parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def parse_regions(value: str) -> Tuple[Tuple[float, float], ...]:
    """'0:80, 100:180' -> ((0.0, 80.0), (100.0, 180.0))"""
    regions = []
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition(":")
        if not sep:
            raise ValueError(f"region {part!r} is not of the form lo:hi")
        regions.append((float(lo), float(hi)))
    return tuple(regions)


class _Reader:
    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser

    def get(self, section: str, key: str, cast: Callable[[str], T], default: T) -> T:
        if not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key).strip()
        if raw == "":
            return None
        try:
            return cast(raw)
        except ValueError as e:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {e}") from e

    def required(self, section: str, key: str, cast: Callable[[str], T], default: T) -> T:
        value = self.get(section, key, cast, default)
        if value is None:
            raise ConfigError(f"[{section}] {key} must not be empty")
        return value


def _check_keys(parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section not in KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key [{section}] {key}")


def load_config(path: str) -> RunConfig:
    """Parse and validate every section; raises ConfigError on any problem"""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except (configparser.Error, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    _check_keys(parser)

    r = _Reader(parser)
    version = r.get("run", "schema_version", int, None)
    if version is None:
        raise ConfigError("[run] schema_version is required")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}, expected {SCHEMA_VERSION}")

    pi = math.pi
    try:
        grid = build_grid(r.required("grid", "aperture", float, 10.0), r.required("grid", "count", int, 100))
        tdl = TdlConfig(taps=r.required("tdl", "taps", int, 25))

        phase = r.required("sampling", "mainlobe_phase", str, MainlobePhaseModel.GROUP_DELAY.value)
        try:
            phase_model = MainlobePhaseModel(phase)
        except ValueError as e:
            raise ConfigError(f"[sampling] mainlobe_phase must be 'unit' or 'group_delay', got {phase!r}") from e
        sampling = SamplingSpec(
            omega_lo=pi * r.required("sampling", "omega_lo", float, 0.5),
            omega_hi=pi * r.required("sampling", "omega_hi", float, 1.0),
            omega_step=pi * r.required("sampling", "omega_step", float, 0.05),
            omega_ref=pi * r.required("sampling", "omega_ref", float, 1.0),
            mainlobe_deg=r.required("sampling", "mainlobe_deg", float, 90.0),
            mainlobe_halfwidth_deg=r.required("sampling", "mainlobe_halfwidth_deg", float, 0.0),
            sidelobe_regions=r.get("sampling", "sidelobe_regions", parse_regions, ((0.0, 80.0), (100.0, 180.0))) or (),
            angle_step_deg=r.required("sampling", "angle_step_deg", float, 1.0),
            mainlobe_phase_model=phase_model,
        )

        design = DesignSpec(
            alpha=r.required("design", "alpha", float, 0.9),
            sigma=r.get("design", "sigma", float, 0.01),
            epsilon=r.required("design", "epsilon", float, 9e-4),
            max_reweight_iters=r.required("design", "max_reweight_iters", int, 10),
            activity_threshold_rel=r.required("design", "activity_threshold_rel", float, 1e-3),
            stable_iters=r.required("design", "stable_iters", int, 2),
            rv_angles=r.required("design", "rv_angles", str, "all"),
            formulation=r.required("design", "formulation", str, "group"),
        )
        use_rv = r.required("design", "use_rv", parse_bool, True)
        if use_rv and design.sigma is None:
            raise ConfigError("[design] use_rv = true needs a sigma")
        if use_rv and sampling.omegas().size < 2:
            raise ConfigError("[design] use_rv = true needs at least two sampled frequencies")

        solver = SolverSettings(
            max_iters=r.required("solver", "max_iters", int, 200),
            tol_feas=r.required("solver", "tol_feas", float, 1e-7),
            tol_gap=r.required("solver", "tol_gap", float, 1e-7),
            verbose=r.required("solver", "verbose", parse_bool, False),
            refinement=r.required("solver", "refinement", int, 3),
        )

        ga = GaConfig(
            population=r.required("ga", "population", int, 50),
            generations=r.required("ga", "generations", int, 200),
            crossover_rate=r.required("ga", "crossover_rate", float, 0.9),
            mutation_rate=r.required("ga", "mutation_rate", float, 0.1),
            mutation_sigma=r.get("ga", "mutation_sigma", float, None),
            tournament_size=r.required("ga", "tournament_size", int, 3),
            blend_alpha=r.required("ga", "blend_alpha", float, 0.5),
            min_spacing=r.required("ga", "min_spacing", float, 0.0),
            seed=r.required("ga", "seed", int, 0),
            anchor_first=r.required("ga", "anchor_first", parse_bool, False),
            workers=r.required("ga", "workers", int, 1),
        )
        ga_sensors = r.required("ga", "n_sensors", int, 11)
        ga_aperture = r.required("ga", "aperture", float, 6.16)
        if ga_sensors < 1 or not ga_aperture > 0:
            raise ConfigError("[ga] n_sensors and aperture must be positive")
        if ga_sensors * ga.min_spacing > ga_aperture:
            raise ConfigError("[ga] n_sensors * min_spacing exceeds the aperture")

        evaluation = EvaluationConfig(
            dense=r.required("evaluation", "dense", parse_bool, False),
            angle_step_deg=r.required("evaluation", "angle_step_deg", float, 0.5),
            omega_step=pi * r.required("evaluation", "omega_step", float, 0.025),
        )
        if evaluation.angle_step_deg <= 0 or evaluation.omega_step <= 0:
            raise ConfigError("[evaluation] steps must be positive")
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e

    mode = r.required("run", "mode", str, "reweighted")
    if mode not in RUN_MODES:
        raise ConfigError(f"[run] mode must be one of {RUN_MODES}, got {mode!r}")
    level = r.required("logging", "level", str, "INFO").upper()
    if level not in LOG_LEVELS:
        raise ConfigError(f"[logging] level must be one of {LOG_LEVELS}, got {level!r}")

    return RunConfig(
        grid=grid,
        tdl=tdl,
        sampling=sampling,
        design=design,
        use_rv=use_rv,
        solver=solver,
        ga=ga,
        ga_sensors=ga_sensors,
        ga_aperture=ga_aperture,
        evaluation=evaluation,
        mode=mode,
        out_dir=r.required("run", "out", str, "results"),
        log_level=level,
        log_file=r.get("logging", "file", str, None),
        schema_version=version,
    )


def apply_overrides(config: RunConfig, out: Optional[str] = None, seed: Optional[int] = None,
                    dense: Optional[bool] = None, log_level: Optional[str] = None) -> RunConfig:
    """Command line flags take precedence over file values"""
    changes = {}
    if out is not None:
        changes["out_dir"] = out
    if seed is not None:
        if seed < 0:
            raise ConfigError("--seed must be non-negative")
        changes["ga"] = dataclasses.replace(config.ga, seed=seed)
    if dense:
        changes["evaluation"] = dataclasses.replace(config.evaluation, dense=True)
    if log_level is not None:
        level = log_level.upper()
        if level not in LOG_LEVELS:
            raise ConfigError(f"--log-level must be one of {LOG_LEVELS}, got {log_level!r}")
        changes["log_level"] = level
    return dataclasses.replace(config, **changes)
