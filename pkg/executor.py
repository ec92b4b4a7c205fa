"""
Executor Module - runs one named experiment command and writes its artifacts
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config import RunConfig
from design_cs import DesignResult, reweighted_design, solve_design
from evaluation import (
    BeampatternGrid,
    beampattern,
    dense_grid,
    design_grid,
    design_metrics,
    silent_pattern,
)
from ga_baseline import fit_weights, run_ga
from storage import ResultStorage, read_locations, read_summary, read_weights, summary_value
from utils import ConfigError, InvalidArgumentError, SolverFailure, Stopwatch


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

COMPARED_METRICS = ("active_count", "mean_spacing", "j_cls", "wall_time_s", "residual",
                    "response_variation", "sidelobe_peak_db")


@dataclass
class ExecutionResult:
    """Result of command execution"""
    success: bool
    message: str
    data: Optional[Dict[str, Any]] = None
    files_created: List[str] = field(default_factory=list)
    exit_code: int = EXIT_OK


class ExperimentExecutor:
    """Dispatches CLI commands to the design, baseline and evaluation pipelines"""

    def __init__(self, config: Optional[RunConfig] = None):
        self.config = config

        self.command_handlers = {
            "design": self.cmd_design,
            "reweighted": self.cmd_reweighted,
            "ga": self.cmd_ga,
            "evaluate": self.cmd_evaluate,
            "compare": self.cmd_compare,
        }

    def execute(self, command: str, parameters: Optional[Dict[str, Any]] = None) -> ExecutionResult:
        """Run a command; config and numerical problems become exit codes"""
        if command not in self.command_handlers:
            return ExecutionResult(False, f"Unknown command: {command}", exit_code=EXIT_CONFIG)
        try:
            return self.command_handlers[command](parameters or {})
        except (ConfigError, InvalidArgumentError) as e:
            logger.error("%s failed: %s", command, e)
            return ExecutionResult(False, str(e), exit_code=EXIT_CONFIG)
        except (SolverFailure, np.linalg.LinAlgError) as e:
            logger.error("%s failed: %s", command, e)
            return ExecutionResult(False, str(e), exit_code=EXIT_NUMERICAL)

    def _require_config(self) -> RunConfig:
        if self.config is None:
            raise ConfigError("this command needs a configuration file")
        return self.config

    def _sigma(self) -> Optional[float]:
        config = self._require_config()
        return config.design.sigma if config.use_rv else None

    def _pattern(self, groups: np.ndarray, positions: np.ndarray) -> BeampatternGrid:
        config = self._require_config()
        if config.evaluation.dense:
            freqs, angles = dense_grid(config.sampling, config.evaluation.angle_step_deg,
                                       config.evaluation.omega_step)
        else:
            freqs, angles = design_grid(config.sampling)
        if positions.size == 0:
            return silent_pattern(freqs, angles)
        return beampattern(groups, positions, config.tdl, freqs, angles)

    def _j_cls(self, positions: np.ndarray) -> Optional[float]:
        if positions.size == 0:
            return None
        config = self._require_config()
        try:
            value, _ = fit_weights(positions, config.tdl, config.sampling, self._sigma(), config.solver)
        except SolverFailure as e:
            logger.warning("J_CLS unavailable: %s", e)
            return None
        return value

    def _config_summary(self) -> Dict[str, Any]:
        config = self._require_config()
        return {
            "schema_version": config.schema_version,
            "grid_count": config.grid.count,
            "aperture": config.grid.aperture,
            "taps": config.tdl.taps,
            "alpha": config.design.alpha,
            "sigma": config.design.sigma,
            "use_rv": config.use_rv,
            "epsilon": config.design.epsilon,
            "formulation": config.design.formulation,
            "mainlobe_phase": config.sampling.mainlobe_phase_model.value,
            "dense_eval": config.evaluation.dense,
        }

    def _write_design(self, command: str, result: DesignResult, wall_time: float) -> ExecutionResult:
        config = self._require_config()
        storage = ResultStorage(config.out_dir)
        summary: Dict[str, Any] = {
            "command": command,
            "success": result.success,
            "status": result.status.value,
            "message": result.message,
            "objective": result.objective,
            "residual": result.residual,
            "rv_value": result.rv_value,
            "active_count": len(result.active),
            "iterations": result.iterations,
            "config": self._config_summary(),
        }
        if command == "reweighted":
            storage.write_iterations(result.objective_trace, result.active_trace)

        if not result.success:
            summary["wall_time_s"] = wall_time
            storage.write_summary(summary)
            return ExecutionResult(False, f"{command}: {result.message}", summary,
                                   storage.files_created, EXIT_NUMERICAL)

        indices = np.array(result.active_indices, dtype=int)
        positions = result.active_positions
        groups = result.weights.groups[indices]
        storage.write_locations(indices, positions, result.group_norms[indices])
        storage.write_weights(indices, groups)
        pattern = self._pattern(groups, positions)
        storage.write_pattern(pattern)

        summary["j_cls"] = self._j_cls(positions)
        summary["metrics"] = design_metrics(groups, positions, config.tdl, config.sampling, pattern,
                                            config.design.rv_angles)
        summary["wall_time_s"] = wall_time
        storage.write_summary(summary)
        return ExecutionResult(
            True,
            f"{command}: {len(indices)} active sensors, residual {result.residual:.4g} "
            f"(alpha {config.design.alpha}), {wall_time:.1f} s",
            summary,
            storage.files_created,
        )

    def cmd_design(self, params: Dict[str, Any]) -> ExecutionResult:
        config = self._require_config()
        with Stopwatch() as clock:
            result = solve_design(config.grid, config.tdl, config.sampling, config.design,
                                  config.use_rv, config.solver)
        return self._write_design("design", result, clock.elapsed)

    def cmd_reweighted(self, params: Dict[str, Any]) -> ExecutionResult:
        config = self._require_config()
        with Stopwatch() as clock:
            result = reweighted_design(config.grid, config.tdl, config.sampling, config.design,
                                       config.use_rv, config.solver)
        return self._write_design("reweighted", result, clock.elapsed)

    def cmd_ga(self, params: Dict[str, Any]) -> ExecutionResult:
        config = self._require_config()
        with Stopwatch() as clock:
            result = run_ga(config.ga, config.ga_sensors, config.ga_aperture, config.tdl,
                            config.sampling, self._sigma(), config.solver)
        storage = ResultStorage(config.out_dir)

        positions = result.best.positions
        indices = np.arange(positions.size)
        groups = result.best_weights.groups
        storage.write_locations(indices, positions, np.linalg.norm(groups, axis=1))
        storage.write_weights(indices, groups)
        storage.write_fitness_history(result.fitness_history)
        pattern = self._pattern(groups, positions)
        storage.write_pattern(pattern)

        summary = {
            "command": "ga",
            "success": True,
            "j_cls": result.best_jcls,
            "n_sensors": config.ga_sensors,
            "aperture": config.ga_aperture,
            "seed": config.ga.seed,
            "generations": result.generations,
            "evaluations": result.evaluations,
            "metrics": design_metrics(groups, positions, config.tdl, config.sampling, pattern),
            "config": self._config_summary(),
            "wall_time_s": clock.elapsed,
        }
        storage.write_summary(summary)
        return ExecutionResult(
            True,
            f"ga: J_CLS {result.best_jcls:.4g} with {positions.size} sensors, {clock.elapsed:.1f} s",
            summary,
            storage.files_created,
        )

    def cmd_evaluate(self, params: Dict[str, Any]) -> ExecutionResult:
        config = self._require_config()
        locations = params.get("locations")
        if not locations:
            raise ConfigError("evaluate needs --locations")
        indices, positions = read_locations(locations)
        if positions.size == 0:
            raise ConfigError(f"{locations} lists no sensor positions")

        weights_path = params.get("weights")
        fitted = not weights_path
        if fitted:
            _, fit = fit_weights(positions, config.tdl, config.sampling, self._sigma(), config.solver)
            groups = fit.groups
        else:
            groups = read_weights(weights_path, indices, config.tdl.taps)

        storage = ResultStorage(config.out_dir)
        if fitted:
            storage.write_weights(indices, groups)
        pattern = self._pattern(groups, positions)
        storage.write_pattern(pattern)
        summary = {
            "command": "evaluate",
            "success": True,
            "locations": locations,
            "weights": weights_path or "fitted",
            "j_cls": self._j_cls(positions),
            "metrics": design_metrics(groups, positions, config.tdl, config.sampling, pattern),
            "config": self._config_summary(),
        }
        storage.write_summary(summary)
        return ExecutionResult(True, f"evaluate: {positions.size} sensors from {locations}",
                               summary, storage.files_created)

    def cmd_compare(self, params: Dict[str, Any]) -> ExecutionResult:
        paths = params.get("summaries") or []
        if len(paths) != 2:
            raise ConfigError("compare needs exactly two summary files")
        first, second = (read_summary(p) for p in paths)

        rows = []
        for key in COMPARED_METRICS:
            a, b = summary_value(first, key), summary_value(second, key)
            delta = b - a if a is not None and b is not None else None
            rows.append({"metric": key, "first": a, "second": b, "delta": delta})
        frame = pd.DataFrame(rows, columns=["metric", "first", "second", "delta"])

        files: List[str] = []
        out = params.get("out")
        if out:
            storage = ResultStorage(out)
            storage.write_comparison(frame)
            files = storage.files_created
        return ExecutionResult(True, format_comparison(frame, paths), {"rows": rows}, files)


def _cell(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    return f"{value:.6g}"


def format_comparison(frame: pd.DataFrame, labels: List[str]) -> str:
    """Fixed-width comparison table"""
    header = f"{'metric':<20} {labels[0][-24:]:>24} {labels[1][-24:]:>24} {'delta':>14}"
    lines = [header, "-" * len(header)]
    for row in frame.itertuples(index=False):
        lines.append(f"{row.metric:<20} {_cell(row.first):>24} {_cell(row.second):>24} {_cell(row.delta):>14}")
    return "\n".join(lines)
