import json
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from evaluation import BeampatternGrid
from utils import ConfigError


FLOAT_FORMAT = "%.17g"


class ResultStorage:
    """CSV and JSON artifacts of one run, all written into out_dir"""

    def __init__(self, out_dir: str) -> None:
        self.out_dir = out_dir
        self.files_created: List[str] = []
        self._ensure_dir()

    def _ensure_dir(self) -> None:
        os.makedirs(self.out_dir, exist_ok=True)

    def _path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def _write_frame(self, name: str, frame: pd.DataFrame) -> str:
        path = self._path(name)
        frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n", float_format=FLOAT_FORMAT)
        self.files_created.append(path)
        return path

    def _write_json(self, name: str, data: Dict[str, Any]) -> str:
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(_plain(data), f, indent=2, ensure_ascii=False)
            f.write("\n")
        self.files_created.append(path)
        return path

    def write_locations(self, indices: Sequence[int], positions: Sequence[float],
                        group_norms: Sequence[float]) -> str:
        return self._write_frame("locations.csv", pd.DataFrame({
            "index": np.asarray(indices, dtype=int),
            "position_lambda": np.asarray(positions, dtype=float),
            "group_norm": np.asarray(group_norms, dtype=float),
        }))

    def write_weights(self, indices: Sequence[int], groups: np.ndarray) -> str:
        groups = np.atleast_2d(np.asarray(groups, dtype=float))
        taps = groups.shape[1] if groups.size else 0
        return self._write_frame("weights.csv", pd.DataFrame({
            "sensor": np.repeat(np.asarray(indices, dtype=int), taps),
            "tap": np.tile(np.arange(taps), len(indices)),
            "value": groups.reshape(-1),
        }))

    def write_pattern(self, pattern: BeampatternGrid) -> str:
        return self._write_frame("pattern.csv", pattern.to_frame())

    def write_iterations(self, objective_trace: Sequence[float], active_trace: Sequence[int]) -> str:
        return self._write_frame("iterations.csv", pd.DataFrame({
            "iteration": np.arange(1, len(objective_trace) + 1),
            "objective": np.asarray(objective_trace, dtype=float),
            "active_count": np.asarray(active_trace, dtype=int),
        }))

    def write_fitness_history(self, history: Sequence[float]) -> str:
        fitness = np.asarray(history, dtype=float)
        with np.errstate(divide="ignore"):
            jcls = np.where(fitness > 0, 1.0 / fitness, np.inf)
        return self._write_frame("fitness_history.csv", pd.DataFrame({
            "generation": np.arange(fitness.size),
            "best_fitness": fitness,
            "best_jcls": jcls,
        }))

    def write_comparison(self, frame: pd.DataFrame) -> str:
        return self._write_frame("comparison.csv", frame)

    def write_summary(self, summary: Dict[str, Any]) -> str:
        return self._write_json("summary.json", summary)


def _plain(value: Any) -> Any:
    """numpy scalars/arrays to JSON types; non-finite floats to null"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def _read_csv(path: str, columns: Sequence[str]) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise ConfigError(f"file not found: {path}")
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError(f"{path} is missing column(s) {missing}")
    if frame[list(columns)].isna().any().any():
        raise ConfigError(f"{path} has empty cells")
    return frame


def read_locations(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """(sensor indices, positions in lambda) sorted by position; index defaults to row order"""
    frame = _read_csv(path, ["position_lambda"])
    try:
        positions = frame["position_lambda"].to_numpy(dtype=float)
        indices = frame["index"].to_numpy(dtype=int) if "index" in frame.columns else np.arange(len(frame))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: non-numeric entries ({e})") from e
    order = np.argsort(positions, kind="stable")
    return indices[order], positions[order]


def read_weights(path: str, indices: Sequence[int], taps: int) -> np.ndarray:
    """Weight groups (len(indices) x taps) in the order of indices"""
    frame = _read_csv(path, ["sensor", "tap", "value"])
    try:
        sensors = frame["sensor"].to_numpy(dtype=int)
        tap = frame["tap"].to_numpy(dtype=int)
        values = frame["value"].to_numpy(dtype=float)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: non-numeric entries ({e})") from e
    if np.any((tap < 0) | (tap >= taps)):
        raise ConfigError(f"{path}: tap index outside 0..{taps - 1}")
    row_of = {int(s): i for i, s in enumerate(indices)}
    groups = np.zeros((len(row_of), taps))
    seen = np.zeros((len(row_of), taps), dtype=bool)
    for s, j, v in zip(sensors, tap, values):
        if int(s) not in row_of:
            raise ConfigError(f"{path}: sensor {s} has no location")
        groups[row_of[int(s)], j] = v
        seen[row_of[int(s)], j] = True
    if not seen.all():
        raise ConfigError(f"{path}: every located sensor needs all {taps} taps")
    return groups


def read_summary(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise ConfigError(f"file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not hold a summary object")
    return data


def summary_value(summary: Dict[str, Any], key: str) -> Optional[float]:
    """Top-level value, else the same key under metrics"""
    value = summary.get(key)
    if value is None:
        value = (summary.get("metrics") or {}).get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    return float(value)
