"""
Beampatterns and figures of merit for a finished design (CS or GA)
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from array_model import SamplingSpec, TdlConfig, WeightVector, cosd, mu
from reference_response import build_reference, delay_compensation
from utils import DB_FLOOR, InvalidArgumentError, to_db


logger = logging.getLogger(__name__)

DENSE_ANGLE_STEP_DEG = 0.5
DENSE_OMEGA_STEP = 0.025 * math.pi
REGION_TOL = 1e-9

Regions = Sequence[Tuple[float, float]]


@dataclass
class BeampatternGrid:
    """|P| in dB and arg P on a (frequency x angle) grid"""
    frequencies: np.ndarray
    angles_deg: np.ndarray
    magnitude_db: np.ndarray
    phase_rad: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        """Long format, one row per (frequency, angle); frequency in units of pi"""
        k, l = self.magnitude_db.shape
        return pd.DataFrame({
            "frequency": np.repeat(self.frequencies / math.pi, l),
            "angle_deg": np.tile(self.angles_deg, k),
            "magnitude_db": self.magnitude_db.reshape(-1),
            "phase_rad": self.phase_rad.reshape(-1),
        })


def _groups(weights: Union[WeightVector, np.ndarray], positions, taps: int) -> Tuple[np.ndarray, np.ndarray]:
    groups = weights.groups if isinstance(weights, WeightVector) else np.atleast_2d(np.asarray(weights, dtype=float))
    positions = np.asarray(positions, dtype=float).reshape(-1)
    if positions.size == 0 or groups.size == 0:
        raise InvalidArgumentError("design has no active sensors")
    if groups.shape != (positions.size, taps):
        raise InvalidArgumentError(
            f"weights of shape {groups.shape} do not match {positions.size} sensors x {taps} taps")
    return groups, positions


def _response(groups: np.ndarray, positions: np.ndarray, omegas, angles_deg) -> np.ndarray:
    """P[k, l] = sum_m H_m(Omega_k) exp(-i Omega_k mu_m cos theta_l), H_m the sensor's FIR response"""
    omegas = np.asarray(omegas, dtype=float).reshape(-1)
    angles_deg = np.asarray(angles_deg, dtype=float).reshape(-1)
    fir = groups @ np.exp(-1j * np.outer(np.arange(groups.shape[1]), omegas))
    delays = mu(positions)[:, None] * cosd(angles_deg)[None, :]
    spatial = np.exp(-1j * omegas[None, :, None] * delays[:, None, :])
    return np.einsum("mk,mkl->kl", fir, spatial)


def beampattern(weights: Union[WeightVector, np.ndarray], positions, tdl: TdlConfig,
                freq_grid, angle_grid) -> BeampatternGrid:
    groups, positions = _groups(weights, positions, tdl.taps)
    values = _response(groups, positions, freq_grid, angle_grid)
    return BeampatternGrid(
        frequencies=np.asarray(freq_grid, dtype=float).reshape(-1),
        angles_deg=np.asarray(angle_grid, dtype=float).reshape(-1),
        magnitude_db=to_db(np.abs(values)),
        phase_rad=np.angle(values),
    )


def design_grid(sampling: SamplingSpec) -> Tuple[np.ndarray, np.ndarray]:
    angles, _ = sampling.angle_grid()
    return sampling.omegas(), angles


def dense_grid(sampling: SamplingSpec, angle_step_deg: float = DENSE_ANGLE_STEP_DEG,
               omega_step: float = DENSE_OMEGA_STEP) -> Tuple[np.ndarray, np.ndarray]:
    """Finer evaluation grid over the design band and the full 0..180 degree range"""
    if angle_step_deg <= 0 or omega_step <= 0:
        raise InvalidArgumentError("grid steps must be positive")
    n_omega = int(math.floor((sampling.omega_hi - sampling.omega_lo) / omega_step + 1e-9)) + 1
    n_angle = int(math.floor(180.0 / angle_step_deg + 1e-9)) + 1
    return sampling.omega_lo + omega_step * np.arange(n_omega), angle_step_deg * np.arange(n_angle)


def mean_adjacent_spacing(active_positions: Sequence[float]) -> float:
    positions = np.sort(np.asarray(active_positions, dtype=float).reshape(-1))
    if positions.size < 2:
        raise InvalidArgumentError("mean spacing needs at least two positions")
    return float((positions[-1] - positions[0]) / (positions.size - 1))


def equivalent_ula_spacing() -> float:
    """Half-wavelength spacing at Omega = pi"""
    return 0.5


def design_residual(weights: Union[WeightVector, np.ndarray], positions, tdl: TdlConfig,
                    sampling: SamplingSpec) -> float:
    """||p_r - w^H S||_2 on the design grid"""
    groups, positions = _groups(weights, positions, tdl.taps)
    omegas, angles = design_grid(sampling)
    values = _response(groups, positions, omegas, angles).reshape(-1)
    return float(np.linalg.norm(build_reference(sampling, tdl).values - values))


def response_variation(weights: Union[WeightVector, np.ndarray], positions, tdl: TdlConfig,
                       sampling: SamplingSpec, angles: str = "all") -> float:
    """Sum over k != ref and l of |P(Omega_k, theta_l) - P(Omega_ref, theta_l)|^2, delay-compensated"""
    groups, positions = _groups(weights, positions, tdl.taps)
    omegas = sampling.omegas()
    if omegas.size < 2:
        raise InvalidArgumentError("response variation needs at least two sampled frequencies")
    grid_angles, mainlobe = sampling.angle_grid()
    if angles == "mainlobe":
        grid_angles = grid_angles[mainlobe]
    model = sampling.mainlobe_phase_model

    values = _response(groups, positions, omegas, grid_angles)
    values = values * delay_compensation(omegas, tdl.taps, model)[:, None]
    ref = sampling.reference_index()
    if ref is None:
        reference = _response(groups, positions, [sampling.omega_ref], grid_angles)[0]
        reference = reference * delay_compensation(np.array([sampling.omega_ref]), tdl.taps, model)[0]
    else:
        reference = values[ref]
        values = np.delete(values, ref, axis=0)
    return float(np.sum(np.abs(values - reference[None, :]) ** 2))


def _region_mask(angles: np.ndarray, regions: Regions) -> np.ndarray:
    if not regions:
        raise InvalidArgumentError("at least one region is required")
    mask = np.zeros(angles.shape, dtype=bool)
    for lo, hi in regions:
        mask |= (angles >= lo - REGION_TOL) & (angles <= hi + REGION_TOL)
    if not mask.any():
        raise InvalidArgumentError(f"regions {list(regions)} contain no angle of the pattern grid")
    return mask


def sidelobe_peak(pattern: BeampatternGrid, regions: Regions) -> float:
    """Largest magnitude (dB) over every frequency and every angle inside the regions"""
    mask = _region_mask(pattern.angles_deg, regions)
    return float(pattern.magnitude_db[:, mask].max())


def mainlobe_peak_angles(pattern: BeampatternGrid, search_region: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """Angle of maximum magnitude at each frequency"""
    if search_region is None:
        mask = np.ones(pattern.angles_deg.shape, dtype=bool)
    else:
        mask = _region_mask(pattern.angles_deg, [search_region])
    angles = pattern.angles_deg[mask]
    return angles[np.argmax(pattern.magnitude_db[:, mask], axis=1)]


def sidelobe_margin_db(pattern: BeampatternGrid, regions: Regions, mainlobe_deg: float) -> float:
    """Worst (largest) sidelobe peak relative to the mainlobe level, over frequencies"""
    mask = _region_mask(pattern.angles_deg, regions)
    look = int(np.argmin(np.abs(pattern.angles_deg - mainlobe_deg)))
    margins = pattern.magnitude_db[:, mask].max(axis=1) - pattern.magnitude_db[:, look]
    return float(margins.max())


def silent_pattern(freq_grid, angle_grid) -> BeampatternGrid:
    """Pattern of a design without active sensors: the dB floor everywhere"""
    shape = (np.size(freq_grid), np.size(angle_grid))
    return BeampatternGrid(
        frequencies=np.asarray(freq_grid, dtype=float).reshape(-1),
        angles_deg=np.asarray(angle_grid, dtype=float).reshape(-1),
        magnitude_db=np.full(shape, DB_FLOOR),
        phase_rad=np.zeros(shape),
    )


def design_metrics(weights: Union[WeightVector, np.ndarray], positions, tdl: TdlConfig,
                   sampling: SamplingSpec, pattern: BeampatternGrid, rv_angles: str = "all") -> Dict[str, Any]:
    """Figures of merit reported in summary.json; RV uses the same angle set as the design"""
    positions = np.asarray(positions, dtype=float).reshape(-1)
    regions = list(sampling.sidelobe_regions)
    if positions.size == 0:
        return {
            "active_count": 0,
            "mean_spacing": None,
            "equivalent_ula_spacing": equivalent_ula_spacing(),
            "residual": float(np.linalg.norm(build_reference(sampling, tdl).values)),
            "response_variation": 0.0 if sampling.omegas().size >= 2 else None,
            "sidelobe_peak_db": DB_FLOOR if regions else None,
            "sidelobe_margin_db": None,
            "mainlobe_peak_error_deg": None,
        }
    peaks = mainlobe_peak_angles(pattern)
    metrics: Dict[str, Any] = {
        "active_count": int(positions.size),
        "mean_spacing": mean_adjacent_spacing(positions) if positions.size >= 2 else None,
        "equivalent_ula_spacing": equivalent_ula_spacing(),
        "residual": design_residual(weights, positions, tdl, sampling),
        "response_variation": (response_variation(weights, positions, tdl, sampling, rv_angles)
                               if sampling.omegas().size >= 2 else None),
        "sidelobe_peak_db": sidelobe_peak(pattern, regions) if regions else None,
        "sidelobe_margin_db": sidelobe_margin_db(pattern, regions, sampling.mainlobe_deg) if regions else None,
        "mainlobe_peak_error_deg": float(np.max(np.abs(peaks - sampling.mainlobe_deg))),
    }
    logger.debug("design metrics: %s", metrics)
    return metrics
