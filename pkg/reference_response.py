"""
Desired beam response over the sampled (Omega, theta) grid
"""
from dataclasses import dataclass

import numpy as np

from array_model import MainlobePhaseModel, SamplingSpec, TdlConfig


@dataclass
class ReferenceResponse:
    """p_r in the same frequency-major column order as the steering matrix"""
    values: np.ndarray
    mainlobe_mask: np.ndarray

    def stacked(self) -> np.ndarray:
        """Real/imaginary stacking used by the conic residual constraint"""
        return np.concatenate([self.values.real, self.values.imag])


def delay_compensation(omegas: np.ndarray, taps: int, model: MainlobePhaseModel) -> np.ndarray:
    """Phasors that undo the target group delay: exp(+i Omega (J-1)/2), or 1 for UNIT"""
    omegas = np.asarray(omegas, dtype=float)
    if model is MainlobePhaseModel.GROUP_DELAY:
        return np.exp(1j * omegas * (taps - 1) / 2.0)
    return np.ones(omegas.shape, dtype=complex)


def build_reference(spec: SamplingSpec, tdl: TdlConfig) -> ReferenceResponse:
    """Ideal pattern: zero on sidelobe samples, unit magnitude on mainlobe samples"""
    omegas = spec.omegas()
    _, mainlobe = spec.angle_grid()
    mainlobe_phase = np.conj(delay_compensation(omegas, tdl.taps, spec.mainlobe_phase_model))

    values = np.zeros((omegas.size, mainlobe.size), dtype=complex)
    values[:, mainlobe] = mainlobe_phase[:, None]
    mask = np.broadcast_to(mainlobe, values.shape).reshape(-1).copy()
    return ReferenceResponse(values=values.reshape(-1), mainlobe_mask=mask)
