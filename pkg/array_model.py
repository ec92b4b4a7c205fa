"""
Wideband tapped-delay-line array model

Positions are in units of lambda, the wavelength at normalized frequency
Omega = pi. Steering rows are sensor-major / tap-minor, columns are
frequency-major over the sampled (Omega, theta) pairs.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

from utils import InvalidArgumentError


ANGLE_TOL = 1e-9


class MainlobePhaseModel(Enum):
    """Phase of the desired mainlobe response"""
    UNIT = "unit"
    GROUP_DELAY = "group_delay"


@dataclass(frozen=True)
class ArrayGrid:
    """Uniform grid of candidate sensor positions over the aperture"""
    positions: np.ndarray
    aperture: float

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", positions)
        if positions.ndim != 1 or positions.size < 1:
            raise InvalidArgumentError("grid needs at least one position")
        if positions[0] != 0.0:
            raise InvalidArgumentError("first grid position must be 0")
        if positions.size == 1:
            return
        steps = np.diff(positions)
        if np.any(steps <= 0):
            raise InvalidArgumentError("grid positions must be strictly increasing")
        if positions[-1] != self.aperture:
            raise InvalidArgumentError("last grid position must equal the aperture")
        if np.max(np.abs(steps - steps[0])) > 1e-12 * self.aperture:
            raise InvalidArgumentError("grid must be uniform")

    @property
    def count(self) -> int:
        return int(self.positions.size)


@dataclass(frozen=True)
class TdlConfig:
    taps: int = 25

    def __post_init__(self):
        if int(self.taps) != self.taps or self.taps < 1:
            raise InvalidArgumentError(f"TDL length must be a positive integer, got {self.taps}")


@dataclass(frozen=True)
class SamplingSpec:
    """Frequency band, angle grid and pattern regions used for the design"""
    omega_lo: float = 0.5 * math.pi
    omega_hi: float = math.pi
    omega_step: float = 0.05 * math.pi
    omega_ref: float = math.pi
    mainlobe_deg: float = 90.0
    sidelobe_regions: Tuple[Tuple[float, float], ...] = ((0.0, 80.0), (100.0, 180.0))
    angle_step_deg: float = 1.0
    mainlobe_phase_model: MainlobePhaseModel = MainlobePhaseModel.GROUP_DELAY
    mainlobe_halfwidth_deg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "sidelobe_regions",
                           tuple((float(a), float(b)) for a, b in self.sidelobe_regions))
        if not (0.0 < self.omega_lo <= math.pi + ANGLE_TOL and 0.0 < self.omega_hi <= math.pi + ANGLE_TOL):
            raise InvalidArgumentError("band edges must lie in (0, pi]")
        if self.omega_hi < self.omega_lo:
            raise InvalidArgumentError("omega_hi must not be below omega_lo")
        if self.omega_step <= 0:
            raise InvalidArgumentError("omega_step must be positive")
        if not (self.omega_lo - ANGLE_TOL <= self.omega_ref <= self.omega_hi + ANGLE_TOL):
            raise InvalidArgumentError("omega_ref must lie inside the band")
        if not 0.0 <= self.mainlobe_deg <= 180.0:
            raise InvalidArgumentError("mainlobe direction must lie in [0, 180] degrees")
        if self.angle_step_deg <= 0:
            raise InvalidArgumentError("angle step must be positive")
        if self.mainlobe_halfwidth_deg < 0:
            raise InvalidArgumentError("mainlobe half-width must be non-negative")

        lo_ml = self.mainlobe_deg - self.mainlobe_halfwidth_deg
        hi_ml = self.mainlobe_deg + self.mainlobe_halfwidth_deg
        regions = sorted(self.sidelobe_regions)
        for a, b in regions:
            if a > b or a < 0.0 or b > 180.0:
                raise InvalidArgumentError(f"invalid sidelobe region [{a}, {b}]")
            if a <= hi_ml and lo_ml <= b:
                raise InvalidArgumentError(f"sidelobe region [{a}, {b}] overlaps the mainlobe")
        for (a1, b1), (a2, b2) in zip(regions, regions[1:]):
            if a2 <= b1:
                raise InvalidArgumentError("sidelobe regions must be pairwise disjoint")

    def omegas(self) -> np.ndarray:
        """Sampled frequencies omega_lo + k * omega_step, k = 0..K-1"""
        count = int(math.floor((self.omega_hi - self.omega_lo) / self.omega_step + 1e-9)) + 1
        return self.omega_lo + self.omega_step * np.arange(count)

    def angle_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        """Sampled angles in ascending order and the mainlobe mask"""
        angles: List[float] = []
        mainlobe: List[bool] = []
        for a, b in self.sidelobe_regions:
            for theta in _region_samples(a, b, self.angle_step_deg):
                angles.append(theta)
                mainlobe.append(False)
        if self.mainlobe_halfwidth_deg > 0:
            ml = _region_samples(self.mainlobe_deg - self.mainlobe_halfwidth_deg,
                                 self.mainlobe_deg + self.mainlobe_halfwidth_deg,
                                 self.angle_step_deg)
            ml = [t for t in ml if 0.0 <= t <= 180.0]
        else:
            ml = [float(self.mainlobe_deg)]
        angles.extend(ml)
        mainlobe.extend([True] * len(ml))
        order = np.argsort(angles, kind="stable")
        return np.asarray(angles)[order], np.asarray(mainlobe)[order]

    def reference_index(self) -> Optional[int]:
        """Index of the sampled frequency equal to omega_ref, if any"""
        omegas = self.omegas()
        k = int(np.argmin(np.abs(omegas - self.omega_ref)))
        if abs(omegas[k] - self.omega_ref) <= 1e-9 * max(1.0, abs(self.omega_ref)):
            return k
        return None


def _region_samples(lo: float, hi: float, step: float) -> List[float]:
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(count)]


@dataclass
class WeightVector:
    """Real TDL coefficients, one row of J taps per grid position"""
    groups: np.ndarray

    def __post_init__(self):
        self.groups = np.atleast_2d(np.asarray(self.groups, dtype=float))

    @classmethod
    def from_flat(cls, values: np.ndarray, taps: int) -> "WeightVector":
        values = np.asarray(values, dtype=float)
        if values.size % taps:
            raise InvalidArgumentError("weight length is not a multiple of the TDL length")
        return cls(values.reshape(-1, taps))

    @property
    def n_sensors(self) -> int:
        return self.groups.shape[0]

    @property
    def taps(self) -> int:
        return self.groups.shape[1]

    def flat(self) -> np.ndarray:
        return self.groups.reshape(-1)


@dataclass
class AugmentedWeight:
    """Interleaved [t_0, w_0,0 .. w_0,J-1, t_1, ...] vector"""
    values: np.ndarray
    taps: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size % (self.taps + 1):
            raise InvalidArgumentError("augmented length is not a multiple of J + 1")

    @classmethod
    def from_parts(cls, t: np.ndarray, weights: WeightVector) -> "AugmentedWeight":
        blocks = np.column_stack([np.asarray(t, dtype=float), weights.groups])
        return cls(blocks.reshape(-1), weights.taps)

    @property
    def t(self) -> np.ndarray:
        return self.values.reshape(-1, self.taps + 1)[:, 0].copy()

    @property
    def weights(self) -> WeightVector:
        return WeightVector(self.values.reshape(-1, self.taps + 1)[:, 1:].copy())


@dataclass
class SteeringMatrix:
    """Steering vectors for every sampled (Omega, theta), one per column"""
    entries: np.ndarray
    n_sensors: int
    taps: int
    augmented: bool
    omegas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    angles_deg: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def slots_per_sensor(self) -> int:
        return self.taps + 1 if self.augmented else self.taps


def build_grid(aperture: float, count: int) -> ArrayGrid:
    """Uniform grid with positions[m] = m * aperture / (count - 1)"""
    if int(count) != count or count < 2:
        raise InvalidArgumentError(f"grid needs at least 2 positions, got {count}")
    if not aperture > 0:
        raise InvalidArgumentError(f"aperture must be positive, got {aperture}")
    positions = np.arange(count) * (aperture / (count - 1))
    positions[-1] = aperture
    return ArrayGrid(positions, float(aperture))


def mu(position):
    """Sensor delay d/(c T_s) in samples; Omega = pi corresponds to lambda = 2 c T_s"""
    return 2.0 * np.asarray(position, dtype=float)


def cosd(theta_deg):
    """Cosine of an angle in degrees, exact at multiples of 90"""
    theta = np.asarray(theta_deg, dtype=float)
    reduced = np.mod(theta, 360.0)
    out = np.cos(np.radians(theta))
    out = np.where((reduced == 90.0) | (reduced == 270.0), 0.0, out)
    out = np.where(reduced == 0.0, 1.0, out)
    out = np.where(reduced == 180.0, -1.0, out)
    return out if out.ndim else float(out)


def _check_point(omega: float, theta_deg: float) -> None:
    if not 0.0 < omega <= math.pi + ANGLE_TOL:
        raise InvalidArgumentError(f"normalized frequency must lie in (0, pi], got {omega}")
    if not 0.0 <= theta_deg <= 180.0:
        raise InvalidArgumentError(f"angle must lie in [0, 180] degrees, got {theta_deg}")


def _phases(positions: np.ndarray, taps: int, omegas: np.ndarray, angles_deg: np.ndarray) -> np.ndarray:
    """Phase array of shape (M, J, K, L): Omega_k * (mu_m cos theta_l + j)"""
    delays = mu(positions)[:, None, None, None] * cosd(angles_deg)[None, None, None, :]
    delays = delays + np.arange(taps, dtype=float)[None, :, None, None]
    return np.asarray(omegas, dtype=float)[None, None, :, None] * delays


def steering_matrix_for_positions(positions, taps: int, omegas, angles_deg,
                                  augmented: bool = False) -> SteeringMatrix:
    """Steering matrix for arbitrary sorted positions (lambda units)"""
    positions = np.asarray(positions, dtype=float).reshape(-1)
    omegas = np.asarray(omegas, dtype=float).reshape(-1)
    angles_deg = np.asarray(angles_deg, dtype=float).reshape(-1)
    if omegas.size == 0 or angles_deg.size == 0:
        raise InvalidArgumentError("empty frequency or angle grid")
    if positions.size == 0:
        raise InvalidArgumentError("no sensor positions")
    for omega in (omegas.min(), omegas.max()):
        _check_point(omega, 90.0)
    for theta in (angles_deg.min(), angles_deg.max()):
        _check_point(math.pi, theta)

    block = np.exp(-1j * _phases(positions, taps, omegas, angles_deg))
    if augmented:
        padded = np.zeros((positions.size, taps + 1) + block.shape[2:], dtype=complex)
        padded[:, 1:] = block
        block = padded
    rows = block.shape[0] * block.shape[1]
    return SteeringMatrix(
        entries=block.reshape(rows, omegas.size * angles_deg.size),
        n_sensors=positions.size,
        taps=taps,
        augmented=augmented,
        omegas=omegas,
        angles_deg=angles_deg,
    )


def steering_vector(grid: ArrayGrid, tdl: TdlConfig, omega: float, theta_deg: float) -> np.ndarray:
    """Entry (m, j) = exp(-i Omega (mu_m cos theta + j)), length M * J"""
    _check_point(omega, theta_deg)
    phases = _phases(grid.positions, tdl.taps, np.array([omega]), np.array([theta_deg]))
    return np.exp(-1j * phases).reshape(-1)


def augmented_steering_vector(grid: ArrayGrid, tdl: TdlConfig, omega: float, theta_deg: float) -> np.ndarray:
    """Steering vector with a zero in each sensor's t slot, length M * (J + 1)"""
    plain = steering_vector(grid, tdl, omega, theta_deg).reshape(grid.count, tdl.taps)
    out = np.zeros((grid.count, tdl.taps + 1), dtype=complex)
    out[:, 1:] = plain
    return out.reshape(-1)


def build_steering_matrix(grid: ArrayGrid, tdl: TdlConfig, spec: SamplingSpec,
                          augmented: bool = False) -> SteeringMatrix:
    angles, _ = spec.angle_grid()
    return steering_matrix_for_positions(grid.positions, tdl.taps, spec.omegas(), angles, augmented)


def response(w: Union[np.ndarray, WeightVector, AugmentedWeight], s: np.ndarray) -> complex:
    """Array response w^H s"""
    if isinstance(w, WeightVector):
        w = w.flat()
    elif isinstance(w, AugmentedWeight):
        w = w.values
    w = np.asarray(w).reshape(-1)
    s = np.asarray(s).reshape(-1)
    if w.size != s.size:
        raise InvalidArgumentError(f"weight length {w.size} does not match steering length {s.size}")
    return complex(np.vdot(w, s))
