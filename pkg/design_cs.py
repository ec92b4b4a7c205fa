"""
Sparse wideband array design by group-sparse (modified l1) minimization

The design variable is the augmented vector w_hat = [t_0, w_0, t_1, w_1, ...]
with one l2 group per sensor. Complex residuals are stacked into real and
imaginary parts so that every constraint is a real second-order cone.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from array_model import (
    ArrayGrid,
    AugmentedWeight,
    SamplingSpec,
    SteeringMatrix,
    TdlConfig,
    WeightVector,
    build_steering_matrix,
    steering_matrix_for_positions,
)
from reference_response import ReferenceResponse, build_reference, delay_compensation
from socp import ConicProgram, SecondOrderCone, SolverSettings, SolverStatus, solve
from utils import InvalidArgumentError


logger = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-6
# group norms at or below this are solver noise around an all-zero optimum
ZERO_NORM = 1e-6
FORMULATIONS = ("group", "l1")
RV_ANGLE_SETS = ("all", "mainlobe")


@dataclass
class DesignSpec:
    alpha: float = 0.9
    sigma: Optional[float] = 0.01
    epsilon: float = 9e-4
    max_reweight_iters: int = 10
    activity_threshold_rel: float = 1e-3
    stable_iters: int = 2
    rv_angles: str = "all"
    formulation: str = "group"

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")
        if self.sigma is not None and not self.sigma > 0:
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")
        if not self.epsilon > 0:
            raise InvalidArgumentError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_reweight_iters < 1 or self.stable_iters < 1:
            raise InvalidArgumentError("reweighting iteration counts must be at least 1")
        if not 0.0 < self.activity_threshold_rel < 1.0:
            raise InvalidArgumentError("activity threshold must lie in (0, 1)")
        if self.rv_angles not in RV_ANGLE_SETS:
            raise InvalidArgumentError(f"rv_angles must be one of {RV_ANGLE_SETS}")
        if self.formulation not in FORMULATIONS:
            raise InvalidArgumentError(f"formulation must be one of {FORMULATIONS}")


@dataclass
class RvMatrix:
    """Real/imaginary column pairs of delay-compensated steering differences"""
    columns: np.ndarray
    omega_ref: float
    augmented: bool = True

    def norm(self, w: np.ndarray) -> float:
        return float(np.linalg.norm(self.columns.T @ np.asarray(w, dtype=float)))


@dataclass
class DesignResult:
    success: bool
    status: SolverStatus
    message: str
    weights: WeightVector
    t: np.ndarray
    group_norms: np.ndarray
    active: List[Tuple[int, float]]
    residual: float
    rv_value: Optional[float]
    objective: float
    objective_trace: List[float] = field(default_factory=list)
    active_trace: List[int] = field(default_factory=list)
    solver_stats: List[Dict[str, Any]] = field(default_factory=list)
    iterations: int = 1

    @property
    def active_indices(self) -> List[int]:
        return [index for index, _ in self.active]

    @property
    def active_positions(self) -> np.ndarray:
        return np.array([position for _, position in self.active])


@dataclass
class _DesignData:
    positions: np.ndarray
    taps: int
    steering: SteeringMatrix
    reference: ReferenceResponse
    rv: Optional[RvMatrix]


def group_l1(w: Union[WeightVector, np.ndarray]) -> float:
    """Sum over sensors of the l2 norm of that sensor's taps"""
    groups = w.groups if isinstance(w, WeightVector) else np.atleast_2d(np.asarray(w, dtype=float))
    return float(np.sum(np.linalg.norm(groups, axis=1)))


def reweight_factors(norms: np.ndarray, epsilon: float) -> np.ndarray:
    """a_m = 1 / (||w_m|| + epsilon) from the previous iterate"""
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon must be positive")
    return 1.0 / (np.asarray(norms, dtype=float) + epsilon)


def residual_norm(steering: SteeringMatrix, p_r: ReferenceResponse, w: np.ndarray) -> float:
    """||p_r - w^H S||_2 for a real coefficient vector laid out like the steering rows"""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != steering.entries.shape[0]:
        raise InvalidArgumentError("weight length does not match the steering matrix")
    return float(np.linalg.norm(p_r.values - steering.entries.T @ w))


def rv_norm(rv: RvMatrix, w_hat: np.ndarray) -> float:
    """||L^T w_hat||_2 recomputed from the raw matrix"""
    w_hat = np.asarray(w_hat, dtype=float).reshape(-1)
    if w_hat.size != rv.columns.shape[0]:
        raise InvalidArgumentError("weight length does not match the RV matrix")
    return rv.norm(w_hat)


def _stacked_rows(entries: np.ndarray) -> np.ndarray:
    return np.vstack([entries.real.T, entries.imag.T])


def _check_compatible(steering: SteeringMatrix, p_r: ReferenceResponse) -> None:
    if steering.entries.shape[1] != p_r.values.size:
        raise InvalidArgumentError(
            f"steering matrix has {steering.entries.shape[1]} columns but p_r has {p_r.values.size} samples")


def assemble_problem(S_hat: SteeringMatrix, p_r: ReferenceResponse, spec: DesignSpec,
                     group_weights: Optional[np.ndarray] = None,
                     rv: Optional[RvMatrix] = None) -> ConicProgram:
    """minimize sum a_m t_m  s.t.  ||p_r - w_hat^H S_hat|| <= alpha,  ||w_m|| <= t_m  [, ||L^T w_hat|| <= sigma]"""
    if not S_hat.augmented:
        raise InvalidArgumentError("group formulation needs the augmented steering matrix")
    _check_compatible(S_hat, p_r)
    M, J = S_hat.n_sensors, S_hat.taps
    n = M * (J + 1)
    a = np.ones(M) if group_weights is None else np.asarray(group_weights, dtype=float).reshape(-1)
    if a.size != M or np.any(a <= 0):
        raise InvalidArgumentError("group weights must be positive, one per sensor")

    t_slots = np.arange(M) * (J + 1)
    c = np.zeros(n)
    c[t_slots] = a

    cones = [SecondOrderCone(A=_stacked_rows(S_hat.entries), b=-p_r.stacked(), f=np.zeros(n), g=spec.alpha)]
    for m in range(M):
        A = np.zeros((J, n))
        A[np.arange(J), t_slots[m] + 1 + np.arange(J)] = 1.0
        f = np.zeros(n)
        f[t_slots[m]] = 1.0
        cones.append(SecondOrderCone(A=A, b=np.zeros(J), f=f, g=0.0))
    if rv is not None:
        if spec.sigma is None:
            raise InvalidArgumentError("RV constraint requested without sigma")
        if rv.columns.shape[0] != n:
            raise InvalidArgumentError("RV matrix does not match the augmented layout")
        cones.append(SecondOrderCone(A=rv.columns.T, b=np.zeros(rv.columns.shape[1]),
                                     f=np.zeros(n), g=spec.sigma))
    return ConicProgram(n=n, c=c, cones=cones, nonneg=t_slots)


def assemble_plain_l1(S: SteeringMatrix, p_r: ReferenceResponse, spec: DesignSpec,
                      coefficient_weights: Optional[np.ndarray] = None,
                      rv: Optional[RvMatrix] = None) -> ConicProgram:
    """minimize sum a_i |w_i|  s.t.  ||p_r - w^H S|| <= alpha, with w = u - v and u, v >= 0"""
    if S.augmented:
        raise InvalidArgumentError("plain l1 formulation uses the non-augmented steering matrix")
    _check_compatible(S, p_r)
    k = S.entries.shape[0]
    a = np.ones(k) if coefficient_weights is None else np.asarray(coefficient_weights, dtype=float).reshape(-1)
    if a.size != k or np.any(a <= 0):
        raise InvalidArgumentError("coefficient weights must be positive, one per coefficient")

    rows = _stacked_rows(S.entries)
    cones = [SecondOrderCone(A=np.hstack([rows, -rows]), b=-p_r.stacked(), f=np.zeros(2 * k), g=spec.alpha)]
    if rv is not None:
        if spec.sigma is None:
            raise InvalidArgumentError("RV constraint requested without sigma")
        if rv.augmented or rv.columns.shape[0] != k:
            raise InvalidArgumentError("RV matrix does not match the plain layout")
        Lt = rv.columns.T
        cones.append(SecondOrderCone(A=np.hstack([Lt, -Lt]), b=np.zeros(Lt.shape[0]),
                                     f=np.zeros(2 * k), g=spec.sigma))
    return ConicProgram(n=2 * k, c=np.concatenate([a, a]), cones=cones, nonneg=np.arange(2 * k))


def rv_matrix_for_positions(positions: np.ndarray, taps: int, sampling: SamplingSpec,
                            augmented: bool, angles: str = "all") -> RvMatrix:
    omegas = sampling.omegas()
    if omegas.size < 2:
        raise InvalidArgumentError("response variation needs at least two sampled frequencies")
    grid_angles, mainlobe = sampling.angle_grid()
    if angles == "mainlobe":
        grid_angles = grid_angles[mainlobe]
    model = sampling.mainlobe_phase_model

    block = steering_matrix_for_positions(positions, taps, omegas, grid_angles, augmented).entries
    rows = block.shape[0]
    block = block.reshape(rows, omegas.size, grid_angles.size)
    block = block * delay_compensation(omegas, taps, model)[None, :, None]

    ref = sampling.reference_index()
    if ref is None:
        reference = steering_matrix_for_positions(positions, taps, [sampling.omega_ref], grid_angles, augmented)
        reference = reference.entries * delay_compensation(np.array([sampling.omega_ref]), taps, model)[0]
        others = block
    else:
        reference = block[:, ref, :]
        others = np.delete(block, ref, axis=1)
    diff = (others - reference[:, None, :]).reshape(rows, -1)
    columns = np.stack([diff.real, diff.imag], axis=-1).reshape(rows, -1)
    return RvMatrix(columns=columns, omega_ref=sampling.omega_ref, augmented=augmented)


def build_rv_matrix(grid: ArrayGrid, tdl: TdlConfig, spec: SamplingSpec,
                    augmented: bool = True, angles: str = "all") -> RvMatrix:
    """L with ||L^T w||^2 = sum_{k != ref, l} |P(Omega_k, theta_l) - P(Omega_ref, theta_l)|^2"""
    return rv_matrix_for_positions(grid.positions, tdl.taps, spec, augmented, angles)


def extract_active(weights: Union[WeightVector, np.ndarray], threshold_rel: float,
                   positions: Sequence[float]) -> List[Tuple[int, float]]:
    """Sensors whose group norm exceeds threshold_rel times the largest group norm (and ZERO_NORM)"""
    if not 0.0 < threshold_rel < 1.0:
        raise InvalidArgumentError("threshold must lie in (0, 1)")
    groups = weights.groups if isinstance(weights, WeightVector) else np.atleast_2d(np.asarray(weights, dtype=float))
    norms = np.linalg.norm(groups, axis=1)
    positions = np.asarray(positions, dtype=float)
    if positions.size != norms.size:
        raise InvalidArgumentError("one position per weight group is required")
    peak = float(norms.max()) if norms.size else 0.0
    if peak <= ZERO_NORM:
        return []
    keep = (norms > threshold_rel * peak) & (norms > ZERO_NORM)
    return [(int(m), float(positions[m])) for m in np.flatnonzero(keep)]


def _prepare(grid: ArrayGrid, tdl: TdlConfig, sampling: SamplingSpec, spec: DesignSpec,
             use_rv: bool, augmented: bool) -> _DesignData:
    if use_rv and spec.sigma is None:
        raise InvalidArgumentError("use_rv requires sigma")
    steering = build_steering_matrix(grid, tdl, sampling, augmented=augmented)
    rv = build_rv_matrix(grid, tdl, sampling, augmented=augmented, angles=spec.rv_angles) if use_rv else None
    return _DesignData(grid.positions, tdl.taps, steering, build_reference(sampling, tdl), rv)


def _finish(data: _DesignData, spec: DesignSpec, solution, w_flat: np.ndarray, t: np.ndarray) -> DesignResult:
    """Drop sub-threshold groups, then verify the bounds on the design that remains"""
    weights = WeightVector.from_flat(w_flat, data.taps)
    active = extract_active(weights, spec.activity_threshold_rel, data.positions)
    keep = np.zeros(weights.groups.shape[0], dtype=bool)
    keep[np.array([m for m, _ in active], dtype=int)] = True
    weights = WeightVector(np.where(keep[:, None], weights.groups, 0.0))
    norms = np.linalg.norm(weights.groups, axis=1)
    w_checked = AugmentedWeight.from_parts(t, weights).values if data.steering.augmented else weights.flat()
    residual = residual_norm(data.steering, data.reference, w_checked)
    rv_value = rv_norm(data.rv, w_checked) ** 2 if data.rv is not None else None

    success = solution.status is SolverStatus.OPTIMAL
    message = f"solver status {solution.status.value}"
    if success and residual > spec.alpha + FEASIBILITY_SLACK:
        success, message = False, f"residual {residual:.3e} exceeds alpha {spec.alpha}"
    elif success and rv_value is not None and np.sqrt(rv_value) > spec.sigma + FEASIBILITY_SLACK:
        success, message = False, f"response variation {np.sqrt(rv_value):.3e} exceeds sigma {spec.sigma}"
    elif success:
        message = "design solved"

    return DesignResult(
        success=success,
        status=solution.status if success or solution.status is not SolverStatus.OPTIMAL
        else SolverStatus.NUMERICAL_FAILURE,
        message=message,
        weights=weights,
        t=t,
        group_norms=norms,
        active=active,
        residual=residual,
        rv_value=rv_value,
        objective=solution.objective,
        objective_trace=[solution.objective],
        solver_stats=[solution.summary()],
    )


def _solve_group(data: _DesignData, spec: DesignSpec, group_weights: np.ndarray,
                 settings: Optional[SolverSettings]) -> DesignResult:
    program = assemble_problem(data.steering, data.reference, spec, group_weights, data.rv)
    solution = solve(program, settings)
    w_hat = AugmentedWeight(solution.x, data.taps)
    result = _finish(data, spec, solution, w_hat.weights.flat(), w_hat.t)
    result.active_trace = [len(result.active)]
    return result


def _solve_l1(data: _DesignData, spec: DesignSpec, coefficient_weights: np.ndarray,
              settings: Optional[SolverSettings]) -> DesignResult:
    program = assemble_plain_l1(data.steering, data.reference, spec, coefficient_weights, data.rv)
    solution = solve(program, settings)
    k = data.steering.entries.shape[0]
    w = solution.x[:k] - solution.x[k:]
    t = np.linalg.norm(w.reshape(-1, data.taps), axis=1)
    result = _finish(data, spec, solution, w, t)
    result.active_trace = [len(result.active)]
    return result


def solve_plain_l1(grid: ArrayGrid, tdl: TdlConfig, sampling: SamplingSpec, spec: DesignSpec,
                   use_rv: bool, settings: Optional[SolverSettings] = None,
                   coefficient_weights: Optional[np.ndarray] = None) -> DesignResult:
    """Coefficient-wise l1 design: minimize sum |w_m,j| under the same residual bound"""
    data = _prepare(grid, tdl, sampling, spec, use_rv, augmented=False)
    weights = np.ones(grid.count * tdl.taps) if coefficient_weights is None else coefficient_weights
    return _solve_l1(data, spec, weights, settings)


def solve_design(grid: ArrayGrid, tdl: TdlConfig, sampling: SamplingSpec, spec: DesignSpec,
                 use_rv: bool, settings: Optional[SolverSettings] = None) -> DesignResult:
    """Single (unweighted) sparse design"""
    if spec.formulation == "l1":
        return solve_plain_l1(grid, tdl, sampling, spec, use_rv, settings)
    data = _prepare(grid, tdl, sampling, spec, use_rv, augmented=True)
    result = _solve_group(data, spec, np.ones(grid.count), settings)
    logger.info("design: %s, objective %.6g, %d active sensors",
                result.message, result.objective, len(result.active))
    return result


def reweighted_design(grid: ArrayGrid, tdl: TdlConfig, sampling: SamplingSpec, spec: DesignSpec,
                      use_rv: bool, settings: Optional[SolverSettings] = None) -> DesignResult:
    """Iterate with a_m = 1 / (||w_m|| + epsilon) until the active set settles"""
    group = spec.formulation == "group"
    data = _prepare(grid, tdl, sampling, spec, use_rv, augmented=group)
    weights = np.ones(grid.count if group else grid.count * tdl.taps)

    objective_trace: List[float] = []
    active_trace: List[int] = []
    solver_stats: List[Dict[str, Any]] = []
    previous: Optional[List[int]] = None
    unchanged = 0
    result = None

    for iteration in range(1, spec.max_reweight_iters + 1):
        result = _solve_group(data, spec, weights, settings) if group else _solve_l1(data, spec, weights, settings)
        objective_trace.append(result.objective)
        active_trace.append(len(result.active))
        solver_stats.extend(result.solver_stats)
        result.objective_trace = list(objective_trace)
        result.active_trace = list(active_trace)
        result.solver_stats = list(solver_stats)
        result.iterations = iteration
        logger.info("reweighting iteration %d: objective %.6g, %d active sensors",
                    iteration, result.objective, len(result.active))
        if not result.success:
            logger.warning("reweighting stopped at iteration %d: %s", iteration, result.message)
            return result

        current = result.active_indices
        unchanged = unchanged + 1 if current == previous else 0
        previous = current
        if unchanged >= spec.stable_iters:
            break
        if group:
            weights = reweight_factors(result.group_norms, spec.epsilon)
        else:
            weights = reweight_factors(np.abs(result.weights.flat()), spec.epsilon)
    return result
