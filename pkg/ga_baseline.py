"""
Genetic-algorithm baseline for sensor placement

A chromosome is a sorted vector of sensor positions over a fixed aperture.
Its fitness is 1 / J_CLS, where J_CLS is the smallest squared residual
||p_r - w^H S(positions)||^2 reachable by TDL weights under the response
variation bound ||L^T w|| <= sigma.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from array_model import SamplingSpec, TdlConfig, WeightVector, steering_matrix_for_positions
from design_cs import rv_matrix_for_positions
from reference_response import build_reference
from socp import ConicProgram, SecondOrderCone, SolverSettings, SolverStatus, solve
from utils import InvalidArgumentError, SolverFailure


logger = logging.getLogger(__name__)

SPACING_TOL = 1e-12


@dataclass
class GaConfig:
    population: int = 50
    generations: int = 200
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    mutation_sigma: Optional[float] = None  # lambda; None means 0.05 * aperture
    tournament_size: int = 3
    blend_alpha: float = 0.5
    min_spacing: float = 0.0
    seed: int = 0
    anchor_first: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.population < 4:
            raise InvalidArgumentError(f"population must be at least 4, got {self.population}")
        if self.generations < 0:
            raise InvalidArgumentError("generations must be non-negative")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidArgumentError(f"{name} must lie in [0, 1]")
        if self.mutation_sigma is not None and self.mutation_sigma < 0:
            raise InvalidArgumentError("mutation_sigma must be non-negative")
        if not 1 <= self.tournament_size <= self.population:
            raise InvalidArgumentError("tournament size must lie in [1, population]")
        if self.blend_alpha < 0:
            raise InvalidArgumentError("blend_alpha must be non-negative")
        if self.min_spacing < 0:
            raise InvalidArgumentError("min_spacing must be non-negative")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be an unsigned integer")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be at least 1")


@dataclass(frozen=True, eq=False)
class Chromosome:
    positions: np.ndarray

    def is_valid(self, aperture: float, min_spacing: float) -> bool:
        x = self.positions
        if x.size == 0 or x[0] < -SPACING_TOL or x[-1] > aperture + SPACING_TOL:
            return False
        return bool(np.all(np.diff(x) >= min_spacing - SPACING_TOL))


@dataclass
class GaResult:
    best: Chromosome
    fitness_history: List[float]
    best_jcls: float
    best_weights: Optional[WeightVector] = None
    evaluations: int = 0
    generations: int = 0


def _compress(A: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Equivalent cone rows: ||A x + b|| == ||[R x + Q^T b; c0]|| for A = QR"""
    rows, cols = A.shape
    if rows <= cols + 1:
        return A, b
    Q, R = np.linalg.qr(A, mode="reduced")
    qb = Q.T @ b
    rest = max(float(b @ b - qb @ qb), 0.0)
    return np.vstack([R, np.zeros((1, cols))]), np.concatenate([qb, [np.sqrt(rest)]])


def _validate_positions(positions) -> np.ndarray:
    positions = np.asarray(positions, dtype=float).reshape(-1)
    if positions.size == 0:
        raise InvalidArgumentError("at least one sensor position is required")
    if not np.all(np.isfinite(positions)) or np.any(positions < 0):
        raise InvalidArgumentError("positions must be finite and non-negative")
    if np.any(np.diff(positions) < 0):
        raise InvalidArgumentError("positions must be sorted ascending")
    return positions


def fit_weights(positions: Sequence[float], tdl: TdlConfig, sampling: SamplingSpec,
                sigma: Optional[float], settings: Optional[SolverSettings] = None
                ) -> Tuple[float, WeightVector]:
    """Constrained least-squares weights for fixed positions; returns (J_CLS, weights)"""
    positions = _validate_positions(positions)
    if sigma is not None and not sigma > 0:
        raise InvalidArgumentError("sigma must be positive")
    angles, _ = sampling.angle_grid()
    steering = steering_matrix_for_positions(positions, tdl.taps, sampling.omegas(), angles)
    target = build_reference(sampling, tdl)

    k = steering.entries.shape[0]
    n = k + 1
    A, b = _compress(np.vstack([steering.entries.real.T, steering.entries.imag.T]), -target.stacked())
    f = np.zeros(n)
    f[k] = 1.0
    cones = [SecondOrderCone(A=np.hstack([A, np.zeros((A.shape[0], 1))]), b=b, f=f, g=0.0)]
    if sigma is not None:
        Lt = rv_matrix_for_positions(positions, tdl.taps, sampling, augmented=False).columns.T
        Lt, zero = _compress(Lt, np.zeros(Lt.shape[0]))
        cones.append(SecondOrderCone(A=np.hstack([Lt, np.zeros((Lt.shape[0], 1))]), b=zero,
                                     f=np.zeros(n), g=sigma))
    c = np.zeros(n)
    c[k] = 1.0

    solution = solve(ConicProgram(n=n, c=c, cones=cones), settings)
    if solution.status is not SolverStatus.OPTIMAL:
        raise SolverFailure(
            f"J_CLS subproblem ended with status {solution.status.value} "
            f"(primal infeasibility {solution.primal_infeas:.3e}) for positions {np.round(positions, 4).tolist()}")
    w = solution.x[:k]
    residual = float(np.linalg.norm(target.values - steering.entries.T @ w))
    return residual ** 2, WeightVector.from_flat(w, tdl.taps)


def j_cls(positions: Sequence[float], tdl: TdlConfig, sampling: SamplingSpec, sigma: Optional[float],
          settings: Optional[SolverSettings] = None) -> float:
    """min_w ||p_r - w^H S||^2 subject to ||L^T w|| <= sigma"""
    return fit_weights(positions, tdl, sampling, sigma, settings)[0]


class _Population:
    """Draws and repairs chromosomes from a single seeded stream"""

    def __init__(self, config: GaConfig, n_sensors: int, aperture: float):
        self.config = config
        self.n = n_sensors
        self.aperture = aperture
        self.sigma = config.mutation_sigma if config.mutation_sigma is not None else 0.05 * aperture
        self.rng = np.random.default_rng(config.seed)

    def repair(self, x: np.ndarray) -> np.ndarray:
        x = np.sort(np.clip(x, 0.0, self.aperture))
        if self.config.anchor_first:
            x[0] = 0.0
        s = self.config.min_spacing
        for i in range(1, x.size):
            x[i] = max(x[i], x[i - 1] + s)
        x[-1] = min(x[-1], self.aperture)
        for i in range(x.size - 2, -1, -1):
            x[i] = min(x[i], x[i + 1] - s)
        x = np.maximum(x, 0.0)
        if self.config.anchor_first:
            x[0] = 0.0
        return x

    def random_individual(self) -> np.ndarray:
        return self.repair(self.rng.uniform(0.0, self.aperture, self.n))

    def tournament(self, fitness: np.ndarray) -> int:
        entrants = self.rng.choice(fitness.size, size=self.config.tournament_size, replace=False)
        return int(entrants[np.argmax(fitness[entrants])])

    def crossover(self, a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """BLX-alpha blend: genes drawn from the parents' interval widened by alpha"""
        spread = self.config.blend_alpha * np.abs(a - b)
        lo, hi = np.minimum(a, b) - spread, np.maximum(a, b) + spread
        return self.rng.uniform(lo, hi), self.rng.uniform(lo, hi)

    def mutate(self, x: np.ndarray) -> np.ndarray:
        mask = self.rng.random(self.n) < self.config.mutation_rate
        noise = self.rng.normal(0.0, self.sigma, self.n)
        return x + np.where(mask, noise, 0.0)

    def offspring(self, population: List[np.ndarray], fitness: np.ndarray) -> List[np.ndarray]:
        children: List[np.ndarray] = []
        while len(children) < self.config.population - 1:
            a = population[self.tournament(fitness)]
            b = population[self.tournament(fitness)]
            if self.rng.random() < self.config.crossover_rate:
                c1, c2 = self.crossover(a, b)
            else:
                c1, c2 = a.copy(), b.copy()
            for child in (c1, c2):
                if len(children) < self.config.population - 1:
                    children.append(self.repair(self.mutate(child)))
        return children


def run_ga(config: GaConfig, n_sensors: int, aperture: float, tdl: TdlConfig, sampling: SamplingSpec,
           sigma: Optional[float], settings: Optional[SolverSettings] = None,
           audit: Optional[Callable[[int, List[Chromosome]], None]] = None) -> GaResult:
    """Maximize 1 / J_CLS over sorted positions in [0, aperture]"""
    if n_sensors < 1:
        raise InvalidArgumentError("n_sensors must be at least 1")
    if not aperture > 0:
        raise InvalidArgumentError("aperture must be positive")
    if n_sensors * config.min_spacing > aperture:
        raise InvalidArgumentError(
            f"{n_sensors} sensors at spacing {config.min_spacing} do not fit in aperture {aperture}")

    pop = _Population(config, n_sensors, aperture)
    evaluations = 0

    def evaluate(individuals: List[np.ndarray]) -> np.ndarray:
        nonlocal evaluations
        evaluations += len(individuals)

        def fitness_of(x: np.ndarray) -> float:
            try:
                value = j_cls(x, tdl, sampling, sigma, settings)
            except SolverFailure as e:
                logger.warning("GA fitness evaluation failed: %s", e)
                return 0.0
            return 1.0 / max(value, np.finfo(float).tiny)

        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                return np.array(list(pool.map(fitness_of, individuals)))
        return np.array([fitness_of(x) for x in individuals])

    population = [pop.random_individual() for _ in range(config.population)]
    if audit:
        audit(0, [Chromosome(x.copy()) for x in population])
    fitness = evaluate(population)
    history = [float(fitness.max())]
    logger.info("GA generation 0: best J_CLS %.6g", 1.0 / history[-1] if history[-1] > 0 else np.inf)

    for generation in range(1, config.generations + 1):
        elite = int(np.argmax(fitness))
        children = pop.offspring(population, fitness)
        population = [population[elite]] + children
        fitness = np.concatenate([[fitness[elite]], evaluate(children)])
        history.append(float(fitness.max()))
        if audit:
            audit(generation, [Chromosome(x.copy()) for x in population])
        logger.info("GA generation %d: best J_CLS %.6g", generation,
                    1.0 / history[-1] if history[-1] > 0 else np.inf)

    best = population[int(np.argmax(fitness))]
    if fitness.max() <= 0:
        raise SolverFailure("no GA individual produced a feasible J_CLS fit")
    best_jcls, weights = fit_weights(best, tdl, sampling, sigma, settings)
    return GaResult(best=Chromosome(best.copy()), fitness_history=history, best_jcls=best_jcls,
                    best_weights=weights, evaluations=evaluations, generations=config.generations)
