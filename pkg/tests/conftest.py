import math
from dataclasses import dataclass

import numpy as np
import pytest

from array_model import ArrayGrid, SamplingSpec, TdlConfig, build_grid, build_steering_matrix
from design_cs import DesignSpec, build_rv_matrix
from reference_response import build_reference


@dataclass
class SmallProblem:
    grid: ArrayGrid
    tdl: TdlConfig
    sampling: SamplingSpec
    w_ls: np.ndarray
    residual_ls: float
    rv_ls: float
    p_norm: float

    def spec(self, frac: float = 0.3, **kwargs) -> DesignSpec:
        """alpha strictly between the least-squares residual and ||p_r||; sigma above the LS fit's RV"""
        alpha = self.residual_ls + frac * (self.p_norm - self.residual_ls)
        sigma = max(1.5 * self.rv_ls, 1e-3)
        return DesignSpec(alpha=alpha, sigma=sigma, **kwargs)


def small_sampling(**kwargs) -> SamplingSpec:
    params = dict(
        omega_lo=0.6 * math.pi,
        omega_hi=math.pi,
        omega_step=0.2 * math.pi,
        omega_ref=math.pi,
        mainlobe_deg=90.0,
        sidelobe_regions=((0.0, 60.0), (120.0, 180.0)),
        angle_step_deg=10.0,
    )
    params.update(kwargs)
    return SamplingSpec(**params)


def make_problem(grid: ArrayGrid, tdl: TdlConfig, sampling: SamplingSpec) -> SmallProblem:
    steering = build_steering_matrix(grid, tdl, sampling)
    target = build_reference(sampling, tdl)
    A = np.vstack([steering.entries.real.T, steering.entries.imag.T])
    w_ls = np.linalg.lstsq(A, target.stacked(), rcond=None)[0]
    residual = float(np.linalg.norm(target.values - steering.entries.T @ w_ls))
    rv = build_rv_matrix(grid, tdl, sampling, augmented=False).norm(w_ls) if sampling.omegas().size > 1 else 0.0
    return SmallProblem(grid, tdl, sampling, w_ls, residual, rv, float(np.linalg.norm(target.values)))


@pytest.fixture
def sampling():
    return small_sampling()


@pytest.fixture
def problem():
    return make_problem(build_grid(2.0, 8), TdlConfig(taps=3), small_sampling())


@pytest.fixture
def broadside_sampling():
    return SamplingSpec()


SMALL_CONFIG = """
[run]
schema_version = 1
mode = design
out = {out}

[grid]
aperture = 2.0
count = 8

[tdl]
taps = 3

[sampling]
omega_lo = 0.6
omega_hi = 1.0
omega_step = 0.2
omega_ref = 1.0
mainlobe_deg = 90
sidelobe_regions = 0:60, 120:180
angle_step_deg = 10
mainlobe_phase = group_delay

[design]
alpha = {alpha}
sigma = {sigma}
use_rv = true

[ga]
n_sensors = 3
aperture = 1.5
population = 6
generations = 2
seed = 7

[logging]
level = WARNING
"""


def write_small_config(directory, problem: SmallProblem, **fields) -> str:
    """INI file for the small problem; fields override alpha, sigma or out"""
    spec = problem.spec()
    values = dict(out=str(directory / "out"), alpha=spec.alpha, sigma=spec.sigma)
    values.update(fields)
    path = directory / "small.ini"
    path.write_text(SMALL_CONFIG.format(**values), encoding="utf-8")
    return str(path)
