import math

import numpy as np
import pytest

from array_model import AugmentedWeight, SamplingSpec, TdlConfig, WeightVector, build_grid, build_steering_matrix
from design_cs import (
    DesignSpec,
    assemble_plain_l1,
    assemble_problem,
    build_rv_matrix,
    extract_active,
    group_l1,
    residual_norm,
    reweight_factors,
    reweighted_design,
    rv_matrix_for_positions,
    rv_norm,
    solve_design,
    solve_plain_l1,
)
from evaluation import design_residual, response_variation
from reference_response import ReferenceResponse, build_reference
from socp import SolverSettings, SolverStatus, check_feasibility, solve
from tests.conftest import make_problem, small_sampling
from utils import InvalidArgumentError


def test_group_l1_examples():
    assert group_l1(WeightVector(np.zeros((4, 3)))) == 0.0
    assert group_l1(WeightVector(np.array([[3.0, 4.0]]))) == pytest.approx(5.0)
    w = np.array([[1.5], [-2.0], [0.0], [0.25]])
    assert group_l1(w) == pytest.approx(np.sum(np.abs(w)))


def test_reweight_factor_examples():
    np.testing.assert_allclose(reweight_factors(np.array([0.0, 0.9991]), 9e-4), [1.0 / 9e-4, 1.0])
    with pytest.raises(InvalidArgumentError):
        reweight_factors(np.ones(3), 0.0)


@pytest.mark.parametrize("kwargs", [
    dict(alpha=0.0), dict(sigma=-1.0), dict(epsilon=0.0), dict(max_reweight_iters=0),
    dict(activity_threshold_rel=1.0), dict(rv_angles="sidelobe"), dict(formulation="lasso"),
])
def test_design_spec_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        DesignSpec(**kwargs)


@pytest.mark.slow
def test_broadside_problem_sizes(broadside_sampling):
    grid = build_grid(10.0, 100)
    tdl = TdlConfig(taps=25)
    S_hat = build_steering_matrix(grid, tdl, broadside_sampling, augmented=True)
    p_r = build_reference(broadside_sampling, tdl)
    spec = DesignSpec()
    program = assemble_problem(S_hat, p_r, spec)
    assert program.n == 2600
    assert len(program.cones) == 101
    assert program.cones[0].A.shape[0] == 2 * 11 * 163
    rv = build_rv_matrix(grid, tdl, broadside_sampling)
    assert rv.columns.shape == (2600, 3260 * 2)
    assert len(assemble_problem(S_hat, p_r, spec, rv=rv).cones) == 102


def test_assembled_structure(problem):
    S_hat = build_steering_matrix(problem.grid, problem.tdl, problem.sampling, augmented=True)
    p_r = build_reference(problem.sampling, problem.tdl)
    spec = problem.spec()
    a = np.linspace(1.0, 2.0, problem.grid.count)
    program = assemble_problem(S_hat, p_r, spec, group_weights=a)
    t_slots = np.arange(problem.grid.count) * (problem.tdl.taps + 1)
    np.testing.assert_array_equal(program.nonneg, t_slots)
    np.testing.assert_array_equal(program.c[t_slots], a)
    assert np.count_nonzero(program.c) == problem.grid.count
    # residual cone at w_hat = 0 evaluates to ||p_r||
    residual = program.cones[0]
    x0 = np.zeros(program.n)
    assert np.linalg.norm(residual.A @ x0 + residual.b) == pytest.approx(problem.p_norm)
    assert residual.g == spec.alpha


def test_unit_weights_objective_is_sum_of_t(problem):
    S_hat = build_steering_matrix(problem.grid, problem.tdl, problem.sampling, augmented=True)
    program = assemble_problem(S_hat, build_reference(problem.sampling, problem.tdl), problem.spec())
    x = np.random.default_rng(0).standard_normal(program.n)
    t_slots = np.arange(problem.grid.count) * (problem.tdl.taps + 1)
    assert program.c @ x == pytest.approx(np.sum(x[t_slots]))


def test_assembly_rejects_mismatches(problem):
    plain = build_steering_matrix(problem.grid, problem.tdl, problem.sampling)
    S_hat = build_steering_matrix(problem.grid, problem.tdl, problem.sampling, augmented=True)
    p_r = build_reference(problem.sampling, problem.tdl)
    spec = problem.spec()
    with pytest.raises(InvalidArgumentError):
        assemble_problem(plain, p_r, spec)
    with pytest.raises(InvalidArgumentError):
        assemble_problem(S_hat, p_r, spec, group_weights=np.ones(3))
    with pytest.raises(InvalidArgumentError):
        assemble_problem(S_hat, p_r, spec, group_weights=np.zeros(problem.grid.count))
    with pytest.raises(InvalidArgumentError):
        assemble_plain_l1(S_hat, p_r, spec)
    other = build_reference(small_sampling(angle_step_deg=20.0), problem.tdl)
    with pytest.raises(InvalidArgumentError):
        assemble_problem(S_hat, other, spec)
    rv = build_rv_matrix(problem.grid, problem.tdl, problem.sampling)
    with pytest.raises(InvalidArgumentError):
        assemble_problem(S_hat, p_r, DesignSpec(alpha=spec.alpha, sigma=None), rv=rv)


def test_rv_matrix_shapes(problem):
    K = problem.sampling.omegas().size
    angles, _ = problem.sampling.angle_grid()
    rv = build_rv_matrix(problem.grid, problem.tdl, problem.sampling)
    assert rv.columns.shape == (problem.grid.count * (problem.tdl.taps + 1), 2 * (K - 1) * angles.size)
    t_rows = np.arange(problem.grid.count) * (problem.tdl.taps + 1)
    assert np.all(rv.columns[t_rows] == 0)
    mainlobe = build_rv_matrix(problem.grid, problem.tdl, problem.sampling, angles="mainlobe")
    assert mainlobe.columns.shape[1] == 2 * (K - 1)
    off_grid = build_rv_matrix(problem.grid, problem.tdl, small_sampling(omega_ref=0.9 * math.pi))
    assert off_grid.columns.shape[1] == 2 * K * angles.size


def test_rv_zero_for_frequency_invariant_response(sampling):
    assert build_rv_matrix(build_grid(2.0, 4), TdlConfig(taps=3), sampling).norm(np.zeros(16)) == 0.0
    # a pure delay of (J - 1) / 2 samples at the origin has the target phase at every frequency
    rv = rv_matrix_for_positions(np.array([0.0]), 3, sampling, augmented=False)
    assert rv.norm(np.array([0.0, 1.0, 0.0])) == pytest.approx(0.0, abs=1e-12)
    assert rv.norm(np.array([1.0, 0.0, 0.0])) > 0.1


def test_rv_needs_two_frequencies():
    narrow = small_sampling(omega_lo=math.pi, omega_hi=math.pi)
    with pytest.raises(InvalidArgumentError):
        build_rv_matrix(build_grid(1.0, 3), TdlConfig(taps=2), narrow)


def test_solve_design_is_feasible_and_tight(problem):
    spec = problem.spec()
    result = solve_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=False)
    assert result.success
    assert result.status is SolverStatus.OPTIMAL
    assert result.residual <= spec.alpha + 1e-6
    assert result.rv_value is None
    assert np.all(result.t >= result.group_norms - 1e-6)
    assert result.objective == pytest.approx(group_l1(result.weights), abs=1e-5)
    assert 0 < len(result.active) <= problem.grid.count
    assert result.iterations == 1


def test_solve_design_with_rv(problem):
    spec = problem.spec()
    result = solve_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=True)
    assert result.success
    assert result.rv_value is not None
    assert math.sqrt(result.rv_value) <= spec.sigma + 1e-6
    assert result.residual <= spec.alpha + 1e-6
    rv = build_rv_matrix(problem.grid, problem.tdl, problem.sampling)
    w_hat = AugmentedWeight.from_parts(result.t, result.weights).values
    assert rv_norm(rv, w_hat) ** 2 == pytest.approx(result.rv_value, rel=1e-9, abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        rv_norm(rv, np.zeros(3))


def test_reported_residual_is_recomputed(problem):
    result = solve_design(problem.grid, problem.tdl, problem.sampling, problem.spec(), use_rv=False)
    steering = build_steering_matrix(problem.grid, problem.tdl, problem.sampling)
    p_r = build_reference(problem.sampling, problem.tdl)
    assert residual_norm(steering, p_r, result.weights.flat()) == pytest.approx(result.residual, abs=1e-9)
    with pytest.raises(InvalidArgumentError):
        residual_norm(steering, p_r, np.zeros(3))


def test_trivially_feasible_bound_gives_zero_design(problem):
    spec = DesignSpec(alpha=1.1 * problem.p_norm, sigma=0.01)
    result = solve_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=False)
    assert result.success
    assert result.objective <= 1e-6
    assert result.active == []


def test_unreachable_bound_fails_without_partial_answer(problem):
    spec = DesignSpec(alpha=0.5 * problem.residual_ls)
    result = solve_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=False)
    assert not result.success
    assert result.status is not SolverStatus.OPTIMAL


@pytest.mark.parametrize("use_rv", [False, True])
def test_bound_below_least_squares_floor_is_infeasible(problem, use_rv):
    spec = DesignSpec(alpha=0.5 * problem.residual_ls, sigma=problem.spec().sigma)
    result = solve_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=use_rv)
    assert not result.success
    assert result.status is SolverStatus.INFEASIBLE


def test_objective_monotone_in_alpha(problem):
    tight = solve_design(problem.grid, problem.tdl, problem.sampling, problem.spec(0.2), use_rv=False)
    loose = solve_design(problem.grid, problem.tdl, problem.sampling, problem.spec(0.5), use_rv=False)
    assert tight.success and loose.success
    assert loose.objective <= tight.objective + 2e-7 * max(1.0, tight.objective)


def test_objective_homogeneous_in_group_weights(problem):
    S_hat = build_steering_matrix(problem.grid, problem.tdl, problem.sampling, augmented=True)
    p_r = build_reference(problem.sampling, problem.tdl)
    spec = problem.spec()
    a = np.linspace(0.5, 1.5, problem.grid.count)
    base = solve(assemble_problem(S_hat, p_r, spec, group_weights=a))
    scaled = solve(assemble_problem(S_hat, p_r, spec, group_weights=3.0 * a))
    assert scaled.objective == pytest.approx(3.0 * base.objective, rel=1e-5)
    program = assemble_problem(S_hat, p_r, spec, group_weights=a)
    assert check_feasibility(program, base.x).worst_violation <= 1e-7


def test_huge_epsilon_reweighting_matches_unweighted(problem):
    # a_m = 1 / (||w_m|| + eps) tends to a constant, which leaves the optimal design unchanged
    S_hat = build_steering_matrix(problem.grid, problem.tdl, problem.sampling, augmented=True)
    p_r = build_reference(problem.sampling, problem.tdl)
    spec = problem.spec()
    plain = solve(assemble_problem(S_hat, p_r, spec))
    norms = np.linspace(0.0, 1.0, problem.grid.count)
    a = 1e6 * reweight_factors(norms, 1e6)
    weighted = solve(assemble_problem(S_hat, p_r, spec, group_weights=a))
    assert weighted.objective == pytest.approx(plain.objective, rel=1e-5)


def test_single_tap_group_matches_plain_l1():
    grid = build_grid(7.25, 30)
    tdl = TdlConfig(taps=1)
    narrow = small_sampling(omega_lo=math.pi, omega_hi=math.pi)
    problem = make_problem(grid, tdl, narrow)
    spec = problem.spec()
    settings = SolverSettings(tol_feas=1e-9, tol_gap=1e-9)
    group = solve_design(grid, tdl, narrow, spec, use_rv=False, settings=settings)
    plain = solve_plain_l1(grid, tdl, narrow, spec, use_rv=False, settings=settings)
    assert group.success and plain.success
    assert abs(group.objective - plain.objective) <= 2e-7 * max(1.0, plain.objective)


def test_plain_l1_formulation(problem):
    spec = problem.spec(formulation="l1")
    result = solve_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=True)
    assert result.success
    assert result.residual <= spec.alpha + 1e-6
    assert math.sqrt(result.rv_value) <= spec.sigma + 1e-6
    assert result.objective == pytest.approx(np.sum(np.abs(result.weights.flat())), abs=1e-5)


def test_reweighting_first_iteration_is_plain_design(problem):
    spec = problem.spec()
    single = solve_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=True)
    result = reweighted_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=True)
    assert result.objective_trace[0] == single.objective
    assert result.active_trace[0] == len(single.active)


def test_reweighting_trace_and_stop_rule(problem):
    spec = problem.spec()
    result = reweighted_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=True)
    assert result.success
    assert 1 <= result.iterations <= spec.max_reweight_iters
    assert len(result.objective_trace) == result.iterations
    assert len(result.active_trace) == result.iterations
    assert len(result.solver_stats) == result.iterations
    assert result.residual <= spec.alpha + 1e-6
    assert math.sqrt(result.rv_value) <= spec.sigma + 1e-6
    if result.iterations < spec.max_reweight_iters:
        assert len(set(result.active_trace[-(spec.stable_iters + 1):])) == 1


def test_reweighting_respects_iteration_cap(problem):
    spec = problem.spec(max_reweight_iters=1)
    result = reweighted_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=False)
    assert result.iterations == 1


def test_reweighting_failure_carries_trace(problem):
    spec = DesignSpec(alpha=0.5 * problem.residual_ls)
    result = reweighted_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=False)
    assert not result.success
    assert result.iterations == 1
    assert len(result.objective_trace) == 1


def test_extract_active_examples():
    w = WeightVector(np.array([[1.0, 0.0], [1e-4, 0.0], [0.0, 0.5]]))
    assert extract_active(w, 1e-3, [0.0, 0.5, 1.0]) == [(0, 0.0), (2, 1.0)]
    assert extract_active(WeightVector(np.zeros((3, 2))), 1e-3, [0.0, 0.5, 1.0]) == []
    with pytest.raises(InvalidArgumentError):
        extract_active(w, 1e-3, [0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        extract_active(w, 0.0, [0.0, 0.5, 1.0])


@pytest.mark.parametrize("rv_angles", ["all", "mainlobe"])
def test_evaluation_metrics_agree_with_reported_design(problem, rv_angles):
    spec = problem.spec(rv_angles=rv_angles)
    result = solve_design(problem.grid, problem.tdl, problem.sampling, spec, use_rv=True)
    assert result.success
    groups = result.weights.groups[result.active_indices]
    positions = result.active_positions
    dropped = np.setdiff1d(np.arange(problem.grid.count), result.active_indices)
    assert np.all(result.weights.groups[dropped] == 0.0)
    assert design_residual(groups, positions, problem.tdl, problem.sampling) == pytest.approx(
        result.residual, abs=1e-9)
    assert response_variation(groups, positions, problem.tdl, problem.sampling, rv_angles) == pytest.approx(
        result.rv_value, abs=1e-9)


def test_objective_scales_with_reference_and_bounds(problem):
    S_hat = build_steering_matrix(problem.grid, problem.tdl, problem.sampling, augmented=True)
    p_r = build_reference(problem.sampling, problem.tdl)
    rv = build_rv_matrix(problem.grid, problem.tdl, problem.sampling)
    spec = problem.spec()
    beta = 2.5
    scaled_p_r = ReferenceResponse(beta * p_r.values, p_r.mainlobe_mask)
    scaled_spec = DesignSpec(alpha=beta * spec.alpha, sigma=beta * spec.sigma)
    base = solve(assemble_problem(S_hat, p_r, spec, rv=rv))
    scaled = solve(assemble_problem(S_hat, scaled_p_r, scaled_spec, rv=rv))
    assert base.status is SolverStatus.OPTIMAL and scaled.status is SolverStatus.OPTIMAL
    assert scaled.objective == pytest.approx(beta * base.objective, rel=1e-5)
