import math

import numpy as np
import pytest

from mixedaderdg.basis import build_reference_basis
from mixedaderdg.mesh import Domain, build_grid
from mixedaderdg.metrics import conserved_totals, l2_error
from mixedaderdg.pde import (
    AcousticParams,
    AcousticSystem,
    ElasticSystem,
    EulerSystem,
    ShallowWaterSystem,
    flux,
)
from mixedaderdg.precision import (
    FP16,
    FP32,
    FP64,
    KernelArithmetic,
    PrecisionConfig,
    is_representable,
)
from mixedaderdg.scenarios import get_scenario, initialize, sample
from mixedaderdg.solver import (
    PREDICTOR_KERNEL,
    TIMESTEP_KERNEL,
    AderDgSolver,
    InvalidSolverConfig,
    SimulationBlowUp,
    SolverConfig,
    SpaceTimeSolution,
    compute_timestep,
    extrapolate_to_faces,
    face_integral,
    picard_map,
    predictor_ck,
    predictor_picard,
    rusanov_flux,
    swe_wellbalanced_flux,
    volume_integral,
)

SQUARE = Domain((-1.0, -1.0), 2.0)
UNIT = Domain((0.0, 0.0), 1.0)

CONSTANT_STATES = [
    (AcousticSystem(), [1.0, 0.5, -0.5]),
    (ElasticSystem(), [1.0, 2.0, 3.0, 0.5, -0.5]),
    (EulerSystem(), [1.0, 0.1, -0.05, 2.5]),
    (ShallowWaterSystem(), [2.0, 0.2, 0.1, 0.3]),
]


def constant_grid(sys, state, n=3, N=2, storage=FP64, corrector=FP64):
    grid = build_grid(n, UNIT, N, sys, storage=storage, corrector=corrector)
    state = np.asarray(state, dtype=np.float64)[:, None, None, None, None]
    values = np.broadcast_to(state, grid.solution.shape)
    grid.set_solution(values)
    return grid


def scenario_grid(name, n, N, precisions=PrecisionConfig(), **kwargs):
    spec = get_scenario(name, **kwargs)
    grid = build_grid(
        n, spec.domain, N, spec.sys, precisions.storage, precisions.corrector
    )
    initialize(spec, grid, build_reference_basis(N))
    return spec, grid


def test_default_cfl_constants():
    cfg = SolverConfig()
    assert cfg.effective_cfl(0) == pytest.approx(0.9)
    assert cfg.effective_cfl(5) == pytest.approx(0.9 * 11 * 0.045)
    assert SolverConfig(cfl=0.3).effective_cfl(7) == 0.3
    assert cfg.max_picard_iterations(4) == 6
    assert cfg.picard_tolerance(FP32) == pytest.approx(1e-2 * 2.0**-23)


@pytest.mark.parametrize(
    "kwargs", [{"cfl": 1.5}, {"cfl": 0.0}, {"workers": 0}, {"picard_max_iters": 0}]
)
def test_solver_config_validation(kwargs):
    with pytest.raises(InvalidSolverConfig):
        SolverConfig(**kwargs).validate()


def test_compute_timestep_examples():
    sys = AcousticSystem()
    grid = build_grid(9, SQUARE, 5, sys)
    dt = compute_timestep(grid, sys, build_reference_basis(5), SolverConfig(cfl=0.9))
    assert dt == pytest.approx(0.9 * (2 / 9) / (2 * 11 * 2), rel=1e-14)
    assert dt == pytest.approx(4.5455e-3, rel=1e-4)

    sys = AcousticSystem(AcousticParams(K=1.0, rho=1.0))
    grid = build_grid(1, UNIT, 0, sys)
    dt = compute_timestep(grid, sys, build_reference_basis(0), SolverConfig(cfl=0.9))
    assert dt == pytest.approx(0.45, rel=1e-15)


def test_compute_timestep_scales_with_h():
    sys = EulerSystem()
    cfg = SolverConfig()
    basis = build_reference_basis(2)
    state = [1.0, 0, 0, 2.5]
    coarse = compute_timestep(constant_grid(sys, state, n=3), sys, basis, cfg)
    fine = compute_timestep(constant_grid(sys, state, n=9), sys, basis, cfg)
    assert fine == pytest.approx(coarse / 3, rel=1e-14)


def test_compute_timestep_rejects_inadmissible_state():
    sys = EulerSystem()
    grid = constant_grid(sys, [1.0, 0.0, 0.0, 2.5])
    grid.solution[0, 1, 1, 0, 0] = -1.0
    with pytest.raises(SimulationBlowUp):
        compute_timestep(grid, sys, build_reference_basis(2), SolverConfig())


@pytest.mark.parametrize("N", [0, 3])
def test_predictor_ck_constant_state(N):
    sys = AcousticSystem()
    grid = constant_grid(sys, [1.0, 0.5, -0.5], N=N)
    basis = build_reference_basis(N)
    st = predictor_ck(grid.solution, 0.01, grid.h, sys, basis, SolverConfig())
    expected = np.broadcast_to(np.expand_dims(grid.solution, -3), st.qhat.shape)
    assert np.allclose(st.qhat, expected, rtol=0, atol=10 * FP64.epsilon)
    if N == 0:
        assert np.array_equal(st.qhat, expected)


def test_predictor_picard_constant_euler_state():
    sys = EulerSystem()
    grid = constant_grid(sys, [1.0, 0.3, -0.2, 2.5])
    basis = build_reference_basis(2)
    cfg = SolverConfig(picard_tol=1e-12)
    st = predictor_picard(grid.solution, 0.01, grid.h, sys, basis, cfg)
    expected = np.broadcast_to(np.expand_dims(grid.solution, -3), st.qhat.shape)
    scale = np.max(np.abs(grid.solution))
    assert np.allclose(st.qhat, expected, rtol=0, atol=10 * FP64.epsilon * scale)
    assert st.iterations.max() == 1


def test_predictor_picard_lake_at_rest_is_steady():
    spec, grid = scenario_grid("swe-lake", 3, 3)
    basis = build_reference_basis(3)
    st = predictor_picard(grid.solution, 1e-4, grid.h, spec.sys, basis, SolverConfig())
    expected = np.broadcast_to(np.expand_dims(grid.solution, -3), st.qhat.shape)
    scale = np.max(np.abs(grid.solution))
    assert np.allclose(st.qhat, expected, rtol=0, atol=10 * FP64.epsilon * scale)


@pytest.mark.parametrize("dt_fraction, tolerance", [(1.0, 5e-10), (0.1, 1e-11)])
def test_ck_and_picard_predictors_agree(dt_fraction, tolerance):
    spec, grid = scenario_grid("acoustic-planar", 9, 4)
    basis = build_reference_basis(4)
    cfg = SolverConfig(picard_max_iters=60, picard_tol=0.0)
    dt = dt_fraction * compute_timestep(grid, spec.sys, basis, cfg)
    ck = predictor_ck(grid.solution, dt, grid.h, spec.sys, basis, cfg)
    picard = predictor_picard(grid.solution, dt, grid.h, spec.sys, basis, cfg)
    difference = np.max(np.abs(ck.qhat - picard.qhat))
    assert difference <= tolerance * np.max(np.abs(ck.qhat))


def bell_cell(N=2):
    spec, grid = scenario_grid("euler-bell", 4, N)
    basis = build_reference_basis(N)
    dt = compute_timestep(grid, spec.sys, basis, SolverConfig())
    return spec.sys, basis, grid.solution[:, 1:2, 1:2].copy(), dt, grid.h


def stacked_initial_guess(Q, basis):
    shape = Q.shape[:-2] + (basis.size,) + Q.shape[-2:]
    return np.broadcast_to(np.expand_dims(Q, -3), shape).copy()


def test_picard_predictor_reaches_a_fixed_point():
    sys, basis, Q, dt, h = bell_cell()
    cfg = SolverConfig(picard_max_iters=50, picard_tol=1e-12)
    st = predictor_picard(Q, dt, h, sys, basis, cfg)
    assert st.iterations.max() < 50
    ar = KernelArithmetic(FP64)
    q0 = stacked_initial_guess(Q, basis)
    again = picard_map(ar, sys, basis, q0, st.qhat, ar.const(dt / h))
    scale = np.max(np.abs(st.qhat))
    assert np.max(np.abs(again - st.qhat)) < 10 * 1e-12 * scale


def test_picard_predictor_matches_dense_newton_solve():
    sys, basis, Q, dt, h = bell_cell()
    ar = KernelArithmetic(FP64)
    q0 = stacked_initial_guess(Q, basis)
    scale = ar.const(dt / h)

    def residual(x):
        q = x.reshape(q0.shape)
        return (q - picard_map(ar, sys, basis, q0, q, scale)).ravel()

    x = q0.ravel().copy()
    for _ in range(8):
        r = residual(x)
        jacobian = np.empty((x.size, x.size))
        for j in range(x.size):
            step = 1e-7 * max(1.0, abs(x[j]))
            shifted = x.copy()
            shifted[j] += step
            jacobian[:, j] = (residual(shifted) - r) / step
        x = x - np.linalg.solve(jacobian, r)
    newton = x.reshape(q0.shape)

    cfg = SolverConfig(picard_max_iters=50, picard_tol=1e-12)
    picard = predictor_picard(Q, dt, h, sys, basis, cfg).qhat
    assert np.max(np.abs(picard - newton)) <= 1e-10 * np.max(np.abs(newton))


def test_fp16_predictor_output_stays_in_fp16():
    precisions = PrecisionConfig.uniform("fp64").with_override("predictor", "fp16")
    cfg = SolverConfig(precisions=precisions)

    spec, grid = scenario_grid("acoustic-planar", 3, 3, precisions)
    basis = build_reference_basis(3, FP16)
    dt = compute_timestep(grid, spec.sys, build_reference_basis(3), cfg)
    Q = KernelArithmetic(FP16).cast(grid.solution)
    ck = predictor_ck(Q, dt, grid.h, spec.sys, basis, cfg)

    spec, grid = scenario_grid("euler-bell", 3, 2, precisions)
    basis = build_reference_basis(2)
    dt = compute_timestep(grid, spec.sys, basis, cfg)
    picard = predictor_picard(grid.solution, dt, grid.h, spec.sys, basis, cfg)

    for st in (ck, picard):
        assert st.fmt == FP16
        for values in (st.qhat,) + tuple(st.fhat):
            assert is_representable(values, FP16)


def test_euler_bell_conserves_totals():
    spec, grid = scenario_grid("euler-bell", 4, 2)
    basis = build_reference_basis(2)
    initial = conserved_totals(grid, basis)
    solver = AderDgSolver(grid, spec.sys, SolverConfig())
    for _ in range(100):
        solver.step()
    drift = np.abs(conserved_totals(grid, basis) - initial)
    assert np.all(drift <= 1e-12 * np.maximum(np.abs(initial), 1.0))


def test_volume_integral_of_constant_state_leaves_boundary_terms():
    sys = ElasticSystem()
    grid = constant_grid(sys, [1.0, 2.0, 3.0, 0.5, -0.5])
    basis = build_reference_basis(2)
    state = np.array([1.0, 2.0, 3.0, 0.5, -0.5])
    st = predictor_ck(grid.solution, 0.01, grid.h, sys, basis, SolverConfig())
    volume = volume_integral(st, 0.01, grid.h, sys, basis)
    # Constant flux only leaves the boundary terms of integration by parts
    lifted = np.asarray(basis.lift_right) - np.asarray(basis.lift_left)
    A, B = sys.matrices()
    expected = (0.01 / grid.h) * (
        (A @ state)[:, None, None] * lifted[None, None, :]
        + (B @ state)[:, None, None] * lifted[None, :, None]
    )
    for cell in [(0, 0), (2, 1)]:
        assert np.allclose(volume[:, cell[0], cell[1]], expected, rtol=0, atol=1e-12)


def test_volume_integral_order_zero_is_zero():
    sys = AcousticSystem()
    grid = constant_grid(sys, [1.0, 0.5, -0.5], N=0)
    basis = build_reference_basis(0)
    st = predictor_ck(grid.solution, 0.01, grid.h, sys, basis, SolverConfig())
    volume = volume_integral(st, 0.01, grid.h, sys, basis)
    assert np.array_equal(volume, np.zeros_like(grid.solution))


def test_extrapolate_constant_state():
    sys = EulerSystem()
    state = np.array([1.0, 0.3, -0.2, 2.5])
    grid = constant_grid(sys, state)
    basis = build_reference_basis(2)
    cfg = SolverConfig()
    st = predictor_picard(grid.solution, 0.01, grid.h, sys, basis, cfg)
    traces = extrapolate_to_faces(st, basis, cfg)
    for direction in (0, 1):
        expected_flux = flux(sys, state, direction)
        for q in (traces.q_left[direction], traces.q_right[direction]):
            assert np.allclose(q, state[:, None, None, None, None], atol=1e-14)
        for f in (traces.f_left[direction], traces.f_right[direction]):
            assert np.allclose(f, expected_flux[:, None, None, None, None], atol=1e-14)


def test_extrapolate_linear_data():
    basis = build_reference_basis(1)
    x = np.asarray(basis.nodes)
    # q = 2 + 3x on the reference cell, constant in y and t
    qhat = np.broadcast_to(2.0 + 3.0 * x, (1, 2, 2, 2)).copy()
    st = SpaceTimeSolution(qhat, (qhat, qhat), FP64)
    traces = extrapolate_to_faces(st, basis, SolverConfig())
    assert np.allclose(traces.q_left[0], 2.0, atol=1e-13)
    assert np.allclose(traces.q_right[0], 5.0, atol=1e-13)


def test_traces_are_cast_to_corrector_format():
    spec, grid = scenario_grid("euler-bell", 3, 2)
    cfg = SolverConfig(precisions=PrecisionConfig().with_override("corrector", "fp16"))
    basis = build_reference_basis(2)
    st = predictor_picard(grid.solution, 1e-3, grid.h, spec.sys, basis, cfg)
    traces = extrapolate_to_faces(st, basis, cfg)
    for d in (0, 1):
        for values in (traces.q_left[d], traces.f_right[d]):
            assert is_representable(values, FP16)


def test_rusanov_flux_examples():
    zero = np.zeros(1)
    assert rusanov_flux(np.array([1.0]), np.array([0.0]), zero, zero, 2.0)[0] == 1.0
    q = np.array([1.0, -2.0, 0.5])
    F = np.array([0.3, 0.1, -0.7])
    assert np.array_equal(rusanov_flux(q, q, F, F, 2.0), F)


def test_wellbalanced_flux_lake_interface():
    sys = ShallowWaterSystem()
    qL = np.array([1.5, 0.0, 0.0, 0.5])
    qR = np.array([1.75, 0.0, 0.0, 0.25])
    zero = np.zeros(4)
    g_minus, g_plus = swe_wellbalanced_flux(qL, qR, zero, zero, 0, sys)
    assert np.array_equal(g_minus, zero)
    assert np.array_equal(g_plus, zero)


def test_wellbalanced_flux_dam_break():
    sys = ShallowWaterSystem()
    g = 9.81
    qL = np.array([2.0, 0.0, 0.0, 0.0])
    qR = np.array([1.0, 0.0, 0.0, 0.0])
    zero = np.zeros(4)
    g_minus, g_plus = swe_wellbalanced_flux(qL, qR, zero, zero, 0, sys)
    lam = math.sqrt(2 * g)
    # Half the averaged gh times the surface jump
    fluctuation = 0.5 * g * 1.5 * (1.0 - 2.0)
    assert np.allclose(g_minus, [0.5 * lam, fluctuation, 0.0, 0.0], rtol=1e-15)
    assert np.allclose(g_plus, [0.5 * lam, -fluctuation, 0.0, 0.0], rtol=1e-15)
    # y-direction fluctuation lands in the y momentum
    g_minus, _ = swe_wellbalanced_flux(qL, qR, zero, zero, 1, sys)
    assert g_minus[1] == 0.0 and g_minus[2] == pytest.approx(fluctuation)


@pytest.mark.parametrize("direction", [0, 1])
def test_wellbalanced_flux_dissipates_discharge_jumps(direction):
    sys = ShallowWaterSystem()
    # Equal discharges, velocities 0.4 and 0.2
    qL = np.array([1.0, 0.4, 0.4, 0.0])
    qR = np.array([2.0, 0.4, 0.4, 0.0])
    zero = np.zeros(4)
    g_minus, g_plus = swe_wellbalanced_flux(qL, qR, zero, zero, direction, sys, lam=2.0)
    fluctuation = 0.5 * 9.81 * 1.5
    normal, tangential = (1, 2) if direction == 0 else (2, 1)
    assert g_minus[0] == -1.0 and g_plus[0] == -1.0
    assert g_minus[normal] == pytest.approx(fluctuation, rel=1e-15)
    assert g_plus[normal] == pytest.approx(-fluctuation, rel=1e-15)
    assert g_minus[tangential] == 0.0 and g_plus[tangential] == 0.0
    assert g_minus[3] == 0.0


def test_face_integral_finite_volume_limit():
    basis = build_reference_basis(0)
    unit_flux = np.ones((1, 1, 1))
    right = face_integral(unit_flux, basis, 0.1, 1.0, "right", 0)
    left = face_integral(unit_flux, basis, 0.1, 1.0, "left", 0)
    assert right.shape == (1, 1, 1)
    assert right[0, 0, 0] == pytest.approx(-0.1)
    assert left[0, 0, 0] == pytest.approx(0.1)
    zero = face_integral(np.zeros((1, 1, 1)), basis, 0.1, 1.0, "right", 1)
    assert np.array_equal(zero, np.zeros((1, 1, 1)))


@pytest.mark.parametrize("sys, state", CONSTANT_STATES)
@pytest.mark.parametrize("fmt", [FP64, FP32])
def test_free_stream_preservation(sys, state, fmt):
    grid = constant_grid(sys, state, n=9, N=3, storage=fmt, corrector=fmt)
    initial = grid.solution.astype(np.float64)
    solver = AderDgSolver(
        grid,
        sys,
        SolverConfig(precisions=PrecisionConfig.uniform(fmt)),
        special_flux=isinstance(sys, ShallowWaterSystem),
    )
    for _ in range(10):
        solver.step()
    change = np.max(np.abs(grid.solution.astype(np.float64) - initial))
    assert change <= 50 * fmt.epsilon * np.max(np.abs(initial))


def test_lake_at_rest_exactly_balanced_for_submerged_variant():
    spec, grid = scenario_grid("swe-lake", 3, 2, eta0=0.0)
    initial = grid.solution.copy()
    solver = AderDgSolver(grid, spec.sys, SolverConfig(), special_flux=True)
    solver.run(0.02)
    assert np.array_equal(grid.solution[1:3], initial[1:3])


def test_storage_stays_in_format():
    precisions = PrecisionConfig.uniform("fp16").with_override("predictor", "fp64")
    spec, grid = scenario_grid("acoustic-planar", 3, 2, precisions)
    solver = AderDgSolver(
        grid, spec.sys, SolverConfig(precisions=precisions, check_invariants=True)
    )
    solver.step()
    assert is_representable(grid.solution, FP16)


@pytest.mark.parametrize("name", ["euler-bell", "elastic-planar"])
def test_threaded_predictor_is_bitwise_sequential(name):
    results = []
    for workers in (1, 3):
        spec, grid = scenario_grid(name, 6, 2)
        solver = AderDgSolver(grid, spec.sys, SolverConfig(workers=workers))
        for _ in range(3):
            solver.step()
        results.append(grid.solution.copy())
    assert np.array_equal(results[0], results[1])


def test_run_lands_on_end_time():
    spec, grid = scenario_grid("acoustic-planar", 3, 1)
    solver = AderDgSolver(grid, spec.sys, SolverConfig())
    dt = solver.stable_timestep()
    t_end = 2.5 * dt
    progress = []
    steps = solver.run(t_end, progress.append)
    assert steps == 3
    assert solver.time == t_end
    assert progress[-1] == 100


def test_run_to_zero_time_takes_no_steps():
    spec, grid = scenario_grid("acoustic-planar", 3, 1)
    solver = AderDgSolver(grid, spec.sys, SolverConfig())
    assert solver.run(0.0) == 0


def test_blow_up_names_the_kernel():
    sys = EulerSystem()
    grid = constant_grid(sys, [1.0, 0.0, 0.0, 2.5])
    grid.solution[0, 0, 0, 1, 1] = -0.5
    solver = AderDgSolver(grid, sys, SolverConfig())
    with pytest.raises(SimulationBlowUp) as info:
        solver.step()
    assert info.value.kernel == TIMESTEP_KERNEL
    with pytest.raises(SimulationBlowUp) as info:
        solver.step(1e-3)
    assert info.value.kernel == PREDICTOR_KERNEL
    assert info.value.time == 0.0


def test_solver_rejects_mismatched_storage():
    sys = AcousticSystem()
    grid = build_grid(2, UNIT, 1, sys, storage=FP32)
    with pytest.raises(InvalidSolverConfig):
        AderDgSolver(grid, sys, SolverConfig())


@pytest.mark.slow
@pytest.mark.parametrize("n, N, bound", [(27, 5, 5e-9), (9, 6, 1e-7)])
def test_acoustic_planar_wave_accuracy(n, N, bound):
    spec, grid = scenario_grid("acoustic-planar", n, N)
    solver = AderDgSolver(grid, spec.sys, SolverConfig())
    solver.run(spec.t_end)
    basis = build_reference_basis(N)
    report = l2_error(grid, sample(spec, grid, basis, spec.t_end), basis)
    assert report.ok and report.l2 <= bound
