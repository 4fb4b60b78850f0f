######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
"""ADER-DG kernels and the time stepping driver.

One step runs four kernels, each in its own format:
  fusedSpaceTimePredictorVolumeIntegral  predictor (Picard loop in picard)
  riemannSolver, faceIntegral            corrector
  computeTimestep                        corrector, reduction in fp64
Values are cast only at these kernel boundaries.

Space-time arrays are indexed [variable, <cells>, t, y, x], face traces
[variable, <cells>, t, s] with s the node along the face.
"""
from __future__ import annotations

import concurrent.futures
import contextlib
import dataclasses
import logging
import math
import time
from typing import Callable, Optional

import numpy as np

from mixedaderdg.basis import ReferenceBasis, build_reference_basis
from mixedaderdg.mesh import Grid, shift_from_neighbor
from mixedaderdg.pde import InadmissibleState, PdeSystem, ShallowWaterSystem
from mixedaderdg.precision import (
    ConfigurationError,
    FloatFormat,
    KernelArithmetic,
    PrecisionConfig,
)

PREDICTOR_KERNEL = "fusedSpaceTimePredictorVolumeIntegral"
RIEMANN_KERNEL = "riemannSolver"
FACE_KERNEL = "faceIntegral"
TIMESTEP_KERNEL = "computeTimestep"

DIMENSIONS = 2
CFL_SAFETY = 0.9
# Classical ADER-DG stability limits per degree, Rusanov flux
DG_STABILITY = (1.0, 0.33, 0.17, 0.1, 0.069, 0.045, 0.038, 0.03, 0.02, 0.015)


# Exception Classes
class InvalidSolverConfig(ConfigurationError):
    pass


class SimulationBlowUp(Exception):
    def __init__(self, kernel: str, time: Optional[float] = None, reason: str = ""):
        self.kernel = kernel
        self.time = time
        self.reason = reason
        super().__init__(f"Blow-up in {kernel} at t={time}: {reason}")


class InvariantViolation(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    cfl: Optional[float] = None
    picard_max_iters: Optional[int] = None
    picard_tol: Optional[float] = None
    precisions: PrecisionConfig = PrecisionConfig()
    workers: int = 1
    check_invariants: bool = False

    def validate(self):
        problems = []
        if self.cfl is not None and not 0 < self.cfl < 1:
            problems.append(f"C_CFL must lie in (0, 1), got {self.cfl}")
        if self.picard_max_iters is not None and self.picard_max_iters < 1:
            problems.append(
                f"picard_max_iters must be >= 1, got {self.picard_max_iters}"
            )
        if self.picard_tol is not None and not self.picard_tol >= 0:
            problems.append(f"picard_tol must be >= 0, got {self.picard_tol}")
        if self.workers < 1:
            problems.append(f"workers must be >= 1, got {self.workers}")
        if problems:
            error = "Error: Invalid solver configuration: {}".format(
                "; ".join(problems)
            )
            logging.error(error)
            raise InvalidSolverConfig(error)
        return self

    def effective_cfl(self, N: int) -> float:
        if self.cfl is not None:
            return self.cfl
        return CFL_SAFETY * (2 * N + 1) * DG_STABILITY[N]

    def max_picard_iterations(self, N: int) -> int:
        return self.picard_max_iters if self.picard_max_iters is not None else N + 2

    def picard_tolerance(self, fmt: FloatFormat) -> float:
        return self.picard_tol if self.picard_tol is not None else 1e-2 * fmt.epsilon


@dataclasses.dataclass
class SpaceTimeSolution:
    qhat: np.ndarray
    fhat: tuple[np.ndarray, np.ndarray]
    fmt: FloatFormat
    iterations: Optional[np.ndarray] = None


@dataclasses.dataclass
class FaceTraces:
    """Per direction: traces on the cell's lower (left) and upper (right) face"""

    q_left: list
    q_right: list
    f_left: list
    f_right: list

    @classmethod
    def concatenate(cls, parts: list["FaceTraces"], axis: int = 1) -> "FaceTraces":
        def join(name):
            return [
                np.concatenate([getattr(p, name)[d] for p in parts], axis=axis)
                for d in range(DIMENSIONS)
            ]

        return cls(join("q_left"), join("q_right"), join("f_left"), join("f_right"))


def _check_finite(values: np.ndarray, kernel: str, what: str):
    if not np.all(np.isfinite(values)):
        raise SimulationBlowUp(kernel, reason=f"nonfinite {what}")


def _cell_axes(array: np.ndarray) -> tuple[int, ...]:
    """Axes of a space-time array that are neither variable nor t, y, x"""
    return tuple(range(1, array.ndim - 3))


def picard_map(ar, sys: PdeSystem, basis: ReferenceBasis, q0, q, scale):
    """One sweep of the element-local space-time fixed-point map"""
    ops = basis.predictor
    D = ops.gradient
    fx = sys.flux(ar, q, 0)
    fy = sys.flux(ar, q, 1)
    divergence = ar.add(ar.contract(D, fx, -1), ar.contract(D, fy, -2))
    if sys.has_ncp:
        grad_x = ar.contract(D, q, -1)
        grad_y = ar.contract(D, q, -2)
        divergence = ar.add(divergence, sys.ncp(ar, q, grad_x, grad_y))
    return ar.sub(q0, ar.contract(ops.flux_coupling, ar.mul(scale, divergence), -3))


def predictor_picard(
    Q: np.ndarray,
    dt: float,
    h: float,
    sys: PdeSystem,
    basis: ReferenceBasis,
    cfg: SolverConfig,
) -> SpaceTimeSolution:
    """Space-time predictor by Picard iteration in the format of basis.

    Q has shape (nvars, <cells>, N+1, N+1). Cells converge independently and
    are frozen once converged.
    """
    ar = KernelArithmetic(basis.fmt)
    size = basis.size
    Q = ar.cast(Q)
    q0 = np.broadcast_to(
        np.expand_dims(Q, -3), Q.shape[:-2] + (size,) + Q.shape[-2:]
    ).copy()
    scale = ar.const(dt / h)
    max_iters = cfg.max_picard_iterations(basis.order)
    tolerance = cfg.picard_tolerance(basis.fmt)

    reduce_axes = (0,) + tuple(range(q0.ndim - 3, q0.ndim))
    active = np.ones(q0.shape[1:-3], dtype=bool)
    iterations = np.zeros(active.shape, dtype=int)
    q = q0
    for sweep in range(1, max_iters + 1):
        update = picard_map(ar, sys, basis, q0, q, scale)
        _check_finite(update, PREDICTOR_KERNEL, "Picard iterate")
        wide_update = update.astype(np.float64)
        delta = np.max(np.abs(wide_update - q.astype(np.float64)), axis=reduce_axes)
        magnitude = np.max(np.abs(wide_update), axis=reduce_axes)
        converged = delta <= tolerance * magnitude
        mask = np.expand_dims(active, 0)[..., None, None, None]
        q = np.where(mask, update, q)
        iterations[active] = sweep
        active = active & ~converged
        if not active.any():
            break
    if active.any():
        logging.debug(
            f"Picard iteration hit the cap of {max_iters} sweeps in "
            f"{int(active.sum())} cell(s)"
        )

    predictor = KernelArithmetic(cfg.precisions.predictor)
    qhat = predictor.cast(q)
    fhat = (sys.flux(predictor, qhat, 0), sys.flux(predictor, qhat, 1))
    return SpaceTimeSolution(qhat, fhat, predictor.fmt, iterations)


def taylor_coefficients(basis: ReferenceBasis, dt: float) -> np.ndarray:
    """c[a, k] = (tau_a dt)**k / k! in fp64"""
    tau = np.asarray(basis.nodes, dtype=np.float64) * dt
    k = np.arange(basis.size)
    factorials = np.array([math.factorial(int(i)) for i in k], dtype=np.float64)
    return tau[:, None] ** k[None, :] / factorials[None, :]


def predictor_ck(
    Q: np.ndarray,
    dt: float,
    h: float,
    sys: PdeSystem,
    basis: ReferenceBasis,
    cfg: SolverConfig,
) -> SpaceTimeSolution:
    """Space-time predictor by Cauchy-Kowalevskaya for linear systems"""
    ar = KernelArithmetic(basis.fmt)
    D = basis.derivative
    Q = ar.cast(Q)
    minus_inv_h = ar.const(-1.0 / h)
    derivatives = [Q]
    for _ in range(basis.order):
        current = derivatives[-1]
        grad_x = ar.contract(D, current, -1)
        grad_y = ar.contract(D, current, -2)
        flux_sum = ar.add(sys.flux(ar, grad_x, 0), sys.flux(ar, grad_y, 1))
        derivatives.append(ar.mul(minus_inv_h, flux_sum))
    stacked = np.stack(derivatives, axis=-3)
    coefficients = ar.cast(taylor_coefficients(basis, dt))
    qhat = ar.contract(coefficients, stacked, -3)
    _check_finite(qhat, PREDICTOR_KERNEL, "Taylor expansion")
    fhat = (sys.flux(ar, qhat, 0), sys.flux(ar, qhat, 1))
    return SpaceTimeSolution(qhat, fhat, basis.fmt)


def volume_integral(
    st: SpaceTimeSolution, dt: float, h: float, sys: PdeSystem, basis: ReferenceBasis
) -> np.ndarray:
    """Volume contribution to the cell update, shape (nvars, <cells>, N+1, N+1)"""
    ar = KernelArithmetic(basis.fmt)
    w = basis.weights
    K = basis.volume_stiffness
    fx_bar = ar.weighted_sum(w, st.fhat[0], -3)
    fy_bar = ar.weighted_sum(w, st.fhat[1], -3)
    volume = ar.add(ar.contract(K, fx_bar, -1), ar.contract(K, fy_bar, -2))
    if sys.has_ncp:
        D = basis.derivative
        grad_x = ar.contract(D, st.qhat, -1)
        grad_y = ar.contract(D, st.qhat, -2)
        nonconservative = sys.ncp(ar, st.qhat, grad_x, grad_y)
        volume = ar.sub(volume, ar.weighted_sum(w, nonconservative, -3))
    return ar.mul(ar.const(dt / h), volume)


def extrapolate_to_faces(
    st: SpaceTimeSolution, basis: ReferenceBasis, cfg: SolverConfig
) -> FaceTraces:
    """Face traces of qhat and the normal flux, cast to the corrector format"""
    ar = KernelArithmetic(basis.fmt)
    corrector = KernelArithmetic(cfg.precisions.corrector)
    traces = FaceTraces([], [], [], [])
    for direction, axis in ((0, -1), (1, -2)):
        flux_d = st.fhat[direction]
        traces.q_left.append(ar.weighted_sum(basis.proj_left, st.qhat, axis))
        traces.q_right.append(ar.weighted_sum(basis.proj_right, st.qhat, axis))
        traces.f_left.append(ar.weighted_sum(basis.proj_left, flux_d, axis))
        traces.f_right.append(ar.weighted_sum(basis.proj_right, flux_d, axis))
    for name in ("q_left", "q_right", "f_left", "f_right"):
        setattr(traces, name, [corrector.cast(v) for v in getattr(traces, name)])
    return traces


def rusanov_flux(qL, qR, FL, FR, lam, ar: Optional[KernelArithmetic] = None):
    """1/2 (FL + FR) + lam/2 (qL - qR), variables on axis 0"""
    ar = ar or KernelArithmetic(PrecisionConfig().corrector)
    half = ar.const(0.5)
    central = ar.mul(half, ar.add(FL, FR))
    penalty = ar.mul(ar.mul(half, lam), ar.sub(qL, qR))
    return ar.add(central, penalty)


def swe_wellbalanced_flux(
    qL, qR, FL, FR, direction, sys: ShallowWaterSystem, ar=None, lam=None
):
    """Path-conservative Rusanov flux with surface-elevation dissipation.

    Returns (flux seen by the minus cell, flux seen by the plus cell); the
    non-conservative jump term enters the two sides with opposite sign.
    """
    ar = ar or KernelArithmetic(PrecisionConfig().corrector)
    if lam is None:
        lam = np.maximum(
            sys.max_abs_eigenvalue(ar, qL, direction),
            sys.max_abs_eigenvalue(ar, qR, direction),
        )
    half = ar.const(0.5)
    hL, huL, hvL, bL = qL
    hR, huR, hvR, bR = qR
    zero = np.zeros_like(hL)
    eta_jump = ar.sub(ar.add(hL, bL), ar.add(hR, bR))
    jumps = np.stack([eta_jump, ar.sub(huL, huR), ar.sub(hvL, hvR), zero])
    flux = ar.add(ar.mul(half, ar.add(FL, FR)), ar.mul(ar.mul(half, lam), jumps))

    # B at the averaged state applied to q+ - q-
    gh = ar.mul(ar.const(sys.params.g), ar.mul(half, ar.add(hL, hR)))
    fluctuation = ar.mul(half, ar.mul(gh, np.negative(eta_jump)))
    components = [zero, zero, zero, zero]
    components[1 + (0 if direction in (0, "x") else 1)] = fluctuation
    nonconservative = np.stack(components)
    return ar.add(flux, nonconservative), ar.sub(flux, nonconservative)


def riemann_solve(
    grid: Grid,
    sys: PdeSystem,
    traces: FaceTraces,
    direction: int,
    cfg: SolverConfig,
    special_flux: bool = False,
):
    """Fill the face buffers of one direction and return (g_minus, g_plus)"""
    ar = KernelArithmetic(cfg.precisions.corrector)
    buffer = grid.faces[direction]
    buffer.q_minus = traces.q_right[direction]
    buffer.f_minus = traces.f_right[direction]
    buffer.q_plus = shift_from_neighbor(traces.q_left[direction], direction, +1)
    buffer.f_plus = shift_from_neighbor(traces.f_left[direction], direction, +1)
    lam = np.maximum(
        sys.max_abs_eigenvalue(ar, buffer.q_minus, direction),
        sys.max_abs_eigenvalue(ar, buffer.q_plus, direction),
    )
    if special_flux:
        g_minus, g_plus = swe_wellbalanced_flux(
            buffer.q_minus,
            buffer.q_plus,
            buffer.f_minus,
            buffer.f_plus,
            direction,
            sys,
            ar,
            lam,
        )
    else:
        g_minus = rusanov_flux(
            buffer.q_minus, buffer.q_plus, buffer.f_minus, buffer.f_plus, lam, ar
        )
        g_plus = g_minus
    _check_finite(g_minus, RIEMANN_KERNEL, "numerical flux")
    _check_finite(g_plus, RIEMANN_KERNEL, "numerical flux")
    return g_minus, g_plus


def face_integral(
    flux: np.ndarray,
    basis: ReferenceBasis,
    dt: float,
    h: float,
    side: str,
    direction: int,
) -> np.ndarray:
    """Contribution of one face to the cell update.

    flux is indexed [variable, <cells>, t, s]; outflow through the right face
    counts negative, inflow through the left face positive.
    """
    ar = KernelArithmetic(basis.fmt)
    flux_bar = ar.weighted_sum(basis.weights, flux, -2)
    lift = basis.lift_right if side == "right" else basis.lift_left
    if direction == 0:
        contribution = ar.mul(flux_bar[..., :, None], lift[None, :])
    else:
        contribution = ar.mul(flux_bar[..., None, :], lift[:, None])
    contribution = ar.mul(ar.const(dt / h), contribution)
    return np.negative(contribution) if side == "right" else contribution


def surface_integral(grid: Grid, fluxes, basis: ReferenceBasis, dt: float):
    """Sum of the four face contributions of every cell"""
    ar = KernelArithmetic(basis.fmt)
    total = None
    for direction, (g_minus, g_plus) in enumerate(fluxes):
        from_left = shift_from_neighbor(g_plus, direction, -1)
        for part in (
            face_integral(from_left, basis, dt, grid.h, "left", direction),
            face_integral(g_minus, basis, dt, grid.h, "right", direction),
        ):
            total = part if total is None else ar.add(total, part)
    _check_finite(total, FACE_KERNEL, "surface update")
    return total


def compute_timestep(
    grid: Grid, sys: PdeSystem, basis: ReferenceBasis, cfg: SolverConfig
) -> float:
    """CFL timestep, minimum over cells"""
    ar = KernelArithmetic(cfg.precisions.corrector)
    Q = ar.cast(grid.solution)
    try:
        speeds = np.maximum(
            sys.max_abs_eigenvalue(ar, Q, 0), sys.max_abs_eigenvalue(ar, Q, 1)
        ).astype(np.float64)
    except InadmissibleState as e:
        raise SimulationBlowUp(TIMESTEP_KERNEL, reason=str(e))
    lam = np.max(speeds, axis=(-2, -1))
    N = basis.order
    with np.errstate(all="ignore"):
        dt_cells = cfg.effective_cfl(N) * grid.h / (DIMENSIONS * (2 * N + 1) * lam)
    dt = float(np.min(dt_cells))
    if not (math.isfinite(dt) and dt > 0):
        raise SimulationBlowUp(TIMESTEP_KERNEL, reason=f"invalid timestep {dt}")
    return dt


class AderDgSolver:
    def __init__(
        self,
        grid: Grid,
        sys: PdeSystem,
        cfg: SolverConfig,
        special_flux: bool = False,
    ):
        self.grid = grid
        self.sys = sys
        self.cfg = cfg.validate()
        self.special_flux = special_flux
        if grid.storage != cfg.precisions.storage:
            error = "Error: Grid storage format {} differs from configured {}".format(
                grid.storage, cfg.precisions.storage
            )
            logging.error(error)
            raise InvalidSolverConfig(error)
        # One basis instance per distinct format in use
        self.bases = {
            fmt: build_reference_basis(grid.order, fmt)
            for fmt in cfg.precisions.formats(linear=sys.is_linear)
        }
        self.time = 0.0
        self.steps = 0
        self.picard_sweeps = 0

    def basis(self, kernel: str) -> ReferenceBasis:
        return self.bases[getattr(self.cfg.precisions, kernel)]

    @contextlib.contextmanager
    def _kernel(self, name: str):
        try:
            yield
        except InadmissibleState as e:
            raise SimulationBlowUp(name, self.time, str(e))
        except SimulationBlowUp as e:
            raise SimulationBlowUp(name, self.time, e.reason)

    def _fused_predictor(self, Q: np.ndarray, dt: float):
        h = self.grid.h
        predictor_basis = self.basis("predictor")
        if self.sys.is_linear:
            st = predictor_ck(Q, dt, h, self.sys, predictor_basis, self.cfg)
        else:
            st = predictor_picard(Q, dt, h, self.sys, self.basis("picard"), self.cfg)
        volume = volume_integral(st, dt, h, self.sys, predictor_basis)
        traces = extrapolate_to_faces(st, predictor_basis, self.cfg)
        sweeps = 0 if st.iterations is None else int(st.iterations.max())
        return volume, traces, sweeps

    def predictor_phase(self, Q: np.ndarray, dt: float):
        """Cell-local phase, optionally split over threads along cell_x"""
        workers = min(self.cfg.workers, self.grid.n)
        if workers <= 1:
            return self._fused_predictor(Q, dt)
        chunks = np.array_split(Q, workers, axis=1)
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda part: self._fused_predictor(part, dt), chunks)
            )
        volume = np.concatenate([r[0] for r in results], axis=1)
        traces = FaceTraces.concatenate([r[1] for r in results], axis=1)
        return volume, traces, max(r[2] for r in results)

    def stable_timestep(self) -> float:
        with self._kernel(TIMESTEP_KERNEL):
            return compute_timestep(
                self.grid, self.sys, self.basis("corrector"), self.cfg
            )

    def step(self, dt: Optional[float] = None) -> float:
        if dt is None:
            dt = self.stable_timestep()
        precisions = self.cfg.precisions
        predictor = KernelArithmetic(precisions.predictor)
        storage = KernelArithmetic(precisions.storage)

        with self._kernel(PREDICTOR_KERNEL):
            volume, traces, sweeps = self.predictor_phase(
                predictor.cast(self.grid.solution), dt
            )
            _check_finite(volume, PREDICTOR_KERNEL, "volume update")
        with self._kernel(RIEMANN_KERNEL):
            fluxes = [
                riemann_solve(
                    self.grid, self.sys, traces, d, self.cfg, self.special_flux
                )
                for d in range(DIMENSIONS)
            ]
        with self._kernel(FACE_KERNEL):
            surface = surface_integral(self.grid, fluxes, self.basis("corrector"), dt)
            updated = storage.add(
                storage.add(self.grid.solution, storage.cast(volume)),
                storage.cast(surface),
            )
            _check_finite(updated, FACE_KERNEL, "cell solution")
        self.grid.solution = updated
        if self.cfg.check_invariants and not self.grid.storage_consistent():
            error = "Error: Cell solution not representable in storage format {}"
            error = error.format(precisions.storage)
            logging.error(error)
            raise InvariantViolation(error)
        self.time += dt
        self.steps += 1
        self.picard_sweeps = max(self.picard_sweeps, sweeps)
        logging.debug(f"Step {self.steps}: t={self.time:.6g}, dt={dt:.6g}")
        return dt

    def run(
        self, t_end: float, progress: Optional[Callable[[int], None]] = None
    ) -> int:
        """Step until t_end, the last step clamped to land on it"""
        started = time.perf_counter()
        reported = -1
        while self.time < t_end:
            dt = self.stable_timestep()
            last = self.time + dt >= t_end
            if last:
                dt = t_end - self.time
            self.step(dt)
            if last:
                self.time = t_end
            if progress is not None:
                percent = int(100 * self.time / t_end)
                if percent != reported:
                    progress(percent)
                    reported = percent
        logging.debug(
            "Finished {} steps to t={} in {:.2f}s".format(
                self.steps, t_end, time.perf_counter() - started
            )
        )
        return self.steps
