######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
"""Error norms and run outcomes, always evaluated in fp64"""
from __future__ import annotations

import dataclasses
import enum
from typing import Optional

import numpy as np

from mixedaderdg.basis import ReferenceBasis, build_reference_basis
from mixedaderdg.mesh import Grid, build_grid
from mixedaderdg.pde import EulerSystem
from mixedaderdg.precision import FP64, KernelArithmetic, parse_format
from mixedaderdg.scenarios import ScenarioSpec, initialize

CELL_AND_NODE_AXES = (1, 2, 3, 4)


class Outcome(enum.Enum):
    OK = "OK"
    FAILED_NONFINITE = "FAILED_NONFINITE"

    def __str__(self) -> str:
        return self.value


@dataclasses.dataclass
class ErrorReport:
    outcome: Outcome
    l2: Optional[float] = None
    max_error: Optional[float] = None
    variable_l2: Optional[np.ndarray] = None
    variable_max: Optional[np.ndarray] = None
    failure_time: Optional[float] = None
    failure_kernel: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.outcome is Outcome.OK

    @classmethod
    def failed(cls, time=None, kernel=None) -> "ErrorReport":
        return cls(Outcome.FAILED_NONFINITE, failure_time=time, failure_kernel=kernel)


def classify_outcome(grid: Grid) -> Outcome:
    if np.all(np.isfinite(grid.solution)):
        return Outcome.OK
    return Outcome.FAILED_NONFINITE


def _quadrature_weights(grid: Grid, basis: Optional[ReferenceBasis] = None):
    """h^2 w_i w_j as fp64, shaped (N+1, N+1)"""
    basis = basis or build_reference_basis(grid.order, FP64)
    w = np.asarray(basis.weights, dtype=np.float64)
    return grid.cell_volume * np.outer(w, w)


def _norm(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-variable discrete L2 norm of a (nvars, n, n, N+1, N+1) array"""
    return np.sqrt(np.sum(weights * values**2, axis=CELL_AND_NODE_AXES))


def l2_error(grid: Grid, reference: np.ndarray, basis=None) -> ErrorReport:
    """Quadrature L2 distance between the grid solution and nodal reference values"""
    if classify_outcome(grid) is not Outcome.OK:
        return ErrorReport.failed()
    diff = grid.solution.astype(np.float64) - np.asarray(reference, dtype=np.float64)
    with np.errstate(over="ignore"):
        variable_l2 = _norm(diff, _quadrature_weights(grid, basis))
        l2 = float(np.sqrt(np.sum(variable_l2**2)))
    if not np.isfinite(l2):
        return ErrorReport.failed()
    variable_max = np.max(np.abs(diff), axis=CELL_AND_NODE_AXES)
    return ErrorReport(
        outcome=Outcome.OK,
        l2=l2,
        max_error=float(np.max(variable_max)),
        variable_l2=variable_l2,
        variable_max=variable_max,
    )


def initial_projection_error(scenario: ScenarioSpec, n: int, N: int, fmt) -> float:
    """Relative L2 distance between the fp64 initial condition and its cast to fmt"""
    fmt = parse_format(fmt)
    basis = build_reference_basis(N, FP64)
    grid = initialize(scenario, build_grid(n, scenario.domain, N, scenario.sys), basis)
    reference = grid.solution
    cast = KernelArithmetic(fmt).cast(reference).astype(np.float64)
    weights = _quadrature_weights(grid, basis)
    distance = np.sqrt(np.sum(_norm(cast - reference, weights) ** 2))
    size = np.sqrt(np.sum(_norm(reference, weights) ** 2))
    return float(distance / size)


def max_spurious_velocity(grid: Grid) -> float:
    """Largest nodal |(hv_x, hv_y)| / h of a shallow water solution"""
    Q = grid.solution.astype(np.float64)
    return float(np.max(np.hypot(Q[1], Q[2]) / Q[0]))


def entropy_error(grid: Grid, sys: EulerSystem) -> float:
    """Largest nodal deviation of p / rho^gamma from 1"""
    return float(np.max(np.abs(sys.entropy(grid.solution) - 1.0)))


def conserved_totals(grid: Grid, basis=None) -> np.ndarray:
    """Domain integral of each variable"""
    weights = _quadrature_weights(grid, basis)
    return np.sum(weights * grid.solution.astype(np.float64), axis=CELL_AND_NODE_AXES)
