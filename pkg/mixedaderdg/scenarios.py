######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
"""Verification scenarios with initial conditions and analytic solutions.

Every init/exact callable takes coordinate arrays of any common shape and
returns a state array with the variables stacked on axis 0.
"""
from __future__ import annotations

import dataclasses
import logging
from typing import Callable, Optional

import numpy as np

from mixedaderdg.basis import ReferenceBasis
from mixedaderdg.mesh import Domain, Grid, all_node_coordinates
from mixedaderdg.pde import (
    AcousticSystem,
    ElasticSystem,
    EulerSystem,
    LinearSystem,
    PdeSystem,
    ShallowWaterSystem,
)
from mixedaderdg.precision import ConfigurationError

EIGEN_RESIDUAL_TOLERANCE = 1e-12


# Exception Classes
class InvalidScenarioError(ConfigurationError):
    pass


class EigenpairError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class ScenarioSpec:
    name: str
    sys: PdeSystem
    domain: Domain
    t_end: float
    init: Callable[[np.ndarray, np.ndarray], np.ndarray]
    exact: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    special_flux: bool = False
    static: bool = False
    period: Optional[float] = None


def sample(spec: ScenarioSpec, grid: Grid, basis: ReferenceBasis, t: float = 0.0):
    """Exact solution at every node of grid, fp64, shaped like grid.solution"""
    X, Y = all_node_coordinates(grid, basis)
    return np.asarray(spec.exact(X, Y, t), dtype=np.float64)


def initialize(spec: ScenarioSpec, grid: Grid, basis: ReferenceBasis):
    grid.set_solution(sample(spec, grid, basis, 0.0))
    return grid


def _eigenpair(symbol: np.ndarray, target: Optional[float] = None):
    """(omega, q0) of symbol: the largest eigenvalue, or the one closest to target"""
    values, vectors = np.linalg.eig(symbol)
    values = values.real
    if target is None:
        index = int(np.argmax(values))
    else:
        index = int(np.argmin(np.abs(values - target)))
    omega = float(values[index])
    q0 = vectors[:, index].real
    # Unit first nonvanishing component
    lead = np.flatnonzero(np.abs(q0) > 1e-12)[0]
    q0 = q0 / q0[lead]
    residual = np.max(np.abs(symbol @ q0 - omega * q0))
    if omega == 0.0 or residual > EIGEN_RESIDUAL_TOLERANCE:
        error = "Error: Planar wave eigenpair invalid (omega={}, residual={})".format(
            omega, residual
        )
        logging.error(error)
        raise EigenpairError(error)
    return omega, q0


def planar_wave(sys: LinearSystem, k, target: Optional[float] = None):
    """Eigenpair of k_x A + k_y B and the solution omega sin(omega t - k.x) q0"""
    k = np.asarray(k, dtype=np.float64)
    if not np.any(k):
        error = "Error: Planar wave vector must be nonzero"
        logging.error(error)
        raise InvalidScenarioError(error)
    A, B = sys.matrices()
    omega, q0 = _eigenpair(k[0] * A + k[1] * B, target)

    def solution(x, y, t):
        phase = omega * t - (k[0] * np.asarray(x) + k[1] * np.asarray(y))
        shape = (-1,) + (1,) * np.ndim(phase)
        return omega * np.sin(phase)[None, ...] * q0.reshape(shape)

    return omega, q0, solution


def _acoustic_planar(**_) -> ScenarioSpec:
    sys = AcousticSystem()
    _, _, solution = planar_wave(sys, (np.pi, np.pi))
    return ScenarioSpec(
        name="acoustic-planar",
        sys=sys,
        domain=Domain((-1.0, -1.0), 2.0),
        t_end=2.0 * np.sqrt(2.0),
        init=lambda x, y: solution(x, y, 0.0),
        exact=solution,
        period=np.sqrt(2.0),
    )


def _elastic_planar(**_) -> ScenarioSpec:
    sys = ElasticSystem()
    _, _, p_wave = planar_wave(sys, (2.0 * np.pi, 0.0))
    _, _, s_wave = planar_wave(
        sys, (0.0, 2.0 * np.pi), target=sys.shear_speed() * 2.0 * np.pi
    )

    def solution(x, y, t):
        return p_wave(x, y, t) + s_wave(x, y, t)

    return ScenarioSpec(
        name="elastic-planar",
        sys=sys,
        domain=Domain((-1.0, -1.0), 2.0),
        t_end=2.0,
        init=lambda x, y: solution(x, y, 0.0),
        exact=solution,
        period=1.0,
    )


def gaussian_bell(x, y, t, gamma: float = 1.4):
    """Density bell advected with v = (1, 1) through the periodic [-1, 1]^2"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = np.mod(x - t + 1.0, 2.0) - 1.0
    dy = np.mod(y - t + 1.0, 2.0) - 1.0
    rho = 0.02 * (1.0 + np.exp(-50.0 * (dx**2 + dy**2)))
    vx, vy, p = 1.0, 1.0, 1.0
    E = p / (gamma - 1.0) + 0.5 * rho * (vx**2 + vy**2)
    return np.stack([rho, rho * vx, rho * vy, E])


def _euler_bell(**_) -> ScenarioSpec:
    sys = EulerSystem()
    gamma = sys.params.gamma
    return ScenarioSpec(
        name="euler-bell",
        sys=sys,
        domain=Domain((-1.0, -1.0), 2.0),
        t_end=2.0,
        init=lambda x, y: gaussian_bell(x, y, 0.0, gamma),
        exact=lambda x, y, t: gaussian_bell(x, y, t, gamma),
        period=2.0,
    )


def isentropic_vortex(x, y, gamma: float = 1.4, beta: float = 5.0):
    """Stationary vortex on the free stream rho = p = 1, entropy p/rho^gamma = 1"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r2 = x**2 + y**2
    dT = (1.0 - gamma) * beta**2 / (8.0 * gamma * np.pi**2) * np.exp(1.0 - r2)
    swirl = beta / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2))
    temperature = 1.0 + dT
    rho = temperature ** (1.0 / (gamma - 1.0))
    p = temperature ** (gamma / (gamma - 1.0))
    vx = -y * swirl
    vy = x * swirl
    E = p / (gamma - 1.0) + 0.5 * rho * (vx**2 + vy**2)
    return np.stack([rho, rho * vx, rho * vy, E])


def _euler_vortex(**_) -> ScenarioSpec:
    sys = EulerSystem()
    gamma = sys.params.gamma
    return ScenarioSpec(
        name="euler-vortex",
        sys=sys,
        domain=Domain((-5.0, -5.0), 10.0),
        t_end=10.0,
        init=lambda x, y: isentropic_vortex(x, y, gamma),
        exact=lambda x, y, t: isentropic_vortex(x, y, gamma),
        static=True,
    )


def lake_at_rest(x, y, eta0: float = 2.0):
    """Flat surface eta0 over b = sin(2 pi (x + y)), at rest.

    eta0 = 0 selects the fully submerged b = 0.5 sin(2 pi (x + y)) - 1, for
    which h + b == 0 holds exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if eta0 == 0.0:
        b = 0.5 * np.sin(2.0 * np.pi * (x + y)) - 1.0
        h = -b
    elif eta0 > 1.0:
        b = np.sin(2.0 * np.pi * (x + y))
        h = eta0 - b
    else:
        error = f"Error: Lake surface eta0={eta0} would leave dry cells, need eta0 > 1"
        logging.error(error)
        raise InvalidScenarioError(error)
    zero = np.zeros_like(h)
    return np.stack([h, zero, zero, b])


def _swe_lake(eta0: float = 2.0, **_) -> ScenarioSpec:
    # Validate eagerly
    lake_at_rest(0.0, 0.0, eta0)
    return ScenarioSpec(
        name="swe-lake",
        sys=ShallowWaterSystem(),
        domain=Domain((0.0, 0.0), 1.0),
        t_end=1.0,
        init=lambda x, y: lake_at_rest(x, y, eta0),
        exact=lambda x, y, t: lake_at_rest(x, y, eta0),
        special_flux=True,
        static=True,
    )


SCENARIOS = {
    "acoustic-planar": _acoustic_planar,
    "elastic-planar": _elastic_planar,
    "euler-bell": _euler_bell,
    "euler-vortex": _euler_vortex,
    "swe-lake": _swe_lake,
}


def get_scenario(name: str, eta0: float = 2.0) -> ScenarioSpec:
    try:
        factory = SCENARIOS[name]
    except KeyError:
        error = "Error: Unknown scenario '{}', expected one of {}".format(
            name, ", ".join(SCENARIOS)
        )
        logging.error(error)
        raise InvalidScenarioError(error)
    return factory(eta0=eta0)
