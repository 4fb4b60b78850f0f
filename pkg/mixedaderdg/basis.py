######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
"""Gauss-Legendre nodal basis on the reference interval [0, 1].

Every matrix is assembled once in fp64 and then rounded entrywise to the
format of the instance. The space-time element is the tensor product of the
same 1D basis in x, y and t, so all operators are stored as 1D factors.
"""
from __future__ import annotations

import dataclasses
import functools
import logging

import numpy as np

from mixedaderdg.precision import (
    FP64,
    ConfigurationError,
    FloatFormat,
    parse_format,
    round_to_format,
)

MAX_ORDER = 9
NEWTON_TOLERANCE = 1e-15
NEWTON_MAX_ITERATIONS = 100


# Exception Classes
class InvalidOrderError(ConfigurationError):
    pass


def check_order(N: int) -> int:
    if not isinstance(N, (int, np.integer)) or not 0 <= N <= MAX_ORDER:
        error = "Error: Polynomial order must be an integer in [0, {}], got {}".format(
            MAX_ORDER, N
        )
        logging.error(error)
        raise InvalidOrderError(error)
    return int(N)


def gauss_legendre(N: int) -> tuple[np.ndarray, np.ndarray]:
    """N+1 Gauss-Legendre nodes and weights on [0, 1], nodes ascending"""
    n = check_order(N) + 1
    # Chebyshev initial guess on [-1, 1] with the usual sine correction
    xu = np.linspace(-1.0, 1.0, n)
    y = np.cos((2 * np.arange(n) + 1) * np.pi / (2 * n)) + (0.27 / n) * np.sin(
        np.pi * xu * (n - 1) / (n + 1)
    )
    for _ in range(NEWTON_MAX_ITERATIONS):
        # Legendre recurrence up to P_n and P_{n-1}
        p_prev, p = np.ones_like(y), y.copy()
        for k in range(1, n):
            p_prev, p = p, ((2 * k + 1) * y * p - k * p_prev) / (k + 1)
        dp = n * (p_prev - y * p) / (1.0 - y**2)
        update = p / dp
        y = y - update
        if np.max(np.abs(update)) < NEWTON_TOLERANCE:
            break
    else:
        logging.warning(f"Gauss-Legendre Newton iteration did not settle for N={N}")
    # Derivative at the converged roots for the weights
    p_prev, p = np.ones_like(y), y.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * y * p - k * p_prev) / (k + 1)
    dp = n * (p_prev - y * p) / (1.0 - y**2)
    nodes = ((1.0 + y) / 2.0)[::-1]
    weights = (1.0 / ((1.0 - y**2) * dp**2))[::-1]
    # Enforce the symmetry about 0.5
    nodes = 0.5 * (nodes + (1.0 - nodes[::-1]))
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def lagrange_matrix(nodes: np.ndarray, points) -> np.ndarray:
    """V[p, l] = phi_l(points[p]) for the cardinal polynomials on nodes"""
    nodes = np.asarray(nodes, dtype=np.float64)
    points = np.atleast_1d(np.asarray(points, dtype=np.float64))
    values = np.ones((points.size, nodes.size))
    for l in range(nodes.size):
        for m in range(nodes.size):
            if m != l:
                values[:, l] *= (points - nodes[m]) / (nodes[l] - nodes[m])
    return values


def derivative_matrix(nodes: np.ndarray) -> np.ndarray:
    """D[k, l] = phi_l'(nodes[k]), diagonal from the negative-sum trick"""
    beta = barycentric_weights(nodes)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (beta[None, :] / beta[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@dataclasses.dataclass(frozen=True)
class PredictorOperators:
    """1D factors of the element-local space-time system.

    time_matrix[a, b] = phi_a(1) phi_b(1) - w_b phi_a'(t_b) is the time-lift
    minus time-derivative term; gradient and the weights give the spatial
    gradient-weighted term; initial_projection[a] = phi_a(0) the initial-data
    term (the spatial mass cancels under collocation).
    """

    time_matrix: np.ndarray
    time_matrix_inverse: np.ndarray
    flux_coupling: np.ndarray
    gradient: np.ndarray
    time_weights: np.ndarray
    initial_projection: np.ndarray


@dataclasses.dataclass(frozen=True)
class ReferenceBasis:
    order: int
    fmt: FloatFormat
    nodes: np.ndarray
    weights: np.ndarray
    derivative: np.ndarray
    mass_diag: np.ndarray
    proj_left: np.ndarray
    proj_right: np.ndarray
    volume_stiffness: np.ndarray
    lift_left: np.ndarray
    lift_right: np.ndarray
    predictor: PredictorOperators

    @property
    def size(self) -> int:
        return self.order + 1


def _freeze(values: np.ndarray, fmt: FloatFormat) -> np.ndarray:
    rounded = np.asarray(round_to_format(values, fmt)).astype(fmt.carrier)
    rounded.setflags(write=False)
    return rounded


@functools.lru_cache(maxsize=None)
def build_reference_basis(N: int, fmt=FP64) -> ReferenceBasis:
    fmt = parse_format(fmt)
    nodes, weights = gauss_legendre(N)
    D = derivative_matrix(nodes)
    left = lagrange_matrix(nodes, 0.0)[0]
    right = lagrange_matrix(nodes, 1.0)[0]

    # Space-time predictor operators
    time_matrix = np.outer(right, right) - (D * weights[:, None]).T
    time_matrix_inverse = np.linalg.inv(time_matrix)
    flux_coupling = time_matrix_inverse * weights[None, :]

    # Corrector operators: K[i, m] = phi_i'(x_m) w_m / w_i
    volume_stiffness = D.T * weights[None, :] / weights[:, None]

    logging.debug(f"Built reference basis N={N} in {fmt.name}")
    return ReferenceBasis(
        order=N,
        fmt=fmt,
        nodes=_freeze(nodes, fmt),
        weights=_freeze(weights, fmt),
        derivative=_freeze(D, fmt),
        mass_diag=_freeze(weights, fmt),
        proj_left=_freeze(left, fmt),
        proj_right=_freeze(right, fmt),
        volume_stiffness=_freeze(volume_stiffness, fmt),
        lift_left=_freeze(left / weights, fmt),
        lift_right=_freeze(right / weights, fmt),
        predictor=PredictorOperators(
            time_matrix=_freeze(time_matrix, fmt),
            time_matrix_inverse=_freeze(time_matrix_inverse, fmt),
            flux_coupling=_freeze(flux_coupling, fmt),
            gradient=_freeze(D, fmt),
            time_weights=_freeze(weights, fmt),
            initial_projection=_freeze(left, fmt),
        ),
    )


def lagrange_eval(basis: ReferenceBasis, l: int, x: float) -> float:
    nodes = np.asarray(basis.nodes, dtype=np.float64)
    return float(lagrange_matrix(nodes, x)[0, l])


def predictor_system_matrices(basis: ReferenceBasis) -> PredictorOperators:
    return basis.predictor


def interpolate(basis: ReferenceBasis, nodal: np.ndarray, points) -> np.ndarray:
    """Evaluate a 1D nodal polynomial (last axis) at points, in fp64"""
    V = lagrange_matrix(np.asarray(basis.nodes, dtype=np.float64), points)
    return np.asarray(nodal, dtype=np.float64) @ V.T
