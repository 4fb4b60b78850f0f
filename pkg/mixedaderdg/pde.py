######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
"""Hyperbolic systems in the form dQ/dt + dF/dx + dG/dy + B(Q).grad Q = 0.

State arrays carry the variables on axis 0; any trailing shape (single node,
cell, space-time element, whole grid) is processed pointwise. All arithmetic
goes through a KernelArithmetic so it happens in the calling kernel's format.
"""
from __future__ import annotations

import dataclasses
import logging
from typing import Optional

import numpy as np

from mixedaderdg.precision import FP64, ConfigurationError, KernelArithmetic


# Exception Classes
class InadmissibleState(Exception):
    pass


class UnknownSystemError(ConfigurationError):
    pass


def direction_axis(direction) -> int:
    if direction in (0, "x", "X"):
        return 0
    if direction in (1, "y", "Y"):
        return 1
    error = f"Error: Unknown direction '{direction}', expected x or y"
    logging.error(error)
    raise ValueError(error)


def _require_parameter(system: str, quantity: str, value: float):
    if not value > 0:
        error = f"Error: {system} parameter {quantity} must be positive, got {value}"
        logging.error(error)
        raise ConfigurationError(error)


def _require_positive(system: str, quantity: str, values: np.ndarray):
    with np.errstate(invalid="ignore"):
        admissible = np.all(np.asarray(values) > 0)
    if not admissible:
        error = (
            f"Error: Inadmissible {system} state, "
            f"nonpositive or nonfinite {quantity}"
        )
        logging.debug(error)
        raise InadmissibleState(error)


@dataclasses.dataclass(frozen=True)
class AcousticParams:
    K: float = 4.0
    rho: float = 1.0


@dataclasses.dataclass(frozen=True)
class ElasticParams:
    lam: float = 2.0
    mu: float = 1.0
    rho: float = 1.0


@dataclasses.dataclass(frozen=True)
class EulerParams:
    gamma: float = 1.4


@dataclasses.dataclass(frozen=True)
class SweParams:
    g: float = 9.81
    # "discharge" transports h*v, "velocity" the literal v form
    mass_flux: str = "discharge"


class PdeSystem:
    name = ""
    variables: tuple[str, ...] = ()
    is_linear = False
    has_ncp = False

    def __init__(self, params):
        self.params = params

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.params})"

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def flux(self, ar: KernelArithmetic, Q: np.ndarray, direction) -> np.ndarray:
        raise NotImplementedError

    def ncp(self, ar: KernelArithmetic, Q, grad_x, grad_y) -> np.ndarray:
        return np.zeros_like(Q)

    def max_abs_eigenvalue(self, ar: KernelArithmetic, Q, direction) -> np.ndarray:
        raise NotImplementedError


class LinearSystem(PdeSystem):
    is_linear = True

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Flux Jacobians A, B in fp64"""
        raise NotImplementedError

    def wave_speed(self) -> float:
        raise NotImplementedError

    def flux(self, ar: KernelArithmetic, Q, direction) -> np.ndarray:
        matrix = self.matrices()[direction_axis(direction)]
        rows = []
        for i in range(self.nvars):
            acc = None
            for j in np.flatnonzero(matrix[i]):
                term = ar.mul(ar.const(matrix[i, j]), Q[j])
                acc = term if acc is None else ar.add(acc, term)
            rows.append(np.zeros_like(Q[0]) if acc is None else acc)
        return np.stack(rows)

    def max_abs_eigenvalue(self, ar: KernelArithmetic, Q, direction) -> np.ndarray:
        return np.full_like(Q[0], ar.const(self.wave_speed()))


class AcousticSystem(LinearSystem):
    name = "acoustic"
    variables = ("p", "v_x", "v_y")

    def __init__(self, params: Optional[AcousticParams] = None):
        super().__init__(params or AcousticParams())
        _require_parameter(self.name, "bulk modulus", self.params.K)
        _require_parameter(self.name, "density", self.params.rho)

    def matrices(self):
        K, rho = self.params.K, self.params.rho
        A = np.array([[0.0, K, 0.0], [1.0 / rho, 0.0, 0.0], [0.0, 0.0, 0.0]])
        B = np.array([[0.0, 0.0, K], [0.0, 0.0, 0.0], [1.0 / rho, 0.0, 0.0]])
        return A, B

    def wave_speed(self) -> float:
        return float(np.sqrt(self.params.K / self.params.rho))


class ElasticSystem(LinearSystem):
    name = "elastic"
    variables = ("sigma_xx", "sigma_yy", "sigma_xy", "v_x", "v_y")

    def __init__(self, params: Optional[ElasticParams] = None):
        super().__init__(params or ElasticParams())
        _require_parameter(self.name, "shear modulus", self.params.mu)
        _require_parameter(self.name, "density", self.params.rho)

    def matrices(self):
        lam, mu, rho = self.params.lam, self.params.mu, self.params.rho
        A = np.zeros((5, 5))
        A[0, 3] = -(lam + 2 * mu)
        A[1, 3] = -lam
        A[2, 4] = -mu
        A[3, 0] = -1.0 / rho
        A[4, 2] = -1.0 / rho
        B = np.zeros((5, 5))
        B[0, 4] = -lam
        B[1, 4] = -(lam + 2 * mu)
        B[2, 3] = -mu
        B[3, 2] = -1.0 / rho
        B[4, 1] = -1.0 / rho
        return A, B

    def wave_speed(self) -> float:
        return float(np.sqrt((self.params.lam + 2 * self.params.mu) / self.params.rho))

    def shear_speed(self) -> float:
        return float(np.sqrt(self.params.mu / self.params.rho))


class EulerSystem(PdeSystem):
    name = "euler"
    variables = ("rho", "rho_v_x", "rho_v_y", "E")

    def __init__(self, params: Optional[EulerParams] = None):
        super().__init__(params or EulerParams())
        _require_parameter(self.name, "gamma - 1", self.params.gamma - 1.0)

    def primitives(self, ar: KernelArithmetic, Q):
        """Velocities and pressure from the equation of state"""
        rho, mx, my, E = Q
        _require_positive(self.name, "density", rho)
        vx = ar.div(mx, rho)
        vy = ar.div(my, rho)
        kinetic = ar.mul(ar.const(0.5), ar.add(ar.mul(mx, vx), ar.mul(my, vy)))
        p = ar.mul(ar.const(self.params.gamma - 1.0), ar.sub(E, kinetic))
        _require_positive(self.name, "pressure", p)
        return vx, vy, p

    def flux(self, ar: KernelArithmetic, Q, direction) -> np.ndarray:
        rho, mx, my, E = Q
        vx, vy, p = self.primitives(ar, Q)
        energy = ar.add(E, p)
        if direction_axis(direction) == 0:
            return np.stack(
                [mx, ar.add(ar.mul(mx, vx), p), ar.mul(my, vx), ar.mul(vx, energy)]
            )
        return np.stack(
            [my, ar.mul(mx, vy), ar.add(ar.mul(my, vy), p), ar.mul(vy, energy)]
        )

    def max_abs_eigenvalue(self, ar: KernelArithmetic, Q, direction) -> np.ndarray:
        vx, vy, p = self.primitives(ar, Q)
        vn = vx if direction_axis(direction) == 0 else vy
        sound = ar.sqrt(ar.div(ar.mul(ar.const(self.params.gamma), p), Q[0]))
        return ar.add(np.abs(vn), sound)

    def entropy(self, Q) -> np.ndarray:
        """p / rho**gamma in fp64"""
        Q = np.asarray(Q, dtype=np.float64)
        _, _, p = self.primitives(KernelArithmetic(FP64), Q)
        return p / Q[0] ** self.params.gamma


class ShallowWaterSystem(PdeSystem):
    name = "swe"
    variables = ("h", "h_v_x", "h_v_y", "b")
    has_ncp = True

    def __init__(self, params: Optional[SweParams] = None):
        super().__init__(params or SweParams())
        _require_parameter(self.name, "gravity", self.params.g)
        if self.params.mass_flux not in ("discharge", "velocity"):
            error = "Error: Unknown shallow water mass flux '{}'".format(
                self.params.mass_flux
            )
            logging.error(error)
            raise ConfigurationError(error)

    def velocities(self, ar: KernelArithmetic, Q):
        h, hu, hv, _ = Q
        _require_positive(self.name, "water depth", h)
        return ar.div(hu, h), ar.div(hv, h)

    def flux(self, ar: KernelArithmetic, Q, direction) -> np.ndarray:
        h, hu, hv, _ = Q
        u, v = self.velocities(ar, Q)
        zero = np.zeros_like(h)
        if direction_axis(direction) == 0:
            mass = hu if self.params.mass_flux == "discharge" else u
            return np.stack([mass, ar.mul(hu, u), ar.mul(hv, u), zero])
        mass = hv if self.params.mass_flux == "discharge" else v
        return np.stack([mass, ar.mul(hu, v), ar.mul(hv, v), zero])

    def ncp(self, ar: KernelArithmetic, Q, grad_x, grad_y) -> np.ndarray:
        h = Q[0]
        _require_positive(self.name, "water depth", h)
        gh = ar.mul(ar.const(self.params.g), h)
        # Gradient of the surface elevation h + b
        surface_x = ar.add(grad_x[0], grad_x[3])
        surface_y = ar.add(grad_y[0], grad_y[3])
        zero = np.zeros_like(h)
        return np.stack([zero, ar.mul(gh, surface_x), ar.mul(gh, surface_y), zero])

    def max_abs_eigenvalue(self, ar: KernelArithmetic, Q, direction) -> np.ndarray:
        u, v = self.velocities(ar, Q)
        vn = u if direction_axis(direction) == 0 else v
        return ar.add(np.abs(vn), ar.sqrt(ar.mul(ar.const(self.params.g), Q[0])))


SYSTEMS = {
    "acoustic": (AcousticSystem, AcousticParams),
    "elastic": (ElasticSystem, ElasticParams),
    "euler": (EulerSystem, EulerParams),
    "swe": (ShallowWaterSystem, SweParams),
}


def make_system(name: str, **params) -> PdeSystem:
    try:
        system, params_type = SYSTEMS[name]
    except KeyError:
        error = "Error: Unknown PDE system '{}', expected one of {}".format(
            name, ", ".join(SYSTEMS)
        )
        logging.error(error)
        raise UnknownSystemError(error)
    return system(params_type(**params))


# Module level conveniences evaluating in fp64 unless told otherwise
def flux(sys: PdeSystem, Q, direction, ar: Optional[KernelArithmetic] = None):
    ar = ar or KernelArithmetic(FP64)
    return sys.flux(ar, ar.cast(Q), direction)


def ncp(sys: PdeSystem, Q, grad_x, grad_y, ar: Optional[KernelArithmetic] = None):
    ar = ar or KernelArithmetic(FP64)
    return sys.ncp(ar, ar.cast(Q), ar.cast(grad_x), ar.cast(grad_y))


def max_abs_eigenvalue(sys: PdeSystem, Q, direction, ar=None):
    ar = ar or KernelArithmetic(FP64)
    return sys.max_abs_eigenvalue(ar, ar.cast(Q), direction)
