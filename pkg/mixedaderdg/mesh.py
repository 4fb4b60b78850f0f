######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
"""Uniform periodic Cartesian grid.

Cell data of the whole grid is one array of shape (nvars, n, n, N+1, N+1)
indexed [variable, cell_x, cell_y, node_y, node_x], so one cell's
coefficients are variable-major over iy*(N+1)+ix. Face buffers are indexed
[variable, cell_x, cell_y, time_node, face_node]; face (i, j) of direction x is
the right face of cell (i, j), its plus side the left face of cell (i+1, j).
"""
from __future__ import annotations

import dataclasses
import logging

import numpy as np

from mixedaderdg.basis import ReferenceBasis, check_order
from mixedaderdg.pde import PdeSystem
from mixedaderdg.precision import (
    FP64,
    ConfigurationError,
    FloatFormat,
    KernelArithmetic,
    is_representable,
    parse_format,
)

CELL_AXES = (1, 2)


# Exception Classes
class InvalidGridError(ConfigurationError):
    pass


@dataclasses.dataclass(frozen=True)
class Domain:
    lower: tuple[float, float]
    length: float

    def __post_init__(self):
        if not self.length > 0:
            error = f"Error: Domain edge length must be positive, got {self.length}"
            logging.error(error)
            raise InvalidGridError(error)

    @property
    def area(self) -> float:
        return self.length**2


@dataclasses.dataclass
class FaceBuffer:
    direction: int
    q_minus: np.ndarray
    q_plus: np.ndarray
    f_minus: np.ndarray
    f_plus: np.ndarray


@dataclasses.dataclass
class Grid:
    n: int
    domain: Domain
    order: int
    nvars: int
    storage: FloatFormat
    solution: np.ndarray
    faces: tuple[FaceBuffer, FaceBuffer]

    @property
    def h(self) -> float:
        return self.domain.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**2

    def cell(self, i: int, j: int) -> np.ndarray:
        """CellSolution view, shape (nvars, N+1, N+1)"""
        return self.solution[:, i % self.n, j % self.n]

    def cell_coefficients(self, i: int, j: int) -> np.ndarray:
        """Flat nvars x (N+1)**2 layout, node index iy*(N+1)+ix"""
        return self.cell(i, j).reshape(self.nvars, -1)

    def set_solution(self, values: np.ndarray):
        """Store nodal values rounded to the storage format"""
        values = np.asarray(values)
        if values.shape != self.solution.shape:
            error = "Error: Solution shape {} does not match grid shape {}".format(
                values.shape, self.solution.shape
            )
            logging.error(error)
            raise InvalidGridError(error)
        self.solution = KernelArithmetic(self.storage).cast(values)

    def storage_consistent(self) -> bool:
        return is_representable(self.solution, self.storage)


def _empty_faces(direction, nvars, n, N, fmt):
    shape = (nvars, n, n, N + 1, N + 1)
    return FaceBuffer(
        direction,
        *(np.zeros(shape, dtype=fmt.carrier) for _ in range(4)),
    )


def build_grid(
    n: int,
    domain: Domain,
    N: int,
    sys: PdeSystem,
    storage: FloatFormat = FP64,
    corrector: FloatFormat = FP64,
) -> Grid:
    if not isinstance(n, (int, np.integer)) or n < 1:
        error = f"Error: Cells per dimension must be a positive integer, got {n}"
        logging.error(error)
        raise InvalidGridError(error)
    N = check_order(N)
    storage = parse_format(storage)
    corrector = parse_format(corrector)
    solution = np.zeros((sys.nvars, n, n, N + 1, N + 1), dtype=storage.carrier)
    faces = tuple(_empty_faces(d, sys.nvars, n, N, corrector) for d in (0, 1))
    logging.debug(f"Built {n}x{n} grid of order {N}, h={domain.length / n}")
    return Grid(int(n), domain, N, sys.nvars, storage, solution, faces)


def neighbor(grid: Grid, cell: tuple[int, int], direction, sign: int):
    """Periodic neighbor of cell in direction x/y, sign +1 or -1"""
    axis = 0 if direction in (0, "x") else 1
    i, j = cell
    if axis == 0:
        return ((i + sign) % grid.n, j)
    return (i, (j + sign) % grid.n)


def shift_from_neighbor(values: np.ndarray, direction: int, sign: int) -> np.ndarray:
    """values[.., c + sign, ..] placed at cell c, periodic in the cell axes"""
    return np.roll(values, -sign, axis=CELL_AXES[direction])


def node_coordinates(grid: Grid, cell: tuple[int, int], basis: ReferenceBasis):
    """Physical (x, y) of the cell's nodes, each shaped (N+1, N+1) as [iy, ix]"""
    i, j = cell
    nodes = np.asarray(basis.nodes, dtype=np.float64)
    x0 = grid.domain.lower[0] + i * grid.h
    y0 = grid.domain.lower[1] + j * grid.h
    xs = x0 + grid.h * nodes
    ys = y0 + grid.h * nodes
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    return X, Y


def all_node_coordinates(grid: Grid, basis: ReferenceBasis):
    """Physical (x, y) of every node, each shaped (n, n, N+1, N+1)"""
    nodes = np.asarray(basis.nodes, dtype=np.float64)
    corners = grid.domain.lower[0] + grid.h * np.arange(grid.n)
    xs = corners[:, None] + grid.h * nodes[None, :]
    corners = grid.domain.lower[1] + grid.h * np.arange(grid.n)
    ys = corners[:, None] + grid.h * nodes[None, :]
    X = np.broadcast_to(xs[:, None, None, :], (grid.n, grid.n, nodes.size, nodes.size))
    Y = np.broadcast_to(ys[None, :, :, None], (grid.n, grid.n, nodes.size, nodes.size))
    return X.copy(), Y.copy()
