######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
"""Floating-point formats, bit-exact rounding and kernel arithmetic.

Only fp32 and fp64 are native numpy dtypes here. fp16 and bf16 values live in
float64 carrier arrays and every arithmetic result is rounded back to the
target format ("compute wide, round every scalar result"). The float64 carrier
is wide enough (53 >= 2p + 2 bits) for add, sub, mul, div and sqrt of half
formats to be correctly rounded after the second rounding.
"""
from __future__ import annotations

import dataclasses
import functools
import logging
import math
from typing import Iterable, Optional

import numpy as np


# Exception Classes
class ConfigurationError(Exception):
    pass


class UnknownFormatError(ConfigurationError):
    pass


@functools.total_ordering
@dataclasses.dataclass(frozen=True)
class FloatFormat:
    name: str
    mantissa_bits: int
    exponent_bits: int
    max_exponent: int
    native_dtype: Optional[type] = dataclasses.field(default=None, compare=False)

    def __lt__(self, other: "FloatFormat") -> bool:
        return self.mantissa_bits < other.mantissa_bits

    def __str__(self) -> str:
        return self.name

    @property
    def epsilon(self) -> float:
        return math.ldexp(1.0, -self.mantissa_bits)

    @property
    def min_exponent(self) -> int:
        """Smallest unbiased exponent of a normal number"""
        return 1 - self.max_exponent

    @property
    def max_finite(self) -> float:
        return math.ldexp(2.0 - math.ldexp(1.0, -self.mantissa_bits), self.max_exponent)

    @property
    def smallest_subnormal(self) -> float:
        return math.ldexp(1.0, self.min_exponent - self.mantissa_bits)

    @property
    def carrier(self) -> np.dtype:
        """numpy dtype holding values of this format"""
        return np.dtype(self.native_dtype or np.float64)

    @property
    def emulated(self) -> bool:
        return self.native_dtype is None


BF16 = FloatFormat("bf16", 7, 8, 127)
FP16 = FloatFormat("fp16", 10, 5, 15)
FP32 = FloatFormat("fp32", 23, 8, 127, np.float32)
FP64 = FloatFormat("fp64", 52, 11, 1023, np.float64)

FORMATS = {fmt.name: fmt for fmt in (BF16, FP16, FP32, FP64)}


def parse_format(name) -> FloatFormat:
    if isinstance(name, FloatFormat):
        return name
    try:
        return FORMATS[str(name).strip().lower()]
    except KeyError:
        error = "Error: Unknown floating-point format '{}', expected one of {}".format(
            name, ", ".join(FORMATS)
        )
        logging.error(error)
        raise UnknownFormatError(error)


def format_epsilon(fmt: FloatFormat) -> float:
    return parse_format(fmt).epsilon


def narrowest(formats: Iterable[FloatFormat]) -> FloatFormat:
    return min(formats)


def wider(a: FloatFormat, b: FloatFormat) -> FloatFormat:
    return max(a, b)


def round_to_format(x, fmt: FloatFormat):
    """Round fp64 value(s) to fmt with round-to-nearest-even.

    Overflow goes to signed infinity, subnormals are kept, NaN stays NaN.
    Returns float64 values (a float for scalar input).
    """
    values = np.asarray(x, dtype=np.float64)
    if fmt.name == "fp64":
        rounded = values.copy()
    elif fmt.name == "fp32":
        rounded = values.astype(np.float32).astype(np.float64)
    else:
        with np.errstate(all="ignore"):
            # x = mant * 2**exp with 0.5 <= |mant| < 1
            _, exp = np.frexp(values)
            ulp_exp = np.maximum(
                exp - (fmt.mantissa_bits + 1), fmt.min_exponent - fmt.mantissa_bits
            )
            rounded = np.ldexp(np.rint(np.ldexp(values, -ulp_exp)), ulp_exp)
            overflow = np.abs(rounded) > fmt.max_finite
            rounded = np.where(overflow, np.copysign(np.inf, values), rounded)
            rounded = np.where(np.isfinite(values), rounded, values)
    if rounded.ndim == 0:
        return float(rounded)
    return rounded


def is_representable(x, fmt: FloatFormat) -> bool:
    """True if every value of x survives rounding to fmt unchanged"""
    values = np.asarray(x, dtype=np.float64)
    rounded = np.asarray(round_to_format(values, fmt))
    same = (rounded == values) | (np.isnan(rounded) & np.isnan(values))
    return bool(np.all(same))


class KernelArithmetic:
    """Array arithmetic in which every scalar result is a value of fmt"""

    def __init__(self, fmt: FloatFormat):
        self.fmt = parse_format(fmt)
        self.dtype = self.fmt.carrier
        self.emulated = self.fmt.emulated

    def __repr__(self) -> str:
        return f"KernelArithmetic({self.fmt.name})"

    def _round(self, values: np.ndarray) -> np.ndarray:
        if self.emulated:
            return round_to_format(values, self.fmt)
        return values

    def cast(self, x) -> np.ndarray:
        """Convert values of any format into this format"""
        values = np.asarray(x)
        if self.emulated:
            return np.asarray(round_to_format(values.astype(np.float64), self.fmt))
        with np.errstate(over="ignore"):
            return values.astype(self.dtype)

    def const(self, value: float):
        return self.dtype.type(round_to_format(float(value), self.fmt))

    def add(self, a, b):
        with np.errstate(all="ignore"):
            return self._round(np.add(a, b))

    def sub(self, a, b):
        with np.errstate(all="ignore"):
            return self._round(np.subtract(a, b))

    def mul(self, a, b):
        with np.errstate(all="ignore"):
            return self._round(np.multiply(a, b))

    def div(self, a, b):
        with np.errstate(all="ignore"):
            return self._round(np.divide(a, b))

    def sqrt(self, a):
        with np.errstate(all="ignore"):
            return self._round(np.sqrt(a))

    def contract(self, matrix: np.ndarray, x: np.ndarray, axis: int) -> np.ndarray:
        """result[.., k, ..] = sum_l matrix[k, l] * x[.., l, ..] along axis.

        Accumulates sequentially in l with a rounding after every multiply
        and every add, so the summation order is fixed.
        """
        moved = np.moveaxis(x, axis, -1)
        acc = self.mul(moved[..., None, 0], matrix[:, 0])
        for l in range(1, matrix.shape[1]):
            acc = self.add(acc, self.mul(moved[..., None, l], matrix[:, l]))
        return np.moveaxis(acc, -1, axis)

    def weighted_sum(self, weights: np.ndarray, x: np.ndarray, axis: int) -> np.ndarray:
        """Quadrature sum over one axis, which is removed"""
        return np.take(self.contract(weights[None, :], x, axis), 0, axis=axis)


def reduced_arith(op: str, a: float, b: float, fmt: FloatFormat) -> float:
    """Scalar add/sub/mul/div of two values of fmt, result rounded to fmt"""
    if op not in ("add", "sub", "mul", "div"):
        error = f"Error: Unsupported arithmetic operation '{op}'"
        logging.error(error)
        raise ValueError(error)
    arithmetic = KernelArithmetic(fmt)
    result = getattr(arithmetic, op)(arithmetic.const(a), arithmetic.const(b))
    return float(result)


KERNELS = ("storage", "predictor", "picard", "corrector")


@dataclasses.dataclass(frozen=True)
class PrecisionConfig:
    storage: FloatFormat = FP64
    predictor: FloatFormat = FP64
    picard: FloatFormat = FP64
    corrector: FloatFormat = FP64

    @classmethod
    def uniform(cls, fmt) -> "PrecisionConfig":
        fmt = parse_format(fmt)
        return cls(fmt, fmt, fmt, fmt)

    def with_override(self, kernel: str, fmt) -> "PrecisionConfig":
        fmt = parse_format(fmt)
        if kernel == "all":
            # All compute kernels, storage keeps its own format
            return dataclasses.replace(self, predictor=fmt, picard=fmt, corrector=fmt)
        if kernel not in KERNELS:
            error = "Error: Unknown kernel '{}', expected one of {}".format(
                kernel, ", ".join(KERNELS + ("all",))
            )
            logging.error(error)
            raise ConfigurationError(error)
        return dataclasses.replace(self, **{kernel: fmt})

    def formats(self, linear: bool = False) -> set[FloatFormat]:
        used = {self.storage, self.predictor, self.corrector}
        if not linear:
            used.add(self.picard)
        return used

    def names(self) -> dict[str, str]:
        return {kernel: getattr(self, kernel).name for kernel in KERNELS}
