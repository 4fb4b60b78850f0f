######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
import configparser
import csv
import dataclasses
import logging
import math
import os
import sys
import time
from typing import Callable, Optional

from mixedaderdg import buildinfo
from mixedaderdg.basis import build_reference_basis
from mixedaderdg.mesh import build_grid
from mixedaderdg.metrics import (
    ErrorReport,
    entropy_error,
    initial_projection_error,
    l2_error,
    max_spurious_velocity,
)
from mixedaderdg.pde import EulerSystem, InadmissibleState, ShallowWaterSystem
from mixedaderdg.precision import (
    FP64,
    KERNELS,
    ConfigurationError,
    PrecisionConfig,
    parse_format,
)
from mixedaderdg.scenarios import get_scenario, initialize, sample
from mixedaderdg.solver import AderDgSolver, SimulationBlowUp, SolverConfig
from mixedaderdg.utility import (
    INITIAL_ERROR_COLUMNS,
    REPORT_COLUMNS,
    format_float,
    setup_storage,
    summary_path,
)
from mixedaderdg.utility.worker import Worker

COMMANDS = ("run", "convergence", "precision-sweep", "initial-error")
SETTINGS_SECTION = "experiment"
PRESET_PREFIX = "uniform-"
OVERRIDE_KERNELS = KERNELS + ("all",)


# Exception Classes
class MissingExperimentArg(ConfigurationError):
    pass


class InvalidExperimentArg(ConfigurationError):
    pass


class InvalidSettingsFile(ConfigurationError):
    pass


class InvalidPresetError(ConfigurationError):
    pass


# Progress Emitter Class
class Progress:
    def __init__(
        self,
        total: float,
        prefix: str = "",
        suffix: str = "",
        decimals: int = 1,
        length: int = 50,
        fill: str = "+",
        printEnd: str = "\r",
        stream=None,
    ):
        """
        Terminal progress bar for simulated time or finished runs
        @params:
            total       - Required  : total value of progress bar
            prefix      - Optional  : prefix string
            suffix      - Optional  : suffix string
            decimals    - Optional  : positive number of decimals in percent complete
            length      - Optional  : character length of bar
            fill        - Optional  : bar fill character
            printEnd    - Optional  : end character (e.g. "\r", "\r\n")
            stream      - Optional  : text stream, stderr by default
        """
        self.prefix = prefix
        self.suffix = suffix
        self.decimals = decimals
        self.length = length
        self.fill = fill
        self.printEnd = printEnd
        self.total = total
        self.stream = stream or sys.stderr

    # Progress Bar Printing Function
    def printProgressBar(self, value: int):
        percent = ("{0:." + str(self.decimals) + "f}").format(
            100 * (value / float(self.total))
        )
        filledLength = int(self.length * value // self.total)
        bar = self.fill * filledLength + "-" * (self.length - filledLength)
        print(
            f"\r{self.prefix} |{bar}| {percent}% {self.suffix}",
            end=self.printEnd,
            file=self.stream,
        )

    # Value updater
    def setValue(self, value: int):
        self.printProgressBar(value)
        if value >= self.total:
            # Close out the bar once the total is met
            print(file=self.stream)


def parse_preset(name: str) -> PrecisionConfig:
    """PrecisionConfig of a preset like 'uniform-fp16+predictor=fp64'"""
    head, *overrides = str(name).strip().split("+")
    if not head.startswith(PRESET_PREFIX):
        error = f"Error: Invalid precision preset '{name}', expected uniform-<format>"
        logging.error(error)
        raise InvalidPresetError(error)
    try:
        config = PrecisionConfig.uniform(head[len(PRESET_PREFIX) :])
        for override in overrides:
            kernel, _, fmt = override.partition("=")
            if kernel not in OVERRIDE_KERNELS or not fmt:
                raise ValueError(f"bad override '{override}'")
            config = config.with_override(kernel, fmt)
    except (ConfigurationError, ValueError) as e:
        error = f"Error: Invalid precision preset '{name}'. {e}"
        logging.error(error)
        raise InvalidPresetError(error)
    return config


def preset_name(base: str, overrides: Optional[dict] = None) -> str:
    name = PRESET_PREFIX + parse_format(base).name
    for kernel, fmt in (overrides or {}).items():
        name += f"+{kernel}={parse_format(fmt).name}"
    return name


@dataclasses.dataclass(frozen=True)
class RunTask:
    scenario: str
    N: int
    n: int
    preset: str
    cfl: Optional[float] = None
    picard_max_iters: Optional[int] = None
    picard_tol: Optional[float] = None
    t_end_override: Optional[float] = None
    eta0: float = 2.0
    workers: int = 1
    check_invariants: bool = False


@dataclasses.dataclass
class RunResult:
    task: RunTask
    precisions: dict
    h: float
    steps: int
    report: ErrorReport
    wall_time: float
    spurious_velocity: Optional[float] = None
    entropy_error: Optional[float] = None
    observed_order: Optional[float] = None

    def row(self) -> list[str]:
        return [
            self.task.scenario,
            str(self.task.N),
            str(self.task.n),
            format_float(self.h),
            self.task.preset,
            *(self.precisions[kernel] for kernel in KERNELS),
            str(self.steps),
            str(self.report.outcome),
            format_float(self.report.l2),
            format_float(self.report.max_error),
            format_float(self.observed_order),
        ]

    def summary(self) -> str:
        task = self.task
        line = (
            f"{task.scenario} N={task.N} n={task.n} {task.preset}: "
            f"{self.report.outcome} after {self.steps} steps in {self.wall_time:.2f}s"
        )
        if self.report.ok:
            line += f", l2={self.report.l2:.3e}, max={self.report.max_error:.3e}"
        else:
            line += (
                f", blow-up in {self.report.failure_kernel}"
                f" at t={self.report.failure_time}"
            )
        if self.spurious_velocity is not None:
            line += f", max spurious velocity={self.spurious_velocity:.3e}"
        if self.entropy_error is not None:
            line += f", entropy error={self.entropy_error:.3e}"
        return line


def run_task(task: RunTask, progress: Optional[Callable[[int], None]] = None):
    """One simulation from initial condition to t_end, with its error report"""
    spec = get_scenario(task.scenario, eta0=task.eta0)
    precisions = parse_preset(task.preset)
    cfg = SolverConfig(
        cfl=task.cfl,
        picard_max_iters=task.picard_max_iters,
        picard_tol=task.picard_tol,
        precisions=precisions,
        workers=task.workers,
        check_invariants=task.check_invariants,
    )
    grid = build_grid(
        task.n, spec.domain, task.N, spec.sys, precisions.storage, precisions.corrector
    )
    basis = build_reference_basis(task.N, FP64)
    initialize(spec, grid, basis)
    solver = AderDgSolver(grid, spec.sys, cfg, special_flux=spec.special_flux)
    t_end = spec.t_end if task.t_end_override is None else task.t_end_override

    started = time.perf_counter()
    try:
        solver.run(t_end, progress)
        report = l2_error(grid, sample(spec, grid, basis, t_end), basis)
    except SimulationBlowUp as e:
        logging.warning(
            f"{task.scenario} N={task.N} n={task.n} {task.preset} blew up: {e}"
        )
        report = ErrorReport.failed(e.time, e.kernel)
    wall_time = time.perf_counter() - started

    result = RunResult(
        task, precisions.names(), grid.h, solver.steps, report, wall_time
    )
    if report.ok and isinstance(spec.sys, ShallowWaterSystem):
        result.spurious_velocity = max_spurious_velocity(grid)
    if report.ok and spec.static and isinstance(spec.sys, EulerSystem):
        try:
            result.entropy_error = entropy_error(grid, spec.sys)
        except InadmissibleState:
            pass
    logging.info(f"Finished {result.summary()}")
    return result


def observed_orders(results: list[RunResult]) -> list[RunResult]:
    """Fill observed_order between successive N at fixed (scenario, n, preset)"""
    previous: dict = {}
    for result in results:
        key = (result.task.scenario, result.task.n, result.task.preset)
        before = previous.get(key)
        if (
            before is not None
            and before.report.ok
            and result.report.ok
            and before.report.l2 > 0
            and result.report.l2 > 0
            and result.task.N != before.task.N
        ):
            result.observed_order = math.log(before.report.l2 / result.report.l2) / (
                math.log((result.task.N + 1) / (before.task.N + 1))
            )
        previous[key] = result
    return results


# Experiment Runner Class
class ExperimentRunner:
    SETTINGS_KEYS = (
        "scenario",
        "order",
        "cells",
        "presets",
        "storage",
        "predictor",
        "picard",
        "corrector",
        "cfl",
        "picard_max_iters",
        "picard_tol",
        "t_end_override",
        "eta0",
        "bases",
        "targets",
        "kernels",
        "jobs",
        "workers",
        "out",
    )
    DEFAULTS = {
        "order": "3",
        "cells": "9",
        "eta0": 2.0,
        "bases": "fp64",
        "kernels": "predictor,picard,corrector,all",
        "jobs": 1,
        "workers": 1,
        "check_invariants": False,
        "quiet": False,
    }

    def __init__(self, **kwargs):
        # Log parameters
        logging.info(
            f"Initializing experiment runner with the following parameters: {kwargs}"
        )
        # Load arguments from user
        for key, value in kwargs.items():
            setattr(self, key, value)
        # Settings file fills whatever the command line left open
        if getattr(self, "config", None):
            for key, value in ExperimentRunner.load_settings(self.config).items():
                if getattr(self, key, None) is None:
                    setattr(self, key, value)
        for key, value in ExperimentRunner.DEFAULTS.items():
            if getattr(self, key, None) is None:
                setattr(self, key, value)
        if getattr(self, "targets", None) is None:
            if getattr(self, "command", None) == "initial-error":
                self.targets = "fp32,fp16,bf16"
            else:
                self.targets = "bf16"
        # Check for required args
        for key in ("command", "scenario"):
            if getattr(self, key, None) is None:
                error = "Error: Missing experiment argument: {}".format(key)
                logging.error(error)
                raise MissingExperimentArg(error)
        if self.command not in COMMANDS:
            error = "Error: Unknown command '{}', expected one of {}".format(
                self.command, ", ".join(COMMANDS)
            )
            logging.error(error)
            raise InvalidExperimentArg(error)
        self.coerce_settings()
        # Check for passed in progress emitter
        if not hasattr(self, "progress"):
            if self.quiet:
                self.progress = lambda value: None
            else:
                # Create runner's own progress emitter
                self.progress_object = Progress(100, prefix=self.command)
                self.progress = self.progress_object.setValue

    def coerce_settings(self):
        """Settings file values arrive as text, command line values typed"""
        try:
            self.orders = ExperimentRunner.parse_list(self.order, int)
            self.cell_counts = ExperimentRunner.parse_list(self.cells, int)
            self.base_formats = ExperimentRunner.parse_list(self.bases, parse_format)
            self.target_formats = ExperimentRunner.parse_list(
                self.targets, parse_format
            )
            self.override_kernels = ExperimentRunner.parse_list(self.kernels, str)
            for key, convert in (
                ("cfl", float),
                ("picard_max_iters", int),
                ("picard_tol", float),
                ("t_end_override", float),
                ("eta0", float),
                ("jobs", int),
                ("workers", int),
            ):
                value = getattr(self, key, None)
                setattr(self, key, None if value is None else convert(value))
        except ValueError as e:
            error = f"Error: Invalid experiment argument. {e}"
            logging.error(error)
            raise InvalidExperimentArg(error)
        if not self.orders or not self.cell_counts:
            error = "Error: Experiment needs at least one order and one cell count"
            logging.error(error)
            raise InvalidExperimentArg(error)
        unknown = set(self.override_kernels) - set(OVERRIDE_KERNELS)
        if unknown:
            error = "Error: Unknown kernel(s) {}, expected {}".format(
                ", ".join(sorted(unknown)), ", ".join(OVERRIDE_KERNELS)
            )
            logging.error(error)
            raise InvalidExperimentArg(error)
        # Fail early on unknown scenarios
        self.spec = get_scenario(self.scenario, eta0=self.eta0)

    def run(self) -> list:
        logging.info(f"Running {self.command} for {self.scenario}...")
        if self.command == "initial-error":
            rows = self.initial_error()
            self.write_initial_error(rows)
            return rows
        if self.command == "run":
            results = [self.run_single()]
        elif self.command == "convergence":
            results = self.convergence_sweep()
        else:
            results = self.precision_sweep()
        self.write_report(results)
        self.write_summary(results)
        logging.info("Experiment complete")
        return results

    def preset_names(self) -> list[str]:
        """Presets named on the command line, else one from the kernel flags"""
        if getattr(self, "presets_list", None) is None:
            named = ExperimentRunner.parse_list(getattr(self, "presets", None), str)
            if not named:
                overrides = {
                    kernel: getattr(self, kernel)
                    for kernel in KERNELS
                    if getattr(self, kernel, None) is not None
                }
                named = [preset_name("fp64", overrides)]
            for name in named:
                parse_preset(name)
            self.presets_list = named
        return self.presets_list

    def task(self, N: int, n: int, preset: str) -> RunTask:
        return RunTask(
            scenario=self.scenario,
            N=N,
            n=n,
            preset=preset,
            cfl=self.cfl,
            picard_max_iters=self.picard_max_iters,
            picard_tol=self.picard_tol,
            t_end_override=self.t_end_override,
            eta0=self.eta0,
            workers=self.workers,
            check_invariants=self.check_invariants,
        )

    def run_single(self) -> RunResult:
        task = self.task(self.orders[0], self.cell_counts[0], self.preset_names()[0])
        return run_task(task, self.progress)

    def convergence_sweep(self) -> list[RunResult]:
        if len(self.orders) < 2:
            error = "Error: Convergence sweep needs at least two orders, got {}".format(
                self.orders
            )
            logging.error(error)
            raise InvalidExperimentArg(error)
        tasks = [
            self.task(N, n, preset)
            for preset in self.preset_names()
            for n in self.cell_counts
            for N in self.orders
        ]
        return observed_orders(self.run_tasks(tasks))

    def sweep_presets(self) -> list[str]:
        """Uniform base rows plus one row per single-kernel override"""
        presets = []
        for base in self.base_formats:
            presets.append(preset_name(base))
            for target in self.target_formats:
                for kernel in self.override_kernels:
                    if kernel == "picard" and self.spec.sys.is_linear:
                        logging.warning(
                            f"Skipping picard={target} on {base}: "
                            f"{self.scenario} has no Picard loop"
                        )
                        continue
                    presets.append(preset_name(base, {kernel: target}))
        return presets

    def precision_sweep(self) -> list[RunResult]:
        tasks = [
            self.task(N, n, preset)
            for preset in self.sweep_presets()
            for n in self.cell_counts
            for N in self.orders
        ]
        return observed_orders(self.run_tasks(tasks))

    def run_tasks(self, tasks: list[RunTask]) -> list[RunResult]:
        logging.info(f"Running {len(tasks)} simulation(s) on {self.jobs} job(s)")
        return Worker(run_task, self.jobs).run(tasks, self.progress)

    def initial_error(self) -> list[list[str]]:
        rows = []
        for fmt in self.target_formats:
            for n in self.cell_counts:
                for N in self.orders:
                    error = initial_projection_error(self.spec, n, N, fmt)
                    rows.append(
                        [
                            self.scenario,
                            str(N),
                            str(n),
                            format_float(self.spec.domain.length / n),
                            fmt.name,
                            format_float(error),
                        ]
                    )
        return rows

    def output_path(self) -> str:
        if getattr(self, "out", None):
            return self.out
        name = f"{self.command}-{self.scenario}.csv"
        return os.path.join(setup_storage(), name)

    def write_report(self, results: list[RunResult]):
        ExperimentRunner.write_csv(
            self.output_path(), REPORT_COLUMNS, [r.row() for r in results]
        )

    def write_initial_error(self, rows: list[list[str]]):
        ExperimentRunner.write_csv(self.output_path(), INITIAL_ERROR_COLUMNS, rows)

    def write_summary(self, results: list[RunResult]):
        path = summary_path(self.output_path())
        lines = [
            f"{buildinfo.__product__} {buildinfo.__version__} "
            f"(report schema {buildinfo.__report_schema_version__})",
            f"{self.command} {self.scenario}",
        ]
        lines += [result.summary() for result in results]
        with open(path, "w", encoding="utf8") as f:
            f.write("\n".join(lines) + "\n")
        logging.info(f"Wrote summary {path}")

    @staticmethod
    def write_csv(path: str, columns, rows):
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", newline="", encoding="utf8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows(rows)
        logging.info(f"Wrote report {path}")

    @staticmethod
    def parse_list(value, convert: Callable = str) -> list:
        if value is None:
            return []
        if isinstance(value, (list, tuple)):
            items = value
        else:
            items = [item.strip() for item in str(value).split(",")]
        return [convert(item) for item in items if item != ""]

    @staticmethod
    def load_settings(settings: str) -> dict:
        parser = configparser.ConfigParser()
        try:
            if not parser.read(settings, encoding="utf8"):
                raise FileNotFoundError(settings)
            section = parser[SETTINGS_SECTION]
        except (configparser.Error, KeyError, OSError) as e:
            error = (
                "Error: Invalid experiment settings file provided at path: {}. {}"
            ).format(settings, e)
            logging.error(error)
            raise InvalidSettingsFile(error)
        unknown = set(section) - set(ExperimentRunner.SETTINGS_KEYS)
        if unknown:
            error = "Error: Unknown key(s) {} in settings file {}".format(
                ", ".join(sorted(unknown)), settings
            )
            logging.error(error)
            raise InvalidSettingsFile(error)
        return dict(section)


def main(**kwargs):
    # Run the requested experiment
    runner = ExperimentRunner(**kwargs)
    return runner.run()
