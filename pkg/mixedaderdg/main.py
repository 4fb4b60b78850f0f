######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
import argparse
import logging
import sys

from mixedaderdg import (
    LOG_LEVEL_MAP,
    LOGGING_DATEFMT,
    LOGGING_FORMAT,
    buildinfo,
    script,
)
from mixedaderdg.precision import ConfigurationError
from mixedaderdg.solver import InvariantViolation

EXIT_OK = 0
EXIT_CONFIGURATION = 2
EXIT_INVARIANT = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(buildinfo.__product__)
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {buildinfo.__version__}"
    )
    # Options shared by every subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", dest="config", help="Experiment INI file")
    common.add_argument(
        "-s", "--scenario", dest="scenario", help="Scenario name, e.g. acoustic-planar"
    )
    common.add_argument(
        "-N", "--order", dest="order", help="Polynomial order(s), comma separated"
    )
    common.add_argument(
        "-n", "--cells", dest="cells", help="Cells per dimension, comma separated"
    )
    common.add_argument(
        "-p",
        "--presets",
        dest="presets",
        help="Precision preset(s), e.g. uniform-fp16+predictor=fp64",
    )
    for kernel in ("storage", "predictor", "picard", "corrector"):
        common.add_argument(
            f"--{kernel}", dest=kernel, help=f"Format of the {kernel} kernel"
        )
    common.add_argument("--cfl", dest="cfl", type=float, help="CFL constant in (0, 1)")
    common.add_argument(
        "--picard-max-iters", dest="picard_max_iters", type=int, help="Picard sweep cap"
    )
    common.add_argument(
        "--picard-tol", dest="picard_tol", type=float, help="Picard relative tolerance"
    )
    common.add_argument(
        "--t-end-override", dest="t_end_override", type=float, help="Final time"
    )
    common.add_argument(
        "--eta0", dest="eta0", type=float, help="Lake surface elevation for swe-lake"
    )
    common.add_argument("--bases", dest="bases", help="Base formats of a sweep")
    common.add_argument("--targets", dest="targets", help="Target formats of a sweep")
    common.add_argument(
        "--kernels", dest="kernels", help="Kernels overridden in a sweep"
    )
    common.add_argument(
        "-j", "--jobs", dest="jobs", type=int, help="Simulations run in parallel"
    )
    common.add_argument(
        "-w", "--workers", dest="workers", type=int, help="Threads per simulation"
    )
    common.add_argument(
        "--check-invariants",
        dest="check_invariants",
        action="store_true",
        default=None,
        help="Verify storage representability after every step",
    )
    common.add_argument("-o", "--out", dest="out", help="Path of the CSV report")
    common.add_argument(
        "--log-level",
        dest="log_level",
        choices=list(LOG_LEVEL_MAP),
        default="info",
        help="Logging verbosity",
    )
    common.add_argument(
        "-q",
        "--quiet",
        dest="quiet",
        action="store_true",
        default=None,
        help="Disable the progress bar",
    )

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("run", parents=[common], help="Run a single simulation")
    commands.add_parser(
        "convergence", parents=[common], help="Sweep polynomial orders and meshes"
    )
    commands.add_parser(
        "precision-sweep", parents=[common], help="Sweep mixed precision configurations"
    )
    commands.add_parser(
        "initial-error", parents=[common], help="Round-off error of initial conditions"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=LOG_LEVEL_MAP[args.log_level],
        format=LOGGING_FORMAT,
        datefmt=LOGGING_DATEFMT,
    )
    kwargs = vars(args)
    kwargs.pop("log_level")
    try:
        script.main(**kwargs)
    except ConfigurationError as e:
        logging.debug(f"Configuration error: {e}")
        return EXIT_CONFIGURATION
    except InvariantViolation as e:
        logging.debug(f"Invariant violation: {e}")
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
