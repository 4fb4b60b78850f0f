######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
import errno
import os
from typing import Optional

import appdirs

from mixedaderdg import buildinfo

# Utility Consts
REPORT_DIR = "reports"
FLOAT_FORMAT = ".17g"
REPORT_COLUMNS = (
    "scenario",
    "N",
    "n",
    "h",
    "preset",
    "storage",
    "predictor",
    "picard",
    "corrector",
    "steps",
    "outcome",
    "l2_error",
    "max_error",
    "observed_order",
)
INITIAL_ERROR_COLUMNS = ("scenario", "N", "n", "h", "format", "relative_l2")


# Utility Functions
def setup_storage() -> str:
    """Setup local storage for experiment reports"""
    directories = appdirs.AppDirs(buildinfo.__product__, buildinfo.__company__)
    # Reports live below the user data dir
    report_dir = os.path.join(directories.user_data_dir, REPORT_DIR)
    try:
        os.makedirs(report_dir)
    except OSError as e:
        if e.errno != errno.EEXIST:
            raise
    # Return path
    return report_dir


def format_float(value: Optional[float]) -> str:
    """Round-trip safe text for a CSV cell, blank for missing values"""
    if value is None:
        return ""
    return format(float(value), FLOAT_FORMAT)


def summary_path(csv_path: str) -> str:
    """Plain-text summary file written next to a CSV report"""
    root, _ = os.path.splitext(csv_path)
    return root + ".txt"
