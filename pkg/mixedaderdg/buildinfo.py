######################################################
# Copyright (c) Mixed ADER-DG developers.
# This code is licensed under the MIT License (MIT).
# THIS CODE IS PROVIDED *AS IS* WITHOUT WARRANTY OF
# ANY KIND, EITHER EXPRESS OR IMPLIED, INCLUDING ANY
# IMPLIED WARRANTIES OF FITNESS FOR A PARTICULAR
# PURPOSE, MERCHANTABILITY, OR NON-INFRINGEMENT.
######################################################
"""Build and version information"""
__version__ = "0.3.0"
__company__ = "Mixed ADER-DG"
__product__ = "Mixed Precision ADER-DG"
"""Report layout version, bumped whenever a CSV column changes"""
__report_schema_version__ = "1.0"
