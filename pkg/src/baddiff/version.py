# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

__version__ = "0.1.0"
