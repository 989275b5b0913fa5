# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import sys

from baddiff import cli as baddiff_cli

sys.exit(baddiff_cli.main())
