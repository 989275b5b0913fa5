# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

import re

import baddiff

# project
project = "baddiff"
copyright = "2026, The baddiff authors"
author = "The baddiff authors"
release = baddiff.__version__
version = re.match(r"^\d+\.\d+", release).group(0)

# index
master_doc = "index"

# extensions
extensions = ["sphinx.ext.autodoc"]
autodoc_member_order = "bysource"

# theme
html_theme = "alabaster"
