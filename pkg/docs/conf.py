# Configuration file for the Sphinx documentation builder.

import os
import sys

# -- Project information -----------------------------------------------------

project = "dsubgrad"
copyright = "2026, dsubgrad developers"
author = "dsubgrad developers"

# -- General configuration ---------------------------------------------------

html_title = "dsubgrad docs"
html_theme = "pydata_sphinx_theme"

# The master toctree document.
master_doc = "index"

source_suffix = ".md .rst".split()

# To find the local substitute extension
sys.path.append(os.path.abspath("./ext"))

extensions = [
    "myst_parser",
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
    "sphinx_copybutton",
    "substitute",
]

templates_path = ["_templates"]

# exclude build directory and backup files:
exclude_patterns = [
    ".nox",
    "_build",
    "conf.py",
    "README.md",
    "ext",
]

nitpicky = True

# Generate heading anchors for heading levels <h[1-3]>
myst_heading_anchors = 3
myst_enable_extensions = ["dollarmath"]

# the installed distribution, or 0.0.0 from a plain checkout
sys.path.insert(0, os.path.abspath(".."))
from dsubgrad.version import __version__  # noqa: E402

dsubgrad_version_string = __version__
