# Sphinx configuration for the primerace API pages.
import os
import sys

sys.path.insert(0, os.path.abspath('../src'))

import primerace  # noqa: E402

project = 'primerace'
author = 'primerace developers'
copyright = '2026, primerace developers'
version = release = primerace.__version__

extensions = ['sphinx.ext.autodoc']
exclude_patterns = ['_build']

html_theme = 'sphinx_rtd_theme'

# Class and __init__ docstrings both carry parameters
autoclass_content = 'both'
autodoc_typehints = 'none'
autodoc_default_options = {
    'members': True,
    'member-order': 'bysource',
}
