# Sphinx configuration for the pcombine documentation.
from __future__ import annotations

import os
import sys
sys.path.insert(0, os.path.abspath('../..'))


# -- Project information -----------------------------------------------------

project = 'pcombine'
copyright = '2026 pcombine developers'
author = 'pcombine developers'


import pcombine  # noqa: W291,E402

version = pcombine.__version__
release = pcombine.__version__


# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autosummary',
    'sphinx.ext.napoleon',
    'sphinx.ext.githubpages',
    'IPython.sphinxext.ipython_directive',
    'IPython.sphinxext.ipython_console_highlighting',
    'sphinx.ext.intersphinx',
]

autosummary_generate = True
numpydoc_show_class_members = False
autodoc_default_flags = ['show-inheritance']
autoclass_content = 'class'

intersphinx_mapping = {
    'python': ('https://docs.python.org/3/', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
    'pandas': ('https://pandas.pydata.org/docs/', None),
    'statsmodels': ('https://www.statsmodels.org/stable/', None),
    'sqlalchemy': ('https://docs.sqlalchemy.org/en/20/', None),
}

templates_path = ['_templates']
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']


# -- Options for HTML output -------------------------------------------------

import sphinx_rtd_theme  # noqa: E402

html_theme = 'sphinx_rtd_theme'
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
html_static_path = ['_static']
pygments_style = 'monokai'
