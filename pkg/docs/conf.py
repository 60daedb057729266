# -*- coding: utf-8 -*-
#
# Perceptual DRO documentation build configuration file.
#
# Only the settings that differ from the sphinx-quickstart defaults are kept.

import sys, os

sys.path.insert(0, os.path.abspath('..'))

from perceptual_dro import __version__

# -- General configuration ------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.coverage',
    'sphinx.ext.viewcode', 'sphinx.ext.napoleon', 'sphinx.ext.mathjax']

templates_path = ['_templates']

source_suffix = '.rst'

master_doc = 'index'

project = u'Perceptual DRO'

# The short X.Y version and the full version.
version = __version__
release = __version__

exclude_patterns = ['_build']

pygments_style = 'sphinx'

autodoc_member_order = 'bysource'

# -- Options for HTML output ----------------------------------------------

html_theme = 'alabaster'

html_static_path = ['_static']

html_sidebars = {
    '**': [
        'about.html',
        'navigation.html',
        'relations.html',
        'searchbox.html',
    ]
}

htmlhelp_basename = 'PerceptualDroDocs'
