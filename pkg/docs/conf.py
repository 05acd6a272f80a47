# -*- coding: utf-8 -*-
#
# BevSync documentation build configuration file.
#
# Only the values that differ from the Sphinx defaults are set here.

import sys, os, datetime

here = os.path.abspath(os.path.dirname(__file__))
sys.path.insert(0, os.path.abspath(os.path.join(here, '..')))

# -- General configuration -----------------------------------------------------

extensions = ['matplotlib.sphinxext.plot_directive',
              'sphinx.ext.mathjax',
              'sphinx.ext.autodoc',
              'sphinx.ext.doctest',
              'numpydoc']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

d = datetime.datetime.today()
about = {}
with open(os.path.join(here, '..', 'BevSync', '__version__.py')) as f:
    exec(f.read(), about)

project = u'BevSync'
copyright = u'{0}, BevSync developers'.format(d.year)
version = 'v' + about['__version__']
release = 'v' + about['__version__']

exclude_patterns = ['_build']
pygments_style = 'sphinx'

# numpydoc lists every class member otherwise
numpydoc_show_class_members = False

# -- Options for HTML output ---------------------------------------------------

html_theme = 'default'
html_static_path = ['_static']
htmlhelp_basename = 'bevsyncdoc'
