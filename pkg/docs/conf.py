"""Sphinx configuration for the homlab documentation"""
import os
import sys

sys.path.insert(0, os.path.abspath('..'))


extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode'
    ]

master_doc = 'index'

project = 'homlab'
copyright = '2026, homlab developers'
author = 'homlab developers'
version = '0.1'
release = '0.1'

exclude_patterns = ['_build']

html_theme = 'sphinx_rtd_theme'
