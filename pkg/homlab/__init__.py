"""Strain-gradient viscoelastic homogenization laboratory"""
import logging
from logging import NullHandler

logging.getLogger(__name__).addHandler(NullHandler())

__version__ = '0.1'
