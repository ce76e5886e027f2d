"""Tools to build perforated geometries and C1 Hermite spaces on them"""
import logging
logger = logging.getLogger(__name__)

logger.debug('Initializing mesh submodule...')

from .geometry import (FacetTag, PerforatedDomain, UnitCell, boundary_measure,
                       build_domain, build_unit_cell)
from .c1grid import (C1Field, C1Space, Jet2, apply_dirichlet_id, build_space,
                     eval_jet, integrate)
