"""Two-scale diagnostics and discrete functional inequalities"""
import logging
logger = logging.getLogger(__name__)

logger.debug('Initializing analysis submodule...')
