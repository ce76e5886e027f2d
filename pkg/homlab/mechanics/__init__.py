"""Material laws, the incremental micro solver and the homogenized model"""
import logging
logger = logging.getLogger(__name__)

logger.debug('Initializing mechanics submodule...')
