"""Experiment runner: configuration, subcommands, manifests and reports"""
import logging
logger = logging.getLogger(__name__)

logger.debug('Initializing lab submodule...')

from .config import ExperimentConfig
from .experiments import SUBCOMMANDS, RunRecorder, run
from .reports import report
