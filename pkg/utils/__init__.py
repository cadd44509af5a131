"""
Utilities: run configuration and seed-parallel execution.
"""

from utils.parallel import map_seeds
from utils.run_config import RunConfig, load_config

__all__ = ["RunConfig", "load_config", "map_seeds"]
