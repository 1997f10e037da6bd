from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .recipes import RecipeResult, read_results, run_recipe

__all__ = ["ConfigError", "ExperimentConfig", "RecipeResult", "load_config", "parse_config", "read_results", "run_recipe"]
