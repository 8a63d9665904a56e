from .config_manager import ConfigManager, OutputFormat, ResidualMethod, strtobool
from .runtime_config import (
    ConfigSchema, ConfigNormalizer, ConfigSchemaRegistry, RuntimeConfig, get_runtime_config, reset_runtime_config,
)

__all__ = [
    "ConfigManager",
    "OutputFormat",
    "ResidualMethod",
    "strtobool",
    "ConfigSchema",
    "ConfigNormalizer",
    "ConfigSchemaRegistry",
    "RuntimeConfig",
    "get_runtime_config",
    "reset_runtime_config",
]
