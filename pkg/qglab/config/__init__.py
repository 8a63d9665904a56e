from .run_config import (
    ModelConfig, GridConfig, OutputConfig, SpectrumRun, SolveRun, VerifyRun, ConserveRun, ModonRun, TransformRun,
    SimulateRun, load_config, validate_config,
)

__all__ = [
    "ModelConfig",
    "GridConfig",
    "OutputConfig",
    "SpectrumRun",
    "SolveRun",
    "VerifyRun",
    "ConserveRun",
    "ModonRun",
    "TransformRun",
    "SimulateRun",
    "load_config",
    "validate_config",
]
