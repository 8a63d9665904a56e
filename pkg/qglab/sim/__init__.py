from .spectral_model import (
    SimState, SpectralOperators, Diagnostics, init_from_solution, invert_pv, apply_forward, step_rk4, run, energy,
    enstrophy, reference_drift, phase_speed, wrap_error,
)

__all__ = [
    "SimState",
    "SpectralOperators",
    "Diagnostics",
    "init_from_solution",
    "invert_pv",
    "apply_forward",
    "step_rk4",
    "run",
    "energy",
    "enstrophy",
    "reference_drift",
    "phase_speed",
    "wrap_error",
]
