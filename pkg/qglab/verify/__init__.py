from .grid import GridSpec, GridField, sample_field
from .residual import ResidualReport, potential_vorticity, potential_vorticity_grid, pointwise_residual, residual
from .conserved import Quantity, Casimir, ConservedValue, conserved
from .interface import InterfaceReport, interface_check

__all__ = [
    "GridSpec",
    "GridField",
    "sample_field",
    "ResidualReport",
    "potential_vorticity",
    "potential_vorticity_grid",
    "pointwise_residual",
    "residual",
    "Quantity",
    "Casimir",
    "ConservedValue",
    "conserved",
    "InterfaceReport",
    "interface_check",
]
