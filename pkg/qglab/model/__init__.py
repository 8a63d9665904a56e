from .layers import (
    LayerStack, CouplingMatrix, SpectralData, ModelParameters, build_coupling, symmetrize, spectral, uniform_spectrum,
    pseudo_inverse, weighted_inner, char_poly, gershgorin_bound, moore_penrose_check,
)
from .specfun import BesselKind, bessel, bessel_ratio, bessel_zeros, cylinder

__all__ = [
    "LayerStack",
    "CouplingMatrix",
    "SpectralData",
    "ModelParameters",
    "build_coupling",
    "symmetrize",
    "spectral",
    "uniform_spectrum",
    "pseudo_inverse",
    "weighted_inner",
    "char_poly",
    "gershgorin_bound",
    "moore_penrose_check",
    "BesselKind",
    "bessel",
    "bessel_ratio",
    "bessel_zeros",
    "cylinder",
]
