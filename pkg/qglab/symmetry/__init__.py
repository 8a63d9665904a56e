from .transforms import (
    EquivalenceTransform, PointSymmetry, time_shift, x_shift, y_shift, layer_shift, gauge_shift, involution_tx,
    involution_ypsi, scaling, apply_equivalence, apply_point_symmetry,
)
from .generators import (
    GeneratorKind, SymmetryGenerator, P_t, P_x, P_y, J, Z, bracket, commutator_check, characteristic,
    CharacteristicField, infinitesimal_check,
)

__all__ = [
    "EquivalenceTransform",
    "PointSymmetry",
    "time_shift",
    "x_shift",
    "y_shift",
    "layer_shift",
    "gauge_shift",
    "involution_tx",
    "involution_ypsi",
    "scaling",
    "apply_equivalence",
    "apply_point_symmetry",
    "GeneratorKind",
    "SymmetryGenerator",
    "P_t",
    "P_x",
    "P_y",
    "J",
    "Z",
    "bracket",
    "commutator_check",
    "characteristic",
    "CharacteristicField",
    "infinitesimal_check",
]
