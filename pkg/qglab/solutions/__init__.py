from .fields import (
    Domain, Plane, Annulus, HalfPlane, SolutionField, ZeroField, ExpTerm, PolyTerm, RadialTerm, CompositeField,
    ScaledField, ComposedField, PiecewiseSolution,
)
from .families import (
    ModeAtom, PlaneAtom, RadialAtom, HerglotzSpec, BoostSpec, BBMWaveSpec, CoupledShiftSpec, affine_stationary,
    herglotz_solution, background_flow, superpose, boost, kg_barotropic_mode, bbm_dispersion_roots, bbm_wave,
    coupled_shift_solution, coupled_shift_degenerate, coupled_eigen_modes, coupled_eigen_solution,
    linear_shear_solution, velocity_only_t_solution,
)
from .modon import (
    ModonSpec, modon_from_matrices, matching_residual, lr_barotropic_solve, shared_basis_solve, modon_newton,
    assemble_modon,
)

__all__ = [
    "Domain",
    "Plane",
    "Annulus",
    "HalfPlane",
    "SolutionField",
    "ZeroField",
    "ExpTerm",
    "PolyTerm",
    "RadialTerm",
    "CompositeField",
    "ScaledField",
    "ComposedField",
    "PiecewiseSolution",
    "ModeAtom",
    "PlaneAtom",
    "RadialAtom",
    "HerglotzSpec",
    "BoostSpec",
    "BBMWaveSpec",
    "CoupledShiftSpec",
    "affine_stationary",
    "herglotz_solution",
    "background_flow",
    "superpose",
    "boost",
    "kg_barotropic_mode",
    "bbm_dispersion_roots",
    "bbm_wave",
    "coupled_shift_solution",
    "coupled_shift_degenerate",
    "coupled_eigen_modes",
    "coupled_eigen_solution",
    "linear_shear_solution",
    "velocity_only_t_solution",
    "ModonSpec",
    "modon_from_matrices",
    "matching_residual",
    "lr_barotropic_solve",
    "shared_basis_solve",
    "modon_newton",
    "assemble_modon",
]
