"""
把校验后的配置对象转换为模型参数、解场、网格和变换
"""

from pathlib import Path
from typing import Optional, Tuple, List

import numpy as np

from qglab import LOG_LEVEL
from qglab.config.run_config import (
    ModelConfig, GridConfig, BoostConfig, TransformConfig, GeneratorConfig, ModonFamily, AffineFamily,
    HerglotzFamily, BBMFamily, KGFamily, CoupledFamily, CoupledEigenFamily, LinearShearFamily, VelocityOnlyTFamily,
    SuperposeFamily,
)
from qglab.model.layers import LayerStack, CouplingMatrix, ModelParameters
from qglab.shared.exceptions import ConfigException
from qglab.shared.utils import get_logger, configure_logger
from qglab.solutions import (
    SolutionField, ModeAtom, PlaneAtom, RadialAtom, HerglotzSpec, BoostSpec, BBMWaveSpec, CoupledShiftSpec,
    ModonSpec, affine_stationary, herglotz_solution, superpose, boost, kg_barotropic_mode, bbm_wave,
    coupled_shift_solution, coupled_shift_degenerate, coupled_eigen_solution, linear_shear_solution,
    velocity_only_t_solution, modon_from_matrices, lr_barotropic_solve, shared_basis_solve, modon_newton,
    assemble_modon,
)
from qglab.symmetry import PointSymmetry, EquivalenceTransform, SymmetryGenerator, P_t, P_y, P_x, J, Z
from qglab.verify import GridSpec

logger = get_logger(__name__)
configure_logger(log_filename="qglab_config.log")
logger.setLevel(LOG_LEVEL)


def _complex(amplitude: float, phase: float) -> complex:
    return complex(amplitude * np.exp(1j * phase))


def build_model(config: ModelConfig) -> Tuple[ModelParameters, Optional[LayerStack]]:
    """返回 (模型参数, 层参数)；直接给出耦合矩阵时层参数为 None"""
    if config.coupling is not None:
        c = config.coupling
        if len(c.sub) != len(c.sup):
            raise ConfigException("sub 与 sup 的长度必须一致", {"sub": c.sub, "sup": c.sup})
        return ModelParameters(F=CouplingMatrix.from_offdiagonals(c.sub, c.sup), beta=c.beta), None
    if config.file is not None:
        path = Path(config.file)
        if not path.exists():
            raise ConfigException(f"层参数文件不存在: {path}", {"path": str(path)})
        stack = LayerStack.from_json(path)
    else:
        stack = LayerStack.from_dict(config.stack.model_dump(exclude_none=True))
    return ModelParameters.from_stack(stack), stack


def build_grid(config: GridConfig, t: Optional[float] = None) -> GridSpec:
    return GridSpec(x0=config.x0, y0=config.y0, Lx=config.Lx, Ly=config.Ly, Nx=config.Nx, Ny=config.Ny,
                    t=config.t if t is None else t)


def build_boost(config: Optional[BoostConfig]) -> Optional[BoostSpec]:
    if config is None:
        return None
    if config.gamma is not None:
        return BoostSpec(gamma=config.gamma)
    return BoostSpec(h=tuple(config.h))


########################################################################################################################
########################################################################################################################
def _affine(model: ModelParameters, c: AffineFamily) -> SolutionField:
    atoms = [ModeAtom(mode=a.mode, kind=a.kind, amplitude=_complex(a.amplitude, a.phase), angle=a.angle,
                      order=a.order, bessel=a.bessel, center=tuple(a.center), r_min=a.r_min) for a in c.atoms]
    return affine_stationary(model, c.B, atoms, sigma=(c.sigma1, c.sigma2), gamma=c.gamma,
                             include_background=c.include_background)


def _herglotz(model: ModelParameters, c: HerglotzFamily) -> SolutionField:
    plane = tuple(PlaneAtom(mode=p.mode, amplitude=_complex(p.amplitude, p.phase), angle=p.angle) for p in c.plane)
    radial = []
    for r in c.radial:
        if r.psi0 is not None:
            radial.append(RadialAtom.uniform(r.mode, r.psi0, center=tuple(r.center)))
        else:
            radial.append(RadialAtom(mode=r.mode, amplitude=_complex(r.amplitude, r.phase), order=r.order,
                                     center=tuple(r.center)))
    spec = HerglotzSpec(B=tuple(c.B), plane_atoms=plane, radial_atoms=tuple(radial), sigma1=c.sigma1,
                        sigma2=c.sigma2, include_background=c.include_background)
    return herglotz_solution(model, spec)


def _coupled(model: ModelParameters, c: CoupledFamily) -> SolutionField:
    spec = CoupledShiftSpec(c=tuple(c.c), mu=complex(*c.mu), chi=c.chi, A=tuple(complex(*a) for a in c.A))
    if c.degenerate:
        return coupled_shift_degenerate(model, spec, gauge=tuple(c.gauge))
    return coupled_shift_solution(model, spec)


def build_modon(model: ModelParameters, c: ModonFamily) -> ModonSpec:
    """按 solver 求出偶极涡参数"""
    center = tuple(c.center)
    if c.solver == "lr":
        return lr_barotropic_solve(model, r0=c.r0, rho_tilde=c.rho_tilde, rho_hat=c.rho_hat, branch=c.branch,
                                   center=center)
    if c.solver == "shared":
        return shared_basis_solve(model, c.r0, c.rho, assignment=c.assignment, center=center)
    if c.solver == "file":
        path = Path(c.spec_file)
        if not path.exists():
            raise ConfigException(f"偶极涡参数文件不存在: {path}", {"path": str(path)})
        return ModonSpec.from_json(path)
    start = modon_from_matrices(model, c.r0, c.Btilde, c.Bhat, center=center)
    if c.newton_free:
        return modon_newton(model, start, c.newton_free)
    return start


def build_solution(model: ModelParameters, config) -> SolutionField:
    """按 family 分发到各解族的构造函数"""
    if isinstance(config, AffineFamily):
        return _affine(model, config)
    if isinstance(config, HerglotzFamily):
        return _herglotz(model, config)
    if isinstance(config, BBMFamily):
        return bbm_wave(model, BBMWaveSpec(chi=config.chi, mode=config.mode, alpha=config.alpha, delta=config.delta,
                                           root=config.root, amplitude=config.amplitude, phase=config.phase))
    if isinstance(config, KGFamily):
        return kg_barotropic_mode(model, config.chi, config.k, config.amplitude, config.phase)
    if isinstance(config, CoupledFamily):
        return _coupled(model, config)
    if isinstance(config, CoupledEigenFamily):
        amplitudes = {int(k): complex(*v) for k, v in config.amplitudes.items()}
        return coupled_eigen_solution(model, config.c, config.chi, complex(*config.mu), config.nu, amplitudes)
    if isinstance(config, LinearShearFamily):
        return linear_shear_solution(model, config.b, config.c, chi=tuple(config.chi), g=tuple(config.g))
    if isinstance(config, VelocityOnlyTFamily):
        return velocity_only_t_solution(model, config.c, config.b, zeta=tuple(config.zeta), g=tuple(config.g),
                                        shift=config.shift)
    if isinstance(config, ModonFamily):
        return assemble_modon(model, build_modon(model, config))
    if isinstance(config, SuperposeFamily):
        return superpose([build_solution(model, part) for part in config.parts])
    raise ConfigException(f"未知的解族: {getattr(config, 'family', None)}", {})


def build_field(model: ModelParameters, solution, boost_config: Optional[BoostConfig]) -> SolutionField:
    field_ = build_solution(model, solution)
    spec = build_boost(boost_config)
    if spec is not None:
        field_ = boost(field_, spec)
    return field_


########################################################################################################################
########################################################################################################################
def build_transform(config: TransformConfig):
    """返回 PointSymmetry 或 EquivalenceTransform"""
    psi = None if config.Psi is None else tuple(config.Psi)
    if config.kind == "point":
        return PointSymmetry(eps1=config.eps1, eps2=config.eps2, T0=config.T0, Y0=config.Y0, h=list(config.h),
                             g=list(config.g), Psi=psi)
    return EquivalenceTransform(T1=config.T1, X1=config.X1, eps=config.eps, T0=config.T0, Y0=config.Y0,
                                h=list(config.h), g=list(config.g), Psi=psi)


def build_generators(configs: List[GeneratorConfig], m: int) -> List[SymmetryGenerator]:
    out = []
    for c in configs:
        if c.kind == "Pt":
            out.append(P_t())
        elif c.kind == "Py":
            out.append(P_y())
        elif c.kind == "Px":
            out.append(P_x(list(c.payload)))
        elif c.kind == "J":
            out.append(J(m, c.layer))
        else:
            out.append(Z(list(c.payload)))
    return out
