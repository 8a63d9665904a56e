"""
守恒量的网格积分：能量、广义纬向动量、广义环量和位涡拟能类 Casimir
"""

from enum import Enum
from typing import Optional, Union, List

import numpy as np
from pydantic import BaseModel, Field
from scipy.integrate import trapezoid

from qglab import LOG_LEVEL
from qglab.model.layers import ModelParameters, LayerStack, spectral
from qglab.shared.exceptions import ParameterException
from qglab.shared.utils import get_logger, configure_logger
from qglab.solutions.fields import SolutionField, as_poly
from qglab.verify.grid import GridSpec, GridField, sample_rows
from qglab.verify.residual import potential_vorticity_grid, fd_derivative

logger = get_logger(__name__)
configure_logger(log_filename="qglab_verify.log")
logger.setLevel(LOG_LEVEL)


class Quantity(Enum):
    """守恒量种类"""
    ENERGY = 'energy'
    HAMILTONIAN = 'hamiltonian'
    MOMENTUM = 'momentum'
    CIRCULATION = 'circulation'
    CASIMIR = 'casimir'


class Casimir(Enum):
    """Casimir 密度 Φ(q)"""
    IDENTITY = 'identity'
    SQUARE = 'square'


class ConservedValue(BaseModel):
    """一个守恒量的积分值"""
    quantity: str = Field(description="守恒量种类")
    value: float = Field(description="积分值；有量纲时乘以 ρ0·H1")
    t: float = Field(description="求值时刻 [s]")
    dimensional: bool = Field(default=False, description="是否使用有量纲权重 Ŵ")
    layer: Optional[int] = Field(default=None, description="Casimir 所在层，None 表示按权重求和")
    weight: List[float] = Field(default_factory=lambda: [1.0], description="时间多项式 χ 或 κ 的系数")
    one_sided: bool = Field(default=False, description="网格边界处是否用了单侧差分")


def _field_arrays(model: ModelParameters, field_: SolutionField, spec: GridSpec):
    def row(t, x, y):
        jet = field_.jet(t, x, y, 2)
        q = (jet[(0, 2, 0)] + jet[(0, 0, 2)] + jet[(0, 0, 0)] @ model.F.dense().T
             + model.beta * np.asarray(y)[..., None])
        return np.stack([jet[(0, 0, 0)], jet[(0, 1, 0)], jet[(0, 0, 1)], q], axis=-1)

    stacked = sample_rows(row, spec)
    return stacked[..., 0], stacked[..., 1], stacked[..., 2], stacked[..., 3], False


def _grid_arrays(model: ModelParameters, grid: GridField):
    spec = grid.spec
    q, one_sided = potential_vorticity_grid(model, grid)
    return (grid.data, fd_derivative(grid.data, spec.dx, 0, 1), fd_derivative(grid.data, spec.dy, 1, 1), q,
            one_sided)


def integrate(density: np.ndarray, spec: GridSpec) -> float:
    """二维积分：非周期网格用梯形公式，周期网格用矩形公式"""
    if spec.periodic:
        return float(np.sum(density) * spec.dx * spec.dy)
    return float(trapezoid(trapezoid(density, dx=spec.dy, axis=1), dx=spec.dx, axis=0))


def conserved(model: ModelParameters, source: Union[SolutionField, GridField], quantity: str,
              spec: Optional[GridSpec] = None, weight=None, casimir: str = Casimir.IDENTITY.value,
              layer: Optional[int] = None, dimensional: bool = False,
              stack: Optional[LayerStack] = None) -> ConservedValue:
    """在网格区域上积分一个守恒量的密度

    :param source: 解场（配合 spec 使用解析导数）或网格场（四阶差分）
    :param weight: 动量的 χ(t) 或环量的 κ(t)，多项式系数
    :param casimir: identity 或 square（即 q²/2）
    :param dimensional: 为 True 时以 Ŵ = diag(H)/H1 加权并乘以 ρ0·H1，需要 stack
    """
    quantity = Quantity(quantity)
    if isinstance(source, GridField):
        spec = source.spec
        psi, psi_x, psi_y, q, one_sided = _grid_arrays(model, source)
    else:
        if spec is None:
            raise ParameterException("解场积分需要给出网格", {"quantity": quantity.value})
        psi, psi_x, psi_y, q, one_sided = _field_arrays(model, source, spec)

    if dimensional:
        if stack is None:
            raise ParameterException("有量纲守恒量需要层参数", {"quantity": quantity.value})
        W = stack.dimensional_weights()
        factor = stack.rho0 * stack.H[0]
    else:
        W = spectral(model.F).weights
        factor = 1.0
    w_t = float(as_poly(weight if weight is not None else 1.0)(spec.t))

    if quantity in (Quantity.ENERGY, Quantity.HAMILTONIAN):
        F_psi = psi @ model.F.dense().T
        density = 0.5 * ((psi_x ** 2 + psi_y ** 2) @ W - (psi * F_psi) @ W)
    elif quantity == Quantity.MOMENTUM:
        density = w_t * (psi_y @ W)
    elif quantity == Quantity.CIRCULATION:
        density = w_t * (q @ W)
    else:
        phi = q if Casimir(casimir) == Casimir.IDENTITY else 0.5 * q ** 2
        if layer is None:
            density = phi @ W
        else:
            if not 0 <= layer < model.m:
                raise ParameterException("层下标越界", {"layer": layer, "m": model.m})
            density = phi[..., layer]

    value = factor * integrate(density, spec)
    logger.debug(f"守恒量 {quantity.value} = {value:.6e} (t={spec.t})")
    coef = as_poly(weight if weight is not None else 1.0).coef.tolist()
    return ConservedValue(quantity=quantity.value, value=value, t=spec.t, dimensional=dimensional, layer=layer,
                          weight=coef, one_sided=one_sided)
