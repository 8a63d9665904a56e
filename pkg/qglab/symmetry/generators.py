"""
点对称代数的生成元：𝒫ᵗ、𝒫ʸ、𝒫ˣ(χ)、𝒥ⁱ、𝒵(κ)。
提供向量场、单参数流、特征 Q = η − τψ_t − ξˣψ_x − ξʸψ_y、李括号，以及两个数值见证：
流的交换子与括号表的比较，和沿特征方向扰动精确解时残差的 ε 阶
"""

from dataclasses import dataclass
from enum import Enum
from math import comb
from typing import Dict, Any, Optional, List, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, Field

from qglab import LOG_LEVEL
from qglab.model.layers import ModelParameters
from qglab.shared.exceptions import ParameterException, ToleranceException
from qglab.shared.utils import get_logger, configure_logger
from qglab.solutions.fields import SolutionField, PolyTerm, Jet, multi_indices, broadcast_coords, as_poly
from qglab.symmetry.transforms import (PointSymmetry, MAX_DEGREE, time_shift, x_shift, y_shift, layer_shift,
                                       gauge_shift)
from qglab.verify.grid import GridSpec
from qglab.verify.residual import residual_terms, residual_scale, JET_TOLERANCE

logger = get_logger(__name__)
configure_logger(log_filename="qglab_symmetry.log")
logger.setLevel(LOG_LEVEL)

EXACT_DEFECT = 1e-12
DEFAULT_EPS = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)


class GeneratorKind(Enum):
    """生成元种类"""
    PT = 'Pt'
    PY = 'Py'
    PX = 'Px'
    J = 'J'
    Z = 'Z'


@dataclass(frozen=True, eq=False)
class SymmetryGenerator:
    """生成元；Px、Z 的载荷是 t 的多项式，J 的载荷是层下标"""
    kind: GeneratorKind
    payload: Union[Polynomial, int, None] = None
    m: Optional[int] = None

    def __post_init__(self):
        kind = GeneratorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (GeneratorKind.PX, GeneratorKind.Z):
            p = as_poly(self.payload if self.payload is not None else 1.0)
            if p.degree() > MAX_DEGREE:
                raise ParameterException(f"载荷多项式次数不能超过 {MAX_DEGREE}", {"payload": p.coef.tolist()})
            object.__setattr__(self, "payload", p)
        elif kind == GeneratorKind.J:
            if self.m is None or not isinstance(self.payload, (int, np.integer)) or not 0 <= self.payload < self.m:
                raise ParameterException("𝒥 需要层数 m 和层下标 0 ≤ i < m", {"payload": self.payload, "m": self.m})
            object.__setattr__(self, "payload", int(self.payload))

    @property
    def poly(self) -> Polynomial:
        return self.payload

    def is_zero(self) -> bool:
        return self.kind in (GeneratorKind.PX, GeneratorKind.Z) and not np.any(self.poly.coef)

    def vector_field(self, t, x, y, m: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(τ, ξˣ, ξʸ, η)，η 的形状为 广播形状 + (m,)"""
        t, x, y = broadcast_coords(t, x, y)
        zero = np.zeros(x.shape)
        eta = np.zeros(x.shape + (m,))
        tau, xi_x, xi_y = zero.copy(), zero.copy(), zero.copy()
        if self.kind == GeneratorKind.PT:
            tau += 1.0
        elif self.kind == GeneratorKind.PY:
            xi_y += 1.0
        elif self.kind == GeneratorKind.PX:
            xi_x += self.poly(t)
            eta += (-y * self.poly.deriv()(t))[..., None]
        elif self.kind == GeneratorKind.J:
            eta[..., self.payload] = 1.0
        else:
            eta += self.poly(t)[..., None]
        return tau, xi_x, xi_y, eta

    def flow(self, eps: float, m: Optional[int] = None) -> PointSymmetry:
        """exp(ε·X)"""
        if self.kind == GeneratorKind.PT:
            return time_shift(eps)
        if self.kind == GeneratorKind.PY:
            return y_shift(eps)
        if self.kind == GeneratorKind.PX:
            return x_shift(eps * self.poly)
        if self.kind == GeneratorKind.J:
            return layer_shift(self.m, self.payload, eps)
        return gauge_shift(eps * self.poly)

    def to_dict(self) -> Dict[str, Any]:
        payload = self.payload.coef.tolist() if isinstance(self.payload, Polynomial) else self.payload
        return {"kind": self.kind.value, "payload": payload}


def P_t() -> SymmetryGenerator:
    return SymmetryGenerator(GeneratorKind.PT)


def P_y() -> SymmetryGenerator:
    return SymmetryGenerator(GeneratorKind.PY)


def P_x(chi) -> SymmetryGenerator:
    return SymmetryGenerator(GeneratorKind.PX, as_poly(chi))


def J(m: int, i: int) -> SymmetryGenerator:
    return SymmetryGenerator(GeneratorKind.J, i, m)


def Z(kappa) -> SymmetryGenerator:
    return SymmetryGenerator(GeneratorKind.Z, as_poly(kappa))


def bracket(a: SymmetryGenerator, b: SymmetryGenerator) -> Optional[SymmetryGenerator]:
    """李括号 [a, b]，为零时返回 None"""
    pair = (a.kind, b.kind)
    if pair == (GeneratorKind.PT, GeneratorKind.PX):
        out = P_x(b.poly.deriv())
    elif pair == (GeneratorKind.PX, GeneratorKind.PT):
        out = P_x(-a.poly.deriv())
    elif pair == (GeneratorKind.PT, GeneratorKind.Z):
        out = Z(b.poly.deriv())
    elif pair == (GeneratorKind.Z, GeneratorKind.PT):
        out = Z(-a.poly.deriv())
    elif pair == (GeneratorKind.PX, GeneratorKind.PY):
        out = Z(a.poly.deriv())
    elif pair == (GeneratorKind.PY, GeneratorKind.PX):
        out = Z(-b.poly.deriv())
    else:
        return None
    return None if out.is_zero() else out


def commutator_check(a: SymmetryGenerator, b: SymmetryGenerator, eps: float, t, x, y, psi) -> Dict[str, Any]:
    """依次作用 a(ε)、b(ε)、a(−ε)、b(−ε)，与 p + ε²[a,b](p) 比较"""
    psi = np.asarray(psi, dtype=float)
    m = psi.shape[-1]
    p = (np.asarray(t, dtype=float), np.asarray(x, dtype=float), np.asarray(y, dtype=float), psi)
    q = p
    for s in (a.flow(eps, m), b.flow(eps, m), a.flow(-eps, m), b.flow(-eps, m)):
        q = s.apply_point(*q)
    c = bracket(a, b)
    if c is None:
        expected = p
    else:
        tau, xi_x, xi_y, eta = c.vector_field(p[0], p[1], p[2], m)
        expected = (p[0] + eps ** 2 * tau, p[1] + eps ** 2 * xi_x, p[2] + eps ** 2 * xi_y, p[3] + eps ** 2 * eta)
    defect = max(float(np.max(np.abs(u - v))) for u, v in zip(q, expected))
    return {"bracket": None if c is None else c.to_dict(), "eps": eps, "defect": defect}


########################################################################################################################
########################################################################################################################
class CharacteristicField(SolutionField):
    """生成元在解上的特征 Q[ψ]，作为可求 jet 的场"""

    def __init__(self, gen: SymmetryGenerator, base: SolutionField):
        super().__init__(base.m, base.domain, {"family": "characteristic", "generator": gen.to_dict()})
        self.gen = gen
        self.base = base
        ones = np.ones(base.m)
        if gen.kind == GeneratorKind.J:
            self._poly_part = PolyTerm.monomial(0, 0, 0, np.eye(base.m)[gen.payload])
        elif gen.kind == GeneratorKind.Z:
            self._poly_part = PolyTerm.from_time_polys({(0, 0): gen.poly}, ones)
        elif gen.kind == GeneratorKind.PX:
            self._poly_part = PolyTerm.from_time_polys({(0, 1): -gen.poly.deriv()}, ones)
        else:
            self._poly_part = None

    def jet(self, t, x, y, order: int = 0) -> Jet:
        kind = self.gen.kind
        out = self._poly_part.jet(t, x, y, order) if self._poly_part is not None else None
        if kind in (GeneratorKind.J, GeneratorKind.Z):
            return out
        base = self.base.jet(t, x, y, order + 1)
        keys = multi_indices(order)
        if kind == GeneratorKind.PT:
            return {(a, b, c): -base[(a + 1, b, c)] for a, b, c in keys}
        if kind == GeneratorKind.PY:
            return {(a, b, c): -base[(a, b, c + 1)] for a, b, c in keys}
        t_arr = broadcast_coords(t, x, y)[0]
        derivs = [self.gen.poly.deriv(i)(t_arr)[..., None] for i in range(order + 1)]
        for a, b, c in keys:
            out[(a, b, c)] = out[(a, b, c)] - sum(comb(a, i) * derivs[i] * base[(a - i, b + 1, c)]
                                                  for i in range(a + 1))
        return out


def characteristic(gen: SymmetryGenerator, field_: SolutionField, t, x, y) -> np.ndarray:
    """Q[ψ] = η − τψ_t − ξˣψ_x − ξʸψ_y 在给定点的值"""
    jet = field_.jet(t, x, y, 1)
    tau, xi_x, xi_y, eta = gen.vector_field(t, x, y, field_.m)
    return eta - tau[..., None] * jet[(1, 0, 0)] - xi_x[..., None] * jet[(0, 1, 0)] - xi_y[..., None] * jet[(0, 0, 1)]


class InfinitesimalReport(BaseModel):
    """沿某方向扰动精确解后残差随 ε 的变化"""
    direction: Dict[str, Any] = Field(description="扰动方向")
    eps: List[float] = Field(description="扰动幅度")
    defects: List[float] = Field(description="max|R(ψ+εQ) − R(ψ)| / scale")
    order: float = Field(description="log 缺陷对 log ε 的斜率；精确轨道为 inf")
    exact: bool = Field(description="所有缺陷都在舍入水平")


def infinitesimal_check(model: ModelParameters, field_: SolutionField,
                        direction: Union[SymmetryGenerator, SolutionField], spec: GridSpec,
                        eps_factors: Sequence[float] = DEFAULT_EPS) -> InfinitesimalReport:
    """对称特征方向上的扰动只在 O(ε²) 改变残差，非对称方向为 O(ε)"""
    if len(eps_factors) < 2 or max(eps_factors) / min(eps_factors) < 100:
        raise ParameterException("ε 至少跨两个数量级", {"eps": list(eps_factors)})
    Q = CharacteristicField(direction, field_) if isinstance(direction, SymmetryGenerator) else direction
    X, Y = spec.mesh()
    mask = field_.domain.contains(spec.t, X, Y) & Q.domain.contains(spec.t, X, Y)
    t, x, y = np.full(int(mask.sum()), spec.t), X[mask], Y[mask]

    base = field_.jet(t, x, y, 3)
    dq = Q.jet(t, x, y, 3)
    ref = residual_terms(model, base)
    scale, rounding = residual_scale(ref)
    if scale > 0 and float(np.max(np.abs(ref["R"]))) / scale > max(JET_TOLERANCE, rounding):
        raise ToleranceException("基准解不是精确解", {"residual": float(np.max(np.abs(ref["R"]))) / scale})

    size_q = float(np.max(np.abs(dq[(0, 0, 0)])))
    size_psi = float(np.max(np.abs(base[(0, 0, 0)])))
    s = size_psi / size_q if size_q > 0 else 1.0
    eps = [s * e for e in eps_factors]
    defects = []
    for e in eps:
        moved = residual_terms(model, {k: base[k] + e * dq[k] for k in base})
        diff = float(np.max(np.abs(moved["R"] - ref["R"])))
        defects.append(diff / scale if scale > 0 else diff)

    exact = all(d <= EXACT_DEFECT for d in defects)
    if exact:
        order = float("inf")
    else:
        clipped = np.maximum(defects, EXACT_DEFECT)
        order = float(np.polyfit(np.log(eps), np.log(clipped), 1)[0])
    info = direction.to_dict() if isinstance(direction, SymmetryGenerator) else dict(Q.tags)
    logger.info(f"无穷小检查 {info}: 阶={order}")
    return InfinitesimalReport(direction=info, eps=eps, defects=defects, order=order, exact=exact)
