"""
点对称伪群与类等价变换：把解场和方程参数一起变换。

等价变换 t̃ = T1·t + T0，x̃ = X1·x + h(t)，ỹ = ε·X1·y + Y0，
ψ̃ = ε(X1²/T1)ψ − ε(X1/T1)h_t(t)y + g(t) + Ψ，参数 f̃ = f/X1²，β̃ = β/(T1·X1)。
点对称是 T1 = X1 = ε1、ε = ε1ε2 的特例
"""

from dataclasses import dataclass, field
from typing import Dict, Any, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial

from qglab import LOG_LEVEL
from qglab.model.layers import ModelParameters, CouplingMatrix
from qglab.shared.exceptions import ParameterException
from qglab.shared.utils import get_logger, configure_logger
from qglab.solutions.fields import SolutionField, ComposedField, PolyTerm, as_poly

logger = get_logger(__name__)
configure_logger(log_filename="qglab_symmetry.log")
logger.setLevel(LOG_LEVEL)

MAX_DEGREE = 6
PolyLike = Union[Polynomial, Sequence[float], float, None]


def _poly(p: PolyLike, name: str) -> Polynomial:
    p = as_poly(p)
    if p.degree() > MAX_DEGREE:
        raise ParameterException(f"{name} 的次数不能超过 {MAX_DEGREE}", {name: p.coef.tolist()})
    return p


def _sign(v: int, name: str) -> int:
    if v not in (-1, 1):
        raise ParameterException(f"{name} 只能取 ±1", {name: v})
    return int(v)


@dataclass(frozen=True, eq=False)
class EquivalenceTransform:
    """类等价变换的参数"""
    T1: float = 1.0
    X1: float = 1.0
    eps: int = 1
    T0: float = 0.0
    Y0: float = 0.0
    h: Polynomial = field(default_factory=lambda: Polynomial([0.0]))
    g: Polynomial = field(default_factory=lambda: Polynomial([0.0]))
    Psi: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.T1 == 0 or self.X1 == 0:
            raise ParameterException("T1 与 X1 不能为零", {"T1": self.T1, "X1": self.X1})
        _sign(self.eps, "eps")
        object.__setattr__(self, "h", _poly(self.h, "h"))
        object.__setattr__(self, "g", _poly(self.g, "g"))
        if self.Psi is not None:
            object.__setattr__(self, "Psi", tuple(float(v) for v in self.Psi))

    def psi_vector(self, m: int) -> np.ndarray:
        if self.Psi is None:
            return np.zeros(m)
        if len(self.Psi) != m:
            raise ParameterException("Psi 的维数与层数不一致", {"Psi": list(self.Psi), "m": m})
        return np.asarray(self.Psi)

    @property
    def amplitude(self) -> float:
        return self.eps * self.X1 ** 2 / self.T1

    def then(self, second: "EquivalenceTransform") -> "EquivalenceTransform":
        """先作用 self 再作用 second 的复合"""
        a, b = self, second
        inner_t = Polynomial([a.T0, a.T1])
        scale_b = b.eps * b.X1 ** 2 / b.T1
        h = b.X1 * a.h + b.h(inner_t)
        g = scale_b * a.g - b.eps * (b.X1 / b.T1) * a.Y0 * b.h.deriv()(inner_t) + b.g(inner_t)
        psi = None
        if a.Psi is not None or b.Psi is not None:
            m = len(a.Psi if a.Psi is not None else b.Psi)
            psi = tuple(scale_b * a.psi_vector(m) + b.psi_vector(m))
        return EquivalenceTransform(T1=b.T1 * a.T1, X1=a.X1 * b.X1, eps=a.eps * b.eps, T0=b.T1 * a.T0 + b.T0,
                                    Y0=b.eps * b.X1 * a.Y0 + b.Y0, h=h.trim(), g=g.trim(), Psi=psi)

    def inverse(self) -> "EquivalenceTransform":
        inner_t = Polynomial([-self.T0 / self.T1, 1.0 / self.T1])
        h = -self.h(inner_t) / self.X1
        g = (-self.eps * (self.T1 / self.X1 ** 2) * self.g(inner_t)
             - self.eps * self.Y0 * self.h.deriv()(inner_t) / self.X1 ** 2)
        psi = None if self.Psi is None else tuple(-self.eps * (self.T1 / self.X1 ** 2) * np.asarray(self.Psi))
        return EquivalenceTransform(T1=1.0 / self.T1, X1=1.0 / self.X1, eps=self.eps, T0=-self.T0 / self.T1,
                                    Y0=-self.eps * self.Y0 / self.X1, h=h.trim(), g=g.trim(), Psi=psi)

    def map_parameters(self, model: ModelParameters) -> ModelParameters:
        """f̃ = f/X1²，β̃ = β/(T1·X1)；物理约定下要求 T1·X1 > 0"""
        if self.T1 * self.X1 <= 0:
            raise ParameterException("物理约定 β > 0 下要求 T1·X1 > 0", {"T1": self.T1, "X1": self.X1})
        s = 1.0 / self.X1 ** 2
        F = CouplingMatrix(sub=model.F.sub * s, sup=model.F.sup * s, diag=model.F.diag * s)
        return ModelParameters(F=F, beta=model.beta / (self.T1 * self.X1))

    def apply_point(self, t, x, y, psi) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """把点 (t, x, y, ψ) 映到变换后的点"""
        t, x, y = (np.asarray(v, dtype=float) for v in (t, x, y))
        psi = np.asarray(psi, dtype=float)
        ones = np.ones(psi.shape[-1])
        shift = (-self.eps * (self.X1 / self.T1) * self.h.deriv()(t) * y + self.g(t))[..., None] * ones
        return (self.T1 * t + self.T0, self.X1 * x + self.h(t), self.eps * self.X1 * y + self.Y0,
                self.amplitude * psi + shift + self.psi_vector(psi.shape[-1]))

    def is_identity(self) -> bool:
        psi_zero = self.Psi is None or not np.any(self.Psi)
        return (self.T1 == 1 and self.X1 == 1 and self.eps == 1 and self.T0 == 0 and self.Y0 == 0
                and not np.any(self.h.coef) and not np.any(self.g.coef) and psi_zero)

    def to_dict(self) -> Dict[str, Any]:
        return {"T1": self.T1, "X1": self.X1, "eps": self.eps, "T0": self.T0, "Y0": self.Y0,
                "h": self.h.coef.tolist(), "g": self.g.coef.tolist(),
                "Psi": None if self.Psi is None else list(self.Psi)}


@dataclass(frozen=True, eq=False)
class PointSymmetry:
    """点对称伪群的元素"""
    eps1: int = 1
    eps2: int = 1
    T0: float = 0.0
    Y0: float = 0.0
    h: Polynomial = field(default_factory=lambda: Polynomial([0.0]))
    g: Polynomial = field(default_factory=lambda: Polynomial([0.0]))
    Psi: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        _sign(self.eps1, "eps1")
        _sign(self.eps2, "eps2")
        object.__setattr__(self, "h", _poly(self.h, "h"))
        object.__setattr__(self, "g", _poly(self.g, "g"))
        if self.Psi is not None:
            object.__setattr__(self, "Psi", tuple(float(v) for v in self.Psi))

    def to_equivalence(self) -> EquivalenceTransform:
        return EquivalenceTransform(T1=float(self.eps1), X1=float(self.eps1), eps=self.eps1 * self.eps2,
                                    T0=self.T0, Y0=self.Y0, h=self.h, g=self.g, Psi=self.Psi)

    @classmethod
    def from_equivalence(cls, e: EquivalenceTransform) -> "PointSymmetry":
        if abs(e.T1) != 1 or e.X1 != e.T1:
            raise ParameterException("只有 T1 = X1 = ±1 的等价变换是点对称", {"T1": e.T1, "X1": e.X1})
        eps1 = int(e.T1)
        return cls(eps1=eps1, eps2=e.eps * eps1, T0=e.T0, Y0=e.Y0, h=e.h, g=e.g, Psi=e.Psi)

    def then(self, second: "PointSymmetry") -> "PointSymmetry":
        return PointSymmetry.from_equivalence(self.to_equivalence().then(second.to_equivalence()))

    def inverse(self) -> "PointSymmetry":
        return PointSymmetry.from_equivalence(self.to_equivalence().inverse())

    def apply_point(self, t, x, y, psi):
        return self.to_equivalence().apply_point(t, x, y, psi)

    def to_dict(self) -> Dict[str, Any]:
        return {"eps1": self.eps1, "eps2": self.eps2, "T0": self.T0, "Y0": self.Y0, "h": self.h.coef.tolist(),
                "g": self.g.coef.tolist(), "Psi": None if self.Psi is None else list(self.Psi)}


########################################################################################################################
########################################################################################################################
def time_shift(eps: float) -> PointSymmetry:
    """𝒫ᵗ(ε)：t → t + ε"""
    return PointSymmetry(T0=eps)


def x_shift(h: PolyLike) -> PointSymmetry:
    """𝒫ˣ(h)：x → x + h(t)，ψ → ψ − h_t y 1̄"""
    return PointSymmetry(h=as_poly(h))


def y_shift(eps: float) -> PointSymmetry:
    """𝒫ʸ(ε)：y → y + ε"""
    return PointSymmetry(Y0=eps)


def layer_shift(m: int, i: int, eps: float) -> PointSymmetry:
    """𝒥ⁱ(ε)：ψ^i → ψ^i + ε"""
    if not 0 <= i < m:
        raise ParameterException("层下标越界", {"i": i, "m": m})
    psi = np.zeros(m)
    psi[i] = eps
    return PointSymmetry(Psi=tuple(psi))


def gauge_shift(g: PolyLike) -> PointSymmetry:
    """𝒵(g)：ψ → ψ + g(t)1̄"""
    return PointSymmetry(g=as_poly(g))


def involution_tx() -> PointSymmetry:
    """(t, x) → (−t, −x)"""
    return PointSymmetry(eps1=-1)


def involution_ypsi() -> PointSymmetry:
    """(y, ψ) → (−y, −ψ)"""
    return PointSymmetry(eps2=-1)


def scaling(T1: float, X1: float, eps: int = 1) -> EquivalenceTransform:
    return EquivalenceTransform(T1=T1, X1=X1, eps=eps)


########################################################################################################################
########################################################################################################################
def _transformed_field(field_: SolutionField, e: EquivalenceTransform, tags: Dict[str, Any]) -> ComposedField:
    m = field_.m
    ones = np.ones(m)
    shear = -e.eps * (e.X1 / e.T1) * e.h.deriv()
    additive = (PolyTerm.from_time_polys({(0, 1): shear, (0, 0): e.g}, ones)
                + PolyTerm.monomial(0, 0, 0, e.psi_vector(m)))
    info = {"family": "transformed", "base": field_.tags.get("family"), "superposable": False}
    info.update(tags)
    return ComposedField(field_, T1=e.T1, T0=e.T0, X1=e.X1, h=e.h, ys=e.eps * e.X1, Y0=e.Y0,
                         amplitude=e.amplitude, additive=additive, tags=info)


def apply_equivalence(model: ModelParameters, field_: SolutionField,
                      e: EquivalenceTransform) -> Tuple[ModelParameters, SolutionField]:
    """同时变换方程参数和解：新解满足新参数下的方程"""
    new_model = e.map_parameters(model)
    if e.is_identity():
        return new_model, field_
    logger.info(f"等价变换: T1={e.T1}, X1={e.X1}, ε={e.eps}, β → {new_model.beta:.6g}")
    return new_model, _transformed_field(field_, e, {"equivalence": e.to_dict()})


def apply_point_symmetry(field_: SolutionField, s: PointSymmetry) -> SolutionField:
    """点对称把解映为同一方程的解"""
    e = s.to_equivalence()
    if e.is_identity():
        return field_
    return _transformed_field(field_, e, {"symmetry": s.to_dict()})
