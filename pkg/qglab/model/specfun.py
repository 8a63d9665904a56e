"""
Bessel 族特殊函数：J_n, Y_n, I_n, K_n 及其导数、比值和零点，径向解族都从这里取值
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import special

from qglab import LOG_LEVEL
from qglab.shared.exceptions import DomainException, NumericalException, PoleException, ParameterException
from qglab.shared.utils import get_logger, configure_logger

logger = get_logger(__name__)
configure_logger(log_filename="qglab_model.log")
logger.setLevel(LOG_LEVEL)

ArrayLike = Union[float, np.ndarray]

MAX_ORDER = 20
# I_n 在此之后溢出 float64
I_OVERFLOW_X = 700.0
# J0/J1 极点判定距离
POLE_ATOL = 1e-10

_VALUE = {"J": special.jv, "Y": special.yv, "I": special.iv, "K": special.kv}
_DERIV = {"J": special.jvp, "Y": special.yvp, "I": special.ivp, "K": special.kvp}


@dataclass(frozen=True)
class BesselKind:
    """Bessel 函数种类与阶数"""
    kind: str
    order: int = 0

    def __post_init__(self):
        if self.kind not in _VALUE:
            raise ParameterException(f"未知的 Bessel 函数种类: {self.kind}，可用种类: J, Y, I, K")
        if not 0 <= int(self.order) <= MAX_ORDER or int(self.order) != self.order:
            raise ParameterException(f"Bessel 函数阶数必须是 0..{MAX_ORDER} 的整数", {"order": self.order})


def _check_argument(kind: str, x: np.ndarray) -> None:
    if kind in ("Y", "K"):
        if np.any(x <= 0):
            raise DomainException(f"{kind}_n 要求 x > 0", {"x_min": float(np.min(x))})
    elif np.any(x < 0):
        raise DomainException(f"{kind}_n 要求 x ≥ 0", {"x_min": float(np.min(x))})
    if kind == "I" and np.any(x > I_OVERFLOW_X):
        raise NumericalException(f"I_n 在 x > {I_OVERFLOW_X} 时溢出", {"x_max": float(np.max(x))})


def bessel(kind: BesselKind, x: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """返回 (Z_n(x), Z_n'(x))"""
    xa = np.asarray(x, dtype=float)
    _check_argument(kind.kind, xa)
    value = _VALUE[kind.kind](kind.order, xa)
    deriv = _DERIV[kind.kind](kind.order, xa)
    if np.ndim(x) == 0:
        return float(value), float(deriv)
    return value, deriv


def cylinder(kind: str, n: int, x: ArrayLike) -> np.ndarray:
    """任意整数阶（可为负）的柱函数值，不做定义域检查，供径向解的求导阶梯使用"""
    return _VALUE[kind](n, np.asarray(x, dtype=float))


def bessel_zeros(kind: str, order: int, count: int) -> np.ndarray:
    """J_n 或 Y_n 的前 count 个正零点"""
    if kind == "J":
        return special.jn_zeros(order, count)
    if kind == "Y":
        return special.yn_zeros(order, count)
    raise ParameterException(f"{kind}_n 没有实零点", {"kind": kind})


def bessel_ratio(pair: str, x: ArrayLike) -> ArrayLike:
    """J0/J1 或 K0/K1"""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise DomainException("比值要求 x > 0", {"x_min": float(np.min(xa))})
    if pair == "J0/J1":
        zeros = bessel_zeros("J", 1, int(np.max(xa) / np.pi) + 2)
        gap = np.min(np.abs(xa[..., None] - zeros), axis=-1)
        if np.any(gap < POLE_ATOL):
            raise PoleException("J1(x) 接近零点，J0/J1 无定义", {"x": xa.tolist()})
        ratio = special.j0(xa) / special.j1(xa)
    elif pair == "K0/K1":
        # 指数缩放形式避免大 x 下溢
        ratio = special.k0e(xa) / special.k1e(xa)
    else:
        raise ParameterException(f"未知的比值: {pair}，可用比值: J0/J1, K0/K1")
    return float(ratio) if np.ndim(x) == 0 else ratio
