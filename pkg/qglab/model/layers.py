"""
分层模型：由层厚、约化重力、Coriolis 参数构造三对角耦合矩阵 F，并给出其谱分解、
加权内积、Moore–Penrose 逆和特征多项式
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Any, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import eigh_tridiagonal

from qglab import LOG_LEVEL
from qglab.shared.exceptions import ParameterException, NumericalException
from qglab.shared.utils import get_logger, configure_logger

logger = get_logger(__name__)
configure_logger(log_filename="qglab_model.log")
logger.setLevel(LOG_LEVEL)

# 判定零特征值（仅对行和为零的物理矩阵）
ZERO_SNAP_RTOL = 1e-8
# 特征值两两不同的最小相对间隔
DISTINCT_RTOL = 1e-13


def _frozen(a: Sequence[float]) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LayerStack:
    """一组层参数（SI 单位）"""
    H: np.ndarray
    gprime: np.ndarray
    f0: float
    beta: float
    rho0: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "H", _frozen(self.H))
        object.__setattr__(self, "gprime", _frozen(self.gprime))
        if self.H.ndim != 1 or self.H.size < 2:
            raise ParameterException("层数 m 至少为 2", {"H": self.H.tolist()})
        if self.gprime.shape != (self.H.size - 1,):
            raise ParameterException(f"约化重力个数应为 m-1={self.H.size - 1}", {"gprime": self.gprime.tolist()})
        if np.any(self.H <= 0) or np.any(self.gprime <= 0):
            raise ParameterException("层厚与约化重力必须为正", {"H": self.H.tolist(), "gprime": self.gprime.tolist()})
        for name in ("f0", "beta", "rho0"):
            if not getattr(self, name) > 0:
                raise ParameterException(f"{name} 必须为正", {name: getattr(self, name)})

    @property
    def m(self) -> int:
        return int(self.H.size)

    def dimensional_weights(self) -> np.ndarray:
        """有量纲权重 diag(H_i)/H_1"""
        return self.H / self.H[0]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LayerStack":
        """从 JSON 字典构造，m 字段可选但必须与 H 一致"""
        stack = cls(H=data["H"], gprime=data["gprime"], f0=float(data["f0"]),
                    beta=float(data["beta"]), rho0=float(data.get("rho0", 1000.0)))
        if "m" in data and int(data["m"]) != stack.m:
            raise ParameterException(f"m={data['m']} 与层厚个数 {stack.m} 不一致", {"m": data["m"]})
        return stack

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "LayerStack":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> Dict[str, Any]:
        return {"m": self.m, "H": self.H.tolist(), "gprime": self.gprime.tolist(),
                "f0": self.f0, "beta": self.beta, "rho0": self.rho0}

    def to_json(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """三对角矩阵：sub[i]=t_{i+1,i}，sup[i]=t_{i,i+1}，diag[i]=t_{i,i}"""
    sub: np.ndarray
    sup: np.ndarray
    diag: np.ndarray

    def __post_init__(self):
        for name in ("sub", "sup", "diag"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.diag.ndim != 1 or self.sub.shape != (self.m - 1,) or self.sup.shape != (self.m - 1,):
            raise ParameterException("三对角矩阵维数不一致",
                                     {"sub": self.sub.shape, "sup": self.sup.shape, "diag": self.diag.shape})

    @property
    def m(self) -> int:
        return int(self.diag.size)

    @classmethod
    def from_offdiagonals(cls, sub: Sequence[float], sup: Sequence[float]) -> "CouplingMatrix":
        """由非对角元构造行和为零的耦合矩阵"""
        sub = np.asarray(sub, dtype=float)
        sup = np.asarray(sup, dtype=float)
        diag = -(np.concatenate([[0.0], sub]) + np.concatenate([sup, [0.0]]))
        return cls(sub=sub, sup=sup, diag=diag)

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "CouplingMatrix":
        a = np.asarray(a, dtype=float)
        return cls(sub=np.diag(a, -1), sup=np.diag(a, 1), diag=np.diag(a))

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)

    def shift(self, b: Sequence[float]) -> "CouplingMatrix":
        """返回 T − diag(b)"""
        b = np.broadcast_to(np.asarray(b, dtype=float), (self.m,))
        return CouplingMatrix(sub=self.sub, sup=self.sup, diag=self.diag - b)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """T·v，v 的最后一维为层"""
        return v @ self.dense().T

    @property
    def scale(self) -> float:
        return float(max(np.max(np.abs(self.diag)), np.max(np.abs(self.sub)), np.max(np.abs(self.sup))))

    def is_physical(self) -> bool:
        """非对角元为正且行和为零"""
        if np.any(self.sub <= 0) or np.any(self.sup <= 0):
            return False
        row = self.dense().sum(axis=1)
        return bool(np.all(np.abs(row) <= 1e-12 * self.scale))


@dataclass(frozen=True, eq=False)
class SpectralData:
    """三对角矩阵的谱数据：lambdas 升序，vectors 的第 i 列为 e_i"""
    lambdas: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray
    d: np.ndarray
    pinv: np.ndarray
    physical: bool = False
    source: Optional[CouplingMatrix] = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return int(self.lambdas.size)

    def vector(self, i: int) -> np.ndarray:
        return self.vectors[:, i]

    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return weighted_inner(u, v, self)

    def norm(self, u: np.ndarray) -> np.ndarray:
        return np.sqrt(weighted_inner(u, u, self))

    def coordinates(self, u: np.ndarray) -> np.ndarray:
        """u 在本征基下的坐标（W 正交投影）"""
        u = np.asarray(u, dtype=float)
        norms2 = np.einsum("ij,i,ij->j", self.vectors, self.weights, self.vectors)
        return (u * self.weights) @ self.vectors / norms2

    def null_index(self, rtol: float = 1e-10) -> Optional[int]:
        """零特征值的下标，没有时返回 None"""
        scale = np.max(np.abs(self.lambdas))
        hits = np.flatnonzero(np.abs(self.lambdas) <= rtol * scale)
        return int(hits[0]) if hits.size else None

    def to_csv(self, path: Union[str, Path]) -> None:
        """每行一个特征对：lambda, e_1..e_m"""
        header = ",".join(["lambda"] + [f"e_{j + 1}" for j in range(self.m)])
        rows = np.column_stack([self.lambdas, self.vectors.T])
        np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")

    def to_dict(self) -> Dict[str, Any]:
        return {"lambdas": self.lambdas.tolist(), "vectors": self.vectors.T.tolist(),
                "weights": self.weights.tolist(), "d": self.d.tolist(), "pinv": self.pinv.tolist()}


########################################################################################################################
########################################################################################################################
def build_coupling(stack: LayerStack) -> CouplingMatrix:
    """f_{i,i+1} = f0²/(H_i g'_i)，f_{i+1,i} = f0²/(H_{i+1} g'_i)"""
    f2 = stack.f0 ** 2
    sup = f2 / (stack.H[:-1] * stack.gprime)
    sub = f2 / (stack.H[1:] * stack.gprime)
    F = CouplingMatrix.from_offdiagonals(sub=sub, sup=sup)
    logger.debug(f"耦合矩阵: sub={F.sub}, sup={F.sup}, diag={F.diag}")
    return F


def symmetrize(T: CouplingMatrix) -> Tuple[np.ndarray, CouplingMatrix]:
    """相似变换 D⁻¹TD 为对称三对角矩阵，d_1 = 1"""
    prod = T.sub * T.sup
    if np.any(prod <= 0):
        raise ParameterException("非对角元乘积必须为正", {"sub": T.sub.tolist(), "sup": T.sup.tolist()})
    d = np.concatenate([[1.0], np.cumprod(np.sqrt(T.sub / T.sup))])
    off = np.sqrt(prod)
    return d, CouplingMatrix(sub=off, sup=off, diag=T.diag)


def spectral(T: CouplingMatrix) -> SpectralData:
    """经对称化求三对角矩阵的特征对；物理矩阵 F 的零特征值吸附为 0，对应向量取 1̄"""
    if np.any(T.sub <= 0) or np.any(T.sup <= 0):
        raise ParameterException("谱分解要求非对角元为正", {"sub": T.sub.tolist(), "sup": T.sup.tolist()})
    d, S = symmetrize(T)
    lambdas, v = eigh_tridiagonal(S.diag, S.sup)
    scale = float(np.max(np.abs(lambdas))) or 1.0
    gaps = np.diff(lambdas)
    if np.any(gaps <= DISTINCT_RTOL * scale):
        raise NumericalException("特征值不是两两不同的", {"lambdas": lambdas.tolist()})

    # 回到原坐标：T(Dv) = λ(Dv)，且 ‖Dv‖_W = ‖v‖ = 1
    vectors = d[:, None] * v
    flip = np.where(vectors[0] != 0, np.sign(vectors[0]), np.sign(vectors[-1]))
    flip = np.where(flip == 0, 1.0, flip)
    vectors = vectors * flip

    physical = T.is_physical()
    if physical:
        k = int(np.argmin(np.abs(lambdas)))
        if abs(lambdas[k]) > ZERO_SNAP_RTOL * abs(lambdas[0]):
            raise NumericalException("物理耦合矩阵没有零特征值", {"lambdas": lambdas.tolist()})
        lambdas[k] = 0.0
        vectors[:, k] = 1.0

    weights = 1.0 / d ** 2
    spec = SpectralData(lambdas=_frozen(lambdas), vectors=_frozen(vectors), weights=_frozen(weights),
                        d=_frozen(d), pinv=np.zeros((T.m, T.m)), physical=physical, source=T)
    object.__setattr__(spec, "pinv", _frozen(pseudo_inverse(spec)))
    return spec


def uniform_spectrum(m: int, f12: float) -> Tuple[np.ndarray, np.ndarray]:
    """等厚、等约化重力时的闭式谱，向量未归一化"""
    if m < 2 or not f12 > 0:
        raise ParameterException("要求 m ≥ 2 且 f12 > 0", {"m": m, "f12": f12})
    i = np.arange(1, m + 1)
    j = np.arange(1, m + 1)
    lambdas = -4.0 * f12 * np.sin((m - i) * np.pi / (2 * m)) ** 2
    vectors = np.cos(((m - i)[None, :] / m) * (j[:, None] - 0.5) * np.pi)
    return lambdas, vectors


def pseudo_inverse(spec: SpectralData, rtol: float = 1e-10) -> np.ndarray:
    """F⁺ = P·diag(1/λ_i，零特征值处取 0)·P⁻¹"""
    P = spec.vectors
    norms2 = np.einsum("ij,i,ij->j", P, spec.weights, P)
    P_inv = (P * spec.weights[:, None]).T / norms2[:, None]
    scale = float(np.max(np.abs(spec.lambdas))) or 1.0
    inv = np.array([0.0 if abs(lam) <= rtol * scale else 1.0 / lam for lam in spec.lambdas])
    return (P * inv) @ P_inv


def weighted_inner(u: np.ndarray, v: np.ndarray, spec: SpectralData) -> np.ndarray:
    """(u, v)_W = Σ u_i v_i / d_i²，最后一维为层"""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape[-1] != spec.m or v.shape[-1] != spec.m:
        raise ParameterException("向量维数与层数不一致", {"u": u.shape, "v": v.shape, "m": spec.m})
    return np.sum(u * v * spec.weights, axis=-1)


def char_poly(T: CouplingMatrix) -> np.ndarray:
    """det(λE − T) 的升幂系数，由三项递推 P_k = (λ − t_kk)P_{k−1} − t_{k,k−1}t_{k−1,k}P_{k−2} 计算"""
    s = T.scale or 1.0
    diag = T.diag / s
    cross = T.sub * T.sup / s ** 2
    lam = Polynomial([0.0, 1.0])
    p_prev, p = Polynomial([1.0]), lam - diag[0]
    for k in range(1, T.m):
        p_prev, p = p, (lam - diag[k]) * p - cross[k - 1] * p_prev
    coef = p.coef * s ** (T.m - np.arange(T.m + 1))
    if T.is_physical():
        # 行和为零时 det(F) = 0
        coef[0] = 0.0
    return coef


def gershgorin_bound(F: CouplingMatrix) -> float:
    """谱半径上界 R = min(2·max 行和, max(行和 + 列和))"""
    row = np.concatenate([[0.0], F.sub]) + np.concatenate([F.sup, [0.0]])
    col = np.concatenate([[0.0], F.sup]) + np.concatenate([F.sub, [0.0]])
    return float(min(2.0 * np.max(row), np.max(row + col)))


def moore_penrose_check(T: CouplingMatrix, pinv: np.ndarray, weights: np.ndarray) -> Dict[str, float]:
    """四个 Penrose 条件的相对残差，投影算子按 W 内积自伴"""
    A = T.dense()
    W = np.diag(weights)
    na, np_ = np.linalg.norm(A), np.linalg.norm(pinv)
    AP, PA = A @ pinv, pinv @ A
    return {
        "A_P_A": float(np.linalg.norm(AP @ A - A) / na),
        "P_A_P": float(np.linalg.norm(PA @ pinv - pinv) / np_),
        "AP_selfadjoint": float(np.linalg.norm(W @ AP - (W @ AP).T) / max(np.linalg.norm(W @ AP), 1e-300)),
        "PA_selfadjoint": float(np.linalg.norm(W @ PA - (W @ PA).T) / max(np.linalg.norm(W @ PA), 1e-300)),
    }


@dataclass(frozen=True, eq=False)
class ModelParameters:
    """方程的参数 (F, β)，等价变换作用在这一层"""
    F: CouplingMatrix
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ParameterException("beta 必须为正", {"beta": self.beta})

    @classmethod
    def from_stack(cls, stack: LayerStack) -> "ModelParameters":
        return cls(F=build_coupling(stack), beta=stack.beta)

    @property
    def m(self) -> int:
        return self.F.m

    def signature(self) -> Tuple[float, ...]:
        """叠加相容性检查用的参数指纹"""
        return tuple(np.concatenate([self.F.sub, self.F.sup, self.F.diag, [self.beta]]).tolist())

    def to_dict(self) -> Dict[str, Any]:
        return {"sub": self.F.sub.tolist(), "sup": self.F.sup.tolist(), "diag": self.F.diag.tolist(),
                "beta": self.beta}
