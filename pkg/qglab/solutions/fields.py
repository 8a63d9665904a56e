"""
解场的统一表示：每个解场给出 ψ(t,x,y) ∈ ℝ^m 以及任意阶解析导数（jet）。
jet 是以 (a, b, c) 为键的字典，值为 ∂_t^a ∂_x^b ∂_y^c ψ，数组形状为 广播形状 + (m,)
"""

from abc import ABC, abstractmethod
from math import comb
from typing import Dict, Any, Optional, List, Tuple, Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

from qglab import LOG_LEVEL
from qglab.model.specfun import cylinder
from qglab.shared.exceptions import ParameterException
from qglab.shared.utils import get_logger, configure_logger

logger = get_logger(__name__)
configure_logger(log_filename="qglab_solutions.log")
logger.setLevel(LOG_LEVEL)

Multi = Tuple[int, int, int]
Jet = Dict[Multi, np.ndarray]


def multi_indices(order: int) -> List[Multi]:
    """所有 a+b+c ≤ order 的多重指标"""
    return [(a, b, n - a - b) for n in range(order + 1) for a in range(n + 1) for b in range(n + 1 - a)]


def broadcast_coords(t, x, y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    t, x, y = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float),
                                  np.asarray(y, dtype=float))
    return t, x, y


def as_poly(p) -> Polynomial:
    """把系数序列、标量或 Polynomial 统一为 Polynomial"""
    if isinstance(p, Polynomial):
        return p
    coef = np.atleast_1d(np.asarray(0.0 if p is None else p, dtype=float))
    return Polynomial(coef if coef.size else [0.0])


########################################################################################################################
########################################################################################################################
class Domain(ABC):
    """解的有效区域"""

    @abstractmethod
    def contains(self, t, x, y) -> np.ndarray:
        pass

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        pass


class Plane(Domain):
    """全平面"""

    def contains(self, t, x, y) -> np.ndarray:
        t, x, y = broadcast_coords(t, x, y)
        return np.ones(x.shape, dtype=bool)

    def describe(self) -> Dict[str, Any]:
        return {"kind": "plane"}


class Annulus(Domain):
    """圆环 r_in ≤ r ≤ r_out；r_in = 0 为圆盘，r_out = inf 为圆外区域"""

    def __init__(self, center: Sequence[float] = (0.0, 0.0), r_in: float = 0.0, r_out: float = np.inf):
        if r_in < 0 or r_out <= r_in:
            raise ParameterException("圆环半径不合法", {"r_in": r_in, "r_out": r_out})
        self.center = (float(center[0]), float(center[1]))
        self.r_in = float(r_in)
        self.r_out = float(r_out)

    def radius(self, x, y) -> np.ndarray:
        return np.hypot(np.asarray(x) - self.center[0], np.asarray(y) - self.center[1])

    def contains(self, t, x, y) -> np.ndarray:
        t, x, y = broadcast_coords(t, x, y)
        r = self.radius(x, y)
        return (r >= self.r_in) & (r <= self.r_out)

    def describe(self) -> Dict[str, Any]:
        kind = "disk" if self.r_in == 0 else ("exterior" if np.isinf(self.r_out) else "annulus")
        return {"kind": kind, "center": list(self.center), "r_in": self.r_in, "r_out": self.r_out}


class HalfPlane(Domain):
    """半平面 n·(x, y) ≥ offset"""

    def __init__(self, normal: Sequence[float], offset: float = 0.0):
        self.normal = (float(normal[0]), float(normal[1]))
        self.offset = float(offset)

    def contains(self, t, x, y) -> np.ndarray:
        t, x, y = broadcast_coords(t, x, y)
        return self.normal[0] * x + self.normal[1] * y >= self.offset

    def describe(self) -> Dict[str, Any]:
        return {"kind": "halfplane", "normal": list(self.normal), "offset": self.offset}


class PulledBackDomain(Domain):
    """变换后解的区域：把新坐标拉回原坐标再判定"""

    def __init__(self, base: Domain, pullback: Callable):
        self.base = base
        self.pullback = pullback

    def contains(self, t, x, y) -> np.ndarray:
        return self.base.contains(*self.pullback(t, x, y))

    def describe(self) -> Dict[str, Any]:
        return {"kind": "transformed", "base": self.base.describe()}


class IntersectionDomain(Domain):
    """若干区域的交集"""

    def __init__(self, parts: Sequence[Domain]):
        self.parts = list(parts)

    def contains(self, t, x, y) -> np.ndarray:
        t, x, y = broadcast_coords(t, x, y)
        inside = np.ones(x.shape, dtype=bool)
        for part in self.parts:
            inside &= part.contains(t, x, y)
        return inside

    def describe(self) -> Dict[str, Any]:
        return {"kind": "intersection", "parts": [part.describe() for part in self.parts]}


def intersect_domains(domains: Sequence[Domain]) -> Domain:
    parts = [d for d in domains if not isinstance(d, Plane)]
    if not parts:
        return Plane()
    return parts[0] if len(parts) == 1 else IntersectionDomain(parts)


########################################################################################################################
########################################################################################################################
class SolutionField(ABC):
    """可求值的精确解 ψ(t,x,y) ∈ ℝ^m"""

    def __init__(self, m: int, domain: Optional[Domain] = None, tags: Optional[Dict[str, Any]] = None):
        self.m = int(m)
        self.domain = domain or Plane()
        self.tags: Dict[str, Any] = dict(tags or {})
        self._background: Optional["SolutionField"] = None
        self._flow: Optional[np.ndarray] = None
        self._periodic: Optional["SolutionField"] = None

    def attach_background(self, background: Optional["SolutionField"], flow: Optional[Sequence[float]] = None,
                          periodic: Optional["SolutionField"] = None) -> "SolutionField":
        """记录仿射背景项、对应的均匀流以及去掉背景后的周期部分"""
        self._background = background
        self._flow = None if flow is None else np.asarray(flow, dtype=float)
        self._periodic = periodic
        return self

    @abstractmethod
    def jet(self, t, x, y, order: int = 0) -> Jet:
        """所有 a+b+c ≤ order 的偏导数"""
        pass

    def eval(self, t, x, y) -> np.ndarray:
        return self.jet(t, x, y, 0)[(0, 0, 0)]

    def __call__(self, t, x, y) -> np.ndarray:
        return self.eval(t, x, y)

    @property
    def background_term(self) -> Optional["SolutionField"]:
        """仿射背景项（与解族参数有关、叠加时只计一次）"""
        return self._background

    @property
    def background_flow(self) -> Optional[np.ndarray]:
        """背景项恰为 −y·u 时返回均匀纬向流 u，否则为 None"""
        return self._flow

    def without_background(self) -> "SolutionField":
        return self._periodic if self._periodic is not None else self

    @property
    def compat(self) -> Any:
        """叠加相容性键，None 表示可与任何解叠加"""
        return self.tags.get("compat")

    def _zeros(self, shape: Tuple[int, ...], order: int) -> Jet:
        return {k: np.zeros(shape + (self.m,)) for k in multi_indices(order)}


class ZeroField(SolutionField):
    """零解"""

    def jet(self, t, x, y, order: int = 0) -> Jet:
        t, x, y = broadcast_coords(t, x, y)
        return self._zeros(x.shape, order)


class ExpTerm(SolutionField):
    """Re(c·exp(s_t t + s_x x + s_y y))，c ∈ ℂ^m"""

    def __init__(self, coef: Sequence[complex], rates: Sequence[complex], **kwargs):
        coef = np.asarray(coef, dtype=complex)
        super().__init__(coef.size, **kwargs)
        self.coef = coef
        self.rates = tuple(complex(r) for r in rates)

    def jet(self, t, x, y, order: int = 0) -> Jet:
        t, x, y = broadcast_coords(t, x, y)
        st, sx, sy = self.rates
        e = np.exp(st * t + sx * x + sy * y)[..., None] * self.coef
        return {(a, b, c): np.real(st ** a * sx ** b * sy ** c * e) for a, b, c in multi_indices(order)}


class PolyTerm(SolutionField):
    """多项式向量场 Σ coef[i,j,k,:] t^i x^j y^k"""

    def __init__(self, coef: np.ndarray, **kwargs):
        coef = np.asarray(coef, dtype=float)
        if coef.ndim != 4:
            raise ParameterException("多项式系数形状应为 (T, X, Y, m)", {"shape": coef.shape})
        super().__init__(coef.shape[3], **kwargs)
        self.coef = coef

    @classmethod
    def zero(cls, m: int) -> "PolyTerm":
        return cls(np.zeros((1, 1, 1, m)))

    @classmethod
    def monomial(cls, i: int, j: int, k: int, vec: Sequence[float]) -> "PolyTerm":
        vec = np.asarray(vec, dtype=float)
        coef = np.zeros((i + 1, j + 1, k + 1, vec.size))
        coef[i, j, k] = vec
        return cls(coef)

    @classmethod
    def from_time_polys(cls, polys: Dict[Tuple[int, int], Polynomial], vec: Sequence[float]) -> "PolyTerm":
        """Σ p_{jk}(t) x^j y^k · vec"""
        vec = np.asarray(vec, dtype=float)
        nt = max([len(p.coef) for p in polys.values()] + [1])
        nx = max([j for j, _ in polys] + [0]) + 1
        ny = max([k for _, k in polys] + [0]) + 1
        coef = np.zeros((nt, nx, ny, vec.size))
        for (j, k), p in polys.items():
            coef[:len(p.coef), j, k] += p.coef[:, None] * vec
        return cls(coef)

    def __add__(self, other: "PolyTerm") -> "PolyTerm":
        shape = tuple(max(a, b) for a, b in zip(self.coef.shape, other.coef.shape))
        coef = np.zeros(shape)
        coef[tuple(slice(0, n) for n in self.coef.shape)] += self.coef
        coef[tuple(slice(0, n) for n in other.coef.shape)] += other.coef
        return PolyTerm(coef)

    def scaled(self, factor: float) -> "PolyTerm":
        return PolyTerm(self.coef * factor)

    def jet(self, t, x, y, order: int = 0) -> Jet:
        t, x, y = broadcast_coords(t, x, y)
        out = {}
        for a, b, c in multi_indices(order):
            if a >= self.coef.shape[0] or b >= self.coef.shape[1] or c >= self.coef.shape[2]:
                out[(a, b, c)] = np.zeros(x.shape + (self.m,))
                continue
            d = P.polyder(P.polyder(P.polyder(self.coef, a, axis=0), b, axis=1), c, axis=2)
            out[(a, b, c)] = np.moveaxis(P.polyval3d(t, x, y, d), 0, -1)
        return out


# 升降算子 L± = ∂x ± i∂y 作用于 Z_n(kr)e^{inϑ} 时的符号
_LADDER_SIGNS = {"J": (-1.0, 1.0), "Y": (-1.0, 1.0), "I": (1.0, 1.0), "K": (-1.0, -1.0)}


def _ladder_expansion(b: int, c: int) -> Dict[Tuple[int, int], complex]:
    """∂x^b ∂y^c 按 L+^p L−^q 展开的系数"""
    out: Dict[Tuple[int, int], complex] = {}
    for s in range(b + 1):
        for u in range(c + 1):
            key = (s + u, (b - s) + (c - u))
            val = comb(b, s) * comb(c, u) * (-1.0) ** (c - u) * (1j ** -c) / 2.0 ** (b + c)
            out[key] = out.get(key, 0.0) + val
    return out


class RadialTerm(SolutionField):
    """Re(c·Z_n(k r) e^{inϑ})，(r, ϑ) 相对 center，Z ∈ {J, Y, I, K}"""

    def __init__(self, kind: str, n: int, k: float, coef: Sequence[complex],
                 center: Sequence[float] = (0.0, 0.0), **kwargs):
        if kind not in _LADDER_SIGNS:
            raise ParameterException(f"未知的径向函数种类: {kind}")
        if not k > 0:
            raise ParameterException("径向波数必须为正", {"k": k})
        coef = np.asarray(coef, dtype=complex)
        super().__init__(coef.size, **kwargs)
        self.kind = kind
        self.n = int(n)
        self.k = float(k)
        self.coef = coef
        self.center = (float(center[0]), float(center[1]))

    def jet(self, t, x, y, order: int = 0) -> Jet:
        t, x, y = broadcast_coords(t, x, y)
        dx, dy = x - self.center[0], y - self.center[1]
        kr = self.k * np.hypot(dx, dy)
        phase = np.exp(1j * np.arctan2(dy, dx))
        atoms = {j: cylinder(self.kind, j, kr) * phase ** j
                 for j in range(self.n - order, self.n + order + 1)}
        sp, sm = _LADDER_SIGNS[self.kind]
        out = {}
        for a, b, c in multi_indices(order):
            if a > 0:
                out[(a, b, c)] = np.zeros(x.shape + (self.m,))
                continue
            acc = np.zeros(x.shape, dtype=complex)
            for (p, q), w in _ladder_expansion(b, c).items():
                acc = acc + w * (sp * self.k) ** p * (sm * self.k) ** q * atoms[self.n + p - q]
            out[(a, b, c)] = np.real(acc[..., None] * self.coef)
        return out


########################################################################################################################
########################################################################################################################
class CompositeField(SolutionField):
    """若干项之和，可带一个仿射背景项"""

    def __init__(self, terms: Sequence[SolutionField], m: Optional[int] = None,
                 background: Optional[SolutionField] = None, flow: Optional[Sequence[float]] = None, **kwargs):
        terms = list(terms)
        if m is None:
            m = terms[0].m if terms else background.m
        if "domain" not in kwargs:
            kwargs["domain"] = intersect_domains([term.domain for term in terms])
        super().__init__(m, **kwargs)
        if any(term.m != self.m for term in terms) or (background is not None and background.m != self.m):
            raise ParameterException("叠加项的层数不一致", {"m": [term.m for term in terms]})
        self.terms = terms
        if background is not None:
            periodic = CompositeField(terms, m=self.m, domain=self.domain, tags=self.tags)
            self.attach_background(background, flow, periodic)

    def jet(self, t, x, y, order: int = 0) -> Jet:
        t, x, y = broadcast_coords(t, x, y)
        out = self._zeros(x.shape, order)
        parts = list(self.terms) + ([self._background] if self._background is not None else [])
        for part in parts:
            for k, v in part.jet(t, x, y, order).items():
                out[k] += v
        return out


class ScaledField(SolutionField):
    """factor·ψ"""

    def __init__(self, base: SolutionField, factor: float, **kwargs):
        kwargs.setdefault("domain", base.domain)
        super().__init__(base.m, **kwargs)
        self.base = base
        self.factor = float(factor)

    def jet(self, t, x, y, order: int = 0) -> Jet:
        return {k: self.factor * v for k, v in self.base.jet(t, x, y, order).items()}


class ComposedField(SolutionField):
    """坐标变换后的解

    新坐标 (t̃, x̃, ỹ) 与原坐标的关系 t̃ = T1·t + T0，x̃ = X1·x + h(t)，ỹ = ys·y + Y0；
    新解 ψ̃ = amplitude·ψ(t, x, y) + additive(t, y)，additive 用原坐标表示
    """

    def __init__(self, base: SolutionField, T1: float = 1.0, T0: float = 0.0, X1: float = 1.0, h=None,
                 ys: float = 1.0, Y0: float = 0.0, amplitude: float = 1.0, additive: Optional[PolyTerm] = None,
                 **kwargs):
        if T1 == 0 or X1 == 0 or ys == 0:
            raise ParameterException("坐标缩放因子不能为零", {"T1": T1, "X1": X1, "ys": ys})
        super().__init__(base.m, **kwargs)
        self.base = base
        self.T1, self.T0, self.X1, self.ys, self.Y0 = float(T1), float(T0), float(X1), float(ys), float(Y0)
        self.h = as_poly(h)
        self.amplitude = float(amplitude)
        self.additive = additive
        if "domain" not in kwargs:
            self.domain = PulledBackDomain(base.domain, self.pullback)

    def pullback(self, t, x, y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """新坐标 → 原坐标"""
        t, x, y = broadcast_coords(t, x, y)
        t0 = (t - self.T0) / self.T1
        return t0, (x - self.h(t0)) / self.X1, (y - self.Y0) / self.ys

    def _time_expansion(self, A: int) -> List[Tuple[Polynomial, int, int]]:
        """∂_t̃^A = Σ coef(t)·∂_t^i ∂_x^j"""
        terms: Dict[Tuple[int, int], Polynomial] = {(0, 0): Polynomial([1.0])}
        dh = self.h.deriv()
        for _ in range(A):
            nxt: Dict[Tuple[int, int], Polynomial] = {}
            for (i, j), coef in terms.items():
                for key, val in (((i, j), coef.deriv() / self.T1), ((i + 1, j), coef / self.T1),
                                 ((i, j + 1), -coef * dh / (self.X1 * self.T1))):
                    nxt[key] = nxt[key] + val if key in nxt else val
            terms = nxt
        return [(coef, i, j) for (i, j), coef in terms.items()]

    def jet(self, t, x, y, order: int = 0) -> Jet:
        t0, x0, y0 = self.pullback(t, x, y)
        inner = {k: self.amplitude * v for k, v in self.base.jet(t0, x0, y0, order).items()}
        if self.additive is not None:
            for k, v in self.additive.jet(t0, x0, y0, order).items():
                inner[k] = inner[k] + v
        out = {}
        expansions = {A: self._time_expansion(A) for A in range(order + 1)}
        for A, B, C in multi_indices(order):
            acc = np.zeros(x0.shape + (self.m,))
            scale = self.X1 ** (-B) * self.ys ** (-C)
            for coef, i, j in expansions[A]:
                acc = acc + (coef(t0) * scale)[..., None] * inner[(i, j + B, C)]
            out[(A, B, C)] = acc
        return out


class PiecewiseSolution(SolutionField):
    """分片解：每个点取第一个包含它的片"""

    def __init__(self, pieces: Sequence[Tuple[Domain, SolutionField]], interface: Optional[Dict[str, Any]] = None,
                 **kwargs):
        pieces = list(pieces)
        super().__init__(pieces[0][1].m, **kwargs)
        self.pieces = pieces
        self.interface = dict(interface or {})

    def piece_index(self, t, x, y) -> np.ndarray:
        t, x, y = broadcast_coords(t, x, y)
        idx = np.full(x.shape, -1, dtype=int)
        for i, (region, _) in enumerate(self.pieces):
            idx = np.where((idx < 0) & region.contains(t, x, y), i, idx)
        return idx

    def jet(self, t, x, y, order: int = 0) -> Jet:
        t, x, y = broadcast_coords(t, x, y)
        idx = self.piece_index(t, x, y)
        out = {k: np.full(x.shape + (self.m,), np.nan) for k in multi_indices(order)}
        for i, (_, field) in enumerate(self.pieces):
            mask = idx == i
            if not np.any(mask):
                continue
            part = field.jet(t[mask], x[mask], y[mask], order)
            for k, v in part.items():
                out[k][mask] = v
        return out
