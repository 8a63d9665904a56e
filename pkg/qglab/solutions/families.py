"""
闭式精确解族：仿射依赖的定常解（Herglotz 波函数、平面波、涡旋、heton）、叠加与 Galilei 推进、
正压 Klein–Gordon 模、BBM 单波、矩阵指数耦合族以及关于 x、y 仿射的时间依赖族
"""

from dataclasses import dataclass
from math import comb
from typing import Dict, Any, Optional, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import expm, eig

from qglab import LOG_LEVEL
from qglab.model.layers import ModelParameters, SpectralData, spectral
from qglab.shared.exceptions import (
    ParameterException, IncompatibleFieldsException, NumericalException, ToleranceException,
)
from qglab.shared.utils import get_logger, configure_logger
from qglab.solutions.fields import (
    SolutionField, ExpTerm, PolyTerm, RadialTerm, CompositeField, ComposedField, ZeroField, Annulus, Jet,
    broadcast_coords, multi_indices, as_poly,
)

logger = get_logger(__name__)
configure_logger(log_filename="qglab_solutions.log")
logger.setLevel(LOG_LEVEL)

# 判定模态特征值为零的相对阈值
NU_ZERO_RTOL = 1e-10
# 多项式参数（h、χ、g、κ）允许的最高次数
MAX_POLY_DEGREE = 6
# 耦合模态的 Newton 校正步数
NEWTON_STEPS = 2


def _check_degree(p: Polynomial, name: str, limit: int = MAX_POLY_DEGREE) -> Polynomial:
    if p.degree() > limit:
        raise ParameterException(f"{name} 的次数不能超过 {limit}", {name: p.coef.tolist()})
    return p


def _ones(m: int) -> np.ndarray:
    return np.ones(m)


########################################################################################################################
########################################################################################################################
@dataclass(frozen=True)
class ModeAtom:
    """单个模态上的 Helmholtz 型标量解 ṽ（∇²ṽ + νṽ = 0）乘以 ẽ_ν

    kind:
      plane     Re(A e^{i√ν(x cosθ + y sinθ)})，ν > 0
      radial    Re(A Z_n(k r) e^{inϑ})，Z ∈ {J, Y} 时 ν > 0，Z ∈ {I, K} 时 ν < 0，k = √|ν|
      exp       Re(A e^{κ(x cosθ + y sinθ)})，κ = √(−ν)，ν < 0
      harmonic  Re(A (z − z₀)^n)，z = x + iy，ν = 0
    """
    mode: int
    kind: str = "plane"
    amplitude: complex = 1.0
    angle: float = 0.0
    order: int = 0
    bessel: str = "J"
    center: Tuple[float, float] = (0.0, 0.0)
    r_min: float = 0.0


@dataclass(frozen=True)
class PlaneAtom:
    """Herglotz 测度的一个 Dirac 原子：方向 angle 上权重 amplitude"""
    mode: int
    amplitude: complex
    angle: float = 0.0


@dataclass(frozen=True)
class RadialAtom:
    """Herglotz 测度的一个 Fourier 系数：e^{inθ} 的系数 amplitude，可平移到 center"""
    mode: int
    amplitude: complex
    order: int = 0
    center: Tuple[float, float] = (0.0, 0.0)

    @classmethod
    def uniform(cls, mode: int, psi0: float, center: Tuple[float, float] = (0.0, 0.0)) -> "RadialAtom":
        """均匀密度 ψ₀dθ/2π，给出 ψ₀J₀(√ν r)"""
        return cls(mode=mode, amplitude=psi0 / (2.0 * np.pi), order=0, center=center)


@dataclass(frozen=True)
class HerglotzSpec:
    B: Tuple[float, ...]
    plane_atoms: Tuple[PlaneAtom, ...] = ()
    radial_atoms: Tuple[RadialAtom, ...] = ()
    sigma1: float = 0.0
    sigma2: float = 0.0
    include_background: bool = True


@dataclass(frozen=True)
class BoostSpec:
    """x 方向的（广义）Galilei 推进 x → x + h(t)，h = γt 为匀速情形"""
    h: Tuple[float, ...] = ()
    gamma: Optional[float] = None

    def polynomial(self) -> Polynomial:
        if self.h and self.gamma is not None:
            raise ParameterException("h 与 gamma 只能给出一个", {"h": list(self.h), "gamma": self.gamma})
        p = Polynomial([0.0, self.gamma]) if self.gamma is not None else as_poly(list(self.h) or [0.0])
        return _check_degree(p, "h")


@dataclass(frozen=True)
class BBMWaveSpec:
    chi: float
    mode: int
    alpha: float
    delta: float
    root: Optional[float] = None
    amplitude: float = 1.0
    phase: float = 0.0


@dataclass(frozen=True)
class CoupledShiftSpec:
    c: Tuple[float, ...]
    mu: complex
    chi: float
    A: Tuple[complex, ...]


@dataclass(frozen=True)
class CubicRoots:
    """BBM 色散关系的实根（按重数列出）、判别式和系数 (a0, a1, a2, a3)"""
    roots: Tuple[float, ...]
    discriminant: Optional[float]
    coefficients: Tuple[float, float, float, float]
    degree: int = 3

    def residual(self, r: float) -> float:
        return float(Polynomial(self.coefficients)(r))

    def tolerance(self, r: float, rtol: float = 1e-10) -> float:
        return rtol * float(sum(abs(a) * abs(r) ** k for k, a in enumerate(self.coefficients)))


########################################################################################################################
########################################################################################################################
def _harmonic_poly(n: int, center: Tuple[float, float], amplitude: complex, vec: np.ndarray) -> PolyTerm:
    """Re(A (x − x₀ + i(y − y₀))^n)·vec 展开为 x、y 的多项式"""
    z0 = complex(center[0], center[1])
    coef = np.zeros((n + 1, n + 1), dtype=complex)
    for j in range(n + 1):
        outer = comb(n, j) * (-z0) ** (n - j)
        for l in range(j + 1):
            coef[l, j - l] += outer * comb(j, l) * (1j ** (j - l))
    real = np.real(amplitude * coef)
    return PolyTerm(real[None, :, :, None] * vec)


def _atom_term(atom: ModeAtom, nu: float, vec: np.ndarray, scale: float) -> SolutionField:
    """按 ν 的符号检查原子类型并构造对应的项"""
    zero = abs(nu) <= NU_ZERO_RTOL * scale
    details = {"mode": atom.mode, "kind": atom.kind, "nu": nu}
    coef = complex(atom.amplitude) * vec
    if atom.kind == "plane":
        if zero or nu < 0:
            raise ParameterException("平面波原子要求 ν > 0", details)
        k = np.sqrt(nu)
        return ExpTerm(coef, (0.0, 1j * k * np.cos(atom.angle), 1j * k * np.sin(atom.angle)))
    if atom.kind == "exp":
        if zero or nu > 0:
            raise ParameterException("指数原子要求 ν < 0", details)
        kappa = np.sqrt(-nu)
        return ExpTerm(coef, (0.0, kappa * np.cos(atom.angle), kappa * np.sin(atom.angle)))
    if atom.kind == "radial":
        oscillating = atom.bessel in ("J", "Y")
        if zero or (nu > 0) != oscillating:
            raise ParameterException(f"{atom.bessel}_n 径向原子与 ν 的符号不符", details)
        kwargs = {}
        if atom.bessel in ("Y", "K"):
            if not atom.r_min > 0:
                raise ParameterException(f"{atom.bessel}_n 在中心奇异，需要 r_min > 0", details)
            kwargs["domain"] = Annulus(atom.center, r_in=atom.r_min)
        return RadialTerm(atom.bessel, atom.order, np.sqrt(abs(nu)), coef, center=atom.center, **kwargs)
    if atom.kind == "harmonic":
        if not zero:
            raise ParameterException("调和多项式原子要求 ν = 0", details)
        return _harmonic_poly(atom.order, atom.center, complex(atom.amplitude), np.real(vec))
    raise ParameterException(f"未知的原子类型: {atom.kind}，可用类型: plane, radial, exp, harmonic", details)


def affine_stationary(model: ModelParameters, B: Sequence[float], atoms: Sequence[ModeAtom] = (),
                      sigma: Tuple[float, float] = (0.0, 0.0), gamma: float = 0.0,
                      include_background: bool = True, tags: Optional[Dict[str, Any]] = None) -> CompositeField:
    """q = Bψ（退化时 q = Bψ + 2γẽ₀）的定常解：各模态上的 Helmholtz 解加仿射背景项"""
    B = np.broadcast_to(np.asarray(B, dtype=float), (model.m,)).copy()
    spec = spectral(model.F.shift(B))
    scale = float(np.max(np.abs(spec.lambdas))) or 1.0
    null = spec.null_index(NU_ZERO_RTOL)
    ones = _ones(model.m)

    if null is None and (any(sigma) or gamma):
        raise ParameterException("F − B 可逆时 σ1、σ2、γ 必须为 0", {"sigma": list(sigma), "gamma": gamma})

    terms = []
    for atom in atoms:
        if not 0 <= atom.mode < model.m:
            raise ParameterException("模态下标越界", {"mode": atom.mode, "m": model.m})
        vec = spec.vector(atom.mode)
        if atom.mode == null:
            vec = vec / spec.norm(vec)
        terms.append(_atom_term(atom, float(spec.lambdas[atom.mode]), vec, scale))

    background, flow = None, None
    if include_background or null is not None:
        u = model.beta * (spec.pinv @ ones)
        background = PolyTerm.monomial(0, 0, 1, -u if include_background else 0.0 * u)
        flow = u if include_background else np.zeros(model.m)
        if null is not None:
            e0 = spec.vector(null) / spec.norm(spec.vector(null))
            cubic = -model.beta * float(spec.inner(ones, e0)) / 6.0
            extra = (PolyTerm.monomial(0, 0, 3, cubic * e0) + PolyTerm.monomial(0, 0, 2, gamma * e0)
                     + PolyTerm.monomial(0, 1, 0, sigma[0] * e0) + PolyTerm.monomial(0, 0, 1, sigma[1] * e0))
            background = background + extra
            if cubic != 0.0 or gamma != 0.0 or sigma[0] != 0.0:
                flow = None
            elif flow is not None:
                flow = flow - sigma[1] * e0

    info = {"family": "affine_stationary", "B": B.tolist(), "nu": spec.lambdas.tolist(),
            "compat": ("affine", model.signature(), tuple(B.tolist()))}
    info.update(tags or {})
    logger.info(f"构造仿射定常解: B={B.tolist()}, ν={spec.lambdas.tolist()}, 原子数={len(terms)}, 退化={null is not None}")
    return CompositeField(terms, m=model.m, background=background, flow=flow, tags=info)


def herglotz_solution(model: ModelParameters, spec: HerglotzSpec) -> CompositeField:
    """有界的广义 Herglotz 波函数：有限个平面波原子和径向谐波之和，再加背景流"""
    shifted = spectral(model.F.shift(spec.B))
    atoms: List[ModeAtom] = []
    for atom in list(spec.plane_atoms) + list(spec.radial_atoms):
        if not 0 <= atom.mode < model.m or not shifted.lambdas[atom.mode] > 0:
            raise ParameterException("Herglotz 原子只能放在 ν > 0 的模态上",
                                     {"mode": atom.mode, "nu": shifted.lambdas.tolist()})
    for p in spec.plane_atoms:
        atoms.append(ModeAtom(mode=p.mode, kind="plane", amplitude=p.amplitude, angle=p.angle))
    for r in spec.radial_atoms:
        atoms.append(ModeAtom(mode=r.mode, kind="radial", order=r.order, center=r.center,
                              amplitude=2.0 * np.pi * (1j ** r.order) * complex(r.amplitude)))
    return affine_stationary(model, spec.B, atoms, sigma=(spec.sigma1, spec.sigma2),
                             include_background=spec.include_background,
                             tags={"family": "herglotz", "plane_atoms": len(spec.plane_atoms),
                                   "radial_atoms": len(spec.radial_atoms)})


def background_flow(model: ModelParameters, B: Sequence[float]) -> np.ndarray:
    """u_bg = β(F − B)⁺1̄"""
    spec = spectral(model.F.shift(B))
    return model.beta * (spec.pinv @ _ones(model.m))


def superpose(fields: Sequence[SolutionField], tags: Optional[Dict[str, Any]] = None) -> CompositeField:
    """同一族参数下的线性叠加，仿射背景只计一次"""
    fields = list(fields)
    if not fields:
        raise ParameterException("叠加至少需要一个解")
    keys = {f.compat for f in fields if f.compat is not None}
    if len(keys) > 1:
        raise IncompatibleFieldsException("只有同一族参数的解可以叠加", {"compat": [str(k) for k in keys]})
    blocked = [f.tags.get("family") for f in fields if f.tags.get("superposable") is False]
    if blocked:
        raise IncompatibleFieldsException("该解族不满足线性叠加", {"families": blocked})
    m = fields[0].m
    if any(f.m != m for f in fields):
        raise IncompatibleFieldsException("叠加项的层数不一致", {"m": [f.m for f in fields]})

    background = next((f.background_term for f in fields if f.background_term is not None), None)
    flow = next((f.background_flow for f in fields if f.background_term is not None), None)
    terms = [f.without_background() if f.background_term is not None else f for f in fields]
    info = {"family": "superposition", "compat": keys.pop() if keys else None,
            "parts": [f.tags.get("family") for f in fields]}
    info.update(tags or {})
    return CompositeField(terms, m=m, background=background, flow=flow, tags=info)


def boost(field: SolutionField, spec: BoostSpec) -> CompositeField:
    """ψ̃(t, x, y) = ψ(t, x − h(t), y) − h'(t)·y·1̄"""
    h = spec.polynomial()
    dh = h.deriv()
    shear = PolyTerm.from_time_polys({(0, 1): -dh}, _ones(field.m))
    periodic = ComposedField(field.without_background(), h=h)
    base_bg = field.background_term if field.background_term is not None else ZeroField(field.m)
    background = ComposedField(base_bg, h=h, additive=shear)

    flow = None
    if h.degree() <= 1:
        base_flow = field.background_flow
        if base_flow is None and field.background_term is None:
            base_flow = np.zeros(field.m)
        if base_flow is not None:
            flow = base_flow + float(dh.coef[0]) * _ones(field.m)

    compat = None if field.compat is None else (field.compat, tuple(h.coef.tolist()))
    info = dict(field.tags)
    info.update({"family": "boost", "base": field.tags.get("family"), "h": h.coef.tolist(), "compat": compat})
    return CompositeField([periodic], m=field.m, background=background, flow=flow, tags=info)


########################################################################################################################
########################################################################################################################
def kg_barotropic_mode(model: ModelParameters, chi: float, k: float, amplitude: float = 1.0,
                       phase: float = 0.0) -> ExpTerm:
    """正压模 A cos(k(x − χy) + βt/((1+χ²)k) + φ)·1̄"""
    if k == 0:
        raise ParameterException("波数 k 不能为 0", {"k": k})
    omega = model.beta / ((1.0 + chi ** 2) * k)
    coef = amplitude * np.exp(1j * phase) * _ones(model.m)
    tags = {"family": "kg_barotropic", "chi": chi, "k": k, "omega": omega,
            "compat": ("kg", model.signature(), chi, k)}
    return ExpTerm(coef, (1j * omega, 1j * k, -1j * k * chi), tags=tags)


def bbm_dispersion_roots(chi: float, lambda_i: float, alpha: float, delta: float, beta: float) -> CubicRoots:
    """a₃r³ + a₂r² + a₁r + a₀ 的全部实根"""
    if alpha < 0:
        raise ParameterException("alpha 必须非负", {"alpha": alpha})
    s = 1.0 + chi ** 2
    coefficients = (delta * lambda_i, beta - alpha * lambda_i, -delta * s, alpha * s)
    a0, a1, a2, a3 = coefficients
    poly = Polynomial(coefficients).trim()
    degree = poly.degree()
    if degree < 1:
        raise NumericalException("色散多项式退化为常数", {"coefficients": list(coefficients)})

    raw = np.atleast_1d(poly.roots())
    roots = []
    dpoly = poly.deriv()
    for z in raw:
        if abs(z.imag) > 1e-7 * max(abs(z), 1e-300):
            continue
        r = float(z.real)
        # Newton 校正
        for _ in range(3):
            d = dpoly(r)
            if d == 0:
                break
            r -= poly(r) / d
        roots.append(r)

    if degree == 3:
        disc = (18 * a0 * a1 * a2 * a3 - 4 * a0 * a2 ** 3 + a1 ** 2 * a2 ** 2 - 4 * a1 ** 3 * a3
                - 27 * a0 ** 2 * a3 ** 2)
    elif degree == 2:
        qc = poly.coef
        disc = qc[1] ** 2 - 4 * qc[0] * qc[2]
    else:
        disc = None
    logger.debug(f"BBM 色散: 系数={coefficients}, 实根={roots}, 判别式={disc}")
    return CubicRoots(roots=tuple(sorted(roots)), discriminant=None if disc is None else float(disc),
                      coefficients=tuple(float(a) for a in coefficients), degree=degree)


def bbm_wave(model: ModelParameters, spec: BBMWaveSpec, spectrum: Optional[SpectralData] = None) -> ExpTerm:
    """C cos(δt + r(x − χy − αt) + θ)·e_i"""
    spectrum = spectrum or spectral(model.F)
    if not 0 <= spec.mode < model.m:
        raise ParameterException("模态下标越界", {"mode": spec.mode, "m": model.m})
    lam = float(spectrum.lambdas[spec.mode])
    cubic = bbm_dispersion_roots(spec.chi, lam, spec.alpha, spec.delta, model.beta)
    if spec.root is None:
        if not cubic.roots:
            raise NumericalException("色散关系没有实根", {"coefficients": list(cubic.coefficients)})
        r = max(cubic.roots, key=abs)
    else:
        r = float(spec.root)
    if abs(cubic.residual(r)) > cubic.tolerance(r):
        raise ToleranceException("r 不是色散关系的根", {"r": r, "residual": cubic.residual(r),
                                                      "tolerance": cubic.tolerance(r)})
    e = spectrum.vector(spec.mode)
    coef = spec.amplitude * np.exp(1j * spec.phase) * e
    tags = {"family": "bbm", "mode": spec.mode, "r": r, "chi": spec.chi, "alpha": spec.alpha, "delta": spec.delta,
            "compat": ("bbm", model.signature(), spec.mode, spec.chi, r)}
    return ExpTerm(coef, (1j * (spec.delta - r * spec.alpha), 1j * r, -1j * r * spec.chi), tags=tags)


########################################################################################################################
########################################################################################################################
def matrix_exp(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise ParameterException("矩阵含有非有限元素")
    return expm(M)


class MatrixExpTerm(SolutionField):
    """Re(e^{μ(x − χy)} (G exp(μtM) A + g(t)·e))"""

    def __init__(self, mu: complex, chi: float, G: np.ndarray, M: np.ndarray, A: np.ndarray,
                 gauge: Optional[Polynomial] = None, gauge_vector: Optional[np.ndarray] = None, **kwargs):
        A = np.asarray(A, dtype=complex)
        super().__init__(A.size, **kwargs)
        self.mu = complex(mu)
        self.chi = float(chi)
        self.G = np.asarray(G, dtype=complex)
        self.M = np.asarray(M, dtype=complex)
        self.A = A
        self.gauge = gauge
        self.gauge_vector = None if gauge_vector is None else np.asarray(gauge_vector, dtype=complex)

    def _time_part(self, t: np.ndarray, order: int) -> Dict[int, np.ndarray]:
        """∂_t^a 作用后括号内的向量，形状 t.shape + (m,)"""
        flat = t.ravel()
        uniq, inverse = np.unique(flat, return_inverse=True)
        muM = self.mu * self.M
        base = np.stack([matrix_exp(tv * muM) @ self.A for tv in uniq]) if uniq.size else np.zeros((0, self.m))
        out = {}
        power = np.eye(self.m, dtype=complex)
        for a in range(order + 1):
            vals = base @ (self.G @ power).T
            if self.gauge is not None and self.gauge_vector is not None:
                vals = vals + self.gauge.deriv(a)(uniq)[:, None] * self.gauge_vector
            out[a] = vals[inverse].reshape(t.shape + (self.m,))
            power = muM @ power
        return out

    def jet(self, t, x, y, order: int = 0) -> Jet:
        t, x, y = broadcast_coords(t, x, y)
        spatial = np.exp(self.mu * (x - self.chi * y))[..., None]
        timed = self._time_part(t, order)
        sx, sy = self.mu, -self.mu * self.chi
        return {(a, b, c): np.real(sx ** b * sy ** c * spatial * timed[a]) for a, b, c in multi_indices(order)}


def _coupled_matrices(model: ModelParameters, c: np.ndarray, mu: complex, chi: float):
    F = model.F.dense()
    Ft = F + mu ** 2 * (1.0 + chi ** 2) * np.eye(model.m)
    Bt = np.diag(F @ c) + model.beta * np.eye(model.m)
    return F, Ft, Bt, np.diag(c)


def _check_shear(model: ModelParameters, c: np.ndarray) -> None:
    if c.shape != (model.m,):
        raise ParameterException("c 的维数与层数不一致", {"c": c.tolist(), "m": model.m})
    if np.allclose(c, c[0], rtol=0.0, atol=1e-14 * max(np.max(np.abs(c)), 1e-300)):
        raise ParameterException("c 不能属于 span(1̄)", {"c": c.tolist()})


def coupled_shift_solution(model: ModelParameters, spec: CoupledShiftSpec) -> CompositeField:
    """ψ = Re(e^{μ(x−χy)} F̃⁻¹ exp(μt(C − B̃F̃⁻¹)) A) + yc，F̃ = F + μ²(1+χ²)E，B̃ = diag(Fc) + βE"""
    c = np.asarray(spec.c, dtype=float)
    _check_shear(model, c)
    A = np.asarray(spec.A, dtype=complex)
    F, Ft, Bt, C = _coupled_matrices(model, c, spec.mu, spec.chi)
    smallest = float(np.min(np.abs(np.linalg.eigvals(Ft))))
    if smallest <= 1e-10 * model.F.scale:
        raise ParameterException("F̃ 奇异，请使用退化情形 coupled_shift_degenerate",
                                 {"mu": str(spec.mu), "chi": spec.chi, "min_abs_eig": smallest})
    Ft_inv = np.linalg.inv(Ft)
    M = C - Bt @ Ft_inv
    compat = ("coupled", model.signature(), tuple(c.tolist()), spec.chi)
    wave = MatrixExpTerm(spec.mu, spec.chi, Ft_inv, M, A, tags={"compat": compat})
    shear = PolyTerm.monomial(0, 0, 1, c)
    tags = {"family": "coupled_shift", "mu": str(spec.mu), "chi": spec.chi, "c": c.tolist(), "compat": compat}
    logger.info(f"构造矩阵指数耦合解: μ={spec.mu}, χ={spec.chi}, c={c.tolist()}")
    return CompositeField([wave], m=model.m, background=shear, flow=-c, tags=tags)


def coupled_shift_degenerate(model: ModelParameters, spec: CoupledShiftSpec, gauge: Sequence[float] = (0.0,),
                             spectrum: Optional[SpectralData] = None) -> CompositeField:
    """F̃ 奇异（λ_i = −μ²(1+χ²)）时的耦合族

    ψ = Re(e^{μ(x−χy)} (F̃⁺ exp(μtM) A + g(t) e_i)) + yc，M = C − B̃F̃⁺。
    g ≠ 0 要求 μB̃e_i = 0；μ ≠ 0 时还要求 A ∈ im F̃ 且 im F̃ 在 M 下不变
    """
    c = np.asarray(spec.c, dtype=float)
    _check_shear(model, c)
    A = np.asarray(spec.A, dtype=complex)
    spectrum = spectrum or spectral(model.F)
    shift = spec.mu ** 2 * (1.0 + spec.chi ** 2)
    if abs(np.imag(shift)) > 1e-12 * max(abs(shift), model.F.scale):
        raise ParameterException("μ²(1+χ²) 不是实数，F̃ 不可能奇异", {"mu": str(spec.mu)})
    shifted = spectrum.lambdas + float(np.real(shift))
    hits = np.flatnonzero(np.abs(shifted) <= 1e-10 * model.F.scale)
    if hits.size != 1:
        raise ParameterException("F̃ 不是奇异的，请使用 coupled_shift_solution",
                                 {"shifted": shifted.tolist()})
    i = int(hits[0])
    P = spectrum.vectors
    norms2 = np.einsum("ij,i,ij->j", P, spectrum.weights, P)
    P_inv = (P * spectrum.weights[:, None]).T / norms2[:, None]
    inv = np.array([0.0 if j == i else 1.0 / s for j, s in enumerate(shifted)])
    Ft_pinv = (P * inv) @ P_inv
    proj = np.eye(model.m) - np.outer(P[:, i], P_inv[i])

    _, Ft, Bt, C = _coupled_matrices(model, c, spec.mu, spec.chi)
    M = C - Bt @ Ft_pinv
    g = _check_degree(as_poly(list(gauge)), "g")
    e_i = P[:, i]
    scale = max(float(np.max(np.abs(A))), 1e-300)
    if np.any(g.coef != 0) and spec.mu != 0:
        if np.max(np.abs(Bt @ e_i)) > 1e-10 * np.max(np.abs(Bt)):
            raise ParameterException("g ≠ 0 要求 μB̃e_i = 0", {"mode": i, "Bt_e": (Bt @ e_i).tolist()})
    if spec.mu != 0:
        if np.max(np.abs(A - proj @ A)) > 1e-10 * scale:
            raise ParameterException("μ ≠ 0 时 A 必须属于 im F̃", {"mode": i})
        leak = (np.eye(model.m) - proj) @ M @ proj
        if np.max(np.abs(leak)) > 1e-10 * max(np.max(np.abs(M)), 1e-300):
            raise ParameterException("im F̃ 在 M 下不是不变子空间", {"mode": i, "leak": float(np.max(np.abs(leak)))})

    compat = ("coupled", model.signature(), tuple(c.tolist()), spec.chi)
    wave = MatrixExpTerm(spec.mu, spec.chi, Ft_pinv, M, A, gauge=g, gauge_vector=e_i, tags={"compat": compat})
    shear = PolyTerm.monomial(0, 0, 1, c)
    tags = {"family": "coupled_shift_degenerate", "mu": str(spec.mu), "chi": spec.chi, "c": c.tolist(),
            "mode": i, "compat": compat}
    logger.info(f"构造退化矩阵指数耦合解: μ={spec.mu}, 奇异模态={i}")
    return CompositeField([wave], m=model.m, background=shear, flow=-c, tags=tags)


@dataclass(frozen=True)
class CoupledMode:
    """Re(e^{(μ − κν)t + κ(x − χy)} v) 中的 (κ, v)"""
    kappa: complex
    vector: Tuple[complex, ...]


def coupled_eigen_modes(model: ModelParameters, c: Sequence[float], chi: float, mu: complex,
                        nu: float = 0.0) -> List[CoupledMode]:
    """解三次矩阵多项式 ((1+χ²)Ĉκ³ − μ(1+χ²)κ² − B̂κ − μF) v = 0，Ĉ = C + νE，B̂ = diag(Fc) − ĈF + βE"""
    c = np.asarray(c, dtype=float)
    _check_shear(model, c)
    m = model.m
    s = 1.0 + chi ** 2
    F = model.F.dense()
    E = np.eye(m)
    Ch = np.diag(c) + nu * E
    Bh = np.diag(F @ c) - Ch @ F + model.beta * E
    Z = np.zeros((m, m))
    lhs = np.block([[Z, E, Z], [Z, Z, E], [mu * F, Bh, mu * s * E]])
    rhs = np.block([[E, Z, Z], [Z, E, Z], [Z, Z, s * Ch]])
    kappas, vecs = eig(lhs.astype(complex), rhs.astype(complex))

    def pencil(k: complex) -> Tuple[np.ndarray, np.ndarray]:
        P = s * Ch * k ** 3 - mu * s * k ** 2 * E - Bh * k - mu * F
        dP = 3.0 * s * Ch * k ** 2 - 2.0 * mu * s * k * E - Bh
        return P, dP

    modes = []
    for kappa, w in zip(kappas, vecs.T):
        if not np.isfinite(kappa):
            continue
        v = w[:m]
        pivot = int(np.argmax(np.abs(v)))
        v = v / v[pivot]
        # 在矩阵多项式上做 Newton 校正，固定 v[pivot] = 1
        for _ in range(NEWTON_STEPS):
            P, dP = pencil(kappa)
            J = np.zeros((m + 1, m + 1), dtype=complex)
            J[:m, :m] = P
            J[:m, m] = dP @ v
            J[m, pivot] = 1.0
            try:
                step = np.linalg.solve(J, -np.concatenate([P @ v, [0.0]]))
            except np.linalg.LinAlgError:
                break
            v = v + step[:m]
            kappa = kappa + step[m]
        modes.append(CoupledMode(kappa=complex(kappa), vector=tuple(complex(z) for z in v)))
    modes.sort(key=lambda mode: (mode.kappa.real, mode.kappa.imag))
    logger.debug(f"耦合模态: {[mode.kappa for mode in modes]}")
    return modes


def coupled_eigen_solution(model: ModelParameters, c: Sequence[float], chi: float, mu: complex, nu: float,
                           amplitudes: Dict[int, complex]) -> CompositeField:
    """按下标选取 coupled_eigen_modes 的若干模态叠加，加上剪切 yc"""
    c = np.asarray(c, dtype=float)
    modes = coupled_eigen_modes(model, c, chi, mu, nu)
    compat = ("coupled", model.signature(), tuple(c.tolist()), chi)
    terms = []
    for idx, amp in amplitudes.items():
        if not 0 <= idx < len(modes):
            raise ParameterException("模态下标越界", {"index": idx, "count": len(modes)})
        mode = modes[idx]
        kappa = mode.kappa
        terms.append(ExpTerm(complex(amp) * np.asarray(mode.vector), (mu - kappa * nu, kappa, -kappa * chi)))
    tags = {"family": "coupled_eigen", "mu": str(mu), "nu": nu, "chi": chi, "c": c.tolist(), "compat": compat,
            "kappas": [str(modes[i].kappa) for i in amplitudes]}
    return CompositeField(terms, m=model.m, background=PolyTerm.monomial(0, 0, 1, c), flow=-c, tags=tags)


########################################################################################################################
########################################################################################################################
def _check_orthogonal(spectrum: SpectralData, v: np.ndarray, name: str) -> None:
    ones = _ones(spectrum.m)
    tol = 1e-10 * float(spectrum.norm(v)) * float(spectrum.norm(ones))
    if abs(float(spectrum.inner(ones, v))) > tol:
        raise ParameterException(f"{name} 必须与 1̄ 按 W 内积正交（即属于 im F）", {name: v.tolist()})


def _affine_forcing(model: ModelParameters, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    F = model.F.dense()
    return c * (F @ b) - b * (F @ c) + model.beta * c


def linear_shear_solution(model: ModelParameters, b: Sequence[float], c: Sequence[float],
                          chi: Sequence[float] = (0.0,), g: Sequence[float] = (0.0,),
                          spectrum: Optional[SpectralData] = None) -> PolyTerm:
    """ψ = (x − χy)c + (y − χ_t/β)b − tF⁺(CFb − BFc + βc) + (κ(x − χy) − χ_t y²/2 + g)1̄，κ = χ_tt/β"""
    spectrum = spectrum or spectral(model.F)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    _check_orthogonal(spectrum, b, "b")
    _check_orthogonal(spectrum, c, "c")
    chi_p = _check_degree(as_poly(list(chi)), "chi", 4)
    g_p = _check_degree(as_poly(list(g)), "g", 4)
    beta = model.beta
    chi_t = chi_p.deriv()
    kappa = chi_p.deriv(2) / beta
    ones = _ones(model.m)
    K = _affine_forcing(model, b, c)

    psi = (PolyTerm.monomial(0, 1, 0, c) + PolyTerm.from_time_polys({(0, 1): -chi_p}, c)
           + PolyTerm.monomial(0, 0, 1, b) + PolyTerm.from_time_polys({(0, 0): -chi_t / beta}, b)
           + PolyTerm.monomial(1, 0, 0, -(spectrum.pinv @ K))
           + PolyTerm.from_time_polys({(1, 0): kappa, (0, 1): -kappa * chi_p, (0, 2): -chi_t / 2.0,
                                       (0, 0): g_p}, ones))
    psi.tags.update({"family": "linear_shear", "b": b.tolist(), "c": c.tolist(), "chi": chi_p.coef.tolist(),
                     "g": g_p.coef.tolist(), "superposable": False})
    return psi


def velocity_only_t_solution(model: ModelParameters, c: Sequence[float], b: Sequence[float],
                             zeta: Sequence[float] = (0.0,), g: Sequence[float] = (0.0,),
                             shift: Optional[Sequence[float]] = None,
                             spectrum: Optional[SpectralData] = None) -> PolyTerm:
    """速度只依赖 t 的解 ψ = (x − ζ)c + yb + (g − ζ_t y)1̄ − tF⁺(CFb − BFc + βc) + ς，要求 c ⊥_W 1̄"""
    spectrum = spectrum or spectral(model.F)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    _check_orthogonal(spectrum, c, "c")
    zeta_p = _check_degree(as_poly(list(zeta)), "zeta", 4)
    g_p = _check_degree(as_poly(list(g)), "g", 4)
    ones = _ones(model.m)
    K = _affine_forcing(model, b, c)
    varsigma = np.zeros(model.m) if shift is None else np.asarray(shift, dtype=float)

    psi = (PolyTerm.monomial(0, 1, 0, c) + PolyTerm.from_time_polys({(0, 0): -zeta_p}, c)
           + PolyTerm.monomial(0, 0, 1, b) + PolyTerm.monomial(1, 0, 0, -(spectrum.pinv @ K))
           + PolyTerm.from_time_polys({(0, 0): g_p, (0, 1): -zeta_p.deriv()}, ones)
           + PolyTerm.monomial(0, 0, 0, varsigma))
    psi.tags.update({"family": "velocity_only_t", "b": b.tolist(), "c": c.tolist(), "zeta": zeta_p.coef.tolist(),
                     "g": g_p.coef.tolist(), "superposable": False})
    return psi
