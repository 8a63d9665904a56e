"""
偶极涡（modon）：圆周 r = r0 内取 Bessel J 型振荡解、外取 Bessel K 型衰减解，
由界面上 ψ = 0 与 ψ_r 连续的匹配条件求未知参数，再拼成分片（弱）解
"""

import itertools
import json
from pathlib import Path
from typing import Dict, Any, Optional, List, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, Field, ConfigDict
from scipy.optimize import brentq

from qglab import LOG_LEVEL
from qglab.core.runtime_config import get_runtime_config
from qglab.model.layers import ModelParameters, SpectralData, spectral, char_poly, symmetrize
from qglab.model.specfun import bessel, BesselKind, bessel_ratio, bessel_zeros, cylinder
from qglab.shared.exceptions import (
    ParameterException, RootNotFoundException, ConvergenceException, ToleranceException, PoleException,
)
from qglab.shared.utils import get_logger, configure_logger
from qglab.solutions.fields import Annulus, CompositeField, PiecewiseSolution, PolyTerm, RadialTerm

logger = get_logger(__name__)
configure_logger(log_filename="qglab_modon.log")
logger.setLevel(LOG_LEVEL)

# 匹配残差的相对容差
MATCH_RTOL = 1e-8
_J1 = BesselKind("J", 1)
_K1 = BesselKind("K", 1)


class ModonSide(BaseModel):
    """界面一侧的参数：对角矩阵 B、F − B 的特征值与 W 单位特征向量、振幅和背景流"""
    model_config = ConfigDict(frozen=True)

    B: List[float] = Field(description="对角矩阵 B 的对角元")
    eigenvalues: List[float] = Field(description="F − B 的特征值（内侧全正，外侧全负）")
    vectors: List[List[float]] = Field(description="特征向量，每行一个，按 W 范数归一")
    alphas: List[float] = Field(description="各模态的振幅")
    flow: List[float] = Field(description="背景流 β(F − B)⁻¹1̄")

    def vector_matrix(self) -> np.ndarray:
        """按列排列的特征向量"""
        return np.asarray(self.vectors, dtype=float).T


class ModonSpec(BaseModel):
    """分片偶极涡的全部参数"""
    model_config = ConfigDict(frozen=True)

    r0: float = Field(gt=0, description="界面半径 [m]")
    center: Tuple[float, float] = Field(default=(0.0, 0.0), description="涡心坐标 [m]")
    beta: float = Field(gt=0, description="β [m⁻¹s⁻¹]")
    inner: ModonSide = Field(description="r ≤ r0 一侧")
    outer: ModonSide = Field(description="r ≥ r0 一侧")
    barotropic: bool = Field(default=False, description="是否为正压 Larichev–Reznik 情形")
    rho_tilde: Optional[float] = Field(default=None, description="正压情形的 ϱ̃")
    rho_hat: Optional[float] = Field(default=None, description="正压情形的 ϱ̂")

    @property
    def m(self) -> int:
        return len(self.inner.B)

    def to_json(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.model_dump_json(indent=2), encoding="utf-8")

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "ModonSpec":
        return cls.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))


########################################################################################################################
########################################################################################################################
def _w_unit(spec: SpectralData) -> np.ndarray:
    vectors = spec.vectors
    return vectors / spec.norm(vectors.T)[None, :]


def _side(model: ModelParameters, B: Sequence[float], r0: float, inner: bool) -> ModonSide:
    B = np.broadcast_to(np.asarray(B, dtype=float), (model.m,))
    spec = spectral(model.F.shift(B))
    lam = spec.lambdas
    if inner and not np.all(lam > 0):
        raise ParameterException("内侧要求 F − B̃ 的特征值全为正", {"eigenvalues": lam.tolist()})
    if not inner and not np.all(lam < 0):
        raise ParameterException("外侧要求 F − B̂ 的特征值全为负", {"eigenvalues": lam.tolist()})

    vectors = _w_unit(spec)
    ones = np.ones(model.m)
    proj = spec.inner(ones, vectors.T)
    norm1 = float(spec.norm(ones))
    # 数值上与 1̄ 正交的模态振幅置零
    proj = np.where(np.abs(proj) <= 1e-12 * norm1, 0.0, proj)
    k = np.sqrt(np.abs(lam))
    alphas = np.zeros(model.m)
    for j in range(model.m):
        if proj[j] == 0.0:
            continue
        if inner:
            value, _ = bessel(_J1, k[j] * r0)
            if abs(value) < 1e-12:
                raise PoleException("J1(√ν r0) 为零，振幅无定义", {"mode": j, "x": float(k[j] * r0)})
        else:
            value, _ = bessel(_K1, k[j] * r0)
        alphas[j] = r0 * model.beta * proj[j] / (lam[j] * value)
    flow = model.beta * (spec.pinv @ ones)
    return ModonSide(B=B.tolist(), eigenvalues=lam.tolist(), vectors=vectors.T.tolist(), alphas=alphas.tolist(),
                     flow=flow.tolist())


def modon_from_matrices(model: ModelParameters, r0: float, Btilde: Sequence[float], Bhat: Sequence[float],
                        center: Tuple[float, float] = (0.0, 0.0), **extra) -> ModonSpec:
    """由 r0、B̃、B̂ 计算两侧的谱数据、振幅和背景流（不检查匹配条件）"""
    if not r0 > 0:
        raise ParameterException("r0 必须为正", {"r0": r0})
    return ModonSpec(r0=r0, center=tuple(center), beta=model.beta, inner=_side(model, Btilde, r0, True),
                     outer=_side(model, Bhat, r0, False), **extra)


def matching_residual(model: ModelParameters, spec: ModonSpec) -> np.ndarray:
    """ψ_r 匹配条件的残差向量，取内侧特征基下的 W 坐标

    Σ (r0β/√ν)(J1'/J1)(1̄,ẽ)ẽ + Σ (r0β/√−ς)(K1'/K1)(1̄,ê)ê − (ũ − û)
    """
    d, _ = symmetrize(model.F)
    weights = 1.0 / d ** 2
    ones = np.ones(model.m)
    r0, beta = spec.r0, spec.beta
    total = -(np.asarray(spec.inner.flow) - np.asarray(spec.outer.flow))
    for side, inner in ((spec.inner, True), (spec.outer, False)):
        vectors = side.vector_matrix()
        for j, lam in enumerate(side.eigenvalues):
            e = vectors[:, j]
            k = np.sqrt(abs(lam))
            value, deriv = bessel(_J1 if inner else _K1, k * r0)
            total = total + (r0 * beta / k) * (deriv / value) * float(np.sum(ones * e * weights)) * e
    basis = spec.inner.vector_matrix()
    return (total * weights) @ basis


def relative_matching_residual(model: ModelParameters, spec: ModonSpec) -> float:
    res = matching_residual(model, spec)
    scale = max(float(np.max(np.abs(spec.inner.flow))), float(np.max(np.abs(spec.outer.flow))), 1e-300)
    return float(np.max(np.abs(res)) / scale)


########################################################################################################################
########################################################################################################################
def _lr_condition(x: float, rho_ratio: float) -> float:
    """乘以 ϱ̃ 后的正压匹配条件，x = √ϱ̃ r0，rho_ratio = ϱ̂/ϱ̃"""
    y = x * np.sqrt(rho_ratio)
    return x * bessel_ratio("J0/J1", x) - (y * bessel_ratio("K0/K1", y) + 2.0) / rho_ratio - 2.0


def _branch_interval(branch: int) -> Tuple[float, float]:
    zeros = bessel_zeros("J", 1, branch + 1)
    lo = 0.0 if branch == 0 else float(zeros[branch - 1])
    return lo, float(zeros[branch])


def _scan_roots(func, lo: float, hi: float, points: int, poles: Sequence[float] = ()) -> List[float]:
    """在 (lo, hi) 上等距扫描变号区间并用 brentq 求根，跨越极点的区间跳过"""
    grid = np.linspace(lo, hi, points + 1)[1:-1]
    values = []
    for g in grid:
        try:
            values.append(func(g))
        except PoleException:
            values.append(np.nan)
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
            continue
        if any(a <= p <= b for p in poles):
            continue
        roots.append(brentq(func, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return roots


def lr_barotropic_solve(model: ModelParameters, r0: Optional[float] = None, rho_tilde: Optional[float] = None,
                        rho_hat: Optional[float] = None, branch: int = 1,
                        center: Tuple[float, float] = (0.0, 0.0)) -> ModonSpec:
    """正压 Larichev–Reznik 偶极涡：给定 r0、ϱ̃、ϱ̂ 中的两个求第三个

    branch 指定 √ϱ̃ r0 所在的区间 (j_{1,branch}, j_{1,branch+1})，branch = 0 为 (0, j_{1,1})
    """
    given = [v is not None for v in (r0, rho_tilde, rho_hat)]
    if sum(given) != 2:
        raise ParameterException("r0、rho_tilde、rho_hat 必须恰好给出两个",
                                 {"r0": r0, "rho_tilde": rho_tilde, "rho_hat": rho_hat})
    if branch < 0:
        raise ParameterException("branch 必须非负", {"branch": branch})
    lam1 = abs(float(spectral(model.F).lambdas[0]))
    if rho_tilde is not None and not rho_tilde > lam1:
        raise ParameterException("要求 ϱ̃ > |λ1|", {"rho_tilde": rho_tilde, "lambda_1": -lam1})
    if rho_hat is not None and not rho_hat > 0:
        raise ParameterException("要求 ϱ̂ > 0", {"rho_hat": rho_hat})
    if r0 is not None and not r0 > 0:
        raise ParameterException("要求 r0 > 0", {"r0": r0})

    points = int(get_runtime_config().get("QGLAB_ROOT_SCAN_POINTS"))
    lo, hi = _branch_interval(branch)
    if r0 is None:
        top = float(bessel_zeros("J", 1, max(3, branch + 1))[-1])
        poles = bessel_zeros("J", 1, max(3, branch + 1))
        roots = _scan_roots(lambda x: _lr_condition(x, rho_hat / rho_tilde), 0.0, top, points, poles)
        hits = [x for x in roots if lo < x < hi]
        if not hits:
            raise RootNotFoundException("所选分支上没有根", {"branch": branch, "roots": roots})
        r0 = hits[0] / np.sqrt(rho_tilde)
    elif rho_hat is None:
        x = np.sqrt(rho_tilde) * r0

        def in_log(s: float) -> float:
            return _lr_condition(x, np.exp(s) / rho_tilde)

        base = np.log(rho_tilde)
        roots = _scan_roots(in_log, base - 4 * np.log(10.0), base + 4 * np.log(10.0), points)
        if not roots:
            raise RootNotFoundException("在 ϱ̃·[1e-4, 1e4] 内找不到 ϱ̂", {"rho_tilde": rho_tilde, "r0": r0})
        rho_hat = float(np.exp(roots[0]))
    else:
        a = max(lo, np.sqrt(lam1) * r0)
        roots = _scan_roots(lambda x: _lr_condition(x, rho_hat * r0 ** 2 / x ** 2), a, hi, points, [lo, hi])
        if not roots:
            raise RootNotFoundException("所选分支上找不到 ϱ̃", {"branch": branch, "r0": r0, "rho_hat": rho_hat})
        rho_tilde = float((roots[0] / r0) ** 2)

    logger.info(f"正压偶极涡: r0={r0:.6g} m, ϱ̃={rho_tilde:.6g}, ϱ̂={rho_hat:.6g}, 分支={branch}")
    return modon_from_matrices(model, float(r0), -rho_tilde * np.ones(model.m), rho_hat * np.ones(model.m),
                               center=center, barotropic=True, rho_tilde=float(rho_tilde), rho_hat=float(rho_hat))


def shared_basis_equation(nu: np.ndarray, r0: float, rho: float) -> np.ndarray:
    """B̂ = B̃ + ϱE 时的标量匹配条件，除以 −r0² 后写成 J2/(xJ1) + K2/(yK1)"""
    x = np.sqrt(nu) * r0
    y = np.sqrt(rho - nu) * r0
    j1 = cylinder("J", 1, x)
    return cylinder("J", 2, x) / (x * j1) + cylinder("K", 2, y) / (y * cylinder("K", 1, y))


def _newton_diagonal(model: ModelParameters, nus: np.ndarray, guess: np.ndarray, scale: float,
                     max_iter: int) -> Optional[np.ndarray]:
    """阻尼 Newton：求对角 b 使 det(λE − (F − diag b)) = Π(λ − ν_i)"""
    m = model.m
    target = Polynomial.fromroots(nus / scale).coef

    def residual(u: np.ndarray) -> np.ndarray:
        T = model.F.shift(u * scale)
        coef = char_poly(T) / scale ** (m - np.arange(m + 1))
        return (coef - target)[:-1]

    u = guess / scale
    res = residual(u)
    tol = 1e-12 * max(float(np.max(np.abs(target))), 1.0)
    for it in range(max_iter):
        norm = float(np.max(np.abs(res)))
        if norm <= tol:
            logger.debug(f"B̃ Newton 收敛: 迭代 {it}, 残差 {norm:.3e}")
            return u * scale
        jac = np.empty((m, m))
        for i in range(m):
            step = 1e-7 * max(abs(u[i]), 1.0)
            du = np.zeros(m)
            du[i] = step
            jac[:, i] = (residual(u + du) - residual(u - du)) / (2 * step)
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            return None
        factor = 1.0
        while factor > 1e-6:
            trial = residual(u + factor * delta)
            if np.max(np.abs(trial)) < norm:
                break
            factor *= 0.5
        else:
            return None
        u = u + factor * delta
        res = residual(u)
    return None


def shared_basis_solve(model: ModelParameters, r0: float, rho: float,
                       assignment: Optional[Sequence[int]] = None,
                       center: Tuple[float, float] = (0.0, 0.0), scan_points: int = 4000) -> ModonSpec:
    """B̂ = B̃ + ϱE 的斜压偶极涡：先求标量条件在 (0, ϱ) 内最小的 m 个根，再反求 B̃

    assignment 指定 Newton 初值 b_i = F_ii − ν_{σ(i)} 中的排列 σ；缺省时依次尝试所有排列
    """
    if not r0 > 0 or not rho > 0:
        raise ParameterException("要求 r0 > 0 且 ϱ > 0", {"r0": r0, "rho": rho})
    m = model.m

    def scaled(u: float) -> float:
        return float(shared_basis_equation(np.asarray(u * rho), r0, rho))

    x_max = np.sqrt(rho) * r0
    count = int(x_max / np.pi) + 2
    poles = [float((z / r0) ** 2 / rho) for z in bessel_zeros("J", 1, count) if z < x_max]
    roots = _scan_roots(scaled, 1e-6, 1.0 - 1e-9, scan_points, poles)
    if len(roots) < m:
        raise RootNotFoundException(f"(0, ϱ) 内只找到 {len(roots)} 个根，需要 {m} 个",
                                    {"roots": [u * rho for u in roots], "r0": r0, "rho": rho})
    nus = np.array(sorted(roots)[:m]) * rho

    max_iter = int(get_runtime_config().get("QGLAB_NEWTON_MAX_ITER"))
    orders = [tuple(assignment)] if assignment is not None else list(itertools.permutations(range(m)))
    diag = model.F.diag
    Btilde = None
    for order in orders:
        if sorted(order) != list(range(m)):
            raise ParameterException("assignment 必须是 0..m−1 的排列", {"assignment": list(order)})
        guess = diag - nus[list(order)]
        Btilde = _newton_diagonal(model, nus, guess, rho, max_iter)
        if Btilde is not None:
            logger.info(f"共享特征基偶极涡: ν={nus.tolist()}, 排列={order}, B̃={Btilde.tolist()}")
            break
    if Btilde is None:
        raise ConvergenceException(f"Newton 在 {max_iter} 步内未收敛", {"nu": nus.tolist(), "orders": orders})

    return modon_from_matrices(model, r0, Btilde, Btilde + rho, center=center)


########################################################################################################################
########################################################################################################################
def _unpack(values: np.ndarray, m: int) -> Tuple[float, np.ndarray, np.ndarray]:
    return float(values[0]), values[1:m + 1], values[m + 1:]


def parameter_names(m: int) -> List[str]:
    return ["r0"] + [f"Btilde[{i}]" for i in range(m)] + [f"Bhat[{i}]" for i in range(m)]


def modon_newton(model: ModelParameters, start: ModonSpec, free: Sequence[str],
                 max_iter: Optional[int] = None) -> ModonSpec:
    """在用户选定的 m 个自由参数上用 Newton 法求解一般的匹配条件，其余 m + 1 个参数固定"""
    m = model.m
    names = parameter_names(m)
    free = list(free)
    unknown = [n for n in free if n not in names]
    if unknown or len(free) != m or len(set(free)) != m:
        raise ParameterException(f"必须恰好选择 {m} 个不同的自由参数", {"free": free, "available": names})
    idx = [names.index(n) for n in free]
    max_iter = max_iter or int(get_runtime_config().get("QGLAB_NEWTON_MAX_ITER"))
    values = np.concatenate([[start.r0], start.inner.B, start.outer.B])
    center = start.center

    def build(v: np.ndarray) -> ModonSpec:
        r0, Bt, Bh = _unpack(v, m)
        return modon_from_matrices(model, r0, Bt, Bh, center=center)

    def residual(v: np.ndarray) -> np.ndarray:
        return matching_residual(model, build(v))

    res = residual(values)
    spec = build(values)
    for it in range(max_iter):
        if relative_matching_residual(model, spec) <= MATCH_RTOL * 1e-2:
            logger.info(f"匹配 Newton 收敛: 迭代 {it}")
            return spec
        jac = np.empty((m, m))
        for col, i in enumerate(idx):
            step = 1e-6 * abs(values[i]) or 1e-12
            dv = np.zeros_like(values)
            dv[i] = step
            jac[:, col] = (residual(values + dv) - residual(values - dv)) / (2 * step)
        delta = np.linalg.lstsq(jac, -res, rcond=None)[0]
        norm = float(np.max(np.abs(res)))
        factor = 1.0
        while factor > 1e-6:
            trial = values.copy()
            trial[idx] += factor * delta
            try:
                trial_res = residual(trial)
            except (ParameterException, PoleException):
                factor *= 0.5
                continue
            if np.max(np.abs(trial_res)) < norm:
                break
            factor *= 0.5
        else:
            if relative_matching_residual(model, spec) <= MATCH_RTOL:
                return spec
            raise ConvergenceException("匹配 Newton 的阻尼步长无法降低残差", {"iteration": it, "residual": norm})
        values, res = trial, trial_res
        spec = build(values)
    if relative_matching_residual(model, spec) <= MATCH_RTOL:
        return spec
    raise ConvergenceException(f"匹配 Newton 在 {max_iter} 步内未收敛",
                               {"residual": relative_matching_residual(model, spec)})


def _piece(spec: ModonSpec, side: ModonSide, inner: bool) -> CompositeField:
    kind = "J" if inner else "K"
    domain = Annulus(spec.center, 0.0, spec.r0) if inner else Annulus(spec.center, spec.r0, np.inf)
    vectors = side.vector_matrix()
    terms = []
    for j, (lam, alpha) in enumerate(zip(side.eigenvalues, side.alphas)):
        if alpha == 0.0:
            continue
        # sinθ·Z1 = Re(−i Z1 e^{iθ})
        terms.append(RadialTerm(kind, 1, np.sqrt(abs(lam)), -1j * alpha * vectors[:, j], center=spec.center,
                                domain=domain))
    u = np.asarray(side.flow)
    background = PolyTerm.monomial(0, 0, 1, -u) + PolyTerm.monomial(0, 0, 0, spec.center[1] * u)
    return CompositeField(terms, m=spec.m, background=background, flow=u, domain=domain,
                          tags={"family": "modon_inner" if inner else "modon_outer", "superposable": False})


def assemble_modon(model: ModelParameters, spec: ModonSpec, check: bool = True) -> PiecewiseSolution:
    """内侧 sinθ(Σα̃_j J1(√ν_j r)ẽ_j − r ũ)，外侧 sinθ(Σα̂_j K1(√−ς_j r)ê_j − r û)"""
    if check:
        rel = relative_matching_residual(model, spec)
        if rel > MATCH_RTOL:
            raise ToleranceException("匹配条件残差超出容差", {"relative_residual": rel, "tolerance": MATCH_RTOL})
    inner = _piece(spec, spec.inner, True)
    outer = _piece(spec, spec.outer, False)
    interface = {"kind": "circle", "center": list(spec.center), "r0": spec.r0}
    tags = {"family": "modon", "barotropic": spec.barotropic, "superposable": False}
    return PiecewiseSolution([(inner.domain, inner), (outer.domain, outer)], interface=interface, tags=tags)


def modon_summary(model: ModelParameters, spec: ModonSpec) -> Dict[str, Any]:
    """CLI 清单用的摘要"""
    return {"r0": spec.r0, "barotropic": spec.barotropic, "rho_tilde": spec.rho_tilde, "rho_hat": spec.rho_hat,
            "nu": spec.inner.eigenvalues, "sigma": spec.outer.eigenvalues, "Btilde": spec.inner.B,
            "Bhat": spec.outer.B, "alpha_tilde": spec.inner.alphas, "alpha_hat": spec.outer.alphas,
            "u_tilde": spec.inner.flow, "u_hat": spec.outer.flow,
            "matching_residual": relative_matching_residual(model, spec)}
