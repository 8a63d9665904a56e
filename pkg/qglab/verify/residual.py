"""
方程残差 R = q_t + ψ_x⊙q_y − ψ_y⊙q_x 的计算与网格收敛性研究。
jet 方式直接用解析导数逐点求值；fd 方式用四阶中心差分并在 h、h/2、h/4 三套网格上拟合收敛阶
"""

from typing import Dict, Any, Optional, List, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import ndimage

from qglab import LOG_LEVEL
from qglab.core.config_manager import ResidualMethod
from qglab.core.runtime_config import get_runtime_config
from qglab.model.layers import ModelParameters
from qglab.shared.exceptions import NumericalException, ParameterException
from qglab.shared.utils import get_logger, configure_logger
from qglab.solutions.fields import SolutionField, PiecewiseSolution, Plane, Jet
from qglab.verify.grid import GridSpec, GridField, sample_rows

logger = get_logger(__name__)
configure_logger(log_filename="qglab_verify.log")
logger.setLevel(LOG_LEVEL)

PAD = 4
BAND_CELLS = 4
JET_TOLERANCE = 1e-9
# 舍入误差上界的放大系数
ROUNDING_SAFETY = 64.0
_EPS = float(np.finfo(float).eps)

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
# 边界处的四阶单侧格式：(偏移起点, 系数)
_D1_EDGE = [(0, np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0),
            (-1, np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0)]
_D2_EDGE = [(0, np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0),
            (-1, np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0)]


class GridResidual(BaseModel):
    """单套网格上的归一化残差"""
    h: float = Field(description="网格步长 [m]")
    max_norm: float = Field(description="max|R| / scale")
    l2_norm: float = Field(description="均方根 |R| / scale")
    per_layer: List[float] = Field(description="各层 max|R| / scale")
    scale: float = Field(description="max|q_t| + max|ψ_x q_y| + max|ψ_y q_x|，不低于舍入误差上界")
    rounding: float = Field(default=0.0, description="舍入误差上界 / scale")
    points: int = Field(description="参与统计的网格点数")


class ResidualReport(BaseModel):
    """残差报告"""
    method: str = Field(description="fd 或 jet")
    max_norm: float = Field(description="最细网格上的 max|R| / scale")
    l2_norm: float = Field(description="最细网格上的均方根残差")
    per_layer: List[float] = Field(description="最细网格上各层的残差")
    scale: float = Field(description="最细网格上的归一化尺度")
    rounding: float = Field(default=0.0, description="最细网格上的舍入误差上界 / scale")
    grids: List[float] = Field(description="各网格的步长")
    levels: List[GridResidual] = Field(description="逐网格结果")
    fitted_order: Optional[float] = Field(default=None, description="log‖R‖ 对 log h 的最小二乘斜率，至少三套网格")
    exact: bool = Field(default=False, description="所有网格残差都在舍入误差水平")
    floor: float = Field(description="判定精确的归一化残差")
    min_order: float = Field(description="通过所需的收敛阶")
    excluded_band: Optional[float] = Field(default=None, description="界面两侧排除带宽度 [m]")
    passed: bool = Field(description="是否通过")

    def failure(self) -> Optional[str]:
        """第一个未满足的判据，通过时为 None"""
        if self.passed:
            return None
        if self.method == ResidualMethod.JET.value:
            return f"逐点残差 {self.max_norm:.3e} 超过 {JET_TOLERANCE:g}"
        if self.fitted_order is None:
            return f"残差 {self.max_norm:.3e} 不在舍入水平且网格数不足以拟合收敛阶"
        return f"残差平台：收敛阶 {self.fitted_order:.3f} < {self.min_order:g}，最细网格残差 {self.max_norm:.3e}"


########################################################################################################################
########################################################################################################################
def _apply_F(model: ModelParameters, psi: np.ndarray) -> np.ndarray:
    return psi @ model.F.dense().T


def potential_vorticity(model: ModelParameters, field_: SolutionField, t, x, y) -> np.ndarray:
    """q = ψ_xx + ψ_yy + Fψ + βy1̄，解析导数"""
    jet = field_.jet(t, x, y, 2)
    y = np.broadcast_to(np.asarray(y, dtype=float), jet[(0, 0, 0)].shape[:-1])
    return jet[(0, 2, 0)] + jet[(0, 0, 2)] + _apply_F(model, jet[(0, 0, 0)]) + model.beta * y[..., None]


def residual_terms(model: ModelParameters, jet: Jet) -> Dict[str, np.ndarray]:
    """由三阶 jet 计算 q_t、ψ_x q_y、ψ_y q_x 以及 R；β 项在 q_y 中

    noise 是 R 的逐点舍入误差上界，由参与求和的各项绝对值累加得到
    """
    F = model.F.dense()
    F_abs = np.abs(F).T
    q_t = jet[(1, 2, 0)] + jet[(1, 0, 2)] + jet[(1, 0, 0)] @ F.T
    q_x = jet[(0, 3, 0)] + jet[(0, 1, 2)] + jet[(0, 1, 0)] @ F.T
    q_y = jet[(0, 2, 1)] + jet[(0, 0, 3)] + jet[(0, 0, 1)] @ F.T + model.beta
    adv_x = jet[(0, 1, 0)] * q_y
    adv_y = jet[(0, 0, 1)] * q_x

    size_t = np.abs(jet[(1, 2, 0)]) + np.abs(jet[(1, 0, 2)]) + np.abs(jet[(1, 0, 0)]) @ F_abs
    size_x = np.abs(jet[(0, 3, 0)]) + np.abs(jet[(0, 1, 2)]) + np.abs(jet[(0, 1, 0)]) @ F_abs
    size_y = np.abs(jet[(0, 2, 1)]) + np.abs(jet[(0, 0, 3)]) + np.abs(jet[(0, 0, 1)]) @ F_abs + abs(model.beta)
    noise = ROUNDING_SAFETY * _EPS * (size_t + np.abs(jet[(0, 1, 0)]) * size_y + np.abs(jet[(0, 0, 1)]) * size_x)
    return {"R": q_t + adv_x - adv_y, "q_t": q_t, "adv_x": adv_x, "adv_y": adv_y, "noise": noise}


def residual_scale(terms: Dict[str, np.ndarray]) -> Tuple[float, float]:
    """归一化尺度与归一化后的舍入误差上界

    尺度取 max|q_t| + max|ψ_x q_y| + max|ψ_y q_x| 与舍入误差上界中的较大者，
    各项都只剩舍入噪声时不会被自身归一化到 1
    """
    terms_scale = float(sum(np.max(np.abs(terms[k]), initial=0.0) for k in ("q_t", "adv_x", "adv_y")))
    noise = float(np.max(terms["noise"], initial=0.0)) if "noise" in terms else 0.0
    scale = max(terms_scale, noise)
    return scale, (noise / scale if scale > 0 else 0.0)


def pointwise_residual(model: ModelParameters, field_: SolutionField, t, x, y) -> Dict[str, np.ndarray]:
    """逐点的方程残差及各项"""
    return residual_terms(model, field_.jet(t, x, y, 3))


def _shift(a: np.ndarray, axis: int, start: int, stop: int) -> np.ndarray:
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, a.shape[axis] + stop if stop <= 0 else stop)
    return a[tuple(index)]


def _central(a: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    """五点中心差分，结果沿 axis 两端各少 2 个点"""
    weights = _D1 if order == 1 else _D2
    out = sum(w * _shift(a, axis, k, k - 4) for k, w in enumerate(weights) if w != 0.0)
    return out / h ** order


def _trim(a: np.ndarray, axis: int, n: int) -> np.ndarray:
    return _shift(a, axis, n, -n) if n else a


def fd_derivative(a: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    """与输入同形状的四阶差分，边界两点用单侧格式"""
    if a.shape[axis] < 6:
        raise ParameterException("差分至少需要 6 个点", {"axis": axis, "n": a.shape[axis]})
    out = np.zeros_like(a)
    a_moved = np.moveaxis(a, axis, 0)
    o_moved = np.moveaxis(out, axis, 0)
    o_moved[2:-2] = np.moveaxis(_central(a, 1.0, axis, order), axis, 0)
    n = a_moved.shape[0]
    for offset, coef in (_D1_EDGE if order == 1 else _D2_EDGE):
        row = -offset
        start = row + offset
        o_moved[row] = np.tensordot(coef, a_moved[start:start + coef.size], axes=(0, 0))
        # 右端用镜像格式，奇数阶导数变号
        sign = -1.0 if order % 2 else 1.0
        o_moved[n - 1 - row] = sign * np.tensordot(coef, a_moved[n - 1 - start - np.arange(coef.size)], axes=(0, 0))
    return out / h ** order


def potential_vorticity_grid(model: ModelParameters, grid: GridField) -> Tuple[np.ndarray, bool]:
    """网格场的位涡，返回 (q, 是否在边界用了单侧格式)"""
    spec = grid.spec
    psi = grid.data
    lap = fd_derivative(psi, spec.dx, 0, 2) + fd_derivative(psi, spec.dy, 1, 2)
    _, ys = spec.axes()
    return lap + _apply_F(model, psi) + model.beta * ys[None, :, None], True


########################################################################################################################
########################################################################################################################
def _padded(spec: GridSpec, pad: int) -> GridSpec:
    return GridSpec(x0=spec.x0 - pad * spec.dx, y0=spec.y0 - pad * spec.dy, Lx=spec.dx * (spec.Nx + 2 * pad - 1),
                    Ly=spec.dy * (spec.Ny + 2 * pad - 1), Nx=spec.Nx + 2 * pad, Ny=spec.Ny + 2 * pad, t=spec.t)


def _valid_mask(field_: SolutionField, spec: GridSpec, band: bool) -> Tuple[np.ndarray, Optional[float]]:
    """参与统计的网格点：差分模板整体落在解的定义域内，且远离分片界面"""
    X, Y = spec.mesh()
    mask = np.ones(X.shape, dtype=bool)
    if not isinstance(field_.domain, Plane):
        big = _padded(spec, PAD)
        PX, PY = big.mesh()
        inside = field_.domain.contains(spec.t, PX, PY)
        mask &= ndimage.minimum_filter(inside.astype(np.uint8), size=2 * PAD + 1)[PAD:-PAD, PAD:-PAD].astype(bool)
    if spec.mask is not None:
        mask &= spec.mask.contains(spec.t, X, Y)
    width = None
    if band and isinstance(field_, PiecewiseSolution) and field_.interface.get("kind") == "circle":
        width = BAND_CELLS * spec.h
        cx, cy = field_.interface["center"]
        r = np.hypot(X - cx, Y - cy)
        mask &= np.abs(r - field_.interface["r0"]) > width
    return mask, width


def _check_finite(R: np.ndarray, spec: GridSpec, mask: np.ndarray) -> None:
    bad = np.argwhere(mask[..., None] & ~np.isfinite(R))
    if bad.size:
        i, j, k = bad[0]
        xs, ys = spec.axes()
        raise NumericalException("残差出现非有限值",
                                 {"x": float(xs[i]), "y": float(ys[j]), "layer": int(k), "t": spec.t})


def _summarize(terms: Dict[str, np.ndarray], spec: GridSpec, mask: np.ndarray) -> GridResidual:
    R = terms["R"]
    _check_finite(R, spec, mask)
    if not np.any(mask):
        raise ParameterException("掩码排除了所有网格点", {"grid": spec.to_dict()})
    sel = {k: v[mask] for k, v in terms.items()}
    scale, rounding = residual_scale(sel)
    r = sel["R"]
    if scale == 0.0:
        if np.any(r):
            raise NumericalException("归一化尺度为零而残差非零", {"max_abs": float(np.max(np.abs(r)))})
        scale_inv = 0.0
    else:
        scale_inv = 1.0 / scale
    return GridResidual(h=spec.h, max_norm=float(np.max(np.abs(r))) * scale_inv,
                        l2_norm=float(np.sqrt(np.mean(r ** 2))) * scale_inv,
                        per_layer=(np.max(np.abs(r), axis=0) * scale_inv).tolist(), scale=scale,
                        rounding=rounding, points=int(mask.sum()))


def _jet_terms(model: ModelParameters, field_: SolutionField, spec: GridSpec) -> Dict[str, np.ndarray]:
    names = ("R", "q_t", "adv_x", "adv_y", "noise")

    def row(t, x, y):
        terms = pointwise_residual(model, field_, t, x, y)
        return np.stack([terms[k] for k in names], axis=-1)

    stacked = sample_rows(row, spec)
    return {k: stacked[..., i] for i, k in enumerate(names)}


def _pv_on(model: ModelParameters, psi: np.ndarray, spec: GridSpec, pad: int) -> np.ndarray:
    """pad 层外扩网格上的 ψ → 外扩 pad−2 层网格上的 q"""
    lap = _trim(_central(psi, spec.dx, 0, 2), 1, 2) + _trim(_central(psi, spec.dy, 1, 2), 0, 2)
    ys = spec.y0 + spec.dy * np.arange(-(pad - 2), spec.Ny + pad - 2)
    return lap + _apply_F(model, _trim(_trim(psi, 0, 2), 1, 2)) + model.beta * ys[None, :, None]


def _finite_max(a: np.ndarray) -> float:
    a = np.abs(a[np.isfinite(a)])
    return float(a.max()) if a.size else 0.0


def _fd_noise(model: ModelParameters, spec: GridSpec, psi: np.ndarray, q: np.ndarray, dt: float,
              grads: Tuple[float, float, float, float]) -> float:
    """差分残差的舍入误差上界；grads 为 max|ψ_x|、max|ψ_y|、max|q_x|、max|q_y|"""
    psi_x, psi_y, q_x, q_y = grads
    s1 = float(np.sum(np.abs(_D1)))
    s2 = float(np.sum(np.abs(_D2)))
    size_psi = _finite_max(psi)
    y_max = max(abs(spec.y0), abs(spec.y0 + spec.Ly)) + PAD * spec.dy
    f_abs = float(np.max(np.sum(np.abs(model.F.dense()), axis=1)))
    dq = _EPS * (size_psi * s2 * (spec.dx ** -2 + spec.dy ** -2) + f_abs * size_psi + abs(model.beta) * y_max
                 + _finite_max(q))
    d_psi_x = _EPS * s1 * size_psi / spec.dx
    d_psi_y = _EPS * s1 * size_psi / spec.dy
    noise = (s1 * dq / dt + psi_x * s1 * dq / spec.dy + q_y * d_psi_x
             + psi_y * s1 * dq / spec.dx + q_x * d_psi_y)
    return ROUNDING_SAFETY * noise


def _fd_terms(model: ModelParameters, field_: SolutionField, spec: GridSpec) -> Dict[str, np.ndarray]:
    big = _padded(spec, PAD)
    psi = sample_rows(field_.eval, big)
    q = _pv_on(model, psi, spec, PAD)
    q_x = _trim(_central(q, spec.dx, 0, 1), 1, 2)
    q_y = _trim(_central(q, spec.dy, 1, 1), 0, 2)
    psi_x = _trim(_trim(_central(psi, spec.dx, 0, 1), 0, 2), 1, PAD)
    psi_y = _trim(_trim(_central(psi, spec.dy, 1, 1), 1, 2), 0, PAD)

    speed = max(_finite_max(psi_x), _finite_max(psi_y))
    dt = spec.h / (10.0 * speed) if speed > 0 else 1.0
    small = _padded(spec, 2)
    q_t = np.zeros_like(q_x)
    for k, w in enumerate(_D1):
        if w == 0.0:
            continue
        at = small.at_time(spec.t + (k - 2) * dt)
        q_t += w * _pv_on(model, sample_rows(field_.eval, at), spec, 2)
    q_t /= dt
    adv_x, adv_y = psi_x * q_y, psi_y * q_x
    grads = (_finite_max(psi_x), _finite_max(psi_y), _finite_max(q_x), _finite_max(q_y))
    noise = np.full_like(q_t, _fd_noise(model, spec, psi, q, dt, grads))
    return {"R": q_t + adv_x - adv_y, "q_t": q_t, "adv_x": adv_x, "adv_y": adv_y, "noise": noise}


def _fit_order(hs: List[float], norms: List[float], floor: float) -> float:
    values = np.maximum(np.asarray(norms), floor)
    slope, _ = np.polyfit(np.log(hs), np.log(values), 1)
    return float(slope)


def residual(model: ModelParameters, field_: SolutionField, spec: GridSpec, levels: int = 3,
             method: str = ResidualMethod.FD.value, min_order: Optional[float] = None,
             floor: Optional[float] = None) -> ResidualReport:
    """网格上的残差报告；fd 方式在 levels 套逐次加密的网格上拟合收敛阶"""
    method = ResidualMethod(method).value
    rc = get_runtime_config()
    min_order = rc.get("QGLAB_RESIDUAL_MIN_ORDER") if min_order is None else min_order
    floor = rc.get("QGLAB_EXACT_FLOOR") if floor is None else floor
    if field_.m != model.m:
        raise ParameterException("解的层数与模型不一致", {"field": field_.m, "model": model.m})

    grids = [spec]
    if method == ResidualMethod.FD.value:
        for _ in range(levels - 1):
            grids.append(grids[-1].refined(2))

    results: List[GridResidual] = []
    band = None
    for g in grids:
        mask, band = _valid_mask(field_, g, method == ResidualMethod.FD.value)
        terms = _jet_terms(model, field_, g) if method == ResidualMethod.JET.value else _fd_terms(model, field_, g)
        results.append(_summarize(terms, g, mask))
        logger.debug(f"残差 h={g.h:.4g}: max={results[-1].max_norm:.3e}")

    norms = [r.max_norm for r in results]
    hs = [r.h for r in results]
    exact = all(r.max_norm <= max(floor, r.rounding) for r in results)
    order = None
    if method == ResidualMethod.FD.value and len(results) >= 3:
        order = float("inf") if exact else _fit_order(hs, norms, floor)
    if method == ResidualMethod.JET.value:
        passed = norms[-1] <= max(JET_TOLERANCE, results[-1].rounding)
    else:
        passed = exact or (order is not None and order >= min_order)
    finest = results[-1]
    report = ResidualReport(method=method, max_norm=finest.max_norm, l2_norm=finest.l2_norm,
                            per_layer=finest.per_layer, scale=finest.scale, rounding=finest.rounding,
                            grids=hs, levels=results,
                            fitted_order=order, exact=exact, floor=floor, min_order=min_order,
                            excluded_band=band, passed=passed)
    if passed:
        logger.info(f"残差检查通过: 方法={method}, 阶={order}, 精确={exact}")
    else:
        logger.warning(f"残差检查未通过: {report.failure()}")
    return report


def report_to_dict(report: ResidualReport) -> Dict[str, Any]:
    return report.model_dump(mode="json")
