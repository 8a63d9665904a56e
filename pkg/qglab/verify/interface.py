"""
分片解在圆形界面上的匹配检查：两侧 ψ 为零、ψ_r 连续，ψ_rr 的跳跃仅作记录
"""

from typing import List

import numpy as np
from pydantic import BaseModel, Field

from qglab import LOG_LEVEL
from qglab.shared.exceptions import ParameterException
from qglab.shared.utils import get_logger, configure_logger
from qglab.solutions.fields import PiecewiseSolution

logger = get_logger(__name__)
configure_logger(log_filename="qglab_verify.log")
logger.setLevel(LOG_LEVEL)

PSI_RTOL = 1e-8
JUMP_RTOL = 1e-7


class InterfaceReport(BaseModel):
    """界面检查报告"""
    angles: int = Field(description="采样角度数")
    r0: float = Field(description="界面半径 [m]")
    psi_inner: float = Field(description="内侧 max|ψ|")
    psi_outer: float = Field(description="外侧 max|ψ|")
    psi_r_jump: float = Field(description="max|ψ_r 跳跃|")
    psi_rr_jump: float = Field(description="max|ψ_rr 跳跃|，仅供参考")
    peak: float = Field(description="r ≤ r0 内的 max|ψ|")
    peak_gradient: float = Field(description="界面上的 max|ψ_r|")
    layer_spread: List[float] = Field(description="各层 ψ 相对第一层的最大偏差，正压解应为零")
    passed: bool = Field(description="ψ ≤ 1e-8·peak 且 ψ_r 跳跃 ≤ 1e-7·peak_gradient")


def _radial(jet, c: np.ndarray, s: np.ndarray):
    c, s = c[:, None], s[:, None]
    psi_r = c * jet[(0, 1, 0)] + s * jet[(0, 0, 1)]
    psi_rr = c * c * jet[(0, 2, 0)] + 2 * c * s * jet[(0, 1, 1)] + s * s * jet[(0, 0, 2)]
    return psi_r, psi_rr


def interface_check(p: PiecewiseSolution, t: float = 0.0, angles: int = 64, radii: int = 200) -> InterfaceReport:
    """在 angles 个角度上比较内外两片在 r = r0 处的值与径向导数"""
    if p.interface.get("kind") != "circle" or len(p.pieces) != 2:
        raise ParameterException("只支持两片、圆形界面的分片解", {"interface": p.interface})
    cx, cy = p.interface["center"]
    r0 = float(p.interface["r0"])
    theta = 2 * np.pi * np.arange(angles) / angles
    c, s = np.cos(theta), np.sin(theta)
    x, y = cx + r0 * c, cy + r0 * s

    inner, outer = p.pieces[0][1], p.pieces[1][1]
    j_in = inner.jet(t, x, y, 2)
    j_out = outer.jet(t, x, y, 2)
    r_in, rr_in = _radial(j_in, c, s)
    r_out, rr_out = _radial(j_out, c, s)

    rr, tt = np.meshgrid(np.linspace(0.0, r0, radii), theta, indexing="ij")
    disk = inner.eval(t, cx + rr * np.cos(tt), cy + rr * np.sin(tt))
    peak = float(np.max(np.abs(disk)))
    peak_gradient = float(max(np.max(np.abs(r_in)), np.max(np.abs(r_out))))
    both = np.concatenate([disk.reshape(-1, p.m), j_out[(0, 0, 0)]])
    spread = np.max(np.abs(both - both[:, :1]), axis=0).tolist()

    report = InterfaceReport(angles=angles, r0=r0,
                             psi_inner=float(np.max(np.abs(j_in[(0, 0, 0)]))),
                             psi_outer=float(np.max(np.abs(j_out[(0, 0, 0)]))),
                             psi_r_jump=float(np.max(np.abs(r_in - r_out))),
                             psi_rr_jump=float(np.max(np.abs(rr_in - rr_out))),
                             peak=peak, peak_gradient=peak_gradient, layer_spread=spread, passed=False)
    report.passed = (max(report.psi_inner, report.psi_outer) <= PSI_RTOL * peak
                     and report.psi_r_jump <= JUMP_RTOL * peak_gradient)
    if not report.passed:
        logger.warning(f"界面匹配未通过: ψ={max(report.psi_inner, report.psi_outer):.3e}, "
                       f"ψ_r 跳跃={report.psi_r_jump:.3e}, 峰值={peak:.3e}")
    return report
