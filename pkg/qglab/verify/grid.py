"""
网格定义与网格场：按行并行采样解场，读写 CSV 和小端 float64 + JSON 头文件两种格式
"""

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Any, Optional, Tuple, Union

import numpy as np

from qglab import LOG_LEVEL
from qglab.core.runtime_config import get_runtime_config
from qglab.shared.exceptions import ParameterException, NumericalException
from qglab.shared.utils import get_logger, configure_logger
from qglab.solutions.fields import Domain, SolutionField

logger = get_logger(__name__)
configure_logger(log_filename="qglab_verify.log")
logger.setLevel(LOG_LEVEL)

MIN_POINTS = 16


@dataclass(frozen=True)
class GridSpec:
    """矩形网格 [x0, x0+Lx] × [y0, y0+Ly]；periodic 时右端点不重复"""
    x0: float
    y0: float
    Lx: float
    Ly: float
    Nx: int
    Ny: int
    t: float = 0.0
    periodic: bool = False
    mask: Optional[Domain] = field(default=None, compare=False)

    def __post_init__(self):
        if self.Nx < MIN_POINTS or self.Ny < MIN_POINTS:
            raise ParameterException(f"每个方向至少 {MIN_POINTS} 个网格点", {"Nx": self.Nx, "Ny": self.Ny})
        if not (self.Lx > 0 and self.Ly > 0):
            raise ParameterException("网格尺寸必须为正", {"Lx": self.Lx, "Ly": self.Ly})

    @classmethod
    def square(cls, half_width: float, n: int, t: float = 0.0, center: Tuple[float, float] = (0.0, 0.0),
               **kwargs) -> "GridSpec":
        """以 center 为中心、边长 2·half_width 的正方形网格"""
        return cls(x0=center[0] - half_width, y0=center[1] - half_width, Lx=2 * half_width, Ly=2 * half_width,
                   Nx=n, Ny=n, t=t, **kwargs)

    @property
    def dx(self) -> float:
        return self.Lx / (self.Nx if self.periodic else self.Nx - 1)

    @property
    def dy(self) -> float:
        return self.Ly / (self.Ny if self.periodic else self.Ny - 1)

    @property
    def h(self) -> float:
        return max(self.dx, self.dy)

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.x0 + self.dx * np.arange(self.Nx), self.y0 + self.dy * np.arange(self.Ny)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """形状 (Nx, Ny) 的坐标数组"""
        xs, ys = self.axes()
        return np.meshgrid(xs, ys, indexing="ij")

    def refined(self, factor: int = 2) -> "GridSpec":
        """网格步长缩小 factor 倍，区域不变"""
        if self.periodic:
            return replace(self, Nx=self.Nx * factor, Ny=self.Ny * factor)
        return replace(self, Nx=(self.Nx - 1) * factor + 1, Ny=(self.Ny - 1) * factor + 1)

    def at_time(self, t: float) -> "GridSpec":
        return replace(self, t=t)

    def header(self, m: int) -> Dict[str, Any]:
        return {"Nx": self.Nx, "Ny": self.Ny, "m": m, "x0": self.x0, "y0": self.y0, "dx": self.dx, "dy": self.dy,
                "t": self.t}

    def to_dict(self) -> Dict[str, Any]:
        return {"x0": self.x0, "y0": self.y0, "Lx": self.Lx, "Ly": self.Ly, "Nx": self.Nx, "Ny": self.Ny,
                "t": self.t, "periodic": self.periodic}


@dataclass(frozen=True, eq=False)
class GridField:
    """网格上的 m 层流函数，data 形状 (Nx, Ny, m)"""
    spec: GridSpec
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 3 or data.shape[:2] != (self.spec.Nx, self.spec.Ny):
            raise ParameterException("网格场形状与网格不一致",
                                     {"shape": list(data.shape), "Nx": self.spec.Nx, "Ny": self.spec.Ny})
        bad = np.argwhere(~np.isfinite(data))
        if bad.size:
            i, j, k = bad[0]
            xs, ys = self.spec.axes()
            raise NumericalException("网格场含非有限值",
                                     {"x": float(xs[i]), "y": float(ys[j]), "layer": int(k), "count": len(bad)})
        object.__setattr__(self, "data", data)

    @property
    def m(self) -> int:
        return self.data.shape[2]

    def layer(self, i: int) -> np.ndarray:
        return self.data[:, :, i]

    def to_csv(self, path: Union[str, Path]) -> None:
        """每个网格点一行：x, y, psi_1..psi_m"""
        X, Y = self.spec.mesh()
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["x", "y"] + [f"psi_{i + 1}" for i in range(self.m)])
            for i in range(self.spec.Nx):
                for j in range(self.spec.Ny):
                    writer.writerow([repr(float(X[i, j])), repr(float(Y[i, j]))]
                                    + [repr(float(v)) for v in self.data[i, j]])

    def to_bin(self, path: Union[str, Path]) -> Path:
        """写出小端 float64 原始数据和同名 .json 头文件，返回头文件路径"""
        path = Path(path)
        self.data.astype("<f8").tofile(path)
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps(self.spec.header(self.m), indent=2), encoding="utf-8")
        return sidecar

    @classmethod
    def from_bin(cls, path: Union[str, Path]) -> "GridField":
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        nx, ny, m = header["Nx"], header["Ny"], header["m"]
        data = np.fromfile(path, dtype="<f8").reshape(nx, ny, m)
        spec = GridSpec(x0=header["x0"], y0=header["y0"], Lx=header["dx"] * (nx - 1), Ly=header["dy"] * (ny - 1),
                        Nx=nx, Ny=ny, t=header["t"])
        return cls(spec, data)


########################################################################################################################
########################################################################################################################
def sample_rows(fn, spec: GridSpec, threads: Optional[int] = None) -> np.ndarray:
    """对每一行 x = 常数并行调用 fn(t, x, ys)，结果按行号拼接"""
    xs, ys = spec.axes()
    workers = max(1, min(threads or get_runtime_config().threads, spec.Nx))

    def row(i: int) -> np.ndarray:
        return fn(spec.t, np.full(ys.shape, xs[i]), ys)

    if workers == 1:
        rows = [row(i) for i in range(spec.Nx)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, range(spec.Nx)))
    return np.stack(rows, axis=0)


def sample_field(field_: SolutionField, spec: GridSpec, threads: Optional[int] = None) -> GridField:
    """在网格上求值解场"""
    logger.debug(f"采样 {spec.Nx}×{spec.Ny} 网格, t={spec.t}")
    return GridField(spec, sample_rows(field_.eval, spec, threads))
