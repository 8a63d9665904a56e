"""
双周期伪谱积分器，状态为位涡扰动 q' = ∇²ψ' + Fψ'。
每层均匀背景纬向流 U 给出 Q_y = β1̄ − FU，方程为 q'_t = −J(ψ', q') − Q_y⊙ψ'_x − U⊙q'_x。
谱变换用 numpy.fft 的实数变换，非线性项按 2/3 规则去混淆，时间推进为经典 RK4
"""

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Any, Optional, List, Union

import numpy as np

from qglab import LOG_LEVEL
from qglab.core.runtime_config import get_runtime_config
from qglab.model.layers import ModelParameters, spectral
from qglab.shared.exceptions import ParameterException, CFLException, BlowUpException, PeriodicityException
from qglab.shared.utils import get_logger, configure_logger
from qglab.solutions.fields import SolutionField
from qglab.verify.grid import GridSpec, GridField, sample_rows

logger = get_logger(__name__)
configure_logger(log_filename="qglab_sim.log")
logger.setLevel(LOG_LEVEL)

CFL_LIMIT = 0.5


def _power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class SpectralOperators:
    """给定网格与参数的波数、去混淆掩码和逐波数的反演矩阵"""
    kx: np.ndarray
    ky: np.ndarray
    k2: np.ndarray
    mask: np.ndarray
    inverse: np.ndarray
    forward: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, model: ModelParameters, Nx: int, Ny: int, Lx: float, Ly: float,
              dealias: bool = True) -> "SpectralOperators":
        kx = 2 * np.pi * np.fft.fftfreq(Nx, d=Lx / Nx)[:, None]
        ky = 2 * np.pi * np.fft.rfftfreq(Ny, d=Ly / Ny)[None, :]
        k2 = kx ** 2 + ky ** 2
        if dealias:
            mask = (np.abs(kx) < (2.0 / 3.0) * np.abs(kx).max()) & (np.abs(ky) < (2.0 / 3.0) * np.abs(ky).max())
        else:
            mask = np.ones(k2.shape, dtype=bool)
        F = model.F.dense()
        E = np.eye(model.m)
        forward = F[None, None] - k2[..., None, None] * E
        inverse = np.empty_like(forward)
        nonzero = k2 > 0
        inverse[nonzero] = np.linalg.inv(forward[nonzero])
        spec = spectral(model.F)
        # k = 0：F⁺ 把 q̂0 投影到 im F 并使正压平均为零
        inverse[~nonzero] = spec.pinv
        return cls(kx=kx, ky=ky, k2=k2, mask=mask, inverse=inverse, forward=forward, weights=spec.weights)


@dataclass(frozen=True, eq=False)
class SimState:
    """模拟状态，qhat 形状 (m, Nx, Ny//2+1)"""
    model: ModelParameters
    Nx: int
    Ny: int
    Lx: float
    Ly: float
    qhat: np.ndarray
    t: float = 0.0
    U: np.ndarray = None
    x0: float = 0.0
    y0: float = 0.0
    dealias: bool = True
    ops: Optional[SpectralOperators] = field(default=None, repr=False)
    reference: Optional[np.ndarray] = field(default=None, repr=False)
    t_ref: float = 0.0

    def __post_init__(self):
        if not (_power_of_two(self.Nx) and _power_of_two(self.Ny)):
            raise ParameterException("Nx、Ny 必须是 2 的幂", {"Nx": self.Nx, "Ny": self.Ny})
        if self.U is None:
            object.__setattr__(self, "U", np.zeros(self.model.m))
        if self.ops is None:
            object.__setattr__(self, "ops", SpectralOperators.build(self.model, self.Nx, self.Ny, self.Lx, self.Ly,
                                                                    self.dealias))

    @property
    def m(self) -> int:
        return self.model.m

    @property
    def dx(self) -> float:
        return self.Lx / self.Nx

    @property
    def dy(self) -> float:
        return self.Ly / self.Ny

    def grid(self) -> GridSpec:
        return GridSpec(x0=self.x0, y0=self.y0, Lx=self.Lx, Ly=self.Ly, Nx=self.Nx, Ny=self.Ny, t=self.t,
                        periodic=True)

    def to_physical(self, hat: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(hat, s=(self.Nx, self.Ny), axes=(-2, -1))

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(values, axes=(-2, -1))

    def psihat(self) -> np.ndarray:
        return invert_pv(self, self.qhat)

    def snapshot(self) -> GridField:
        """ψ' 的网格场"""
        return GridField(self.grid(), np.moveaxis(self.to_physical(self.psihat()), 0, -1))


########################################################################################################################
########################################################################################################################
def invert_pv(state: SimState, qhat: np.ndarray) -> np.ndarray:
    """逐波数求解 (F − |k|²E)ψ̂ = q̂'"""
    return np.einsum("xyij,jxy->ixy", state.ops.inverse, qhat)


def apply_forward(state: SimState, psihat: np.ndarray) -> np.ndarray:
    return np.einsum("xyij,jxy->ixy", state.ops.forward, psihat)


def _gauge(state: SimState, psihat: np.ndarray) -> np.ndarray:
    """去掉 k = 0 分量中的正压部分"""
    out = psihat.copy()
    out[:, 0, 0] = state.ops.inverse[0, 0] @ (state.ops.forward[0, 0] @ psihat[:, 0, 0])
    return out


def _enforce_reality(state: SimState, hat: np.ndarray) -> np.ndarray:
    """ky = 0 与 Nyquist 列满足 q̂(−kx) = conj(q̂(kx))"""
    out = hat.copy()
    mirror = (-np.arange(state.Nx)) % state.Nx
    cols = [0] + ([state.Ny // 2] if state.Ny % 2 == 0 else [])
    for c in cols:
        col = out[:, :, c]
        out[:, :, c] = 0.5 * (col + np.conj(col[:, mirror]))
    return out


def _sample_periodic(field_: SolutionField, spec: GridSpec, order: int) -> np.ndarray:
    def row(t, x, y):
        jet = field_.jet(t, x, y, order)
        keys = [(0, 0, 0)] if order == 0 else [(0, 0, 0), (0, 2, 0), (0, 0, 2)]
        return np.stack([jet[k] for k in keys], axis=-1)

    return sample_rows(row, spec)


def wrap_error(field_: SolutionField, spec: GridSpec) -> float:
    """周期延拓误差：对边上 ψ 差值相对 max|ψ|"""
    xs, ys = spec.axes()
    t = spec.t
    left = field_.eval(t, np.full(ys.shape, spec.x0), ys)
    right = field_.eval(t, np.full(ys.shape, spec.x0 + spec.Lx), ys)
    bottom = field_.eval(t, xs, np.full(xs.shape, spec.y0))
    top = field_.eval(t, xs, np.full(xs.shape, spec.y0 + spec.Ly))
    interior = field_.eval(t, *np.meshgrid(xs, ys, indexing="ij"))
    peak = float(np.max(np.abs(interior)))
    if peak == 0.0:
        return 0.0
    return max(float(np.max(np.abs(left - right))), float(np.max(np.abs(bottom - top)))) / peak


def init_from_solution(model: ModelParameters, field_: SolutionField, Lx: float, Ly: float, Nx: int, Ny: int,
                       x0: float = 0.0, y0: float = 0.0, t: float = 0.0, dealias: bool = True,
                       wrap_tolerance: Optional[float] = None) -> SimState:
    """用解的周期部分初始化状态，仿射背景项折算为均匀流 U"""
    if field_.m != model.m:
        raise ParameterException("解的层数与模型不一致", {"field": field_.m, "model": model.m})
    periodic = field_.without_background()
    if field_.background_term is not None and field_.background_flow is None:
        raise PeriodicityException("背景项不是均匀纬向流，无法在双周期区域中表示", {"tags": field_.tags.get("family")})
    U = np.zeros(model.m) if field_.background_flow is None else np.asarray(field_.background_flow, dtype=float)

    spec = GridSpec(x0=x0, y0=y0, Lx=Lx, Ly=Ly, Nx=Nx, Ny=Ny, t=t, periodic=True)
    tol = get_runtime_config().get("QGLAB_WRAP_TOLERANCE") if wrap_tolerance is None else wrap_tolerance
    err = wrap_error(periodic, spec)
    if err > tol:
        raise PeriodicityException("解在所选区域上不是周期的", {"wrap_error": err, "tolerance": tol})

    sampled = _sample_periodic(periodic, spec, 2)
    psi = np.moveaxis(sampled[..., 0], -1, 0)
    lap = np.moveaxis(sampled[..., 1] + sampled[..., 2], -1, 0)
    qprime = lap + np.einsum("ij,jxy->ixy", model.F.dense(), psi)
    state = SimState(model=model, Nx=Nx, Ny=Ny, Lx=Lx, Ly=Ly, qhat=np.fft.rfft2(qprime, axes=(-2, -1)), t=t, U=U,
                     x0=x0, y0=y0, dealias=dealias)
    reference = _gauge(state, np.fft.rfft2(psi, axes=(-2, -1)))
    logger.info(f"初始化模拟 {Nx}×{Ny}, U={U.tolist()}, 周期误差={err:.2e}")
    return replace(state, reference=reference, t_ref=t, ops=state.ops)


def velocities(state: SimState, psihat: Optional[np.ndarray] = None):
    """(u, v) = (−ψ_y + U, ψ_x)，形状 (m, Nx, Ny)"""
    psihat = state.psihat() if psihat is None else psihat
    u = -state.to_physical(1j * state.ops.ky * psihat) + state.U[:, None, None]
    v = state.to_physical(1j * state.ops.kx * psihat)
    return u, v


def tendency(state: SimState, qhat: np.ndarray) -> np.ndarray:
    """q'_t 的谱表示"""
    ops = state.ops
    qhat = qhat * ops.mask
    psihat = invert_pv(state, qhat)
    psi_x = state.to_physical(1j * ops.kx * psihat)
    psi_y = state.to_physical(1j * ops.ky * psihat)
    q_x = state.to_physical(1j * ops.kx * qhat)
    q_y = state.to_physical(1j * ops.ky * qhat)
    jac = state.to_spectral(psi_x * q_y - psi_y * q_x) * ops.mask
    Qy = state.model.beta - state.model.F.dense() @ state.U
    linear = Qy[:, None, None] * (1j * ops.kx * psihat) + state.U[:, None, None] * (1j * ops.kx * qhat)
    return -(jac + linear)


def cfl_number(state: SimState, dt: float) -> float:
    u, v = velocities(state)
    speed = max(float(np.max(np.abs(u))), float(np.max(np.abs(v))))
    return dt * speed / min(state.dx, state.dy)


def step_rk4(state: SimState, dt: float) -> SimState:
    """经典四阶 Runge–Kutta 一步"""
    cfl = cfl_number(state, dt)
    if cfl > CFL_LIMIT:
        raise CFLException("时间步长超过 CFL 限制", {"cfl": cfl, "limit": CFL_LIMIT, "dt": dt, "t": state.t})
    q = state.qhat
    k1 = tendency(state, q)
    k2 = tendency(state, q + 0.5 * dt * k1)
    k3 = tendency(state, q + 0.5 * dt * k2)
    k4 = tendency(state, q + dt * k3)
    qnew = _enforce_reality(state, q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
    return replace(state, qhat=qnew, t=state.t + dt)


########################################################################################################################
########################################################################################################################
def energy(state: SimState) -> float:
    """½⟨|∇ψ'|²_W − (ψ', Fψ')_W⟩ 的区域平均"""
    psihat = state.psihat()
    psi = state.to_physical(psihat)
    psi_x = state.to_physical(1j * state.ops.kx * psihat)
    psi_y = state.to_physical(1j * state.ops.ky * psihat)
    F_psi = np.einsum("ij,jxy->ixy", state.model.F.dense(), psi)
    W = state.ops.weights[:, None, None]
    return float(0.5 * np.mean(np.sum(W * (psi_x ** 2 + psi_y ** 2 - psi * F_psi), axis=0)))


def enstrophy(state: SimState) -> np.ndarray:
    """每层 ½⟨q'²⟩"""
    q = state.to_physical(state.qhat)
    return 0.5 * np.mean(q ** 2, axis=(1, 2))


def reference_drift(state: SimState, speed: float = 0.0) -> float:
    """max|ψ'(t) − ψ'_ref(x − speed·(t − t0))| / max|ψ'_ref|"""
    if state.reference is None:
        raise ParameterException("状态没有记录参考场", {})
    ref0 = state.to_physical(state.reference)
    peak = float(np.max(np.abs(ref0)))
    if peak == 0.0:
        return float(np.max(np.abs(state.to_physical(state.psihat()))))
    shifted = state.reference * np.exp(-1j * state.ops.kx * speed * (state.t - state.t_ref))
    now = state.to_physical(_gauge(state, state.psihat()))
    return float(np.max(np.abs(now - state.to_physical(shifted)))) / peak


def _row_slice(state: SimState, psihat: np.ndarray, layer: int) -> np.ndarray:
    return state.to_physical(psihat)[layer, :, state.Ny // 2]


def phase_speed(state: SimState, start: np.ndarray, t0: float, layer: int = 0) -> float:
    """中间一行的循环互相关峰值位置（抛物线细化）除以经过的时间"""
    if state.t == t0:
        return 0.0
    a = _row_slice(state, start, layer)
    b = _row_slice(state, state.psihat(), layer)
    corr = np.fft.irfft(np.conj(np.fft.rfft(a)) * np.fft.rfft(b), n=state.Nx)
    i = int(np.argmax(corr))
    left, mid, right = corr[(i - 1) % state.Nx], corr[i], corr[(i + 1) % state.Nx]
    denom = left - 2 * mid + right
    frac = 0.5 * (left - right) / denom if denom != 0 else 0.0
    lag = i + frac
    if lag > state.Nx / 2:
        lag -= state.Nx
    return lag * state.dx / (state.t - t0)


@dataclass
class Diagnostics:
    """时间序列诊断"""
    times: List[float] = field(default_factory=list)
    energy: List[float] = field(default_factory=list)
    enstrophy: List[List[float]] = field(default_factory=list)
    drift: List[float] = field(default_factory=list)
    phase_speed: Optional[float] = None
    reference_speed: float = 0.0

    def record(self, state: SimState, speed: float) -> None:
        self.times.append(state.t)
        self.energy.append(energy(state))
        self.enstrophy.append(enstrophy(state).tolist())
        self.drift.append(reference_drift(state, speed) if state.reference is not None else float("nan"))

    def relative_energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(max(abs(e - e0) for e in self.energy) / abs(e0)) if e0 else 0.0

    def relative_enstrophy_drift(self) -> List[float]:
        z = np.asarray(self.enstrophy)
        z0 = np.where(z[0] == 0, 1.0, z[0])
        return (np.max(np.abs(z - z[0]), axis=0) / np.abs(z0)).tolist()

    def to_csv(self, path: Union[str, Path]) -> None:
        m = len(self.enstrophy[0]) if self.enstrophy else 0
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["t", "energy"] + [f"enstrophy_{i + 1}" for i in range(m)] + ["drift"])
            for t, e, z, d in zip(self.times, self.energy, self.enstrophy, self.drift):
                writer.writerow([repr(t), repr(e)] + [repr(v) for v in z] + [repr(d)])

    def to_dict(self) -> Dict[str, Any]:
        return {"times": self.times, "energy": self.energy, "enstrophy": self.enstrophy, "drift": self.drift,
                "phase_speed": self.phase_speed, "reference_speed": self.reference_speed,
                "energy_drift": self.relative_energy_drift() if self.energy else None,
                "enstrophy_drift": self.relative_enstrophy_drift() if self.enstrophy else None}


def _norm(state: SimState) -> float:
    return float(np.sqrt(np.sum(np.abs(state.qhat) ** 2)))


def run(state: SimState, T: float, dt: float, sample_every: int = 1, speed: float = 0.0):
    """积分到 t0 + T，每 sample_every 步记录一次诊断；返回 (终态, 诊断)"""
    if sample_every < 1 or dt <= 0 or T < 0:
        raise ParameterException("要求 dt > 0、T ≥ 0、sample_every ≥ 1", {"dt": dt, "T": T, "every": sample_every})
    factor = get_runtime_config().get("QGLAB_BLOWUP_FACTOR")
    steps = int(round(T / dt))
    t0 = state.t
    start = state.psihat()
    norm0 = _norm(state)
    diag = Diagnostics(reference_speed=speed)
    diag.record(state, speed)
    for n in range(1, steps + 1):
        state = step_rk4(state, dt)
        if norm0 > 0 and _norm(state) > factor * norm0:
            raise BlowUpException("解的范数增长超过阈值", {"t": state.t, "step": n, "factor": factor})
        if n % sample_every == 0 or n == steps:
            diag.record(state, speed)
    diag.phase_speed = phase_speed(state, start, t0)
    logger.info(f"模拟结束 t={state.t:.6g}, 能量漂移={diag.relative_energy_drift():.2e}, "
                f"相速度={diag.phase_speed:.6g}")
    return state, diag
