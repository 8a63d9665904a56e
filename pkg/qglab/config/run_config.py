"""
命令行各子命令的 JSON 配置模式。所有配置在执行前完成校验，校验失败统一转换为 ConfigException
"""

import json
from pathlib import Path
from typing import Dict, Any, Optional, List, Literal, Union, Type, TypeVar, Annotated

from pydantic import BaseModel, Field, ValidationError, model_validator, ConfigDict

from qglab import LOG_LEVEL
from qglab.core.config_manager import OutputFormat, ResidualMethod
from qglab.shared.exceptions import ConfigException
from qglab.shared.utils import get_logger, configure_logger

logger = get_logger(__name__)
configure_logger(log_filename="qglab_config.log")
logger.setLevel(LOG_LEVEL)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


########################################################################################################################
########################################################################################################################
class LayerStackConfig(_Strict):
    """层参数（SI 单位）"""
    m: Optional[int] = Field(default=None, ge=2, description="层数，可省略，给出时必须与 H 的长度一致")
    H: List[float] = Field(min_length=2, description="各层厚度 [m]，自上而下")
    gprime: List[float] = Field(min_length=1, description="相邻层界面的约化重力 [m/s²]，共 m−1 个")
    f0: float = Field(gt=0, description="Coriolis 参数 [1/s]")
    beta: float = Field(gt=0, description="β [1/(m·s)]")
    rho0: float = Field(default=1000.0, gt=0, description="参考密度 [kg/m³]，只用于有量纲守恒量")


class CouplingConfig(_Strict):
    """直接给出耦合矩阵的非对角元"""
    sub: List[float] = Field(min_length=1, description="下对角 f_{i+1,i} [1/m²]")
    sup: List[float] = Field(min_length=1, description="上对角 f_{i,i+1} [1/m²]")
    beta: float = Field(gt=0, description="β [1/(m·s)]")


class ModelConfig(_Strict):
    """模型来源：内联层参数、层参数文件或耦合矩阵，三者取一"""
    stack: Optional[LayerStackConfig] = Field(default=None, description="内联层参数")
    file: Optional[str] = Field(default=None, description="层参数 JSON 文件路径")
    coupling: Optional[CouplingConfig] = Field(default=None, description="耦合矩阵非对角元")

    @model_validator(mode="after")
    def _one_source(self):
        given = [s for s in (self.stack, self.file, self.coupling) if s is not None]
        if len(given) != 1:
            raise ValueError("stack、file、coupling 必须恰好给出一个")
        return self


class GridConfig(_Strict):
    """采样网格"""
    x0: float = Field(default=-1.0e6, description="左边界 [m]")
    y0: float = Field(default=-1.0e6, description="下边界 [m]")
    Lx: float = Field(default=2.0e6, gt=0, description="x 方向长度 [m]")
    Ly: float = Field(default=2.0e6, gt=0, description="y 方向长度 [m]")
    Nx: int = Field(default=101, ge=16, description="x 方向点数")
    Ny: int = Field(default=101, ge=16, description="y 方向点数")
    t: float = Field(default=0.0, description="采样时刻 [s]")


class OutputConfig(_Strict):
    """输出设置"""
    directory: Optional[str] = Field(default=None, description="输出目录，缺省时用 --out 或 QGLAB_OUTPUT_DIR")
    formats: List[OutputFormat] = Field(default_factory=lambda: [OutputFormat.CSV, OutputFormat.JSON],
                                        description="网格场输出格式")


########################################################################################################################
########################################################################################################################
class AtomConfig(_Strict):
    """仿射定常解的一个模态原子"""
    mode: int = Field(ge=0, description="F − B 的特征模态下标（升序）")
    kind: Literal["plane", "radial", "exp", "harmonic"] = Field(default="plane", description="原子类型")
    amplitude: float = Field(default=1.0, description="振幅模")
    phase: float = Field(default=0.0, description="振幅辐角 [rad]")
    angle: float = Field(default=0.0, description="平面波或指数原子的方向角 [rad]")
    order: int = Field(default=0, ge=0, description="径向原子或调和多项式的阶数")
    bessel: Literal["J", "Y", "I", "K"] = Field(default="J", description="径向原子的柱函数种类")
    center: List[float] = Field(default_factory=lambda: [0.0, 0.0], min_length=2, max_length=2,
                                description="径向原子的中心 [m]")
    r_min: float = Field(default=0.0, ge=0, description="Y、K 原子的排除半径 [m]")


class PlaneAtomConfig(_Strict):
    mode: int = Field(ge=0, description="模态下标")
    amplitude: float = Field(description="原子权重")
    phase: float = Field(default=0.0, description="权重辐角 [rad]")
    angle: float = Field(default=0.0, description="传播方向 [rad]")


class RadialAtomConfig(_Strict):
    mode: int = Field(ge=0, description="模态下标")
    amplitude: Optional[float] = Field(default=None, description="e^{inθ} 的 Fourier 系数")
    psi0: Optional[float] = Field(default=None, description="均匀密度 ψ₀dθ/2π，给出 ψ₀J₀(√ν r)")
    phase: float = Field(default=0.0, description="系数辐角 [rad]")
    order: int = Field(default=0, ge=0, description="Fourier 阶数 n")
    center: List[float] = Field(default_factory=lambda: [0.0, 0.0], min_length=2, max_length=2, description="中心 [m]")

    @model_validator(mode="after")
    def _one_amplitude(self):
        if (self.amplitude is None) == (self.psi0 is None):
            raise ValueError("amplitude 与 psi0 必须恰好给出一个")
        if self.psi0 is not None and self.order != 0:
            raise ValueError("psi0 只适用于 order = 0")
        return self


class AffineFamily(_Strict):
    family: Literal["affine"] = "affine"
    B: List[float] = Field(description="对角矩阵 B 的对角元 [1/m²]")
    atoms: List[AtomConfig] = Field(default_factory=list, description="模态原子")
    sigma1: float = Field(default=0.0, description="退化时 xẽ₀ 的系数")
    sigma2: float = Field(default=0.0, description="退化时 yẽ₀ 的系数")
    gamma: float = Field(default=0.0, description="退化时 y²ẽ₀ 的系数")
    include_background: bool = Field(default=True, description="是否包含背景流项 −y·u")


class HerglotzFamily(_Strict):
    family: Literal["herglotz"] = "herglotz"
    B: List[float] = Field(description="对角矩阵 B 的对角元 [1/m²]")
    plane: List[PlaneAtomConfig] = Field(default_factory=list, description="平面波原子")
    radial: List[RadialAtomConfig] = Field(default_factory=list, description="径向谐波原子")
    sigma1: float = Field(default=0.0, description="退化时 xẽ₀ 的系数")
    sigma2: float = Field(default=0.0, description="退化时 yẽ₀ 的系数")
    include_background: bool = Field(default=True, description="是否包含背景流项 −y·u")


class BBMFamily(_Strict):
    family: Literal["bbm"] = "bbm"
    chi: float = Field(description="波向参数 χ，z = x − χy")
    mode: int = Field(ge=0, description="F 的特征模态下标（升序，最后一个为正压模）")
    alpha: float = Field(description="α [m/s]")
    delta: float = Field(description="δ [1/s]")
    root: Optional[float] = Field(default=None, description="色散关系的根 r，缺省取模最大的实根")
    amplitude: float = Field(default=1.0, description="振幅 C")
    phase: float = Field(default=0.0, description="相位 θ [rad]")


class KGFamily(_Strict):
    family: Literal["kg"] = "kg"
    chi: float = Field(description="波向参数 χ")
    k: float = Field(description="波数 [1/m]")
    amplitude: float = Field(default=1.0, description="振幅")
    phase: float = Field(default=0.0, description="相位 [rad]")


class CoupledFamily(_Strict):
    family: Literal["coupled"] = "coupled"
    c: List[float] = Field(description="剪切向量 c [m/s]")
    mu: List[float] = Field(min_length=2, max_length=2, description="μ 的实部与虚部 [1/m]")
    chi: float = Field(description="波向参数 χ")
    A: List[List[float]] = Field(description="振幅向量，每项为 [实部, 虚部]")
    degenerate: bool = Field(default=False, description="F̃ 奇异时使用伪逆形式")
    gauge: List[float] = Field(default_factory=lambda: [0.0], description="退化形式的 g(t) 多项式系数")


class CoupledEigenFamily(_Strict):
    family: Literal["coupled_eigen"] = "coupled_eigen"
    c: List[float] = Field(description="剪切向量 c [m/s]")
    mu: List[float] = Field(min_length=2, max_length=2, description="μ 的实部与虚部")
    chi: float = Field(description="波向参数 χ")
    nu: float = Field(default=0.0, description="时间平移参数 ν")
    amplitudes: Dict[int, List[float]] = Field(description="模态下标 → [实部, 虚部]")


class LinearShearFamily(_Strict):
    family: Literal["linear_shear"] = "linear_shear"
    b: List[float] = Field(description="向量 b，要求与 1̄ W-正交")
    c: List[float] = Field(description="向量 c，要求与 1̄ W-正交")
    chi: List[float] = Field(default_factory=lambda: [0.0], description="χ(t) 多项式系数，次数 ≤ 4")
    g: List[float] = Field(default_factory=lambda: [0.0], description="g(t) 多项式系数，次数 ≤ 4")


class VelocityOnlyTFamily(_Strict):
    family: Literal["velocity_only_t"] = "velocity_only_t"
    c: List[float] = Field(description="向量 c，要求与 1̄ W-正交")
    b: List[float] = Field(description="向量 b")
    zeta: List[float] = Field(default_factory=lambda: [0.0], description="ζ(t) 多项式系数")
    g: List[float] = Field(default_factory=lambda: [0.0], description="g(t) 多项式系数")
    shift: Optional[List[float]] = Field(default=None, description="常数平移 ς")


class ModonFamily(_Strict):
    family: Literal["modon"] = "modon"
    solver: Literal["lr", "shared", "matrices", "file"] = Field(default="lr", description="求解方式")
    r0: Optional[float] = Field(default=None, gt=0, description="界面半径 [m]")
    rho_tilde: Optional[float] = Field(default=None, gt=0, description="正压内侧 ϱ̃ [1/m²]")
    rho_hat: Optional[float] = Field(default=None, gt=0, description="正压外侧 ϱ̂ [1/m²]")
    branch: int = Field(default=1, ge=0, description="√ϱ̃ r0 所在的 J1 零点区间")
    rho: Optional[float] = Field(default=None, gt=0, description="共享特征基时 B̂ − B̃ = ϱE")
    assignment: Optional[List[int]] = Field(default=None, description="共享特征基 Newton 初值的排列")
    Btilde: Optional[List[float]] = Field(default=None, description="内侧 B̃ 对角元")
    Bhat: Optional[List[float]] = Field(default=None, description="外侧 B̂ 对角元")
    newton_free: Optional[List[str]] = Field(default=None, description="matrices 方式下用 Newton 求解的自由参数")
    spec_file: Optional[str] = Field(default=None, description="file 方式读取的 ModonSpec JSON")
    center: List[float] = Field(default_factory=lambda: [0.0, 0.0], min_length=2, max_length=2, description="中心 [m]")

    @model_validator(mode="after")
    def _solver_inputs(self):
        if self.solver == "shared" and (self.r0 is None or self.rho is None):
            raise ValueError("shared 方式需要 r0 与 rho")
        if self.solver == "matrices" and (self.r0 is None or self.Btilde is None or self.Bhat is None):
            raise ValueError("matrices 方式需要 r0、Btilde、Bhat")
        if self.solver == "file" and self.spec_file is None:
            raise ValueError("file 方式需要 spec_file")
        return self


class SuperposeFamily(_Strict):
    family: Literal["superpose"] = "superpose"
    parts: List["SolutionConfig"] = Field(min_length=1, description="参与叠加的解")


SolutionConfig = Annotated[
    Union[AffineFamily, HerglotzFamily, BBMFamily, KGFamily, CoupledFamily, CoupledEigenFamily, LinearShearFamily,
          VelocityOnlyTFamily, ModonFamily, SuperposeFamily],
    Field(discriminator="family"),
]
SuperposeFamily.model_rebuild()


class BoostConfig(_Strict):
    """推进 x → x + h(t)"""
    gamma: Optional[float] = Field(default=None, description="匀速推进速度 [m/s]")
    h: Optional[List[float]] = Field(default=None, description="h(t) 多项式系数")

    @model_validator(mode="after")
    def _one(self):
        if (self.gamma is None) == (self.h is None):
            raise ValueError("gamma 与 h 必须恰好给出一个")
        return self


class TransformConfig(_Strict):
    """点对称或类等价变换"""
    kind: Literal["point", "equivalence"] = Field(default="point", description="变换类型")
    T1: float = Field(default=1.0, description="等价变换的时间尺度")
    X1: float = Field(default=1.0, description="等价变换的空间尺度")
    eps: int = Field(default=1, description="等价变换的 ε = ±1")
    eps1: int = Field(default=1, description="点对称的 ε1 = ±1")
    eps2: int = Field(default=1, description="点对称的 ε2 = ±1")
    T0: float = Field(default=0.0, description="时间平移 [s]")
    Y0: float = Field(default=0.0, description="y 平移 [m]")
    h: List[float] = Field(default_factory=lambda: [0.0], description="h(t) 多项式系数")
    g: List[float] = Field(default_factory=lambda: [0.0], description="g(t) 多项式系数")
    Psi: Optional[List[float]] = Field(default=None, description="各层常数平移")


class GeneratorConfig(_Strict):
    """对称生成元"""
    kind: Literal["Pt", "Py", "Px", "J", "Z"] = Field(description="生成元种类")
    payload: List[float] = Field(default_factory=lambda: [1.0], description="Px 的 χ 或 Z 的 κ 多项式系数")
    layer: int = Field(default=0, ge=0, description="J 的层下标")


class QuantityConfig(_Strict):
    quantity: Literal["energy", "hamiltonian", "momentum", "circulation", "casimir"] = Field(description="守恒量")
    weight: List[float] = Field(default_factory=lambda: [1.0], description="χ(t) 或 κ(t) 多项式系数")
    casimir: Literal["identity", "square"] = Field(default="identity", description="Casimir 密度")
    layer: Optional[int] = Field(default=None, ge=0, description="Casimir 所在层")


########################################################################################################################
########################################################################################################################
class _CommandConfig(_Strict):
    model: ModelConfig = Field(description="模型")
    output: OutputConfig = Field(default_factory=OutputConfig, description="输出设置")


class _SolutionCommand(_CommandConfig):
    solution: SolutionConfig = Field(description="解族与参数")
    boost: Optional[BoostConfig] = Field(default=None, description="可选的推进")
    grid: GridConfig = Field(default_factory=GridConfig, description="采样网格")
    no_background: bool = Field(default=False, description="输出时去掉背景流项（作图模式）")


class SpectrumRun(_CommandConfig):
    B: Optional[List[float]] = Field(default=None, description="可选的对角平移，分析 F − B 的谱")


class SolveRun(_SolutionCommand):
    pass


class VerifyRun(_SolutionCommand):
    levels: int = Field(default=3, ge=1, description="网格加密层数")
    method: ResidualMethod = Field(default=ResidualMethod.FD, description="残差方式")
    min_order: Optional[float] = Field(default=None, gt=0, description="收敛阶下限，缺省读 QGLAB_RESIDUAL_MIN_ORDER")
    interface: bool = Field(default=True, description="分片解是否检查界面匹配")
    generators: List[GeneratorConfig] = Field(default_factory=list, description="逐个做无穷小对称检查的生成元")


class ConserveRun(_SolutionCommand):
    quantities: List[QuantityConfig] = Field(min_length=1, description="要积分的守恒量")
    times: List[float] = Field(default_factory=lambda: [0.0], min_length=1, description="求值时刻 [s]")
    dimensional: bool = Field(default=False, description="有量纲结果，需要层参数")
    tolerance: Optional[float] = Field(default=None, gt=0, description="多个时刻之间允许的相对变化")


class ModonRun(_CommandConfig):
    modon: ModonFamily = Field(description="偶极涡求解设置")
    grid: Optional[GridConfig] = Field(default=None, description="可选的采样网格")


class TransformRun(_SolutionCommand):
    transform: TransformConfig = Field(description="变换参数")
    verify: bool = Field(default=False, description="变换后是否做残差检查")
    levels: int = Field(default=3, ge=1, description="残差检查的网格层数")


class SimBoxConfig(_Strict):
    x0: float = Field(default=0.0, description="左边界 [m]")
    y0: float = Field(default=0.0, description="下边界 [m]")
    Lx: float = Field(gt=0, description="x 方向周期 [m]")
    Ly: float = Field(gt=0, description="y 方向周期 [m]")
    Nx: int = Field(default=128, ge=16, description="x 方向点数，2 的幂")
    Ny: int = Field(default=128, ge=16, description="y 方向点数，2 的幂")


class SimulateRun(_CommandConfig):
    solution: SolutionConfig = Field(description="初始场")
    boost: Optional[BoostConfig] = Field(default=None, description="可选的推进")
    box: SimBoxConfig = Field(description="双周期区域")
    dt: float = Field(gt=0, description="时间步长 [s]")
    T: float = Field(ge=0, description="积分时长 [s]")
    sample_every: int = Field(default=10, ge=1, description="诊断采样间隔（步）")
    speed: float = Field(default=0.0, description="参考场的平移速度 [m/s]")
    dealias: bool = Field(default=True, description="2/3 去混淆")
    max_drift: Optional[float] = Field(default=None, gt=0, description="允许的最大参考漂移")
    max_energy_drift: Optional[float] = Field(default=None, gt=0, description="允许的相对能量漂移")
    expected_speed: Optional[float] = Field(default=None, description="期望相速度 [m/s]")
    speed_rtol: float = Field(default=0.02, gt=0, description="相速度相对容差")


RunConfig = TypeVar("RunConfig", bound=BaseModel)


def _location(loc) -> str:
    return ".".join(str(p) for p in loc)


def validate_config(data: Dict[str, Any], schema: Type[RunConfig]) -> RunConfig:
    """校验配置字典，失败时抛出带模式路径的 ConfigException"""
    try:
        return schema.model_validate(data)
    except ValidationError as e:
        errors = [{"path": _location(err["loc"]), "message": err["msg"]} for err in e.errors()]
        first = errors[0]["path"] if errors else ""
        logger.warning(f"配置校验失败: {first}")
        raise ConfigException(f"配置无效: {first}: {errors[0]['message'] if errors else ''}", {"errors": errors})


def load_config(path: Union[str, Path], schema: Type[RunConfig]) -> RunConfig:
    """读取 JSON 配置文件并校验"""
    path = Path(path)
    if not path.exists():
        raise ConfigException(f"配置文件不存在: {path}", {"path": str(path)})
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigException(f"配置文件不是合法的 JSON: {e}", {"path": str(path), "line": e.lineno})
    if not isinstance(data, dict):
        raise ConfigException("配置文件顶层必须是对象", {"path": str(path)})
    return validate_config(data, schema)
