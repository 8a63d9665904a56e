"""
命令行子命令：spectrum、solve、verify、conserve、modon、transform、simulate
"""

import csv
from typing import Dict, Any, List

import numpy as np

from qglab import LOG_LEVEL
from qglab.common.base import BaseCommand, CommandResult, RunContext
from qglab.config.builders import (
    build_model, build_grid, build_field, build_boost, build_modon, build_transform, build_generators,
)
from qglab.config.run_config import (
    SpectrumRun, SolveRun, VerifyRun, ConserveRun, ModonRun, TransformRun, SimulateRun, ModonFamily,
)
from qglab.core import OutputFormat
from qglab.model.layers import spectral, char_poly, moore_penrose_check
from qglab.shared.exceptions import ConfigException
from qglab.shared.utils import get_logger, configure_logger
from qglab.sim import init_from_solution, run
from qglab.solutions import SolutionField, PiecewiseSolution, assemble_modon, boost
from qglab.solutions.modon import MATCH_RTOL, modon_summary, relative_matching_residual
from qglab.symmetry import PointSymmetry, apply_point_symmetry, apply_equivalence, infinitesimal_check
from qglab.verify import GridField, sample_field, residual, conserved, interface_check

logger = get_logger(__name__)
configure_logger(log_filename="qglab_cli.log")
logger.setLevel(LOG_LEVEL)

# Moore–Penrose 四个条件的相对残差上限
PENROSE_TOLERANCE = 1e-8
# 对称方向上扰动缺陷的最低阶
SYMMETRY_MIN_ORDER = 1.8


def _tags(field_: SolutionField) -> Dict[str, Any]:
    return {k: v for k, v in field_.tags.items() if k != "compat"}


def write_grid(ctx: RunContext, stem: str, grid: GridField) -> None:
    """按输出格式写出网格场"""
    for fmt in ctx.formats:
        if fmt == OutputFormat.CSV:
            grid.to_csv(ctx.path(f"{stem}.csv"))
        elif fmt == OutputFormat.BIN:
            sidecar = grid.to_bin(ctx.path(f"{stem}.bin"))
            ctx.path(sidecar.name)
        else:
            ctx.write_json(f"{stem}_grid.json", {"header": grid.spec.header(grid.m), "psi": grid.data.tolist()})


def _field_summary(field_: SolutionField, grid: GridField) -> Dict[str, Any]:
    flow = field_.background_flow
    return {"tags": _tags(field_), "grid": grid.spec.to_dict(),
            "background_flow": None if flow is None else flow.tolist(),
            "max_abs_psi": np.max(np.abs(grid.data), axis=(0, 1)).tolist()}


########################################################################################################################
########################################################################################################################
class SpectrumCommand(BaseCommand):
    name = "spectrum"
    description = "耦合矩阵 F（或 F − B）的特征值、特征向量、权重、伪逆与特征多项式"
    config_model = SpectrumRun

    def execute(self, config: SpectrumRun, ctx: RunContext) -> CommandResult:
        model, stack = build_model(config.model)
        T = model.F if config.B is None else model.F.shift(config.B)
        spec = spectral(T)
        penrose = moore_penrose_check(T, spec.pinv, spec.weights)
        report = spec.to_dict()
        report.update({"m": model.m, "beta": model.beta, "coupling": T.dense().tolist(),
                       "char_poly": char_poly(T).tolist(), "moore_penrose": penrose, "physical": spec.physical,
                       "stack": None if stack is None else stack.to_dict(), "B": config.B})
        ctx.write_json("spectrum.json", report)
        if OutputFormat.CSV in ctx.formats:
            spec.to_csv(ctx.path("spectrum.csv"))

        result = CommandResult(report={"lambdas": report["lambdas"], "moore_penrose": penrose})
        worst = max(penrose.values())
        if worst > PENROSE_TOLERANCE:
            result.fail(f"Moore–Penrose 残差 {worst:.3e} 超过 {PENROSE_TOLERANCE:g}")
        return result


class SolveCommand(BaseCommand):
    name = "solve"
    description = "构造精确解并在网格上采样"
    config_model = SolveRun

    def execute(self, config: SolveRun, ctx: RunContext) -> CommandResult:
        model, _ = build_model(config.model)
        report: Dict[str, Any] = {}
        if isinstance(config.solution, ModonFamily):
            modon = build_modon(model, config.solution)
            modon.to_json(ctx.path("modon.json"))
            field_ = assemble_modon(model, modon)
            spec = build_boost(config.boost)
            if spec is not None:
                field_ = boost(field_, spec)
            report["modon"] = modon_summary(model, modon)
        else:
            field_ = build_field(model, config.solution, config.boost)

        if isinstance(field_, PiecewiseSolution):
            iface = interface_check(field_, t=config.grid.t)
            ctx.write_json("interface.json", iface.model_dump(mode="json"))
            report["interface"] = iface.model_dump(mode="json")
        if ctx.no_background:
            field_ = field_.without_background()

        grid = sample_field(field_, build_grid(config.grid))
        write_grid(ctx, "field", grid)
        report.update(_field_summary(field_, grid))
        return CommandResult(report=report)


class VerifyCommand(BaseCommand):
    name = "verify"
    description = "残差收敛检查、界面匹配与无穷小对称检查"
    config_model = VerifyRun

    def execute(self, config: VerifyRun, ctx: RunContext) -> CommandResult:
        model, _ = build_model(config.model)
        field_ = build_field(model, config.solution, config.boost)
        if ctx.no_background:
            logger.warning("verify 忽略 --no-background：去掉背景项后不再是精确解")
        grid = build_grid(config.grid)
        result = CommandResult()

        report = residual(model, field_, grid, levels=config.levels, method=config.method.value,
                          min_order=config.min_order)
        ctx.write_json("residual.json", report.model_dump(mode="json"))
        result.report["residual"] = report.model_dump(mode="json", exclude={"levels"})
        if not report.passed:
            result.fail(report.failure())

        if config.interface and isinstance(field_, PiecewiseSolution):
            iface = interface_check(field_, t=grid.t)
            ctx.write_json("interface.json", iface.model_dump(mode="json"))
            result.report["interface"] = iface.model_dump(mode="json")
            if not iface.passed:
                result.fail(f"界面匹配未通过: ψ_r 跳跃 {iface.psi_r_jump:.3e}")

        checks: List[Dict[str, Any]] = []
        for gen in build_generators(config.generators, model.m):
            check = infinitesimal_check(model, field_, gen, grid)
            checks.append(check.model_dump(mode="json"))
            if not check.exact and check.order < SYMMETRY_MIN_ORDER:
                result.fail(f"生成元 {gen.kind.value} 的扰动缺陷阶 {check.order:.3f} < {SYMMETRY_MIN_ORDER}")
        if checks:
            ctx.write_json("symmetry.json", {"checks": checks})
            result.report["symmetry"] = checks
        return result


class ConserveCommand(BaseCommand):
    name = "conserve"
    description = "在网格上积分守恒量，可比较多个时刻"
    config_model = ConserveRun

    def execute(self, config: ConserveRun, ctx: RunContext) -> CommandResult:
        model, stack = build_model(config.model)
        if config.dimensional and stack is None:
            raise ConfigException("有量纲守恒量需要层参数（stack 或 file）", {"dimensional": True})
        field_ = build_field(model, config.solution, config.boost)
        values = []
        for t in config.times:
            spec = build_grid(config.grid, t=t)
            for q in config.quantities:
                values.append(conserved(model, field_, q.quantity, spec=spec, weight=list(q.weight),
                                        casimir=q.casimir, layer=q.layer, dimensional=config.dimensional,
                                        stack=stack))
        rows = [v.model_dump(mode="json") for v in values]
        ctx.write_json("conserved.json", {"values": rows})
        if OutputFormat.CSV in ctx.formats:
            with open(ctx.path("conserved.csv"), "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(["quantity", "layer", "t", "value"])
                for v in values:
                    writer.writerow([v.quantity, "" if v.layer is None else v.layer, repr(v.t), repr(v.value)])

        result = CommandResult(report={"values": rows})
        if config.tolerance is not None and len(config.times) > 1:
            for i, q in enumerate(config.quantities):
                series = np.array([v.value for v in values[i::len(config.quantities)]])
                ref = float(np.max(np.abs(series)))
                change = float(np.max(series) - np.min(series)) / ref if ref > 0 else 0.0
                if change > config.tolerance:
                    result.fail(f"守恒量 {q.quantity} 的相对变化 {change:.3e} 超过 {config.tolerance:g}")
        return result


class ModonCommand(BaseCommand):
    name = "modon"
    description = "求解偶极涡匹配条件并检查界面"
    config_model = ModonRun

    def execute(self, config: ModonRun, ctx: RunContext) -> CommandResult:
        model, _ = build_model(config.model)
        modon = build_modon(model, config.modon)
        modon.to_json(ctx.path("modon.json"))
        summary = modon_summary(model, modon)
        field_ = assemble_modon(model, modon, check=False)
        iface = interface_check(field_)
        ctx.write_json("interface.json", iface.model_dump(mode="json"))
        result = CommandResult(report={"modon": summary, "interface": iface.model_dump(mode="json")})

        rel = relative_matching_residual(model, modon)
        if rel > MATCH_RTOL:
            result.fail(f"匹配条件残差 {rel:.3e} 超过 {MATCH_RTOL:g}")
        if not iface.passed:
            result.fail(f"界面匹配未通过: ψ_r 跳跃 {iface.psi_r_jump:.3e}")
        if config.grid is not None:
            grid = sample_field(field_, build_grid(config.grid))
            write_grid(ctx, "field", grid)
        return result


class TransformCommand(BaseCommand):
    name = "transform"
    description = "对解作用点对称或等价变换"
    config_model = TransformRun

    def execute(self, config: TransformRun, ctx: RunContext) -> CommandResult:
        model, _ = build_model(config.model)
        field_ = build_field(model, config.solution, config.boost)
        transform = build_transform(config.transform)
        if isinstance(transform, PointSymmetry):
            new_model, new_field = model, apply_point_symmetry(field_, transform)
        else:
            new_model, new_field = apply_equivalence(model, field_, transform)
        ctx.write_json("transform.json", {"transform": transform.to_dict(), "model": new_model.to_dict()})
        result = CommandResult(report={"transform": transform.to_dict(), "model": new_model.to_dict()})

        if config.verify:
            report = residual(new_model, new_field, build_grid(config.grid), levels=config.levels)
            ctx.write_json("residual.json", report.model_dump(mode="json"))
            result.report["residual"] = report.model_dump(mode="json", exclude={"levels"})
            if not report.passed:
                result.fail(report.failure())

        output = new_field.without_background() if ctx.no_background else new_field
        grid = sample_field(output, build_grid(config.grid))
        write_grid(ctx, "field", grid)
        return result


class SimulateCommand(BaseCommand):
    name = "simulate"
    description = "双周期伪谱模拟，检查精确解的保持"
    config_model = SimulateRun

    def execute(self, config: SimulateRun, ctx: RunContext) -> CommandResult:
        model, _ = build_model(config.model)
        field_ = build_field(model, config.solution, config.boost)
        box = config.box
        state = init_from_solution(model, field_, box.Lx, box.Ly, box.Nx, box.Ny, x0=box.x0, y0=box.y0,
                                   dealias=config.dealias)
        state, diag = run(state, config.T, config.dt, sample_every=config.sample_every, speed=config.speed)
        ctx.write_json("diagnostics.json", diag.to_dict())
        if OutputFormat.CSV in ctx.formats:
            diag.to_csv(ctx.path("diagnostics.csv"))
        write_grid(ctx, "final", state.snapshot())

        result = CommandResult(report={"U": state.U.tolist(), "t": state.t,
                                       "energy_drift": diag.relative_energy_drift(),
                                       "max_drift": float(np.nanmax(diag.drift)), "phase_speed": diag.phase_speed})
        if config.max_drift is not None and result.report["max_drift"] > config.max_drift:
            result.fail(f"参考漂移 {result.report['max_drift']:.3e} 超过 {config.max_drift:g}")
        if config.max_energy_drift is not None and diag.relative_energy_drift() > config.max_energy_drift:
            result.fail(f"能量漂移 {diag.relative_energy_drift():.3e} 超过 {config.max_energy_drift:g}")
        if config.expected_speed is not None:
            error = abs(diag.phase_speed - config.expected_speed)
            if error > config.speed_rtol * max(abs(config.expected_speed), 1e-12):
                result.fail(f"相速度 {diag.phase_speed:.6g} 与期望 {config.expected_speed:.6g} 不符")
        return result
