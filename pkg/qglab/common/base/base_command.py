import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Any, ClassVar, Type, List, Optional

from pydantic import BaseModel

from qglab import LOG_LEVEL, __version__
from qglab.config.run_config import load_config
from qglab.core import OutputFormat, get_runtime_config
from qglab.shared.exceptions import QGLabException, ConfigException
from qglab.shared.utils import get_logger, configure_logger

logger = get_logger(__name__)
configure_logger(log_filename="qglab_cli.log")
logger.setLevel(LOG_LEVEL)

MANIFEST_NAME = "manifest.json"


@dataclass
class RunContext:
    """一次命令运行的输出选项"""
    out_dir: Path
    no_background: bool = False
    formats: List[OutputFormat] = field(default_factory=lambda: [OutputFormat.CSV, OutputFormat.JSON])
    artifacts: List[str] = field(default_factory=list)

    def path(self, name: str) -> Path:
        """登记并返回输出文件路径"""
        if name not in self.artifacts:
            self.artifacts.append(name)
        return self.out_dir / name

    def write_json(self, name: str, data: Dict[str, Any]) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(data, indent=2, ensure_ascii=False, default=str), encoding="utf-8")
        return p


@dataclass
class CommandResult:
    """命令执行结果：passed 为 False 时 failure 写明第一个未通过的判据"""
    passed: bool = True
    failure: Optional[str] = None
    report: Dict[str, Any] = field(default_factory=dict)

    def fail(self, criterion: str) -> "CommandResult":
        if self.passed:
            self.passed = False
            self.failure = criterion
        return self


########################################################################################################################
########################################################################################################################
class CommandRegistry:
    """命令注册表，用于管理所有子命令实例"""
    _commands: ClassVar[Dict[str, 'BaseCommand']] = {}

    @classmethod
    def register(cls, command_class: Type['BaseCommand']) -> Type['BaseCommand']:
        """注册命令类"""
        command = command_class()
        cls._commands[command.name] = command
        logger.debug(f"注册命令: {command.name}")
        return command_class

    @classmethod
    def get_command(cls, name: str) -> 'BaseCommand':
        """获取命令实例"""
        if name not in cls._commands:
            available = ", ".join(cls._commands.keys())
            logger.warning(f"请求的命令未知: {name}")
            raise ConfigException(f"未知的命令: {name}，可用命令: {available}", {"command": name})
        return cls._commands[name]

    @classmethod
    def commands(cls) -> Dict[str, 'BaseCommand']:
        """获取所有命令实例"""
        return cls._commands


########################################################################################################################
########################################################################################################################
class BaseCommand:
    """子命令基类：读取并校验配置、执行、写出清单，返回退出码"""
    name: str = ""
    description: str = ""
    config_model: ClassVar[Optional[Type[BaseModel]]] = None

    def __init_subclass__(cls, **kwargs):
        """子类初始化时自动注册到命令注册表"""
        super().__init_subclass__(**kwargs)
        if cls.name:
            CommandRegistry.register(cls)

    def execute(self, config: BaseModel, ctx: RunContext) -> CommandResult:
        raise NotImplementedError

    def _out_dir(self, out: Optional[str], config: Optional[BaseModel]) -> Path:
        directory = out
        output = getattr(config, "output", None)
        if directory is None and output is not None and output.directory:
            directory = output.directory
        if directory is None:
            directory = str(Path(get_runtime_config().get("QGLAB_OUTPUT_DIR")) / self.name)
        return Path(directory)

    def _write_manifest(self, ctx: RunContext, config: Optional[BaseModel], result: CommandResult,
                        config_path: str, exit_code: int) -> None:
        manifest = {
            "command": self.name,
            "version": __version__,
            "config_file": str(config_path),
            "config": None if config is None else config.model_dump(mode="json"),
            "options": {"no_background": ctx.no_background, "formats": [f.value for f in ctx.formats]},
            "artifacts": list(ctx.artifacts),
            "passed": result.passed,
            "failure": result.failure,
            "exit_code": exit_code,
            "report": result.report,
        }
        ctx.out_dir.mkdir(parents=True, exist_ok=True)
        (ctx.out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, ensure_ascii=False, default=str),
                                                 encoding="utf-8")

    def run(self, config_path: str, out: Optional[str] = None, no_background: bool = False,
            formats: Optional[List[str]] = None) -> int:
        """执行子命令：0 成功，1 数值或容差失败，2 配置错误"""
        config = None
        result = CommandResult()
        ctx = RunContext(out_dir=self._out_dir(out, None), no_background=no_background)
        try:
            config = load_config(config_path, self.config_model)
            ctx.out_dir = self._out_dir(out, config)
            ctx.no_background = no_background or bool(getattr(config, "no_background", False))
            if formats:
                ctx.formats = [OutputFormat(f) for f in formats]
            elif getattr(config, "output", None) is not None:
                ctx.formats = list(config.output.formats)
            ctx.out_dir.mkdir(parents=True, exist_ok=True)
            result = self.execute(config, ctx)
            exit_code = 0 if result.passed else 1
            if not result.passed:
                logger.error(f"{self.name} 未通过: {result.failure}")
        except QGLabException as e:
            logger.error(f"{self.name} 失败: {e.message} {e.details}")
            result.fail(e.message)
            result.report.setdefault("error", {"type": type(e).__name__, "message": e.message,
                                               "details": e.details})
            exit_code = e.exit_code
        except OSError as e:
            logger.error(f"{self.name} 读写失败: {e}")
            result.fail(str(e))
            exit_code = 1
        try:
            self._write_manifest(ctx, config, result, config_path, exit_code)
        except OSError as e:
            logger.error(f"清单写出失败: {e}")
        return exit_code
