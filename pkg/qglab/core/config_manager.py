import os
from enum import Enum
from pathlib import Path
from typing import Dict, Any, List

from dotenv import load_dotenv, dotenv_values


class OutputFormat(Enum):
    """网格场输出格式"""
    CSV = 'csv'
    BIN = 'bin'
    JSON = 'json'


class ResidualMethod(Enum):
    """残差计算方式"""
    FD = 'fd'
    JET = 'jet'


def strtobool(v: Any) -> bool:
    """将字符串转换为布尔值"""
    if isinstance(v, bool):
        return v
    v = str(v).lower()
    if v in {'true', '1', 'yes', 'y', 't'}:
        return True
    elif v in {'false', '0', 'no', 'n', 'f'}:
        return False
    raise ValueError(f"无法解析的布尔值: {v}")


class ConfigManager:
    """统一配置管理器

    读取 envs 目录下的 *.env 文件，common.env 作为全局配置，其余文件按文件名区分配置段
    """

    def __init__(self, config_dir: str = os.path.join(Path(__file__).parent.parent.parent, "envs")):
        self.config_dir = config_dir
        self.configs: Dict[str, Dict[str, Any]] = {}
        self.global_config: Dict[str, Any] = {}
        self._load_configs()

    def _load_configs(self):
        """加载所有配置文件，已存在的进程环境变量优先"""
        common_env = os.path.join(self.config_dir, "common.env")
        if os.path.exists(common_env):
            load_dotenv(common_env, override=False)
        self.global_config = dict(os.environ)

        if os.path.exists(self.config_dir):
            for config_file in sorted(Path(self.config_dir).glob("*.env")):
                if config_file.name == "common.env":
                    continue
                load_dotenv(config_file, override=False)
                self.configs[config_file.stem] = ConfigManager._read_env_file(config_file)

    @staticmethod
    def _read_env_file(config_file: Path) -> Dict[str, Any]:
        """读取单个配置文件中出现的键，值以当前环境变量为准"""
        return {k: os.environ.get(k, v) for k, v in dotenv_values(config_file).items()}

    def get_section(self, name: str) -> Dict[str, Any]:
        """获取某个配置段"""
        return self.configs.get(name, {})

    def get_global_config(self, k: str, default: Any = None) -> Any:
        """获取通用配置"""
        return self.global_config.get(k, default)

    def get_config_value(self, name: str, k: str, default: Any = None) -> Any:
        """获取某个配置段中的值，缺失时回退到进程环境变量"""
        section = self.get_section(name)
        if k in section:
            return section[k]
        return os.environ.get(k, default)

    def list_sections(self) -> List[str]:
        """列出可用配置段"""
        return list(self.configs.keys())
