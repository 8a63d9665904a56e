"""
运行期配置：从 envs/qglab.env 与进程环境变量中读取数值容差、线程数、输出目录等设置
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Any, Optional, Callable

from qglab.core.config_manager import ConfigManager, strtobool


@dataclass
class ConfigSchema:
    """配置模式定义"""
    key: str
    default: Any
    type_converter: str
    validator: Optional[Callable[[Any], bool]] = None
    description: str = ""


class ConfigNormalizer:
    """配置标准化处理器"""

    TYPE_CONVERTERS = {
        'bool': lambda x: strtobool(str(x)) if not isinstance(x, bool) else x,
        'int': lambda x: int(float(str(x).strip())) if not isinstance(x, int) else x,
        'float': lambda x: float(str(x).strip()) if not isinstance(x, (int, float)) else float(x),
        'str': lambda x: str(x).strip().strip('\'"') if isinstance(x, str) else str(x),
        'list': lambda x: x if isinstance(x, list) else [s.strip() for s in str(x).split(',') if s.strip()],
    }

    @classmethod
    def normalize(cls, v: Any, type_name: str) -> Any:
        """通用标准化方法"""
        if v is None:
            return None

        converter = cls.TYPE_CONVERTERS.get(type_name, cls.TYPE_CONVERTERS['str'])
        try:
            return converter(v)
        except (ValueError, TypeError):
            return v


class ConfigSchemaRegistry:
    """配置模式注册表"""

    GLOBAL_SCHEMAS = [
        ConfigSchema('QGLAB_THREADS', 0, 'int', lambda v: v >= 0, description="网格求值线程数，0 表示 CPU 核数"),
        ConfigSchema('QGLAB_OUTPUT_DIR', 'datas/output', 'str', description="命令行默认输出目录"),
        ConfigSchema('QGLAB_LOG_DIR', '', 'str', description="日志目录，空表示 datas/logs"),
    ]

    NUMERIC_SCHEMAS = [
        ConfigSchema('QGLAB_RESIDUAL_MIN_ORDER', 3.5, 'float', lambda v: v > 0, description="残差收敛阶下限"),
        ConfigSchema('QGLAB_EXACT_FLOOR', 1e-11, 'float', lambda v: v > 0, description="判定为精确解的归一化残差"),
        ConfigSchema('QGLAB_WRAP_TOLERANCE', 1e-6, 'float', lambda v: v > 0, description="周期延拓误差上限"),
        ConfigSchema('QGLAB_NEWTON_MAX_ITER', 100, 'int', lambda v: v > 0, description="Newton 迭代次数上限"),
        ConfigSchema('QGLAB_ROOT_SCAN_POINTS', 400, 'int', lambda v: v >= 10, description="根扫描点数"),
        ConfigSchema('QGLAB_BLOWUP_FACTOR', 10.0, 'float', lambda v: v > 1, description="模拟发散判定倍数"),
    ]

    @classmethod
    def get_all_schemas(cls) -> Dict[str, ConfigSchema]:
        """获取所有配置模式"""
        schemas = {}
        for schema in cls.GLOBAL_SCHEMAS + cls.NUMERIC_SCHEMAS:
            schemas[schema.key] = schema
        return schemas


class RuntimeConfig:
    """运行期配置"""

    def __init__(self, initial_config: Optional[Dict[str, Any]] = None, config_dir: Optional[str] = None):
        self.settings: Dict[str, Any] = {}
        manager = ConfigManager(config_dir) if config_dir else ConfigManager()
        raw = {k: manager.get_config_value("qglab", k) for k in ConfigSchemaRegistry.get_all_schemas()}
        raw.update({k.upper(): v for k, v in (initial_config or {}).items()})
        self.settings = RuntimeConfig._normalize(raw)

    @staticmethod
    def _normalize(raw: Dict[str, Any]) -> Dict[str, Any]:
        """标准化并应用默认值，校验失败的值回退到默认值"""
        normalized = {}
        for k, schema in ConfigSchemaRegistry.get_all_schemas().items():
            v = raw.get(k)
            if v is None or v == '':
                normalized[k] = schema.default
                continue
            v = ConfigNormalizer.normalize(v, schema.type_converter)
            if schema.validator is not None:
                try:
                    ok = schema.validator(v)
                except TypeError:
                    ok = False
                if not ok:
                    v = schema.default
            normalized[k] = v
        return normalized

    def get(self, k: str, default: Any = None) -> Any:
        """获取配置项"""
        return self.settings.get(k, default)

    def get_all(self) -> Dict[str, Any]:
        """获取所有配置"""
        return self.settings.copy()

    @property
    def threads(self) -> int:
        """网格求值线程数"""
        n = self.settings['QGLAB_THREADS']
        return n if n > 0 else (os.cpu_count() or 1)

    @property
    def log_dir(self) -> Path:
        """日志目录，未配置时为项目下的 datas/logs"""
        configured = self.settings['QGLAB_LOG_DIR']
        return Path(configured) if configured else Path(__file__).parent.parent.parent / "datas" / "logs"


_runtime_config: Optional[RuntimeConfig] = None


def get_runtime_config() -> RuntimeConfig:
    """获取进程级运行配置（首次调用时加载）"""
    global _runtime_config
    if _runtime_config is None:
        _runtime_config = RuntimeConfig()
    return _runtime_config


def reset_runtime_config() -> None:
    """丢弃缓存的运行配置，下一次 get_runtime_config 重新读取环境"""
    global _runtime_config
    _runtime_config = None
