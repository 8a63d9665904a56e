from typing import Dict, Any, Optional


class QGLabException(Exception):
    """qglab 异常基类"""

    # 命令行退出码
    exit_code: int = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


########################################################################################################################
########################################################################################################################
class ConfigException(QGLabException):
    """配置文件或运行参数无效"""
    exit_code = 2


class ParameterException(QGLabException, ValueError):
    """物理参数或构造参数不合法"""
    exit_code = 2


########################################################################################################################
########################################################################################################################
class NumericalException(QGLabException):
    """数值计算失败"""
    exit_code = 1


class DomainException(NumericalException, ValueError):
    """函数自变量超出定义域"""
    pass


class PoleException(NumericalException):
    """在极点附近求值"""
    pass


class RootNotFoundException(NumericalException):
    """区间内没有找到根"""
    pass


class ConvergenceException(NumericalException):
    """迭代未收敛"""
    pass


class ToleranceException(NumericalException):
    """结果超出容差"""
    pass


class CFLException(NumericalException):
    """时间步长违反 CFL 条件"""
    pass


class BlowUpException(NumericalException):
    """数值模拟发散"""
    pass


class PeriodicityException(NumericalException):
    """场在周期区域上不连续"""
    pass


class IncompatibleFieldsException(NumericalException, ValueError):
    """不能叠加的解"""
    pass
