import logging
from logging.handlers import TimedRotatingFileHandler

from qglab.core.runtime_config import get_runtime_config

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s"


def configure_logger(log_filename="qglab.log"):
    """配置根日志记录器：按天轮转的文件处理器（保留 7 天）加控制台处理器

    Args:
        log_filename (str): 日志文件名，写入运行配置给出的日志目录
    """
    log_dir = get_runtime_config().log_dir
    log_dir.mkdir(parents=True, exist_ok=True)
    formatter = logging.Formatter(LOG_FORMAT)

    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)

    file_handler = TimedRotatingFileHandler(log_dir / log_filename, when="midnight", interval=1, backupCount=7,
                                            encoding="utf-8")
    console_handler = logging.StreamHandler()
    for handler in (file_handler, console_handler):
        handler.setFormatter(formatter)
        root.addHandler(handler)


def get_logger(name=None):
    """获取日志记录器实例"""
    return logging.getLogger(name)
