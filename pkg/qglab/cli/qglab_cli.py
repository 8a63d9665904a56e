"""
qglab <spectrum|solve|verify|conserve|modon|transform|simulate> --config FILE [--out DIR] [--no-background]
退出码：0 成功，1 数值或容差失败，2 配置错误；环境变量 QGLAB_THREADS 限制网格求值线程数
"""

import click

from qglab import LOG_LEVEL, __version__
from qglab.cli import commands  # noqa: F401  注册子命令
from qglab.common.base import BaseCommand, CommandRegistry
from qglab.core import OutputFormat
from qglab.shared.utils import get_logger, configure_logger

logger = get_logger(__name__)
configure_logger(log_filename="qglab_cli.log")
logger.setLevel(LOG_LEVEL)


def _common_options(f):
    f = click.option("--format", "formats", multiple=True, type=click.Choice([fmt.value for fmt in OutputFormat]),
                     help="网格场输出格式，可重复给出；缺省取配置文件中的 output.formats")(f)
    f = click.option("--no-background", is_flag=True, help="输出时去掉背景流项（作图模式）")(f)
    f = click.option("--out", default=None, type=click.Path(file_okay=False), help="输出目录")(f)
    f = click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                     help="JSON 配置文件")(f)
    return f


@click.group()
@click.version_option(__version__, prog_name="qglab")
def main():
    """m 层准地转方程的精确解：构造、检查、变换与模拟"""


def _register(command: BaseCommand) -> None:
    @main.command(name=command.name, help=command.description)
    @_common_options
    def _run(config_path, out, no_background, formats):
        code = command.run(config_path, out=out, no_background=no_background, formats=list(formats))
        if code:
            logger.error(f"{command.name} 退出码 {code}")
            raise SystemExit(code)


for _command in CommandRegistry.commands().values():
    _register(_command)


if __name__ == "__main__":
    main()
