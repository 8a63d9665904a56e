from .base_command import BaseCommand, CommandRegistry, CommandResult, RunContext, MANIFEST_NAME

__all__ = [
    "BaseCommand",
    "CommandRegistry",
    "CommandResult",
    "RunContext",
    "MANIFEST_NAME",
]
