import logging

LOG_LEVEL = logging.WARNING

__version__ = "1.0.0"
