import logging
import os
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Optional

ROOT_LOGGER = "cilfair"
DEFAULT_LOG_DIR = "logs"


def _attach_file_handler(logger: logging.Logger, log_dir: str) -> None:
    os.makedirs(log_dir, exist_ok=True)
    log_file = os.path.join(log_dir, f"cilfair_{datetime.now().strftime('%Y%m%d')}.log")
    file_handler = RotatingFileHandler(
        log_file, maxBytes=10*1024*1024, backupCount=5
    )
    file_handler.set_name("file")
    file_handler.setLevel(logging.DEBUG)
    file_format = logging.Formatter('%(asctime)s [%(levelname)s] %(name)s - %(message)s')
    file_handler.setFormatter(file_format)
    logger.addHandler(file_handler)


def _root_logger() -> logging.Logger:
    logger = logging.getLogger(ROOT_LOGGER)
    if logger.handlers:
        return logger

    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    # Console handler
    console_handler = logging.StreamHandler()
    console_handler.set_name("console")
    console_handler.setLevel(os.getenv("CILFAIR_LOG_LEVEL", "INFO").upper())
    console_format = logging.Formatter('%(asctime)s [%(levelname)s] %(message)s')
    console_handler.setFormatter(console_format)
    logger.addHandler(console_handler)

    # File handler with rotation; an empty log dir turns it off
    log_dir = os.getenv("CILFAIR_LOG_DIR", DEFAULT_LOG_DIR)
    if log_dir:
        _attach_file_handler(logger, log_dir)

    return logger


def setup_logger(name: str = ROOT_LOGGER) -> logging.Logger:
    # ハンドラは "cilfair" にだけ付け、子ロガーはそこへ伝播させる
    _root_logger()
    return logging.getLogger(name)


def configure_logging(log_dir: Optional[str], log_level: str) -> logging.Logger:
    """Apply .env settings to the already created handlers."""
    logger = _root_logger()
    for handler in list(logger.handlers):
        if handler.get_name() == "console":
            handler.setLevel(log_level.upper())
        elif handler.get_name() == "file":
            logger.removeHandler(handler)
            handler.close()
    if log_dir:
        _attach_file_handler(logger, log_dir)
    return logger
