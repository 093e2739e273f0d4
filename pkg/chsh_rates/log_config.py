import os
import logging
from logging.handlers import RotatingFileHandler

from chsh_rates.config import settings

LOG_FILE_NAME = "chsh_rates.log"


def get_logger(name: str):
    logger = logging.getLogger(f"chsh_rates.{name}")
    logger.setLevel(settings.log_level.upper())

    if not logger.handlers:
        os.makedirs(settings.log_dir, exist_ok=True)
        handler = RotatingFileHandler(
            os.path.join(settings.log_dir, LOG_FILE_NAME),
            maxBytes=10 * 1024 * 1024,
            backupCount=5
        )

        formatter = logging.Formatter(
            "[%(asctime)s] - %(levelname)s - %(name)s - %(message)s",
            "%Y-%m-%d %H:%M:%S"
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    return logger
