"""
Logging setup for netbridge
Console + rotating file handlers, optional Sentry error monitoring
"""
import logging
import os
import sys
from logging.handlers import RotatingFileHandler

import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration

LOG_FORMAT = '%(asctime)s %(levelname)s [%(name)s] %(message)s'


def configure_logging(config):
    """
    Install handlers on the root logger according to a config class.

    Returns:
        the root logger
    """
    root = logging.getLogger()
    root.setLevel(getattr(logging, str(config.LOG_LEVEL).upper(), logging.INFO))

    # repeated calls (tests, CliRunner) must not stack handlers
    for handler in list(root.handlers):
        if getattr(handler, '_netbridge', False):
            root.removeHandler(handler)
            handler.close()

    formatter = logging.Formatter(LOG_FORMAT)
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(formatter)
    console._netbridge = True
    root.addHandler(console)

    if config.LOG_FILE:
        log_dir = os.path.dirname(config.LOG_FILE)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(
            config.LOG_FILE,
            maxBytes=config.LOG_MAX_BYTES,
            backupCount=config.LOG_BACKUP_COUNT,
        )
        file_handler.setFormatter(formatter)
        file_handler._netbridge = True
        root.addHandler(file_handler)

    if config.SENTRY_DSN:
        sentry_sdk.init(
            dsn=config.SENTRY_DSN,
            integrations=[LoggingIntegration(level=logging.INFO, event_level=logging.ERROR)],
        )
        root.info("Sentry error monitoring enabled")

    return root
