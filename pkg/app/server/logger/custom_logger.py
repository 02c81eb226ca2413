import sys

from loguru import logger

from app.server.config import config
from app.server.static import constants

# stdout carries command output (samples, reports), so every log sink writes elsewhere
FORMAT = '{level} | {time} | {message}'
logger.remove()
logger.add(sys.stderr, level=config.LOG_LEVEL, format=FORMAT, backtrace=False, diagnose=False, serialize=config.LOG_SERIALIZE)
if config.LOG_FILE:
    logger.add(config.LOG_FILE, level='DEBUG', rotation='10 MB', retention=5, format=FORMAT, enqueue=True, backtrace=False, diagnose=False, serialize=1)
logger = logger.bind(service=constants.LOGGER_SERVICE_NAME)
