import logging
import os
from dotenv import load_dotenv

# Load environment variables from .env file if it exists
load_dotenv()


class Config:
    # Logging
    LOG_LEVEL = os.getenv('KDN_LOG', 'info')

    # Runs
    DEFAULT_SEED = int(os.getenv('KDN_SEED', '0'))
    OUTPUT_DIR = os.getenv('KDN_OUTPUT_DIR', 'runs')
    JOBS = int(os.getenv('KDN_JOBS', '1'))

    # Network
    RFF_WIDTH = int(os.getenv('KDN_RFF_WIDTH', '300'))


LOG_LEVELS = {
    'error': logging.ERROR,
    'warning': logging.WARNING,
    'info': logging.INFO,
    'debug': logging.DEBUG,
}


def configure_logging(level=None):
    """
    Configure root logging for CLI runs.

    Args:
        level: One of error|warning|info|debug; defaults to KDN_LOG

    Returns:
        The package logger
    """
    name = (level or Config.LOG_LEVEL).strip().lower()
    logging.basicConfig(
        level=LOG_LEVELS.get(name, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        force=True,
    )
    return logging.getLogger('kdn')
