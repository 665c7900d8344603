"""
Configuration management for netbridge
Supports multiple environments: development, testing, production
"""
import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Base configuration"""
    # Bridge iteration
    BRIDGE_TOL = float(os.getenv('BRIDGE_TOL', 1e-12))
    BRIDGE_MAX_ITER = int(os.getenv('BRIDGE_MAX_ITER', 10_000))
    BRIDGE_STALL_WINDOW = int(os.getenv('BRIDGE_STALL_WINDOW', 50))

    # Perron eigendata
    PERRON_TOL = float(os.getenv('PERRON_TOL', 1e-12))
    PERRON_MAX_ITER = int(os.getenv('PERRON_MAX_ITER', 100_000))

    # Moment solvers
    MOMENT_TOL = float(os.getenv('MOMENT_TOL', 1e-10))
    MOMENT_MAX_ITER = int(os.getenv('MOMENT_MAX_ITER', 10_000))
    MOMENT_MULTIPLIER_CAP = float(os.getenv('MOMENT_MULTIPLIER_CAP', 500))
    MOMENT_METHOD = os.getenv('MOMENT_METHOD', 'newton')

    # Oracle
    ORACLE_MAX_CELLS = int(os.getenv('ORACLE_MAX_CELLS', 400))
    ORACLE_MAX_PATHS = int(float(os.getenv('ORACLE_MAX_PATHS', 1e6)))
    VERIFY_TOLERANCE = float(os.getenv('VERIFY_TOLERANCE', 1e-6))

    # Output
    OUTPUT_DIR = os.getenv('OUTPUT_DIR', 'out')
    OUTPUT_FORMATS = tuple(os.getenv('OUTPUT_FORMATS', 'csv,json,dot').split(','))
    CSV_FLOAT_FORMAT = '%.10g'

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('LOG_FILE', 'logs/netbridge.log')
    LOG_MAX_BYTES = 10 * 1024 * 1024  # 10MB
    LOG_BACKUP_COUNT = 5

    # Error Monitoring
    SENTRY_DSN = None


class DevelopmentConfig(Config):
    """Development configuration"""


class TestingConfig(Config):
    """Testing configuration"""

    # No log file during tests
    LOG_FILE = None
    LOG_LEVEL = 'WARNING'


class ProductionConfig(Config):
    """Production configuration"""

    # Logging
    LOG_LEVEL = 'WARNING'

    # Error Monitoring
    SENTRY_DSN = os.getenv('SENTRY_DSN')


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': DevelopmentConfig
}


def get_config(env=None):
    """Get configuration based on environment"""
    if env is None:
        env = os.getenv('NETBRIDGE_ENV', 'development')
    return config.get(env, config['default'])
