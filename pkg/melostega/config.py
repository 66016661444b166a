import os
from fractions import Fraction

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env_int(name, default):
    return int(os.environ.get(name, default))


class Config:
    """Base configuration class"""

    ENV = os.environ.get('MELOSTEGA_ENV', 'production')
    DEBUG = False
    TESTING = False

    # Logging
    LOG_LEVEL = os.environ.get('MELOSTEGA_LOG_LEVEL', 'INFO')
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    # Fixed so that every run is reproducible unless a seed is given
    DEFAULT_SEED = 20190921
    SEED = _env_int('MELOSTEGA_SEED', DEFAULT_SEED)

    # Melody quantization
    STEPS_PER_QUARTER = _env_int('MELOSTEGA_STEPS_PER_QUARTER', 4)
    MIN_MELODY_EVENTS = _env_int('MELOSTEGA_MIN_MELODY_EVENTS', 16)
    PITCH_LOW = _env_int('MELOSTEGA_PITCH_LOW', 0)
    PITCH_HIGH = _env_int('MELOSTEGA_PITCH_HIGH', 127)

    # N-gram model
    NGRAM_ORDER = _env_int('MELOSTEGA_NGRAM_ORDER', 4)
    ALPHA = os.environ.get('MELOSTEGA_ALPHA', '1/10')

    # Neural model
    HIDDEN_SIZE = _env_int('MELOSTEGA_HIDDEN_SIZE', 64)
    EMBED_SIZE = _env_int('MELOSTEGA_EMBED_SIZE', 64)
    NUM_LAYERS = 2
    ATTENTION_LENGTH = _env_int('MELOSTEGA_ATTENTION_LENGTH', 40)

    # Embedding
    CPS = _env_int('MELOSTEGA_CPS', 8)
    MAX_EVENTS = _env_int('MELOSTEGA_MAX_EVENTS', 160)

    # Rendering
    TEMPO_BPM = float(os.environ.get('MELOSTEGA_TEMPO_BPM', 120))
    PROGRAM = _env_int('MELOSTEGA_PROGRAM', 0)

    # Input limits
    MAX_SECRET_BYTES = _env_int('MELOSTEGA_MAX_SECRET_BYTES', 1024 * 1024)
    MAX_MIDI_BYTES = _env_int('MELOSTEGA_MAX_MIDI_BYTES', 16 * 1024 * 1024)

    @classmethod
    def alpha(cls):
        return Fraction(cls.ALPHA)

    @classmethod
    def validate_config(cls):
        """Validate configured ranges"""
        from .utils.error_handler import ValidationError

        problems = []
        if not 2 <= cls.CPS <= 130:
            problems.append(f"CPS must be in [2, 130], got {cls.CPS}")
        if not 0 <= cls.PITCH_LOW <= cls.PITCH_HIGH <= 127:
            problems.append(f"Invalid pitch range [{cls.PITCH_LOW}, {cls.PITCH_HIGH}]")
        if cls.STEPS_PER_QUARTER < 1:
            problems.append("STEPS_PER_QUARTER must be positive")
        if cls.NGRAM_ORDER < 1:
            problems.append("NGRAM_ORDER must be positive")
        if cls.MAX_EVENTS < 2:
            problems.append("MAX_EVENTS must be at least 2")
        try:
            if cls.alpha() <= 0:
                problems.append("ALPHA must be positive")
        except (ValueError, ZeroDivisionError):
            problems.append(f"ALPHA is not a rational number: {cls.ALPHA!r}")

        if problems:
            raise ValidationError(f"Invalid configuration: {'; '.join(problems)}")

        return True


class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True
    ENV = 'development'
    LOG_LEVEL = 'DEBUG'


class TestingConfig(Config):
    """Testing configuration"""
    TESTING = True
    DEBUG = True
    ENV = 'testing'
    MIN_MELODY_EVENTS = 4
    HIDDEN_SIZE = 16
    EMBED_SIZE = 16
    MAX_SECRET_BYTES = 64 * 1024


class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False
    ENV = 'production'


# Configuration mapping
config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': ProductionConfig
}


def get_config():
    """Get configuration based on environment"""
    return config.get(os.getenv('MELOSTEGA_ENV') or 'default', ProductionConfig)
