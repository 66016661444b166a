import io
from fractions import Fraction

import pytest

from melostega.config import Config, DevelopmentConfig, ProductionConfig, TestingConfig, get_config
from melostega.utils.error_handler import (
    EXIT_DATA,
    EXIT_USAGE,
    DesyncDetected,
    ErrorHandler,
    StegaError,
    ValidationError,
    handle_exceptions,
    validate_cps,
    validate_positive,
    validate_seed,
)
from melostega.utils.file_validator import FileValidator
from melostega.utils.security import security_manager


def test_config_by_environment(monkeypatch):
    monkeypatch.setenv('MELOSTEGA_ENV', 'testing')
    assert get_config() is TestingConfig
    monkeypatch.setenv('MELOSTEGA_ENV', 'development')
    assert get_config() is DevelopmentConfig
    monkeypatch.setenv('MELOSTEGA_ENV', 'staging')
    assert get_config() is ProductionConfig
    monkeypatch.delenv('MELOSTEGA_ENV')
    assert get_config() is ProductionConfig


def test_defaults():
    assert Config.alpha() == Fraction(1, 10)
    assert Config.validate_config()


@pytest.mark.parametrize('attribute, value', [
    ('CPS', 1),
    ('CPS', 131),
    ('PITCH_LOW', 90),
    ('MAX_EVENTS', 1),
    ('ALPHA', 'one tenth'),
    ('ALPHA', '-1/2'),
])
def test_invalid_configuration(monkeypatch, attribute, value):
    monkeypatch.setattr(TestingConfig, attribute, value)
    if attribute == 'PITCH_LOW':
        monkeypatch.setattr(TestingConfig, 'PITCH_HIGH', 60)
    with pytest.raises(ValidationError):
        TestingConfig.validate_config()


def test_validators():
    assert validate_cps(2) and validate_cps(130)
    for bad in (1, 131, 2.0, True):
        with pytest.raises(ValidationError):
            validate_cps(bad)
    assert validate_seed(0) and validate_seed(2 ** 64 - 1)
    for bad in (-1, 2 ** 64, '7'):
        with pytest.raises(ValidationError):
            validate_seed(bad)
    with pytest.raises(ValidationError):
        validate_positive('count', 0)


def test_handler_exit_codes():
    stream = io.StringIO()
    handler = ErrorHandler(stream)
    assert handler.handle(ValidationError('bad cps')) == EXIT_USAGE
    assert handler.handle(DesyncDetected('lost sync')) == EXIT_DATA
    assert handler.handle(FileNotFoundError('/secret/place/file.bin')) == EXIT_DATA
    assert handler.handle(RuntimeError('boom')) == EXIT_DATA
    lines = stream.getvalue().splitlines()
    assert lines[0] == 'error [VALIDATION_ERROR]: bad cps'
    assert lines[1] == 'error [DESYNC_DETECTED]: lost sync'
    assert '[PATH]' in lines[2] and '/secret' not in lines[2]
    assert lines[3].startswith('error [UNEXPECTED_ERROR]')


def test_handle_exceptions_wraps_unknown_errors():
    @handle_exceptions
    def broken():
        raise KeyError('missing')

    @handle_exceptions
    def desync():
        raise DesyncDetected('lost sync')

    with pytest.raises(StegaError) as info:
        broken()
    assert info.value.error_type == 'GENERAL_ERROR'
    with pytest.raises(DesyncDetected):
        desync()


def test_sanitizers():
    assert security_manager.sanitize_filename('../../etc/x:y.mid') == 'x_y.mid'
    assert security_manager.sanitize_filename('') is None
    long_message = 'x' * 500
    assert len(security_manager.sanitize_error_message(long_message)) == 203


def test_file_validator(tmp_path):
    validator = FileValidator(max_file_size=64)
    good = tmp_path / 'a.mid'
    good.write_bytes(b'MThd' + b'\0' * 10)
    assert validator.validate_file(str(good)) == {'valid': True, 'size_bytes': 14}

    assert not validator.validate_file(str(tmp_path / 'missing.mid'))['valid']
    text = tmp_path / 'a.txt'
    text.write_bytes(b'MThd')
    assert not validator.validate_file(str(text))['valid']
    empty = tmp_path / 'e.midi'
    empty.write_bytes(b'')
    assert validator.validate_file(str(empty))['error'] == 'File is empty'
    big = tmp_path / 'big.mid'
    big.write_bytes(b'MThd' + b'\0' * 100)
    assert not validator.validate_file(str(big))['valid']
    wrong = tmp_path / 'w.mid'
    wrong.write_bytes(b'RIFF0000')
    assert validator.validate_file(str(wrong))['error'] == 'Missing MThd header chunk'
