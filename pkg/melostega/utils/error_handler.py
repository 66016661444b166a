import logging
import sys
import traceback
from functools import wraps

from .security import security_manager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class StegaError(Exception):
    """Base exception for MeloStega"""
    def __init__(self, message, exit_code=EXIT_DATA, error_type="GENERAL_ERROR"):
        self.message = message
        self.exit_code = exit_code
        self.error_type = error_type
        super().__init__(self.message)


class ValidationError(StegaError):
    """Bad arguments or violated preconditions"""
    def __init__(self, message):
        super().__init__(message, EXIT_USAGE, "VALIDATION_ERROR")


class MalformedMidi(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "MALFORMED_MIDI")


class UnsupportedFormat(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "UNSUPPORTED_FORMAT")


class DirectoryNotFound(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "DIRECTORY_NOT_FOUND")


class EmptyCorpus(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "EMPTY_CORPUS")


class BadMagic(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "BAD_MAGIC")


class VersionMismatch(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "VERSION_MISMATCH")


class TruncatedFile(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "TRUNCATED_FILE")


class DimensionMismatch(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "DIMENSION_MISMATCH")


class EmptyHistory(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "EMPTY_HISTORY")


class PayloadTooLarge(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "PAYLOAD_TOO_LARGE")


class TruncatedFrame(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "TRUNCATED_FRAME")


class NonByteAlignedLength(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "NON_BYTE_ALIGNED_LENGTH")


class PoolTooSmall(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "POOL_TOO_SMALL")


class DesyncDetected(StegaError):
    """Receiver could not rebuild the sender's candidate pools"""
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "DESYNC_DETECTED")


class EmptyInput(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "EMPTY_INPUT")


class SequenceTooShort(StegaError):
    def __init__(self, message):
        super().__init__(message, EXIT_DATA, "SEQUENCE_TOO_SHORT")


class ErrorHandler:
    """Centralized error reporting for the command-line entry point"""

    def __init__(self, stream=None):
        self.stream = stream

    def handle(self, error):
        """Log the error, print a one-line diagnostic and return the exit status"""
        if isinstance(error, ValidationError):
            logger.warning(f"Validation Error: {error.message}")
            return self._report(error.message, error.exit_code, error.error_type)

        if isinstance(error, StegaError):
            logger.error(f"MeloStega Error: {error.error_type} - {error.message}")
            return self._report(error.message, error.exit_code, error.error_type)

        if isinstance(error, OSError):
            logger.error(f"I/O Error: {str(error)}")
            sanitized_message = security_manager.sanitize_error_message(str(error))
            return self._report(sanitized_message, EXIT_DATA, "IO_ERROR")

        logger.error(f"Unexpected Error: {str(error)}")
        logger.error(traceback.format_exc())
        sanitized_message = security_manager.sanitize_error_message(str(error))
        return self._report(
            f"An unexpected error occurred: {sanitized_message}",
            EXIT_DATA,
            "UNEXPECTED_ERROR"
        )

    def _report(self, message, exit_code, error_type):
        """Write a standardized diagnostic line to the error stream"""
        stream = self.stream or sys.stderr
        print(f"error [{error_type}]: {message}", file=stream)
        return exit_code


def handle_exceptions(f):
    """Decorator for CLI commands: domain errors pass through, others are wrapped"""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except StegaError:
            raise
        except OSError:
            raise
        except Exception as e:
            logger.error(f"Unhandled exception in {f.__name__}: {str(e)}")
            logger.error(traceback.format_exc())

            sanitized_message = security_manager.sanitize_error_message(str(e))
            raise StegaError(f"Operation failed: {sanitized_message}")

    return decorated_function


def validate_cps(cps, vocab_size=130):
    """Validate a candidate pool size"""
    if isinstance(cps, bool) or not isinstance(cps, int):
        raise ValidationError("CPS must be an integer")

    if cps < 2 or cps > vocab_size:
        raise ValidationError(f"CPS must be in [2, {vocab_size}], got {cps}")

    return True


def validate_seed(seed):
    """Validate a 64-bit unsigned seed"""
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ValidationError("Seed must be an integer")

    if seed < 0 or seed >= 2 ** 64:
        raise ValidationError("Seed must be a 64-bit unsigned integer")

    return True


def validate_positive(name, value):
    """Validate a positive integer parameter"""
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}")

    return True
