import hashlib
import logging
import os
import re

logger = logging.getLogger(__name__)

UNSAFE_NAME_CHARS = re.compile(r'[<>:"/\\|?*\x00-\x1f]')
PATH_PATTERN = re.compile(r'/[^\s]+')


class SecurityManager:
    """Key-material and diagnostics hygiene for MeloStega"""

    def __init__(self, max_filename_length=255, max_error_length=200, chunk_size=1 << 16):
        self.max_filename_length = max_filename_length
        self.max_error_length = max_error_length
        self.chunk_size = chunk_size

    def sanitize_filename(self, filename):
        """Reduce a name to a bare file name that is safe inside an output set"""
        if not filename:
            return None

        filename = UNSAFE_NAME_CHARS.sub('_', os.path.basename(filename)).lstrip('.')
        if len(filename) > self.max_filename_length:
            stem, ext = os.path.splitext(filename)
            filename = stem[:self.max_filename_length - len(ext)] + ext

        return filename if filename.strip() else None

    def hash_file(self, path):
        """Streamed SHA-256, recorded as the model digest of a bundle"""
        digest = hashlib.sha256()
        with open(path, 'rb') as fh:
            for chunk in iter(lambda: fh.read(self.chunk_size), b''):
                digest.update(chunk)
        return digest.hexdigest()

    def sanitize_error_message(self, error_message):
        """Diagnostics name no paths and stay short"""
        message = PATH_PATTERN.sub('[PATH]', str(error_message))
        if len(message) > self.max_error_length:
            message = message[:self.max_error_length] + "..."
        return message


def log_security_event(event_type, details, severity="WARNING"):
    """Log key-hygiene events such as a stego key derived from the default seed"""
    logger.log(getattr(logging, severity), f"SECURITY_EVENT: {event_type} - {details}")


security_manager = SecurityManager()
