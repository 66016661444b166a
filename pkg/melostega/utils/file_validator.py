import logging
import os

logger = logging.getLogger(__name__)

MIDI_HEADER_TAG = b'MThd'


class FileValidator:
    def __init__(self, max_file_size=16 * 1024 * 1024):
        self.allowed_extensions = {'mid', 'midi'}
        self.max_file_size = max_file_size

    def validate_file(self, path):
        """
        Validate a candidate MIDI file before it is handed to the parser
        """
        try:
            if not path or not os.path.isfile(path):
                return {'valid': False, 'error': 'No such file'}

            if not self.is_allowed_file(path):
                return {
                    'valid': False,
                    'error': f'File type not supported. Allowed types: {", ".join(sorted(self.allowed_extensions))}'
                }

            file_size = os.path.getsize(path)

            if file_size == 0:
                return {'valid': False, 'error': 'File is empty'}

            if file_size > self.max_file_size:
                return {
                    'valid': False,
                    'error': f'File too large. Maximum size: {self.max_file_size / (1024 * 1024):.0f}MB'
                }

            with open(path, 'rb') as fh:
                tag = fh.read(len(MIDI_HEADER_TAG))

            if tag != MIDI_HEADER_TAG:
                return {'valid': False, 'error': 'Missing MThd header chunk'}

            return {'valid': True, 'size_bytes': file_size}

        except OSError as e:
            logger.error(f"File validation error: {str(e)}")
            return {'valid': False, 'error': f'Validation error: {str(e)}'}

    def is_allowed_file(self, filename):
        return '.' in filename and \
               filename.rsplit('.', 1)[1].lower() in self.allowed_extensions
