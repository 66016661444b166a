import struct

from .error_handler import TruncatedFile


class BinaryReader:
    """Little-endian fixed-width reader over an in-memory file image"""

    def __init__(self, data, what='file'):
        self.data = memoryview(bytes(data))
        self.offset = 0
        self.what = what

    def read(self, fmt):
        fmt = '<' + fmt
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise TruncatedFile(
                f"{self.what} truncated at byte {self.offset} (needed {size} more bytes)"
            )
        values = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return values if len(values) > 1 else values[0]

    def read_bytes(self, count):
        if self.offset + count > len(self.data):
            raise TruncatedFile(
                f"{self.what} truncated at byte {self.offset} (needed {count} more bytes)"
            )
        chunk = bytes(self.data[self.offset:self.offset + count])
        self.offset += count
        return chunk

    def remaining(self):
        return len(self.data) - self.offset
