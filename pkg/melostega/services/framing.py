"""Length-prefixed payload frames as '0'/'1' bit strings.

A frame is a 32-bit big-endian count of payload bits followed by the
payload, most significant bit of each byte first. Bits after the counted
payload are padding and are ignored when unframing.
"""
from __future__ import annotations

from melostega.utils.error_handler import NonByteAlignedLength, PayloadTooLarge, TruncatedFrame

HEADER_BITS = 32
MAX_PAYLOAD_BYTES = 2 ** 29 - 1


def bytes_to_bits(data: bytes) -> str:
    return ''.join(f'{byte:08b}' for byte in data)


def bits_to_bytes(bits: str) -> bytes:
    if len(bits) % 8:
        raise NonByteAlignedLength(f"{len(bits)} bits do not form whole bytes")
    if not bits:
        return b''
    return int(bits, 2).to_bytes(len(bits) // 8, byteorder='big')


def frame_payload(secret: bytes) -> str:
    if len(secret) > MAX_PAYLOAD_BYTES:
        raise PayloadTooLarge(f"Payload of {len(secret)} bytes exceeds the {MAX_PAYLOAD_BYTES}-byte frame limit")
    return f'{len(secret) * 8:032b}' + bytes_to_bits(secret)


def frame_header(bits: str) -> int:
    if len(bits) < HEADER_BITS:
        raise TruncatedFrame(f"Need {HEADER_BITS} header bits, got {len(bits)}")
    return int(bits[:HEADER_BITS], 2)


def frame_length(bits: str) -> int:
    """Total bits the frame occupies, header included"""
    return HEADER_BITS + frame_header(bits)


def unframe_payload(bits: str) -> bytes:
    count = frame_header(bits)
    available = len(bits) - HEADER_BITS
    if count > available:
        raise TruncatedFrame(f"Header announces {count} payload bits but only {available} follow")
    if count % 8:
        raise NonByteAlignedLength(f"Header announces {count} bits, not a whole number of bytes")
    return bits_to_bytes(bits[HEADER_BITS:HEADER_BITS + count])
