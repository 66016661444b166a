"""Hide a payload in generated melodies and read it back.

The sender walks a Huffman tree built over the model's top-cps candidates
at every step and emits the leaf selected by the next payload bits. The
receiver replays the model on each received prefix, rebuilds the same tree
and reads back the code word of every emitted note.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from melostega.services.distribution import ConditionalModel
from melostega.services.framing import frame_payload, frame_length, unframe_payload
from melostega.services.huffman import build_candidate_pool, build_huffman
from melostega.services.melody import MelodySequence, is_note_on
from melostega.utils.error_handler import (
    DesyncDetected,
    TruncatedFrame,
    ValidationError,
    validate_cps,
    validate_positive,
    validate_seed,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_EVENTS = 160
BAR_EVENTS = 16


@dataclass(frozen=True)
class StegoParams:
    cps: int
    seed: int
    max_events_per_melody: int = DEFAULT_MAX_EVENTS
    start_notes: Optional[tuple[int, ...]] = None
    steps_per_quarter: int = 4

    def __post_init__(self):
        validate_cps(self.cps)
        validate_seed(self.seed)
        validate_positive('max_events_per_melody', self.max_events_per_melody)
        if self.max_events_per_melody < 2:
            raise ValidationError("max_events_per_melody must leave room for at least one data note")
        if self.start_notes is not None:
            object.__setattr__(self, 'start_notes', tuple(self.start_notes))
            if not self.start_notes or not all(is_note_on(s) for s in self.start_notes):
                raise ValidationError("start_notes must be a non-empty list of NOTE_ON symbols")

    def keys_for(self, model: ConditionalModel) -> tuple[int, ...]:
        return self.start_notes or tuple(model.start_notes)


@dataclass
class StegoBundle:
    melodies: list[MelodySequence]
    cps: int
    max_events_per_melody: int
    bit_counts: list[int] = field(default_factory=list)
    data_notes: list[int] = field(default_factory=list)

    @property
    def total_bits(self) -> int:
        return sum(self.bit_counts)

    @property
    def total_data_notes(self) -> int:
        return sum(self.data_notes)

    def event_counts(self) -> list[int]:
        return [len(m) for m in self.melodies]

    def __len__(self):
        return len(self.melodies)


def _check_model(model: ConditionalModel, params: StegoParams):
    if params.cps > model.vocab_size:
        raise ValidationError(f"cps {params.cps} exceeds the model vocabulary of {model.vocab_size}")


def _tail_length(events: int, max_events: int) -> int:
    """Melody length once the greedy tail has padded it to a whole bar"""
    return min(max_events, -(-events // BAR_EVENTS) * BAR_EVENTS)


def embed(model: ConditionalModel, params: StegoParams, secret: bytes) -> StegoBundle:
    _check_model(model, params)
    frame = frame_payload(secret)
    keys = params.keys_for(model)
    rng = np.random.default_rng(params.seed)

    bundle = StegoBundle([], params.cps, params.max_events_per_melody)
    pos = 0
    while pos < len(frame):
        key = keys[int(rng.integers(0, len(keys)))]
        session = model.new_session()
        session.feed(key)
        events = [key]
        bits = notes = 0

        while len(events) < params.max_events_per_melody and pos < len(frame):
            code = build_huffman(build_candidate_pool(session.distribution(), params.cps))
            symbol, consumed = code.walk(frame, pos)
            pos += consumed
            bits += consumed
            events.append(symbol)
            session.feed(symbol)
            notes += 1

        if pos >= len(frame):
            target = _tail_length(len(events), params.max_events_per_melody)
            while len(events) < target:
                symbol = session.distribution().argmax
                events.append(symbol)
                session.feed(symbol)

        bundle.melodies.append(MelodySequence(tuple(events), params.steps_per_quarter))
        bundle.bit_counts.append(bits)
        bundle.data_notes.append(notes)

    logger.info(f"Embedded {len(secret)} bytes ({len(frame)} framed bits) into "
                f"{len(bundle)} melodies at cps {params.cps}")
    return bundle


@dataclass
class _DecodedNote:
    melody: int
    index: int
    start: int
    end: int
    is_argmax: bool


def _decode_bits(model: ConditionalModel, params: StegoParams, melodies: Sequence[MelodySequence]):
    bits: list[str] = []
    notes: list[_DecodedNote] = []
    for m_index, melody in enumerate(melodies):
        events = list(melody.events)
        session = model.new_session()
        session.feed(events[0])
        for index in range(1, len(events)):
            symbol = events[index]
            dist = session.distribution()
            code = build_huffman(build_candidate_pool(dist, params.cps))
            word = code.code_for(symbol)
            if word is None:
                raise DesyncDetected(
                    f"Melody {m_index} event {index}: symbol {symbol} is not in the candidate pool "
                    f"(wrong model, cps or melody order)")
            start = len(bits)
            bits.extend(word)
            notes.append(_DecodedNote(m_index, index, start, len(bits), symbol == dist.argmax))
            session.feed(symbol)
    return ''.join(bits), notes


def _verify_trailer(bits: str, notes: list[_DecodedNote], melodies: Sequence[MelodySequence],
                    params: StegoParams, end: int):
    """Everything after the frame must look exactly like the sender's padding"""
    last = next(n for n in notes if n.end >= end)
    if bits[end:last.end].strip('0'):
        raise DesyncDetected("Padding bits after the payload are not zero")

    for note in notes:
        if note.start >= end and not note.is_argmax:
            raise DesyncDetected(f"Melody {note.melody} event {note.index} continues past the payload "
                                 f"with a non-greedy note")

    if last.melody != len(melodies) - 1:
        raise DesyncDetected(f"{len(melodies) - 1 - last.melody} melodies follow the end of the payload")
    for m_index, melody in enumerate(melodies[:-1]):
        if len(melody) != params.max_events_per_melody:
            raise DesyncDetected(f"Melody {m_index} has {len(melody)} events but is not the last one "
                                 f"(expected {params.max_events_per_melody})")
    expected = _tail_length(last.index + 1, params.max_events_per_melody)
    if len(melodies[-1]) != expected:
        raise DesyncDetected(f"Last melody has {len(melodies[-1])} events, expected {expected}")


def recover_bundle(model: ConditionalModel, params: StegoParams,
                   melodies: Sequence[MelodySequence]) -> tuple[bytes, StegoBundle]:
    """Extract the payload and rebuild the per-melody bit accounting"""
    _check_model(model, params)
    if not melodies:
        raise TruncatedFrame("No melodies to extract from")

    bits, notes = _decode_bits(model, params, melodies)
    payload = unframe_payload(bits)
    end = frame_length(bits)
    _verify_trailer(bits, notes, melodies, params, end)

    bundle = StegoBundle(list(melodies), params.cps, params.max_events_per_melody,
                         bit_counts=[0] * len(melodies), data_notes=[0] * len(melodies))
    for note in notes:
        if note.start < end:
            bundle.bit_counts[note.melody] += min(note.end, end) - note.start
            bundle.data_notes[note.melody] += 1

    logger.info(f"Extracted {len(payload)} bytes from {len(melodies)} melodies at cps {params.cps}")
    return payload, bundle


def extract_melodies(model: ConditionalModel, params: StegoParams,
                     melodies: Sequence[MelodySequence]) -> bytes:
    return recover_bundle(model, params, melodies)[0]


def extract(model: ConditionalModel, params: StegoParams, bundle: StegoBundle) -> bytes:
    return extract_melodies(model, params, bundle.melodies)


@dataclass
class CapacityProfile:
    cps: int
    data_notes: int
    bits: int
    expected_bits: float

    @property
    def mean_bits_per_note(self) -> float:
        return self.bits / self.data_notes if self.data_notes else 0.0

    @property
    def mean_expected_bits(self) -> float:
        return self.expected_bits / self.data_notes if self.data_notes else 0.0

    @property
    def bound(self) -> float:
        return math.log2(self.cps)

    def to_dict(self):
        return {
            'cps': self.cps,
            'data_notes': self.data_notes,
            'bits': self.bits,
            'mean_bits_per_note': self.mean_bits_per_note,
            'mean_expected_bits': self.mean_expected_bits,
            'log2_cps': self.bound,
        }


def capacity_profile(model: ConditionalModel, params: StegoParams, n_notes: int) -> CapacityProfile:
    """Bits consumed per data note under uniformly random payload bits.

    expected_bits sums, per step, the code length averaged over uniform bits
    (each leaf at depth d is reached with probability 2^-d).
    """
    validate_positive('n_notes', n_notes)
    _check_model(model, params)
    keys = params.keys_for(model)
    rng = np.random.default_rng(params.seed)

    profile = CapacityProfile(params.cps, 0, 0, 0.0)
    while profile.data_notes < n_notes:
        session = model.new_session()
        session.feed(keys[int(rng.integers(0, len(keys)))])
        length = 1
        while length < params.max_events_per_melody and profile.data_notes < n_notes:
            code = build_huffman(build_candidate_pool(session.distribution(), params.cps))
            profile.expected_bits += sum(len(c) * 2.0 ** -len(c) for c in code.codes)
            node = code.root
            while not node.is_leaf:
                node = node.right if rng.integers(0, 2) else node.left
                profile.bits += 1
            session.feed(node.symbol)
            profile.data_notes += 1
            length += 1
    return profile
