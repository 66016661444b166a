"""Monophonic melody event encoding.

Symbols 0..129: 0 sustains the current state (NO_EVENT), 1 releases the
sounding note (NOTE_OFF) and 2..129 start MIDI pitch symbol - 2 (NOTE_ON).
"""
from __future__ import annotations

from dataclasses import dataclass

from melostega.utils.error_handler import ValidationError

NO_EVENT = 0
NOTE_OFF = 1
NOTE_ON_OFFSET = 2
MIN_PITCH = 0
MAX_PITCH = 127
VOCAB_SIZE = 130
# Left-padding for short contexts, never emitted
PAD = VOCAB_SIZE

MelodyEvent = int


def note_on(pitch: int) -> MelodyEvent:
    if not MIN_PITCH <= pitch <= MAX_PITCH:
        raise ValidationError(f"MIDI pitch out of range: {pitch}")
    return pitch + NOTE_ON_OFFSET


def is_note_on(symbol: MelodyEvent) -> bool:
    return NOTE_ON_OFFSET <= symbol < VOCAB_SIZE


def pitch_of(symbol: MelodyEvent) -> int:
    if not is_note_on(symbol):
        raise ValidationError(f"Symbol {symbol} is not a NOTE_ON")
    return symbol - NOTE_ON_OFFSET


def describe(symbol: MelodyEvent) -> str:
    if symbol == NO_EVENT:
        return "NO_EVENT"
    if symbol == NOTE_OFF:
        return "NOTE_OFF"
    return f"NOTE_ON({pitch_of(symbol)})"


@dataclass(frozen=True)
class QuantizationConfig:
    steps_per_quarter: int = 4
    min_melody_events: int = 1
    pitch_range: tuple[int, int] = (MIN_PITCH, MAX_PITCH)
    ignore_drums: bool = True

    def __post_init__(self):
        if self.steps_per_quarter < 1:
            raise ValidationError("steps_per_quarter must be positive")
        if self.min_melody_events < 1:
            raise ValidationError("min_melody_events must be positive")
        low, high = self.pitch_range
        if not MIN_PITCH <= low <= high <= MAX_PITCH:
            raise ValidationError(f"Invalid pitch range [{low}, {high}]")


@dataclass(frozen=True)
class MelodySequence:
    events: tuple[MelodyEvent, ...]
    steps_per_quarter: int = 4

    def __post_init__(self):
        object.__setattr__(self, 'events', tuple(int(e) for e in self.events))
        self.validate()

    def validate(self):
        if self.steps_per_quarter < 1:
            raise ValidationError("steps_per_quarter must be positive")
        if not self.events:
            raise ValidationError("A melody needs at least one event")
        if not is_note_on(self.events[0]):
            raise ValidationError(
                f"A melody must start with a NOTE_ON, got {describe(self.events[0]) if 0 <= self.events[0] < VOCAB_SIZE else self.events[0]}"
            )
        for symbol in self.events:
            if not 0 <= symbol < VOCAB_SIZE:
                raise ValidationError(f"Symbol out of vocabulary: {symbol}")
        return True

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def key(self) -> MelodyEvent:
        """The first note, which seeds extraction"""
        return self.events[0]

    def pitches(self) -> list[int]:
        return [pitch_of(e) for e in self.events if is_note_on(e)]

    def note_count(self) -> int:
        return sum(1 for e in self.events if is_note_on(e))

    def steps(self) -> int:
        return len(self.events)
