"""Standard MIDI File <-> monophonic melody conversion."""
from __future__ import annotations

import io
import logging
import os
import tempfile
from dataclasses import dataclass

import mido

from melostega.services.melody import (
    NO_EVENT,
    NOTE_OFF,
    MelodySequence,
    QuantizationConfig,
    is_note_on,
    note_on,
    pitch_of,
)
from melostega.utils.error_handler import MalformedMidi, UnsupportedFormat, ValidationError

logger = logging.getLogger(__name__)

TICKS_PER_STEP = 120
DEFAULT_VELOCITY = 80
DRUM_CHANNEL = 9
MIDI_TAG = b'MThd'


@dataclass(frozen=True)
class _Note:
    start: int
    end: int
    pitch: int
    # False when the note was closed by the end of the track rather than a real release
    explicit_end: bool


def _read_midi(midi_bytes: bytes) -> mido.MidiFile:
    if not isinstance(midi_bytes, (bytes, bytearray)) or not bytes(midi_bytes[:4]) == MIDI_TAG:
        raise MalformedMidi("Data does not start with an MThd chunk")

    try:
        midi = mido.MidiFile(file=io.BytesIO(bytes(midi_bytes)))
    except (OSError, EOFError, ValueError, KeyError, IndexError, TypeError) as e:
        raise MalformedMidi(f"Could not parse MIDI data: {e}") from e

    if midi.type == 2:
        raise UnsupportedFormat("SMF format 2 (independent sequences) is not supported")
    if midi.ticks_per_beat & 0x8000:
        raise UnsupportedFormat("SMPTE time division is not supported")
    if midi.ticks_per_beat <= 0:
        raise MalformedMidi("Time division must be positive")
    return midi


def _collect_notes(track, ignore_drums):
    """Pair note-on/note-off messages of one track into absolute-tick notes."""
    timed = []
    tick = 0
    for msg in track:
        tick += msg.time
        timed.append((tick, msg))
    end_tick = tick

    active: dict[tuple[int, int], list[int]] = {}
    notes: list[tuple[int, int, int, bool]] = []
    stray_offs: list[int] = []

    for tick, msg in timed:
        if msg.type not in ('note_on', 'note_off'):
            continue
        if ignore_drums and msg.channel == DRUM_CHANNEL:
            continue

        key = (msg.channel, msg.note)
        if msg.type == 'note_on' and msg.velocity > 0:
            active.setdefault(key, []).append(tick)
            continue

        starts = active.get(key)
        if starts:
            start = starts.pop(0)
            explicit = not (msg.type == 'note_on' and tick == end_tick)
            notes.append((start, tick, msg.note, explicit))
        else:
            stray_offs.append(tick)

    for (_, pitch), starts in sorted(active.items()):
        for start in starts:
            notes.append((start, end_tick, pitch, False))

    return notes, stray_offs, end_tick


def _quantize(tick, ticks_per_beat, steps_per_quarter):
    # round half up onto the step grid
    return (2 * tick * steps_per_quarter + ticks_per_beat) // (2 * ticks_per_beat)


def _track_to_melody(track, ticks_per_beat, cfg: QuantizationConfig):
    raw_notes, raw_strays, end_tick = _collect_notes(track, cfg.ignore_drums)
    low, high = cfg.pitch_range

    def q(t):
        return _quantize(t, ticks_per_beat, cfg.steps_per_quarter)

    notes = []
    for start, end, pitch, explicit in raw_notes:
        if not low <= pitch <= high:
            continue
        qs, qe = q(start), q(end)
        if qe <= qs:
            continue
        notes.append(_Note(qs, qe, pitch, explicit))

    if not notes:
        return None

    first = min(n.start for n in notes)
    horizon = max(n.end for n in notes)
    eot_step = q(end_tick)
    stray_steps = {q(t) for t in raw_strays}

    # highest sounding pitch per step
    top = [-1] * (horizon - first)
    for n in notes:
        for s in range(n.start, n.end):
            if n.pitch > top[s - first]:
                top[s - first] = n.pitch
    attack = [False] * (horizon - first)
    for n in notes:
        if top[n.start - first] == n.pitch:
            attack[n.start - first] = True

    explicit_ends = {n.end for n in notes if n.explicit_end}
    implicit_ends = {n.end for n in notes if not n.explicit_end}

    def sounding(step):
        if first <= step < horizon:
            return top[step - first]
        return -1

    length = max(eot_step, horizon) - first
    if horizon in explicit_ends or horizon not in implicit_ends:
        length = max(length, horizon - first + 1)
    trailing = [s for s in stray_steps if s >= horizon]
    if trailing:
        length = max(length, max(trailing) - first + 1)

    events = []
    for step in range(first, first + length):
        cur, prev = sounding(step), sounding(step - 1)
        if cur >= 0:
            if step == first or attack[step - first] or cur != prev:
                events.append(note_on(cur))
            else:
                events.append(NO_EVENT)
        elif prev >= 0:
            released = step in explicit_ends or step not in implicit_ends
            events.append(NOTE_OFF if released else NO_EVENT)
        else:
            events.append(NOTE_OFF if step in stray_steps else NO_EVENT)

    return MelodySequence(tuple(events), cfg.steps_per_quarter)


def parse_and_extract(midi_bytes: bytes, cfg: QuantizationConfig | None = None) -> list[MelodySequence]:
    """Extract one quantized monophonic melody per track (highest pitch wins)."""
    cfg = cfg or QuantizationConfig()
    midi = _read_midi(midi_bytes)

    melodies = []
    for index, track in enumerate(midi.tracks):
        melody = _track_to_melody(track, midi.ticks_per_beat, cfg)
        if melody is None:
            continue
        if len(melody) < cfg.min_melody_events:
            logger.debug(f"Track {index}: melody of {len(melody)} events below minimum {cfg.min_melody_events}")
            continue
        melodies.append(melody)
    return melodies


def render_midi(melody: MelodySequence, tempo_bpm: float = 120.0, program: int = 0) -> bytes:
    """Render a melody as a format-0 SMF; parse_and_extract inverts it exactly."""
    melody.validate()
    if not tempo_bpm or tempo_bpm <= 0:
        raise ValidationError(f"Tempo must be positive, got {tempo_bpm}")
    tempo = mido.bpm2tempo(tempo_bpm)
    if not 0 < tempo < 2 ** 24:
        raise ValidationError(f"Tempo out of range for a MIDI file: {tempo_bpm} BPM")
    if not 0 <= program <= 127:
        raise ValidationError(f"Program must be in [0, 127], got {program}")

    midi = mido.MidiFile(type=0, ticks_per_beat=melody.steps_per_quarter * TICKS_PER_STEP)
    track = mido.MidiTrack()
    midi.tracks.append(track)
    track.append(mido.MetaMessage('set_tempo', tempo=tempo, time=0))
    track.append(mido.Message('program_change', program=program, channel=0, time=0))

    last_tick = 0

    def emit(msg_type, pitch, velocity, tick):
        nonlocal last_tick
        track.append(mido.Message(msg_type, note=pitch, velocity=velocity, channel=0, time=tick - last_tick))
        last_tick = tick

    sounding = None
    last_pitch = None
    for step, symbol in enumerate(melody.events):
        tick = step * TICKS_PER_STEP
        if symbol == NOTE_OFF:
            if sounding is not None:
                emit('note_off', sounding, 0, tick)
                sounding = None
            else:
                # unmatched release keeps a repeated NOTE_OFF recoverable
                emit('note_off', last_pitch, 0, tick)
        elif is_note_on(symbol):
            if sounding is not None:
                emit('note_off', sounding, 0, tick)
            pitch = pitch_of(symbol)
            emit('note_on', pitch, DEFAULT_VELOCITY, tick)
            sounding = last_pitch = pitch

    end_tick = len(melody.events) * TICKS_PER_STEP
    if sounding is not None:
        emit('note_on', sounding, 0, end_tick)
    track.append(mido.MetaMessage('end_of_track', time=end_tick - last_tick))

    buffer = io.BytesIO()
    midi.save(file=buffer)
    return buffer.getvalue()


def write_bytes_atomic(path, data: bytes):
    """Write to a sibling temp file, then rename over the target"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'wb') as fh:
            fh.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def melody_to_midi_file(melody: MelodySequence, path, tempo_bpm: float = 120.0, program: int = 0) -> int:
    data = render_midi(melody, tempo_bpm, program)
    write_bytes_atomic(path, data)
    return len(data)


def read_melody_file(path, cfg: QuantizationConfig | None = None) -> list[MelodySequence]:
    with open(path, 'rb') as fh:
        return parse_and_extract(fh.read(), cfg)
