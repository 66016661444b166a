"""Embedding-rate and likelihood-score reports."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import pandas as pd

from melostega.services.distribution import ConditionalModel
from melostega.services.melody import MelodySequence
from melostega.services.midi_io import render_midi
from melostega.services.stego_codec import StegoBundle
from melostega.utils.error_handler import EmptyInput, SequenceTooShort, ValidationError

logger = logging.getLogger(__name__)

# Published per-CPS averages (bits per note, notes per melody, bytes per file)
# and the rates printed next to them.
PUBLISHED_RATE_TABLE = (
    {'cps': 2, 'k': 1.0, 'L': 147.9, 'B': 505.8, 'er': 0.037},
    {'cps': 4, 'k': 1.95, 'L': 146.3, 'B': 518.2, 'er': 0.069},
    {'cps': 8, 'k': 2.78, 'L': 146.9, 'B': 524.9, 'er': 0.097},
    {'cps': 16, 'k': 3.59, 'L': 160.5, 'B': 504.5, 'er': 0.143},
    {'cps': 32, 'k': 4.37, 'L': 139.5, 'B': 530.8, 'er': 0.144},
    {'cps': 64, 'k': 5.22, 'L': 141.8, 'B': 495.4, 'er': 0.187},
)


def table_embedding_rate(k: float, mean_events: float, mean_bytes: float) -> float:
    """Rate from averages: (L - 1) * k bits over B bytes of file"""
    if mean_bytes <= 0:
        raise ValidationError("Mean file size must be positive")
    return (mean_events - 1) * k / (mean_bytes * 8)


@dataclass
class RateReport:
    total_bits: int
    event_counts: list[int]
    file_sizes: list[int]
    data_notes: list[int] = field(default_factory=list)
    cps: Optional[int] = None

    @property
    def melodies(self) -> int:
        return len(self.event_counts)

    @property
    def total_file_bits(self) -> int:
        return sum(self.file_sizes) * 8

    @property
    def embedding_rate(self) -> float:
        return self.total_bits / self.total_file_bits if self.total_file_bits else 0.0

    @property
    def mean_events(self) -> float:
        return sum(self.event_counts) / self.melodies

    @property
    def mean_file_bytes(self) -> float:
        return sum(self.file_sizes) / self.melodies

    @property
    def mean_bits_per_note(self) -> float:
        """Bits per note counted the published way, over L - 1 notes per melody"""
        notes = self.mean_events - 1
        return (self.total_bits / self.melodies) / notes if notes > 0 else 0.0

    @property
    def bits_per_data_note(self) -> float:
        total_notes = sum(self.data_notes)
        return self.total_bits / total_notes if total_notes else 0.0

    def to_dict(self):
        return {
            'cps': self.cps,
            'melodies': self.melodies,
            'total_bits': self.total_bits,
            'total_file_bits': self.total_file_bits,
            'mean_events': self.mean_events,
            'mean_file_bytes': self.mean_file_bytes,
            'mean_bits_per_note': self.mean_bits_per_note,
            'bits_per_data_note': self.bits_per_data_note,
            'embedding_rate': self.embedding_rate,
        }


def _file_sizes(bundle: StegoBundle, tempo_bpm: float, program: int) -> list[int]:
    return [len(render_midi(m, tempo_bpm, program)) for m in bundle.melodies]


def embedding_rate(bundles: Sequence[StegoBundle], file_sizes: Optional[Sequence[Sequence[int]]] = None,
                   tempo_bpm: float = 120.0, program: int = 0) -> RateReport:
    """Pool every melody of the given bundles into one report.

    file_sizes holds the on-disk byte size of each melody per bundle; when
    absent the melodies are rendered to measure it.
    """
    if not bundles or not any(b.melodies for b in bundles):
        raise EmptyInput("No melodies to measure")
    if file_sizes is not None and len(file_sizes) != len(bundles):
        raise ValidationError("file_sizes must give one list per bundle")

    report = RateReport(0, [], [], [])
    cps_values = set()
    for index, bundle in enumerate(bundles):
        sizes = list(file_sizes[index]) if file_sizes is not None else _file_sizes(bundle, tempo_bpm, program)
        if len(sizes) != len(bundle.melodies):
            raise ValidationError(f"Bundle {index} has {len(bundle.melodies)} melodies but {len(sizes)} file sizes")
        report.total_bits += bundle.total_bits
        report.event_counts.extend(bundle.event_counts())
        report.file_sizes.extend(sizes)
        report.data_notes.extend(bundle.data_notes)
        cps_values.add(bundle.cps)

    if len(cps_values) == 1:
        report.cps = cps_values.pop()
    logger.info(f"Embedding rate over {report.melodies} melodies: {report.embedding_rate:.4f}")
    return report


def rate_table(bundles: Sequence[StegoBundle], file_sizes: Optional[Sequence[Sequence[int]]] = None,
               tempo_bpm: float = 120.0, program: int = 0) -> pd.DataFrame:
    """One RateReport row per cps value"""
    if not bundles:
        raise EmptyInput("No bundles to tabulate")
    groups: dict[int, list[int]] = {}
    for index, bundle in enumerate(bundles):
        groups.setdefault(bundle.cps, []).append(index)

    rows = []
    for cps in sorted(groups):
        indices = groups[cps]
        sizes = [file_sizes[i] for i in indices] if file_sizes is not None else None
        rows.append(embedding_rate([bundles[i] for i in indices], sizes, tempo_bpm, program).to_dict())
    return pd.DataFrame(rows).set_index('cps')


@dataclass
class ScoreReport:
    scores: list[float]

    @property
    def mean_score(self) -> float:
        return math.fsum(self.scores) / len(self.scores)

    @property
    def mean_score_bits(self) -> float:
        return self.mean_score / math.log(2)

    def to_dict(self):
        return {
            'sequences': len(self.scores),
            'mean_score': self.mean_score,
            'mean_score_bits': self.mean_score_bits,
            'scores': list(self.scores),
        }


def sequence_score(model: ConditionalModel, melody: MelodySequence) -> float:
    """Mean negative natural-log probability of every event after the key note"""
    events = list(melody.events)
    if len(events) < 2:
        raise SequenceTooShort(f"A melody of {len(events)} event(s) has nothing to score")
    session = model.new_session()
    session.feed(events[0])
    total = 0.0
    for symbol in events[1:]:
        dist = session.distribution()
        probability = dist.probability(symbol)
        if probability <= 0:
            return math.inf
        total -= math.log(probability)
        session.feed(symbol)
    return total / (len(events) - 1)


def likelihood_score(model: ConditionalModel, sequences: Sequence[MelodySequence]) -> ScoreReport:
    if not sequences:
        raise EmptyInput("No sequences to score")
    # sequential, fixed order so the float sum is reproducible
    report = ScoreReport([sequence_score(model, melody) for melody in sequences])
    logger.info(f"Scored {len(sequences)} sequences: mean {report.mean_score:.4f} nats")
    return report


def score_table(model: ConditionalModel, groups: dict[str, Sequence[MelodySequence]]) -> pd.DataFrame:
    rows = []
    for name, sequences in groups.items():
        report = likelihood_score(model, sequences)
        rows.append({'group': name, 'sequences': len(sequences),
                     'mean_score': report.mean_score, 'mean_score_bits': report.mean_score_bits})
    return pd.DataFrame(rows).set_index('group')
