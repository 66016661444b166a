"""Additively smoothed n-gram melody model in pure integer arithmetic."""
from __future__ import annotations

import logging
import struct
from collections import Counter, deque
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from typing import Iterable, Sequence

from melostega.services.distribution import Distribution
from melostega.services.melody import PAD, VOCAB_SIZE, MelodyEvent, MelodySequence, is_note_on
from melostega.utils.binary_reader import BinaryReader
from melostega.utils.error_handler import (
    BadMagic,
    EmptyCorpus,
    TruncatedFile,
    ValidationError,
    VersionMismatch,
)

logger = logging.getLogger(__name__)

MODEL_MAGIC = b'AAGM'
MODEL_VERSION = 1
DEFAULT_ORDER = 4
DEFAULT_ALPHA = Fraction(1, 10)
# distributions kept per model, least recently used evicted first
DEFAULT_CACHE_SIZE = 4096


@dataclass(eq=False)
class NGramModel:
    order: int
    alpha_num: int
    alpha_den: int
    counts: dict[tuple[int, ...], dict[int, int]]
    start_notes: tuple[int, ...]
    vocab_size: int = VOCAB_SIZE
    cache_size: int = field(default=DEFAULT_CACHE_SIZE, repr=False)

    def __post_init__(self):
        if self.order < 1:
            raise ValidationError(f"Order must be at least 1, got {self.order}")
        if self.alpha_num < 1 or self.alpha_den < 1:
            raise ValidationError("Smoothing alpha must be a positive rational")
        if not self.start_notes or not all(is_note_on(s) for s in self.start_notes):
            raise ValidationError("Start notes must be a non-empty list of NOTE_ON symbols")
        if self.cache_size < 1:
            raise ValidationError(f"Cache size must be positive, got {self.cache_size}")
        self._cached_distribution = lru_cache(maxsize=self.cache_size)(self._distribution)

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.alpha_num, self.alpha_den)

    @property
    def context_length(self) -> int:
        return self.order - 1

    def context_key(self, context: Sequence[MelodyEvent]) -> tuple[int, ...]:
        n = self.context_length
        if n == 0:
            return ()
        tail = tuple(context[-n:])
        return (PAD,) * (n - len(tail)) + tail

    def predict(self, context: Sequence[MelodyEvent]) -> Distribution:
        if not context:
            raise ValidationError("predict needs at least the key note as context")
        return self.predict_key(self.context_key(context))

    def predict_key(self, key: tuple[int, ...]) -> Distribution:
        return self._cached_distribution(key)

    def cache_info(self):
        return self._cached_distribution.cache_info()

    def _distribution(self, key: tuple[int, ...]) -> Distribution:
        observed = self.counts.get(key, {})
        weights = [
            (symbol, self.alpha_den * observed.get(symbol, 0) + self.alpha_num)
            for symbol in range(self.vocab_size)
        ]
        return Distribution.from_weights(weights)

    def continuations(self, key: tuple[int, ...]) -> int:
        return sum(self.counts.get(key, {}).values())

    def new_session(self) -> NGramSession:
        return NGramSession(self)

    def to_bytes(self) -> bytes:
        return dump_model(self)


class NGramSession:
    def __init__(self, model: NGramModel):
        self.model = model
        self.window = deque([PAD] * model.context_length, maxlen=model.context_length)
        self.fed = 0

    def feed(self, symbol: MelodyEvent) -> None:
        self.window.append(symbol)
        self.fed += 1

    def distribution(self) -> Distribution:
        if not self.fed:
            raise ValidationError("Feed the key note before asking for a distribution")
        return self.model.predict_key(tuple(self.window))


def _as_fraction(alpha) -> Fraction:
    try:
        return Fraction(alpha)
    except (ValueError, TypeError, ZeroDivisionError) as e:
        raise ValidationError(f"Alpha is not a rational number: {alpha!r}") from e


def train_ngram(corpus: Iterable[MelodySequence], order: int = DEFAULT_ORDER, alpha=DEFAULT_ALPHA) -> NGramModel:
    """Count every (context, next event) window, contexts left-padded with PAD."""
    melodies = list(getattr(corpus, 'melodies', corpus))
    if not melodies:
        raise EmptyCorpus("Cannot train on an empty corpus")
    if isinstance(order, bool) or not isinstance(order, int) or order < 1:
        raise ValidationError(f"Order must be a positive integer, got {order!r}")
    alpha = _as_fraction(alpha)
    if alpha <= 0:
        raise ValidationError(f"Alpha must be positive, got {alpha}")

    n = order - 1
    tallies: dict[tuple[int, ...], Counter] = {}
    for melody in melodies:
        padded = (PAD,) * n + tuple(melody.events)
        for i, symbol in enumerate(melody.events):
            key = padded[i:i + n]
            tallies.setdefault(key, Counter())[symbol] += 1

    counts = {key: dict(sorted(counter.items())) for key, counter in sorted(tallies.items())}
    start_notes = tuple(sorted({m.events[0] for m in melodies}))
    model = NGramModel(
        order=order,
        alpha_num=alpha.numerator,
        alpha_den=alpha.denominator,
        counts=counts,
        start_notes=start_notes,
    )
    logger.info(
        f"Trained order-{order} n-gram on {len(melodies)} melodies: "
        f"{len(counts)} contexts, {len(start_notes)} start notes, alpha={alpha}"
    )
    return model


def dump_model(model: NGramModel) -> bytes:
    """Canonical binary form: contexts and symbols in ascending order"""
    out = bytearray()
    out += MODEL_MAGIC
    out += struct.pack('<HHHII', MODEL_VERSION, model.order, model.vocab_size, model.alpha_num, model.alpha_den)
    out += struct.pack('<H', len(model.start_notes))
    for symbol in model.start_notes:
        out += struct.pack('<H', symbol)

    out += struct.pack('<I', len(model.counts))
    for key in sorted(model.counts):
        for symbol in key:
            out += struct.pack('<H', symbol)
        entries = sorted(model.counts[key].items())
        out += struct.pack('<H', len(entries))
        for symbol, count in entries:
            out += struct.pack('<HI', symbol, count)
    return bytes(out)


def load_model_bytes(data: bytes) -> NGramModel:
    reader = BinaryReader(data, 'model file')
    magic = reader.read_bytes(4)
    if magic != MODEL_MAGIC:
        raise BadMagic(f"Not an n-gram model file (magic {magic!r})")
    version = reader.read('H')
    if version != MODEL_VERSION:
        raise VersionMismatch(f"Model file version {version} is not supported (expected {MODEL_VERSION})")

    order, vocab_size, alpha_num, alpha_den = reader.read('HHII')
    start_notes = tuple(reader.read('H') for _ in range(reader.read('H')))

    counts = {}
    for _ in range(reader.read('I')):
        key = tuple(reader.read('H') for _ in range(order - 1))
        entries = {}
        for _ in range(reader.read('H')):
            symbol, count = reader.read('HI')
            entries[symbol] = count
        counts[key] = entries

    if reader.remaining():
        raise TruncatedFile(f"Model file has {reader.remaining()} unexpected trailing bytes")

    return NGramModel(
        order=order,
        alpha_num=alpha_num,
        alpha_den=alpha_den,
        counts=counts,
        start_notes=start_notes,
        vocab_size=vocab_size,
    )
