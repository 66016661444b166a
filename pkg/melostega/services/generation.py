from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from melostega.services.distribution import ConditionalModel, Distribution
from melostega.services.melody import MelodySequence, is_note_on
from melostega.utils.error_handler import ValidationError, validate_positive, validate_seed

logger = logging.getLogger(__name__)

GREEDY = 'greedy'
SAMPLED = 'sampled'
MODES = (GREEDY, SAMPLED)


@dataclass(frozen=True)
class GenerationParams:
    seed: int
    start_notes: tuple[int, ...]
    max_events: int = 160
    steps_per_quarter: int = 4

    def __post_init__(self):
        object.__setattr__(self, 'start_notes', tuple(self.start_notes))
        validate_seed(self.seed)
        validate_positive('max_events', self.max_events)
        if not self.start_notes or not all(is_note_on(s) for s in self.start_notes):
            raise ValidationError("start_notes must be a non-empty list of NOTE_ON symbols")


def sample_from(dist: Distribution, rng: np.random.Generator) -> int:
    """Draw a symbol with probability weight / total using exact integer thresholds"""
    target = int(rng.integers(0, dist.total))
    for symbol, weight in dist.entries:
        if target < weight:
            return symbol
        target -= weight
    return dist.entries[-1][0]


def generate(model: ConditionalModel, params: GenerationParams, mode: str = GREEDY) -> MelodySequence:
    if mode not in MODES:
        raise ValidationError(f"Mode must be one of {MODES}, got {mode!r}")

    rng = np.random.default_rng(params.seed)
    key = params.start_notes[int(rng.integers(0, len(params.start_notes)))]

    session = model.new_session()
    session.feed(key)
    events = [key]
    while len(events) < params.max_events:
        dist = session.distribution()
        symbol = dist.argmax if mode == GREEDY else sample_from(dist, rng)
        events.append(symbol)
        session.feed(symbol)

    return MelodySequence(tuple(events), params.steps_per_quarter)


def derive_seed(seed: int, index: int) -> int:
    """Independent per-item seed from a run seed"""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def generate_many(model: ConditionalModel, seed: int, count: int, mode: str = GREEDY,
                  max_events: int = 160, start_notes: Sequence[int] | None = None,
                  steps_per_quarter: int = 4) -> list[MelodySequence]:
    validate_positive('count', count)
    melodies = []
    for index in range(count):
        params = GenerationParams(
            seed=derive_seed(seed, index),
            start_notes=tuple(start_notes or model.start_notes),
            max_events=max_events,
            steps_per_quarter=steps_per_quarter,
        )
        melodies.append(generate(model, params, mode))
    logger.info(f"Generated {count} {mode} melodies of {max_events} events")
    return melodies
