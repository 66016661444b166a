"""Integer-weighted next-event distributions and the model interface."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence, runtime_checkable

from melostega.services.melody import MelodyEvent
from melostega.utils.error_handler import ValidationError


@dataclass(frozen=True)
class Distribution:
    # (symbol, weight), heaviest first, ties by ascending symbol
    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValidationError("A distribution needs at least one entry")
        seen = set()
        previous = None
        for symbol, weight in self.entries:
            if weight < 1:
                raise ValidationError(f"Weight of symbol {symbol} must be positive, got {weight}")
            if symbol in seen:
                raise ValidationError(f"Duplicate symbol {symbol} in distribution")
            seen.add(symbol)
            if previous is not None and _order_key(previous) > _order_key((symbol, weight)):
                raise ValidationError("Distribution entries are not sorted")
            previous = (symbol, weight)

    @classmethod
    def from_weights(cls, weights: Iterable[tuple[int, int]]) -> Distribution:
        return cls(tuple(sorted(((int(s), int(w)) for s, w in weights), key=_order_key)))

    @property
    def total(self) -> int:
        return sum(w for _, w in self.entries)

    @property
    def argmax(self) -> int:
        return self.entries[0][0]

    def symbols(self) -> list[int]:
        return [s for s, _ in self.entries]

    def weight(self, symbol: int) -> int:
        for s, w in self.entries:
            if s == symbol:
                return w
        return 0

    def probability(self, symbol: int) -> float:
        return self.weight(symbol) / self.total

    def top(self, m: int) -> tuple[tuple[int, int], ...]:
        return self.entries[:m]

    def __len__(self):
        return len(self.entries)


def _order_key(entry):
    symbol, weight = entry
    return (-weight, symbol)


class ModelSession(Protocol):
    """Incremental evaluation state for one melody"""

    def feed(self, symbol: MelodyEvent) -> None: ...

    def distribution(self) -> Distribution: ...


@runtime_checkable
class ConditionalModel(Protocol):
    vocab_size: int

    @property
    def start_notes(self) -> tuple[int, ...]: ...

    def predict(self, context: Sequence[MelodyEvent]) -> Distribution: ...

    def new_session(self) -> ModelSession: ...
