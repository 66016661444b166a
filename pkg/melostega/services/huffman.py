"""Candidate pools and their deterministic Huffman codes.

Merge order is fully specified so sender and receiver build the same tree:
nodes are keyed by (weight, rank) where a leaf's rank is its position in
the pool and a merged node takes the smaller rank of its children. The
first node popped becomes the left child (bit 0), the second the right
child (bit 1).
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from melostega.services.distribution import Distribution
from melostega.utils.error_handler import PoolTooSmall, ValidationError


@dataclass(frozen=True)
class CandidatePool:
    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.entries) < 2:
            raise PoolTooSmall(f"A candidate pool needs at least 2 entries, got {len(self.entries)}")
        for previous, current in zip(self.entries, self.entries[1:]):
            if (-previous[1], previous[0]) > (-current[1], current[0]):
                raise ValidationError("Candidate pool entries are not sorted")

    @property
    def size(self) -> int:
        return len(self.entries)

    def symbols(self) -> list[int]:
        return [s for s, _ in self.entries]


@dataclass
class HuffmanNode:
    weight: int
    rank: int
    symbol: Optional[int] = None
    left: Optional['HuffmanNode'] = None
    right: Optional['HuffmanNode'] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class HuffmanCode:
    root: HuffmanNode
    # code word per pool rank, as '0'/'1' strings
    codes: tuple[str, ...]
    symbols: tuple[int, ...]

    def code_for(self, symbol: int) -> Optional[str]:
        try:
            return self.codes[self.symbols.index(symbol)]
        except ValueError:
            return None

    def walk(self, bits: str, pos: int = 0) -> tuple[int, int]:
        """Follow bits from pos to a leaf; returns (symbol, bits consumed).

        Missing bits past the end of the string read as 0.
        """
        node = self.root
        consumed = 0
        while not node.is_leaf:
            index = pos + consumed
            bit = bits[index] if index < len(bits) else '0'
            if index < len(bits):
                consumed += 1
            node = node.left if bit == '0' else node.right
        return node.symbol, consumed

    def lengths(self) -> list[int]:
        return [len(c) for c in self.codes]

    def kraft_sum(self) -> Fraction:
        return sum(Fraction(1, 2 ** len(c)) for c in self.codes)


def build_candidate_pool(dist: Distribution, m: int) -> CandidatePool:
    """The m heaviest entries, in the distribution's own order"""
    if m < 2:
        raise PoolTooSmall(f"Candidate pool size must be at least 2, got {m}")
    if len(dist) < m:
        raise PoolTooSmall(f"Distribution has {len(dist)} entries, fewer than the pool size {m}")
    return CandidatePool(dist.top(m))


def build_huffman(pool: CandidatePool) -> HuffmanCode:
    heap = [(weight, rank, HuffmanNode(weight, rank, symbol=symbol))
            for rank, (symbol, weight) in enumerate(pool.entries)]
    heapq.heapify(heap)

    while len(heap) > 1:
        w1, r1, left = heapq.heappop(heap)
        w2, r2, right = heapq.heappop(heap)
        merged = HuffmanNode(w1 + w2, min(r1, r2), left=left, right=right)
        heapq.heappush(heap, (merged.weight, merged.rank, merged))

    root = heap[0][2]
    codes = [''] * pool.size
    stack = [(root, '')]
    while stack:
        node, prefix = stack.pop()
        if node.is_leaf:
            codes[node.rank] = prefix
        else:
            stack.append((node.right, prefix + '1'))
            stack.append((node.left, prefix + '0'))

    return HuffmanCode(root=root, codes=tuple(codes), symbols=tuple(pool.symbols()))
