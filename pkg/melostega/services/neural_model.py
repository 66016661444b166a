"""Inference-only recurrent melody model with windowed attention.

Two recurrent layers (LSTM or plain tanh RNN), an attention read over the
last m top-layer outputs, and a softmax head over the 130-symbol
vocabulary. The attention vector also feeds the next step's input through
a linear projection. Probabilities are fixed-point quantized so that the
codec sees integer weights.
"""
from __future__ import annotations

import logging
import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from melostega.services.distribution import Distribution
from melostega.services.melody import VOCAB_SIZE, MelodyEvent, is_note_on, note_on
from melostega.utils.binary_reader import BinaryReader
from melostega.utils.error_handler import (
    BadMagic,
    DimensionMismatch,
    EmptyHistory,
    TruncatedFile,
    ValidationError,
    VersionMismatch,
)

logger = logging.getLogger(__name__)

WEIGHTS_MAGIC = b'AAGW'
WEIGHTS_VERSION = 1
QUANTIZATION_SCALE = 2 ** 32
CELL_TYPES = ('lstm', 'rnn')
LSTM_GATES = ('i', 'f', 'c', 'o')
DEFAULT_START_NOTES = tuple(note_on(p) for p in range(60, 73))


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(x):
    shifted = x - np.max(x)
    e = np.exp(shifted)
    return e / e.sum()


@dataclass
class LstmWeights:
    vocab_size: int
    embed_size: int
    hidden_size: int
    num_layers: int
    attention_length: int
    attention_hidden: int
    cell: str = 'lstm'
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def gates(self):
        return LSTM_GATES if self.cell == 'lstm' else ('h',)

    def layer_input_size(self, layer: int) -> int:
        return self.embed_size if layer == 0 else self.hidden_size

    def shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        """Parameter names and shapes in canonical (file) order"""
        V, D, H, A = self.vocab_size, self.embed_size, self.hidden_size, self.attention_hidden
        shapes = [
            ('embedding', (D, V)),
            ('input.W', (D, D + H)),
            ('input.b', (D,)),
        ]
        for layer in range(self.num_layers):
            width = H + self.layer_input_size(layer)
            for gate in self.gates():
                shapes.append((f'layer{layer}.W_{gate}', (H, width)))
                shapes.append((f'layer{layer}.b_{gate}', (H,)))
        shapes += [
            ('attention.W_h', (A, H)),
            ('attention.W_c', (A, H)),
            ('attention.b', (A,)),
            ('attention.v', (A,)),
            ('output.L_0', (V, D)),
            ('output.L_h', (D, H)),
            ('output.L_z', (D, H)),
        ]
        return shapes

    def check(self):
        if self.cell not in CELL_TYPES:
            raise ValidationError(f"Unknown cell type {self.cell!r}")
        for name, value in (('vocab_size', self.vocab_size), ('embed_size', self.embed_size),
                            ('hidden_size', self.hidden_size), ('num_layers', self.num_layers),
                            ('attention_length', self.attention_length),
                            ('attention_hidden', self.attention_hidden)):
            if value < 1:
                raise DimensionMismatch(f"{name} must be positive, got {value}")

        expected = dict(self.shapes())
        missing = set(expected) - set(self.params)
        extra = set(self.params) - set(expected)
        if missing or extra:
            raise DimensionMismatch(f"Parameter set mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, shape in expected.items():
            actual = self.params[name].shape
            if actual != shape:
                raise DimensionMismatch(f"{name} has shape {actual}, expected {shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise ValidationError(f"{name} contains non-finite values")
        return True

    def __getitem__(self, name) -> np.ndarray:
        return self.params[name]

    @classmethod
    def zeros(cls, vocab_size=VOCAB_SIZE, embed_size=64, hidden_size=64, num_layers=2,
              attention_length=40, attention_hidden=40, cell='lstm') -> LstmWeights:
        weights = cls(vocab_size, embed_size, hidden_size, num_layers, attention_length, attention_hidden, cell)
        weights.params = {name: np.zeros(shape) for name, shape in weights.shapes()}
        return weights


def random_weights(seed: int, vocab_size=VOCAB_SIZE, embed_size=64, hidden_size=64, num_layers=2,
                   attention_length=40, attention_hidden=40, cell='lstm', scale=0.1) -> LstmWeights:
    """Uniform(-scale, scale) initialization drawn in canonical parameter order"""
    rng = np.random.default_rng(seed)
    weights = LstmWeights(vocab_size, embed_size, hidden_size, num_layers, attention_length, attention_hidden, cell)
    weights.params = {name: rng.uniform(-scale, scale, size=shape) for name, shape in weights.shapes()}
    weights.check()
    return weights


@dataclass
class RnnState:
    h: list[np.ndarray]
    c: list[np.ndarray]
    history: deque

    @classmethod
    def initial(cls, weights: LstmWeights) -> RnnState:
        H = weights.hidden_size
        return cls(
            h=[np.zeros(H) for _ in range(weights.num_layers)],
            c=[np.zeros(H) for _ in range(weights.num_layers)],
            history=deque(maxlen=weights.attention_length),
        )


def lstm_step(weights: LstmWeights, input_vector: np.ndarray, state: RnnState) -> RnnState:
    """Advance every layer one step and push the top output onto the history."""
    x = np.asarray(input_vector, dtype=float)
    if x.shape != (weights.embed_size,):
        raise DimensionMismatch(f"Input vector has shape {x.shape}, expected ({weights.embed_size},)")
    if len(state.h) != weights.num_layers or any(h.shape != (weights.hidden_size,) for h in state.h):
        raise DimensionMismatch("State does not match the weight dimensions")

    new_h, new_c = [], []
    layer_input = x
    for layer in range(weights.num_layers):
        joined = np.concatenate([state.h[layer], layer_input])
        p = f'layer{layer}.'
        if weights.cell == 'lstm':
            gate_i = sigmoid(weights[p + 'W_i'] @ joined + weights[p + 'b_i'])
            gate_f = sigmoid(weights[p + 'W_f'] @ joined + weights[p + 'b_f'])
            candidate = np.tanh(weights[p + 'W_c'] @ joined + weights[p + 'b_c'])
            gate_o = sigmoid(weights[p + 'W_o'] @ joined + weights[p + 'b_o'])
            cell = gate_f * state.c[layer] + gate_i * candidate
            hidden = gate_o * np.tanh(cell)
        else:
            cell = state.c[layer]
            hidden = np.tanh(weights[p + 'W_h'] @ joined + weights[p + 'b_h'])
        new_h.append(hidden)
        new_c.append(cell)
        layer_input = hidden

    history = deque(state.history, maxlen=weights.attention_length)
    history.append(new_h[-1])
    return RnnState(h=new_h, c=new_c, history=history)


def attention_weights(state: RnnState, weights: LstmWeights) -> np.ndarray:
    if not state.history:
        raise EmptyHistory("Attention needs at least one previous output")
    outputs = np.stack(list(state.history))
    query = weights['attention.W_c'] @ state.c[-1] + weights['attention.b']
    scores = np.tanh(outputs @ weights['attention.W_h'].T + query) @ weights['attention.v']
    return softmax(scores)


def attention_mix(state: RnnState, weights: LstmWeights) -> np.ndarray:
    """Attention-weighted sum z_t of the last outputs in the history"""
    alpha = attention_weights(state, weights)
    return alpha @ np.stack(list(state.history))


def output_probabilities(weights: LstmWeights, state: RnnState, prev_symbol: MelodyEvent) -> np.ndarray:
    if not 0 <= prev_symbol < weights.vocab_size:
        raise DimensionMismatch(f"Symbol {prev_symbol} outside the vocabulary")
    z = attention_mix(state, weights)
    mixed = (weights['embedding'][:, prev_symbol]
             + weights['output.L_h'] @ state.h[-1]
             + weights['output.L_z'] @ z)
    return softmax(weights['output.L_0'] @ mixed)


def next_distribution(weights: LstmWeights, state: RnnState, prev_symbol: MelodyEvent) -> Distribution:
    probabilities = output_probabilities(weights, state, prev_symbol)
    quantized = np.maximum(1, np.rint(probabilities * QUANTIZATION_SCALE)).astype(np.int64)
    return Distribution.from_weights((symbol, int(w)) for symbol, w in enumerate(quantized))


class NeuralSession:
    def __init__(self, weights: LstmWeights):
        self.weights = weights
        self.state = RnnState.initial(weights)
        self.last_symbol = None

    def feed(self, symbol: MelodyEvent) -> None:
        w = self.weights
        if not 0 <= symbol < w.vocab_size:
            raise DimensionMismatch(f"Symbol {symbol} outside the vocabulary")
        z = attention_mix(self.state, w) if self.state.history else np.zeros(w.hidden_size)
        joined = np.concatenate([w['embedding'][:, symbol], z])
        x = w['input.W'] @ joined + w['input.b']
        self.state = lstm_step(w, x, self.state)
        self.last_symbol = symbol

    def distribution(self) -> Distribution:
        if self.last_symbol is None:
            raise ValidationError("Feed the key note before asking for a distribution")
        return next_distribution(self.weights, self.state, self.last_symbol)


class NeuralModel:
    """ConditionalModel adapter over a weight set"""

    def __init__(self, weights: LstmWeights, start_notes: Sequence[int] = DEFAULT_START_NOTES):
        weights.check()
        if not start_notes or not all(is_note_on(s) for s in start_notes):
            raise ValidationError("Start notes must be a non-empty list of NOTE_ON symbols")
        self.weights = weights
        self.vocab_size = weights.vocab_size
        self._start_notes = tuple(start_notes)

    @property
    def start_notes(self) -> tuple[int, ...]:
        return self._start_notes

    def new_session(self) -> NeuralSession:
        return NeuralSession(self.weights)

    def predict(self, context: Sequence[MelodyEvent]) -> Distribution:
        if not context:
            raise ValidationError("predict needs at least the key note as context")
        session = self.new_session()
        for symbol in context:
            session.feed(symbol)
        return session.distribution()

    def to_bytes(self) -> bytes:
        return dump_weights(self.weights)


def dump_weights(weights: LstmWeights) -> bytes:
    weights.check()
    out = bytearray(WEIGHTS_MAGIC)
    out += struct.pack('<HH', WEIGHTS_VERSION, CELL_TYPES.index(weights.cell))
    out += struct.pack('<6I', weights.vocab_size, weights.embed_size, weights.hidden_size,
                       weights.num_layers, weights.attention_length, weights.attention_hidden)
    for name, _ in weights.shapes():
        out += np.ascontiguousarray(weights[name], dtype='<f8').tobytes(order='C')
    return bytes(out)


def load_weights_bytes(data: bytes) -> LstmWeights:
    reader = BinaryReader(data, 'weight file')
    magic = reader.read_bytes(4)
    if magic != WEIGHTS_MAGIC:
        raise BadMagic(f"Not a neural weight file (magic {magic!r})")
    version, cell_index = reader.read('HH')
    if version != WEIGHTS_VERSION:
        raise VersionMismatch(f"Weight file version {version} is not supported (expected {WEIGHTS_VERSION})")
    if cell_index >= len(CELL_TYPES):
        raise DimensionMismatch(f"Unknown cell type index {cell_index}")

    vocab, embed, hidden, layers, att_len, att_hidden = reader.read('6I')
    weights = LstmWeights(vocab, embed, hidden, layers, att_len, att_hidden, CELL_TYPES[cell_index])
    for name, shape in weights.shapes():
        count = int(np.prod(shape))
        raw = reader.read_bytes(count * 8)
        weights.params[name] = np.frombuffer(raw, dtype='<f8').astype(float).reshape(shape)

    if reader.remaining():
        raise TruncatedFile(f"Weight file has {reader.remaining()} unexpected trailing bytes")
    weights.check()
    return weights
