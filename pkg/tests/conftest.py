import numpy as np
import pytest

from melostega.services.distribution import Distribution
from melostega.services.melody import NO_EVENT, NOTE_OFF, VOCAB_SIZE, MelodySequence, note_on
from melostega.services.midi_io import render_midi
from melostega.services.neural_model import NeuralModel, random_weights
from melostega.services.ngram_model import train_ngram

# C4 held for one quarter at 120 BPM, 480 ticks per beat, format 0
ONE_NOTE_SMF = bytes.fromhex(
    '4d546864' '00000006' '0000' '0001' '01e0'
    '4d54726b' '00000014'
    '00ff510307a120'
    '00903c40'
    '8360803c40'
    '00ff2f00'
)


def scale_melody(root, length=32, step=2):
    events = []
    pitch = root
    for index in range(length):
        if index % 4 == 0:
            events.append(note_on(pitch))
            pitch = root + (pitch - root + step) % 12
        elif index % 8 == 7:
            events.append(NOTE_OFF)
        else:
            events.append(NO_EVENT)
    return MelodySequence(tuple(events))


@pytest.fixture
def toy_melodies():
    return [scale_melody(60), scale_melody(62, step=3), scale_melody(67, length=48, step=5)]


@pytest.fixture
def ngram_model(toy_melodies):
    return train_ngram(toy_melodies, order=3, alpha='1/10')


@pytest.fixture
def neural_model():
    weights = random_weights(7, embed_size=8, hidden_size=8, attention_length=5, attention_hidden=6)
    return NeuralModel(weights)


@pytest.fixture
def corpus_dir(tmp_path, toy_melodies):
    root = tmp_path / 'corpus'
    (root / 'nested').mkdir(parents=True)
    for index, melody in enumerate(toy_melodies):
        folder = root if index % 2 == 0 else root / 'nested'
        (folder / f'tune_{index}.mid').write_bytes(render_midi(melody))
    return root


class ConstantSession:
    def __init__(self, model):
        self.model = model
        self.fed = []

    def feed(self, symbol):
        self.fed.append(symbol)

    def distribution(self):
        return self.model.predict(self.fed)


class ScriptedModel:
    """Returns the scripted distribution for each prefix length, the last one repeating"""
    vocab_size = VOCAB_SIZE

    def __init__(self, distributions, start_notes=(note_on(60),)):
        self.distributions = list(distributions)
        self.start_notes = tuple(start_notes)

    def predict(self, context):
        index = min(len(context) - 1, len(self.distributions) - 1)
        return self.distributions[index]

    def new_session(self):
        return ConstantSession(self)


def padded_distribution(weights):
    """Given weights for some symbols, every other symbol gets weight 1"""
    full = {symbol: 1 for symbol in range(VOCAB_SIZE)}
    full.update(weights)
    return Distribution.from_weights(full.items())


@pytest.fixture
def constant_model():
    # pool weights 8, 4, 2, 2 on NOTE_ON 60..63 give codes 0, 10, 110, 111
    return ScriptedModel([padded_distribution({62: 8, 63: 4, 64: 2, 65: 2})])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
