import math

import pytest

from conftest import scale_melody
from melostega.services.framing import frame_payload
from melostega.services.huffman import build_candidate_pool, build_huffman
from melostega.services.melody import MelodySequence, is_note_on
from melostega.services.ngram_model import train_ngram
from melostega.services.stego_codec import (
    StegoParams,
    capacity_profile,
    embed,
    extract,
    extract_melodies,
    recover_bundle,
)
from melostega.utils.error_handler import (
    DesyncDetected,
    NonByteAlignedLength,
    TruncatedFrame,
    ValidationError,
)

KEY_ERRORS = (DesyncDetected, TruncatedFrame, NonByteAlignedLength)


def data_symbols(bundle):
    return [s for melody, n in zip(bundle.melodies, bundle.data_notes) for s in melody.events[1:1 + n]]


def test_params_validation():
    with pytest.raises(ValidationError):
        StegoParams(cps=1, seed=0)
    with pytest.raises(ValidationError):
        StegoParams(cps=131, seed=0)
    with pytest.raises(ValidationError):
        StegoParams(cps=4, seed=0, max_events_per_melody=1)
    with pytest.raises(ValidationError):
        StegoParams(cps=4, seed=0, start_notes=(1,))


def test_constant_model_emits_code_words(constant_model):
    bundle = embed(constant_model, StegoParams(cps=4, seed=1), b'\x5a\xff')
    frame = frame_payload(b'\x5a\xff')
    codes = {62: '0', 63: '10', 64: '110', 65: '111'}
    emitted = ''.join(codes[s] for s in data_symbols(bundle))
    # the last code word may be completed with zero padding
    assert emitted.startswith(frame)
    assert set(emitted[len(frame):]) <= {'0'}
    assert bundle.total_bits == len(frame)


def test_empty_secret_embeds_only_the_header(constant_model):
    bundle = embed(constant_model, StegoParams(cps=4, seed=1), b'')
    assert bundle.total_bits == 32
    assert bundle.data_notes == [32]
    # 1 key + 32 data notes, greedy tail up to the next bar of 16
    assert len(bundle.melodies) == 1
    assert len(bundle.melodies[0]) == 48
    assert extract(constant_model, StegoParams(cps=4, seed=1), bundle) == b''


def test_embedding_is_deterministic(ngram_model):
    params = StegoParams(cps=8, seed=11)
    assert embed(ngram_model, params, b'hello').melodies == embed(ngram_model, params, b'hello').melodies


def test_key_notes_come_from_start_notes(ngram_model):
    params = StegoParams(cps=2, seed=5, max_events_per_melody=16)
    bundle = embed(ngram_model, params, bytes(range(40)))
    assert len(bundle) > 1
    assert {m.key for m in bundle.melodies} <= set(ngram_model.start_notes)
    override = StegoParams(cps=2, seed=5, max_events_per_melody=16, start_notes=(100,))
    assert {m.key for m in embed(ngram_model, override, b'x').melodies} == {100}


def test_bundle_structure(ngram_model):
    params = StegoParams(cps=4, seed=2, max_events_per_melody=24)
    secret = b'structure matters'
    bundle = embed(ngram_model, params, secret)
    assert sum(bundle.bit_counts) == 32 + 8 * len(secret)
    assert all(len(m) == 24 for m in bundle.melodies[:-1])
    assert all(is_note_on(m.events[0]) for m in bundle.melodies)
    last = bundle.melodies[-1]
    assert len(last) % 16 == 0 or len(last) == 24


def test_every_data_note_is_in_its_pool(ngram_model):
    params = StegoParams(cps=8, seed=3)
    bundle = embed(ngram_model, params, b'pool membership')
    for melody in bundle.melodies:
        session = ngram_model.new_session()
        session.feed(melody.events[0])
        for symbol in melody.events[1:]:
            pool = build_candidate_pool(session.distribution(), 8)
            assert symbol in pool.symbols()
            session.feed(symbol)


def test_cps_two_embeds_one_bit_per_note(ngram_model):
    bundle = embed(ngram_model, StegoParams(cps=2, seed=9), b'one bit per note')
    assert bundle.total_bits == bundle.total_data_notes


@pytest.mark.parametrize('cps', [2, 4, 8, 16, 32, 64])
def test_round_trip_ngram(ngram_model, rng, cps):
    for trial in range(6):
        secret = rng.bytes(int(rng.integers(0, 48)))
        params = StegoParams(cps=cps, seed=trial, max_events_per_melody=int(rng.choice([16, 40, 160])))
        bundle = embed(ngram_model, params, secret)
        assert extract(ngram_model, params, bundle) == secret


@pytest.mark.parametrize('cps', [2, 8, 64])
def test_round_trip_neural(neural_model, rng, cps):
    for trial in range(2):
        secret = rng.bytes(int(rng.integers(0, 10)))
        params = StegoParams(cps=cps, seed=trial, max_events_per_melody=48)
        assert extract(neural_model, params, embed(neural_model, params, secret)) == secret


def test_round_trip_rnn_cell(rng):
    from melostega.services.neural_model import NeuralModel, random_weights
    model = NeuralModel(random_weights(1, embed_size=6, hidden_size=6, attention_length=4,
                                       attention_hidden=4, cell='rnn'))
    params = StegoParams(cps=16, seed=4)
    assert extract(model, params, embed(model, params, b'rnn')) == b'rnn'


def test_recovered_accounting_matches_embedding(ngram_model):
    params = StegoParams(cps=8, seed=6, max_events_per_melody=32)
    bundle = embed(ngram_model, params, b'accounting')
    payload, recovered = recover_bundle(ngram_model, params, bundle.melodies)
    assert payload == b'accounting'
    assert recovered.bit_counts == bundle.bit_counts
    assert recovered.data_notes == bundle.data_notes


def test_key_note_only_is_truncated(ngram_model):
    with pytest.raises(TruncatedFrame):
        extract_melodies(ngram_model, StegoParams(cps=4, seed=0), [MelodySequence((62,))])


def test_no_melodies(ngram_model):
    with pytest.raises(TruncatedFrame):
        extract_melodies(ngram_model, StegoParams(cps=4, seed=0), [])


def test_wrong_cps_never_returns_silently(ngram_model, rng):
    for trial in range(30):
        secret = rng.bytes(int(rng.integers(1, 24)))
        bundle = embed(ngram_model, StegoParams(cps=8, seed=trial), secret)
        for wrong in (4, 16):
            with pytest.raises(KEY_ERRORS):
                extract(ngram_model, StegoParams(cps=wrong, seed=trial), bundle)


def test_different_model_never_returns_silently(ngram_model, rng):
    other = train_ngram([scale_melody(61, step=1), scale_melody(70, step=4)], order=3, alpha='1/10')
    for trial in range(20):
        secret = rng.bytes(int(rng.integers(1, 24)))
        params = StegoParams(cps=8, seed=trial)
        bundle = embed(ngram_model, params, secret)
        with pytest.raises(KEY_ERRORS):
            extract(other, params, bundle)


def test_reordered_or_missing_melodies_detected(ngram_model):
    params = StegoParams(cps=4, seed=8, max_events_per_melody=20)
    bundle = embed(ngram_model, params, b'order is part of the key')
    assert len(bundle) >= 3
    with pytest.raises(KEY_ERRORS):
        extract_melodies(ngram_model, params, list(reversed(bundle.melodies)))
    with pytest.raises(KEY_ERRORS):
        extract_melodies(ngram_model, params, bundle.melodies[:-1])
    with pytest.raises(KEY_ERRORS):
        extract_melodies(ngram_model, params, bundle.melodies + bundle.melodies[:1])


def test_tampered_tail_detected(constant_model):
    params = StegoParams(cps=4, seed=1)
    bundle = embed(constant_model, params, b'')
    last = bundle.melodies[-1]
    assert len(last) == 48 and bundle.data_notes == [32]
    runner_up = build_huffman(build_candidate_pool(constant_model.predict([62]), 4)).symbols[1]
    tampered = MelodySequence(last.events[:-1] + (runner_up,))
    with pytest.raises(DesyncDetected):
        extract_melodies(constant_model, params, [tampered])


@pytest.mark.parametrize('cps', [2, 4, 8, 16])
def test_capacity_bound(ngram_model, cps):
    profile = capacity_profile(ngram_model, StegoParams(cps=cps, seed=21), 3000)
    assert profile.data_notes == 3000
    assert profile.mean_expected_bits <= math.log2(cps) + 1e-9
    assert profile.mean_bits_per_note <= math.log2(cps) + 0.05
    if cps == 2:
        assert profile.mean_bits_per_note == 1.0


@pytest.mark.slow
@pytest.mark.parametrize('cps', [2, 4, 8, 16, 32, 64])
def test_capacity_bound_full_scale(ngram_model, cps):
    profile = capacity_profile(ngram_model, StegoParams(cps=cps, seed=22), 10000)
    assert profile.mean_bits_per_note <= math.log2(cps) + 0.05


@pytest.mark.slow
def test_round_trip_full_scale(ngram_model, rng):
    for trial in range(1000):
        cps = [2, 4, 8, 16, 32, 64][trial % 6]
        secret = rng.bytes(int(rng.integers(0, 1251)))
        params = StegoParams(cps=cps, seed=trial)
        assert extract(ngram_model, params, embed(ngram_model, params, secret)) == secret


@pytest.mark.slow
@pytest.mark.parametrize('cps', [2, 8, 64])
def test_neural_round_trip_full_scale(neural_model, rng, cps):
    sizes = [1250, 0, 1] + [int(n) for n in rng.integers(0, 1251, size=7)]
    for trial, size in enumerate(sizes):
        secret = rng.bytes(size)
        params = StegoParams(cps=cps, seed=trial)
        assert extract(neural_model, params, embed(neural_model, params, secret)) == secret


@pytest.mark.slow
def test_different_model_full_scale(ngram_model, rng):
    other = train_ngram([scale_melody(61, step=1), scale_melody(70, step=4)], order=3, alpha='1/10')
    silent = 0
    for trial in range(1000):
        secret = rng.bytes(int(rng.integers(1, 64)))
        params = StegoParams(cps=[4, 8, 16][trial % 3], seed=trial)
        bundle = embed(ngram_model, params, secret)
        try:
            extract(other, params, bundle)
            silent += 1
        except KEY_ERRORS:
            pass
    assert silent == 0


@pytest.mark.slow
def test_mismatched_keys_full_scale(ngram_model, rng):
    silent = 0
    for trial in range(1000):
        secret = rng.bytes(int(rng.integers(1, 64)))
        bundle = embed(ngram_model, StegoParams(cps=8, seed=trial), secret)
        try:
            extract(ngram_model, StegoParams(cps=[4, 16][trial % 2], seed=trial), bundle)
            silent += 1
        except KEY_ERRORS:
            pass
    assert silent == 0
