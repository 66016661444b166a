import json

import pandas as pd
import pytest

from melostega.services.abx import (
    LABEL_CLEAN,
    LABEL_STEGO,
    classification_metrics,
    default_abx_params,
    make_abx_set,
    score_abx_responses,
    stego_melody,
)
from melostega.services.bundle_store import read_bundle_files
from melostega.services.stego_codec import StegoParams
from melostega.utils.error_handler import EmptyInput, ValidationError


def test_clean_only_set(tmp_path, ngram_model):
    abx = make_abx_set(ngram_model, [], tmp_path / 'abx', n_stego=0, n_clean=3, n_reference=0,
                       seed=4, max_events=24)
    assert len(abx.files) == 3
    assert (abx.answer_key['label'] == LABEL_CLEAN).all()
    assert abx.answer_key['cps'].isna().all()
    assert sorted(p.name for p in (tmp_path / 'abx' / 'samples').iterdir()) == sorted(abx.files)


def test_layout(tmp_path, ngram_model):
    out = tmp_path / 'abx'
    params = default_abx_params(24, cps_values=(2, 8))
    abx = make_abx_set(ngram_model, params, out, n_stego=4, n_clean=2, n_reference=1, seed=9, max_events=24)

    key = pd.read_csv(out / 'answer_key.csv')
    assert list(key.columns) == ['filename', 'label', 'cps']
    assert (key['label'] == LABEL_STEGO).sum() == 4
    assert sorted(key.loc[key['label'] == LABEL_STEGO, 'cps'].astype(int)) == [2, 2, 8, 8]
    assert sorted(abx.reference_files) == ['clean_1.mid', 'stego_cps8_1.mid']

    manifest = json.loads((out / 'manifest.json').read_text())
    assert manifest['samples'] == 6
    assert 'label' not in json.dumps(manifest)

    stored = read_bundle_files(sorted((out / 'samples').iterdir()))
    assert all(len(m) == 24 for m in stored.melodies)


def test_same_seed_same_set(tmp_path, ngram_model):
    params = default_abx_params(20, cps_values=(4,))
    first = make_abx_set(ngram_model, params, tmp_path / 'a', n_stego=3, n_clean=2, n_reference=0,
                         seed=5, max_events=20)
    second = make_abx_set(ngram_model, params, tmp_path / 'b', n_stego=3, n_clean=2, n_reference=0,
                          seed=5, max_events=20)
    pd.testing.assert_frame_equal(first.answer_key, second.answer_key)
    for name in first.files:
        assert (tmp_path / 'a' / 'samples' / name).read_bytes() == (tmp_path / 'b' / 'samples' / name).read_bytes()


def test_set_validation(tmp_path, ngram_model):
    with pytest.raises(EmptyInput):
        make_abx_set(ngram_model, [], tmp_path / 'x', n_stego=0, n_clean=0)
    with pytest.raises(ValidationError):
        make_abx_set(ngram_model, [], tmp_path / 'y', n_stego=2, n_clean=0)


def test_stego_melody_fills_the_melody(ngram_model, rng):
    melody = stego_melody(ngram_model, StegoParams(cps=64, seed=1, max_events_per_melody=40), rng)
    assert len(melody) == 40


def test_metrics_treat_clean_as_positive():
    truth = pd.Series([LABEL_CLEAN, LABEL_CLEAN, LABEL_STEGO, LABEL_STEGO])
    judged = pd.Series([LABEL_CLEAN, LABEL_STEGO, LABEL_CLEAN, LABEL_STEGO])
    metrics = classification_metrics(truth, judged)
    assert metrics['accuracy'] == 0.5
    assert metrics['recall'] == 0.5
    assert metrics['precision'] == 0.5
    assert metrics['f1'] == 0.5


def test_score_responses(tmp_path):
    key = tmp_path / 'answer_key.csv'
    pd.DataFrame({
        'filename': ['s1.mid', 's2.mid', 's3.mid', 's4.mid'],
        'label': [LABEL_STEGO, LABEL_STEGO, LABEL_CLEAN, LABEL_STEGO],
        'cps': [2, 32, None, 32],
    }).to_csv(key, index=False)
    responses = tmp_path / 'responses.csv'
    pd.DataFrame({
        'listener': ['ann', 'ann', 'ann', 'ann', 'bo', 'bo', 'bo', 'bo'],
        'filename': ['s1.mid', 's2.mid', 's3.mid', 's4.mid'] * 2,
        'response': ['A', 'B', 'B', 'stego', 'clean', 'clean', 'clean', 'clean'],
    }).to_csv(responses, index=False)

    score = score_abx_responses(key, responses)
    assert score.per_listener.loc['ann', 'accuracy'] == 0.75
    assert score.per_listener.loc['bo', 'accuracy'] == 0.25
    assert score.overall['accuracy'] == 0.5
    assert score.overall['recall'] == 1.0
    assert score.overall['accuracy_std'] == pytest.approx(0.25)
    assert score.failure_by_cps.to_dict() == {2: 0.5, 32: 0.75}
    assert score.to_dict()['failure_by_cps'] == {2: 0.5, 32: 0.75}


def test_score_without_listener_column(tmp_path):
    key = tmp_path / 'key.csv'
    pd.DataFrame({'filename': ['a.mid'], 'label': [LABEL_CLEAN], 'cps': [None]}).to_csv(key, index=False)
    responses = tmp_path / 'r.csv'
    pd.DataFrame({'filename': ['a.mid'], 'response': ['clean']}).to_csv(responses, index=False)
    score = score_abx_responses(key, responses)
    assert list(score.per_listener.index) == ['all']
    assert score.overall['accuracy'] == 1.0


def test_bad_responses(tmp_path):
    key = tmp_path / 'key.csv'
    pd.DataFrame({'filename': ['a.mid'], 'label': [LABEL_CLEAN], 'cps': [None]}).to_csv(key, index=False)
    bad_label = tmp_path / 'bad.csv'
    pd.DataFrame({'filename': ['a.mid'], 'response': ['maybe']}).to_csv(bad_label, index=False)
    with pytest.raises(ValidationError):
        score_abx_responses(key, bad_label)
    unknown = tmp_path / 'unknown.csv'
    pd.DataFrame({'filename': ['zzz.mid'], 'response': ['clean']}).to_csv(unknown, index=False)
    with pytest.raises(ValidationError):
        score_abx_responses(key, unknown)
    missing = tmp_path / 'missing.csv'
    pd.DataFrame({'filename': ['a.mid']}).to_csv(missing, index=False)
    with pytest.raises(ValidationError):
        score_abx_responses(key, missing)
