"""Blinded A/B/X listening sets and scoring of listener responses.

A set directory holds anonymized `samples/`, a labelled `reference/`
folder handed to listeners beforehand, a label-free `manifest.json` and
the private `answer_key.csv` (filename, label, cps).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from melostega.services.bundle_store import BUNDLE_FORMAT_VERSION, commit_staged_directory, write_json
from melostega.services.distribution import ConditionalModel
from melostega.services.generation import SAMPLED, GenerationParams, derive_seed, generate
from melostega.services.melody import MelodySequence
from melostega.services.midi_io import render_midi
from melostega.services.stego_codec import StegoParams, embed
from melostega.utils.error_handler import EmptyInput, ValidationError
from melostega.utils.security import security_manager

logger = logging.getLogger(__name__)

DEFAULT_ABX_CPS = (2, 4, 8, 16, 32)
DEFAULT_STEGO_SAMPLES = 50
DEFAULT_CLEAN_SAMPLES = 15
DEFAULT_REFERENCE_SAMPLES = 3
REFERENCE_CPS = 8

LABEL_CLEAN = 'clean'
LABEL_STEGO = 'stego'
RESPONSE_LABELS = {
    'clean': LABEL_CLEAN, 'b': LABEL_CLEAN, 'cover': LABEL_CLEAN,
    'stego': LABEL_STEGO, 'a': LABEL_STEGO,
}


@dataclass
class AbxSample:
    melody: MelodySequence
    label: str
    cps: Optional[int] = None


@dataclass
class AbxSet:
    directory: Path
    answer_key: pd.DataFrame
    reference_files: list[str]

    @property
    def files(self) -> list[str]:
        return list(self.answer_key['filename'])


def stego_melody(model: ConditionalModel, params: StegoParams, rng: np.random.Generator) -> MelodySequence:
    """First melody of a bundle carrying a random payload, always full length"""
    target = params.max_events_per_melody
    payload_bytes = math.ceil((target - 1) * math.log2(params.cps) * 1.25 / 8) + 1
    while True:
        bundle = embed(model, params, rng.bytes(payload_bytes))
        if len(bundle.melodies[0]) == target:
            return bundle.melodies[0]
        payload_bytes *= 2


def clean_melody(model: ConditionalModel, seed: int, max_events: int,
                 start_notes: Optional[Sequence[int]] = None, steps_per_quarter: int = 4) -> MelodySequence:
    params = GenerationParams(seed=seed, start_notes=tuple(start_notes or model.start_notes),
                              max_events=max_events, steps_per_quarter=steps_per_quarter)
    return generate(model, params, SAMPLED)


def _stego_params(base: StegoParams, cps: int, seed: int) -> StegoParams:
    return replace(base, cps=cps, seed=seed)


def make_abx_set(model: ConditionalModel, params_list: Sequence[StegoParams], out_dir,
                 n_stego: int = DEFAULT_STEGO_SAMPLES, n_clean: int = DEFAULT_CLEAN_SAMPLES, seed: int = 0,
                 n_reference: int = DEFAULT_REFERENCE_SAMPLES, reference_cps: int = REFERENCE_CPS,
                 max_events: Optional[int] = None, tempo_bpm: float = 120.0, program: int = 0) -> AbxSet:
    if n_stego < 0 or n_clean < 0 or n_reference < 0:
        raise ValidationError("Sample counts must not be negative")
    if n_stego and not params_list:
        raise ValidationError("Stego samples need at least one StegoParams")
    if n_stego + n_clean == 0:
        raise EmptyInput("An A/B/X set needs at least one sample")

    base = params_list[0] if params_list else StegoParams(cps=reference_cps, seed=seed)
    if max_events is None:
        max_events = base.max_events_per_melody
    base = replace(base, max_events_per_melody=max_events)
    rng = np.random.default_rng(seed)

    samples = []
    for index in range(n_stego):
        params = params_list[index % len(params_list)]
        stego_params = _stego_params(replace(params, max_events_per_melody=max_events),
                                     params.cps, derive_seed(seed, index))
        samples.append(AbxSample(stego_melody(model, stego_params, rng), LABEL_STEGO, params.cps))
    for index in range(n_clean):
        melody = clean_melody(model, derive_seed(seed, n_stego + index), max_events,
                              base.start_notes, base.steps_per_quarter)
        samples.append(AbxSample(melody, LABEL_CLEAN))

    references = []
    offset = n_stego + n_clean
    for index in range(n_reference):
        melody = clean_melody(model, derive_seed(seed, offset + index), max_events,
                              base.start_notes, base.steps_per_quarter)
        references.append((f'clean_{index + 1}.mid', melody))
    for index in range(n_reference):
        ref_params = _stego_params(base, reference_cps, derive_seed(seed, offset + n_reference + index))
        references.append((f'stego_cps{reference_cps}_{index + 1}.mid', stego_melody(model, ref_params, rng)))

    order = rng.permutation(len(samples))
    width = max(2, len(str(len(samples))))
    rows = []
    rendered = {}
    for position, sample_index in enumerate(order):
        sample = samples[int(sample_index)]
        filename = security_manager.sanitize_filename(f'sample_{position + 1:0{width}d}.mid')
        rendered[filename] = render_midi(sample.melody, tempo_bpm, program)
        rows.append({'filename': filename, 'label': sample.label, 'cps': sample.cps})
    answer_key = pd.DataFrame(rows, columns=['filename', 'label', 'cps'])
    answer_key['cps'] = answer_key['cps'].astype('Int64')

    manifest = {
        'format_version': BUNDLE_FORMAT_VERSION,
        'samples': len(rows),
        'files': [row['filename'] for row in rows],
        'reference': [name for name, _ in references],
        'max_events_per_melody': max_events,
        'tempo_bpm': tempo_bpm,
        'program': program,
    }

    def write_contents(stage: Path):
        (stage / 'samples').mkdir()
        for filename, data in rendered.items():
            (stage / 'samples' / filename).write_bytes(data)
        (stage / 'reference').mkdir()
        for filename, melody in references:
            (stage / 'reference' / filename).write_bytes(render_midi(melody, tempo_bpm, program))
        answer_key.to_csv(stage / 'answer_key.csv', index=False)
        write_json(stage / 'manifest.json', manifest)

    commit_staged_directory(write_contents, out_dir)
    logger.info(f"Wrote A/B/X set to {out_dir}: {n_stego} stego, {n_clean} clean, "
                f"{len(references)} reference samples")
    return AbxSet(Path(out_dir), answer_key, [name for name, _ in references])


def default_abx_params(max_events: int, start_notes: Optional[Sequence[int]] = None,
                       cps_values: Sequence[int] = DEFAULT_ABX_CPS) -> list[StegoParams]:
    return [StegoParams(cps=cps, seed=0, max_events_per_melody=max_events,
                        start_notes=tuple(start_notes) if start_notes else None)
            for cps in cps_values]


@dataclass
class AbxScore:
    overall: dict
    per_listener: pd.DataFrame
    failure_by_cps: pd.Series

    def to_dict(self):
        return {
            'overall': self.overall,
            'per_listener': self.per_listener.reset_index().to_dict('records'),
            'failure_by_cps': {int(k): float(v) for k, v in self.failure_by_cps.items()},
        }


def _normalize_response(value) -> str:
    label = RESPONSE_LABELS.get(str(value).strip().lower())
    if label is None:
        raise ValidationError(f"Unrecognized response {value!r}; use clean/B or stego/A")
    return label


def classification_metrics(truth: pd.Series, judged: pd.Series) -> dict:
    """Clean samples are the positive class, stego samples the negative one"""
    positive = truth == LABEL_CLEAN
    predicted = judged == LABEL_CLEAN
    tp = int((positive & predicted).sum())
    fp = int((~positive & predicted).sum())
    fn = int((positive & ~predicted).sum())
    total = len(truth)
    accuracy = float((truth == judged).sum()) / total if total else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {'accuracy': accuracy, 'recall': recall, 'precision': precision, 'f1': f1, 'judgements': total}


def score_abx_responses(answer_key_csv, responses_csv) -> AbxScore:
    """Score listener judgements (filename, response[, listener]) against the key"""
    key = pd.read_csv(answer_key_csv)
    responses = pd.read_csv(responses_csv)
    for column in ('filename', 'response'):
        if column not in responses.columns:
            raise ValidationError(f"Responses file is missing the '{column}' column")
    if responses.empty:
        raise EmptyInput("No responses to score")
    if 'listener' not in responses.columns:
        responses['listener'] = 'all'

    responses['judged'] = responses['response'].map(_normalize_response)
    merged = responses.merge(key, on='filename', how='left')
    unknown = merged[merged['label'].isna()]['filename'].unique()
    if len(unknown):
        raise ValidationError(f"Responses name files missing from the answer key: {', '.join(map(str, unknown))}")

    per_listener = pd.DataFrame(
        [{'listener': listener, **classification_metrics(group['label'], group['judged'])}
         for listener, group in merged.groupby('listener', sort=True)]
    ).set_index('listener')

    overall = classification_metrics(merged['label'], merged['judged'])
    for metric in ('accuracy', 'recall', 'f1'):
        overall[f'{metric}_std'] = float(per_listener[metric].std(ddof=0))

    stego = merged[merged['label'] == LABEL_STEGO]
    failure_by_cps = (stego['judged'] == LABEL_CLEAN).groupby(stego['cps'].astype(int)).mean().sort_index()

    logger.info(f"Scored {len(merged)} judgements from {len(per_listener)} listener(s): "
                f"accuracy {overall['accuracy']:.3f}")
    return AbxScore(overall, per_listener, failure_by_cps)
