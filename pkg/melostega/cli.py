"""Command-line entry point: python -m melostega <command> ..."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import pandas as pd

from melostega.config import get_config
from melostega.services.abx import (
    DEFAULT_ABX_CPS,
    DEFAULT_CLEAN_SAMPLES,
    DEFAULT_REFERENCE_SAMPLES,
    DEFAULT_STEGO_SAMPLES,
    REFERENCE_CPS,
    default_abx_params,
    make_abx_set,
    score_abx_responses,
)
from melostega.services.bundle_store import (
    check_model_digest,
    commit_staged_directory,
    melody_file_name,
    read_bundle,
    read_bundle_files,
    write_bundle,
)
from melostega.services.corpus import CorpusLoader
from melostega.services.evaluation import rate_table, score_table
from melostega.services.generation import MODES, generate_many
from melostega.services.melody import QuantizationConfig
from melostega.services.midi_io import render_midi, write_bytes_atomic
from melostega.services.model_store import load_model, model_digest, save_model
from melostega.services.neural_model import CELL_TYPES, NeuralModel, random_weights
from melostega.services.ngram_model import train_ngram
from melostega.services.stego_codec import StegoParams, embed, recover_bundle
from melostega.utils.error_handler import (
    EXIT_OK,
    EXIT_USAGE,
    ErrorHandler,
    PayloadTooLarge,
    ValidationError,
    handle_exceptions,
)
from melostega.utils.file_validator import FileValidator
from melostega.utils.security import log_security_event

logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def cps_type(value):
    try:
        cps = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cps must be an integer, got {value!r}")
    if not 2 <= cps <= 130:
        raise argparse.ArgumentTypeError(f"cps must be in [2, 130], got {cps}")
    return cps


def positive_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {number}")
    return number


def non_negative_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}")
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {number}")
    return number


def seed_type(value):
    try:
        seed = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {value!r}")
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return seed


def alpha_type(value):
    try:
        alpha = Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"alpha must be a rational number such as 1/10, got {value!r}")
    if alpha <= 0:
        raise argparse.ArgumentTypeError(f"alpha must be positive, got {value}")
    return alpha


def cps_list_type(value):
    return [cps_type(part) for part in value.split(',') if part.strip()]


def build_parser(cfg=None) -> CliParser:
    cfg = cfg or get_config()

    common = CliParser(add_help=False)
    common.add_argument('--seed', type=seed_type, default=None,
                        help=f'Seed for every random choice (default {cfg.SEED})')
    common.add_argument('--json-output', action='store_true', help='Print the report as JSON on stdout')
    common.add_argument('--log-level', default=None,
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'])

    with_model = CliParser(add_help=False)
    with_model.add_argument('--model', required=True, help='Model file (n-gram or neural weights)')

    rendering = CliParser(add_help=False)
    rendering.add_argument('--tempo', type=float, default=cfg.TEMPO_BPM, help='Tempo in BPM')
    rendering.add_argument('--program', type=int, default=cfg.PROGRAM, help='General MIDI program')
    rendering.add_argument('--max-events', type=positive_int, default=cfg.MAX_EVENTS,
                           help='Events per melody')

    parser = CliParser(prog='melostega',
                       description='Hide data in generated melodies and read it back.')
    sub = parser.add_subparsers(dest='command', metavar='command')

    p = sub.add_parser('train', parents=[common], help='Train an n-gram model on a MIDI corpus')
    p.add_argument('--corpus', required=True, help='Directory of MIDI files (searched recursively)')
    p.add_argument('--order', type=positive_int, default=cfg.NGRAM_ORDER)
    p.add_argument('--alpha', type=alpha_type, default=None,
                   help=f'Additive smoothing as a fraction (default {cfg.ALPHA})')
    p.add_argument('--min-events', type=positive_int, default=cfg.MIN_MELODY_EVENTS,
                   help='Drop extracted melodies shorter than this')
    p.add_argument('--out', required=True, help='Model file to write')
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser('neural-init', parents=[common], help='Write a seeded random-weight neural model')
    p.add_argument('--out', required=True)
    p.add_argument('--hidden', type=positive_int, default=cfg.HIDDEN_SIZE)
    p.add_argument('--embed', type=positive_int, default=cfg.EMBED_SIZE)
    p.add_argument('--layers', type=positive_int, default=cfg.NUM_LAYERS)
    p.add_argument('--attention-length', type=positive_int, default=cfg.ATTENTION_LENGTH)
    p.add_argument('--attention-hidden', type=positive_int, default=40)
    p.add_argument('--cell', choices=CELL_TYPES, default='lstm')
    p.set_defaults(handler=cmd_neural_init)

    p = sub.add_parser('gen', parents=[common, with_model, rendering], help='Generate melodies without a payload')
    p.add_argument('--count', type=positive_int, default=1)
    p.add_argument('--mode', choices=MODES, default='greedy')
    p.add_argument('--out', required=True, help='Output directory (must be new or empty)')
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser('embed', parents=[common, with_model, rendering], help='Hide a file in generated melodies')
    p.add_argument('--cps', type=cps_type, default=cfg.CPS, help='Candidate pool size')
    p.add_argument('--in', dest='input', required=True, help='Secret file (raw bytes)')
    p.add_argument('--out', required=True, help='Bundle directory (must be new or empty)')
    p.set_defaults(handler=cmd_embed)

    p = sub.add_parser('extract', parents=[common, with_model], help='Recover a hidden file from a bundle')
    p.add_argument('--cps', type=cps_type, default=None, help='Candidate pool size (default: manifest)')
    p.add_argument('--max-events', type=positive_int, default=None, help='Events per melody (default: manifest)')
    p.add_argument('--in', dest='input', nargs='+', required=True,
                   help='Bundle directory, or the melody files in order')
    p.add_argument('--out', required=True, help='File to write the secret to')
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser('eval', help='Embedding-rate and likelihood reports')
    eval_sub = p.add_subparsers(dest='report', metavar='report')
    e = eval_sub.add_parser('rate', parents=[common, with_model], help='Embedding rate of bundle directories')
    e.add_argument('--in', dest='input', nargs='+', required=True, help='Bundle directories')
    e.add_argument('--cps', type=cps_type, default=None, help='Candidate pool size (default: manifest)')
    e.set_defaults(handler=cmd_eval_rate)
    e = eval_sub.add_parser('score', parents=[common, with_model], help='Mean likelihood score of melody folders')
    e.add_argument('--in', dest='input', nargs='+', required=True, help='Directories of MIDI files')
    e.set_defaults(handler=cmd_eval_score)

    p = sub.add_parser('abx', parents=[common, with_model, rendering], help='Build a blinded A/B/X listening set')
    p.add_argument('--out', required=True)
    p.add_argument('--stego', type=non_negative_int, default=DEFAULT_STEGO_SAMPLES)
    p.add_argument('--clean', type=non_negative_int, default=DEFAULT_CLEAN_SAMPLES)
    p.add_argument('--reference', type=non_negative_int, default=DEFAULT_REFERENCE_SAMPLES)
    p.add_argument('--cps-list', type=cps_list_type, default=list(DEFAULT_ABX_CPS),
                   help='Comma-separated pool sizes used round-robin for stego samples')
    p.set_defaults(handler=cmd_abx)

    p = sub.add_parser('abx-score', parents=[common], help='Score listener responses against an answer key')
    p.add_argument('--key', required=True, help='answer_key.csv of the set')
    p.add_argument('--responses', required=True, help='CSV with filename,response[,listener]')
    p.set_defaults(handler=cmd_abx_score)

    return parser


def _seed(args, cfg, purpose=None):
    if args.seed is not None:
        return args.seed
    if purpose:
        log_security_event('DEFAULT_SEED', f"{purpose} uses the documented default seed {cfg.SEED}; "
                                           f"anyone can regenerate the key notes")
    return cfg.SEED


@handle_exceptions
def cmd_train(args, cfg):
    quantization = QuantizationConfig(
        steps_per_quarter=cfg.STEPS_PER_QUARTER,
        min_melody_events=args.min_events,
        pitch_range=(cfg.PITCH_LOW, cfg.PITCH_HIGH),
    )
    corpus = CorpusLoader(quantization, FileValidator(cfg.MAX_MIDI_BYTES)).load(args.corpus)
    alpha = args.alpha if args.alpha is not None else cfg.alpha()
    model = train_ngram(corpus.melodies, args.order, alpha)
    size = save_model(model, args.out)
    return {
        'model': args.out,
        'order': model.order,
        'alpha': str(model.alpha),
        'files_parsed': corpus.files_parsed,
        'files_skipped': corpus.skipped,
        'melodies': len(corpus.melodies),
        'events': corpus.event_count(),
        'contexts': len(model.counts),
        'start_notes': len(model.start_notes),
        'size_bytes': size,
    }


@handle_exceptions
def cmd_neural_init(args, cfg):
    weights = random_weights(_seed(args, cfg), embed_size=args.embed, hidden_size=args.hidden,
                             num_layers=args.layers, attention_length=args.attention_length,
                             attention_hidden=args.attention_hidden, cell=args.cell)
    size = save_model(NeuralModel(weights), args.out)
    return {'model': args.out, 'cell': args.cell, 'hidden_size': args.hidden,
            'embed_size': args.embed, 'layers': args.layers, 'size_bytes': size}


def _write_melodies(melodies, directory, tempo, program):
    rendered = [render_midi(m, tempo, program) for m in melodies]

    def write_contents(stage: Path):
        for index, data in enumerate(rendered):
            (stage / melody_file_name(index)).write_bytes(data)

    commit_staged_directory(write_contents, directory)
    return rendered


@handle_exceptions
def cmd_gen(args, cfg):
    model = load_model(args.model)
    melodies = generate_many(model, _seed(args, cfg), args.count, args.mode, args.max_events,
                             steps_per_quarter=cfg.STEPS_PER_QUARTER)
    rendered = _write_melodies(melodies, args.out, args.tempo, args.program)
    pitches = [p for m in melodies for p in m.pitches()]
    return {'out': args.out, 'mode': args.mode, 'melodies': len(melodies),
            'events': sum(m.steps() for m in melodies), 'notes': sum(m.note_count() for m in melodies),
            'pitch_range': [min(pitches), max(pitches)], 'bytes': sum(len(r) for r in rendered)}


@handle_exceptions
def cmd_embed(args, cfg):
    secret = Path(args.input).read_bytes()
    if len(secret) > cfg.MAX_SECRET_BYTES:
        raise PayloadTooLarge(f"Secret of {len(secret)} bytes exceeds the configured limit of {cfg.MAX_SECRET_BYTES}")
    if args.max_events < 2:
        raise ValidationError("--max-events must be at least 2 to carry data")

    model = load_model(args.model)
    params = StegoParams(cps=args.cps, seed=_seed(args, cfg, 'embed'),
                         max_events_per_melody=args.max_events,
                         steps_per_quarter=cfg.STEPS_PER_QUARTER)
    bundle = embed(model, params, secret)
    manifest = write_bundle(bundle, args.out, cfg.STEPS_PER_QUARTER, args.tempo, args.program,
                            model_digest(args.model))
    return {
        'out': args.out,
        'cps': args.cps,
        'secret_bytes': len(secret),
        'melodies': len(bundle),
        'embedded_bits': bundle.total_bits,
        'data_notes': bundle.total_data_notes,
        'file_bytes': sum(m['size_bytes'] for m in manifest['melodies']),
    }


def _read_input(paths, cfg):
    validator = FileValidator(cfg.MAX_MIDI_BYTES)
    if len(paths) == 1 and Path(paths[0]).is_dir():
        return read_bundle(paths[0], validator=validator)
    return read_bundle_files(paths, cfg.STEPS_PER_QUARTER, validator=validator)


def _params_for(stored, cps, max_events, cfg):
    manifest = stored.manifest or {}
    cps = cps or manifest.get('cps')
    if cps is None:
        raise ValidationError("No manifest in the bundle; pass --cps")
    return StegoParams(
        cps=cps,
        seed=0,
        max_events_per_melody=max_events or manifest.get('max_events_per_melody') or cfg.MAX_EVENTS,
        steps_per_quarter=manifest.get('steps_per_quarter', cfg.STEPS_PER_QUARTER),
    )


@handle_exceptions
def cmd_extract(args, cfg):
    model = load_model(args.model)
    stored = _read_input(args.input, cfg)
    check_model_digest(stored, model_digest(args.model))
    params = _params_for(stored, args.cps, args.max_events, cfg)
    secret, bundle = recover_bundle(model, params, stored.melodies)
    write_bytes_atomic(args.out, secret)
    return {'out': args.out, 'cps': params.cps, 'melodies': len(bundle),
            'embedded_bits': bundle.total_bits, 'secret_bytes': len(secret)}


@handle_exceptions
def cmd_eval_rate(args, cfg):
    model = load_model(args.model)
    bundles, sizes = [], []
    for directory in args.input:
        stored = read_bundle(directory, validator=FileValidator(cfg.MAX_MIDI_BYTES))
        _, bundle = recover_bundle(model, _params_for(stored, args.cps, None, cfg), stored.melodies)
        bundles.append(bundle)
        sizes.append(stored.file_sizes)
    return rate_table(bundles, sizes)


@handle_exceptions
def cmd_eval_score(args, cfg):
    model = load_model(args.model)
    loader = CorpusLoader(QuantizationConfig(steps_per_quarter=cfg.STEPS_PER_QUARTER, min_melody_events=2,
                                             ignore_drums=False), FileValidator(cfg.MAX_MIDI_BYTES))
    groups = {directory: loader.load(directory).melodies for directory in args.input}
    return score_table(model, groups)


@handle_exceptions
def cmd_abx(args, cfg):
    model = load_model(args.model)
    abx_set = make_abx_set(model, default_abx_params(args.max_events, cps_values=args.cps_list), args.out,
                           n_stego=args.stego, n_clean=args.clean, seed=_seed(args, cfg),
                           n_reference=args.reference, reference_cps=REFERENCE_CPS,
                           max_events=args.max_events, tempo_bpm=args.tempo, program=args.program)
    labels = abx_set.answer_key['label'].value_counts().to_dict()
    return {'out': args.out, 'samples': len(abx_set.files), 'reference': len(abx_set.reference_files),
            'labels': {k: int(v) for k, v in labels.items()}}


@handle_exceptions
def cmd_abx_score(args, cfg):
    return score_abx_responses(args.key, args.responses).to_dict()


def _to_jsonable(report):
    if isinstance(report, pd.DataFrame):
        return json.loads(report.reset_index().to_json(orient='records'))
    return report


def emit_report(report, as_json, stream=None):
    stream = stream or sys.stdout
    if report is None:
        return
    if as_json:
        print(json.dumps(_to_jsonable(report), indent=2, sort_keys=True), file=stream)
    elif isinstance(report, pd.DataFrame):
        print(report.to_string(float_format=lambda v: f'{v:.4f}'), file=stream)
    else:
        for key in sorted(report):
            print(f"{key}: {report[key]}", file=stream)


def configure_logging(level, cfg):
    logging.basicConfig(level=getattr(logging, level or cfg.LOG_LEVEL, logging.INFO),
                        format=cfg.LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv=None) -> int:
    cfg = get_config()
    parser = build_parser(cfg)
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if not getattr(args, 'handler', None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    configure_logging(args.log_level, cfg)
    try:
        cfg.validate_config()
        report = args.handler(args, cfg)
    except Exception as e:
        return ErrorHandler().handle(e)

    emit_report(report, args.json_output)
    return EXIT_OK
