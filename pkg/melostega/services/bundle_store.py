"""On-disk stego bundles: numbered MIDI files plus a JSON manifest."""
from __future__ import annotations

import json
import logging
import os
import re
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from melostega.services.melody import MelodySequence, QuantizationConfig
from melostega.services.midi_io import parse_and_extract, render_midi
from melostega.services.stego_codec import StegoBundle
from melostega.utils.error_handler import DirectoryNotFound, EmptyInput, MalformedMidi, ValidationError
from melostega.utils.file_validator import FileValidator

logger = logging.getLogger(__name__)

BUNDLE_FORMAT_VERSION = 1
MANIFEST_NAME = 'manifest.json'
MELODY_FILE_PATTERN = re.compile(r'^\d{4,}\.mid$')


def melody_file_name(index: int) -> str:
    return f'{index:04d}.mid'


@dataclass
class StoredBundle:
    """Melodies read back from disk, in order, with their file sizes"""
    melodies: list[MelodySequence]
    files: list[str]
    file_sizes: list[int]
    manifest: Optional[dict] = None

    def advisory_bit_counts(self) -> Optional[list[int]]:
        if not self.manifest:
            return None
        return [entry.get('embedded_bits') for entry in self.manifest.get('melodies', [])]


def build_manifest(bundle: StegoBundle, file_sizes: Sequence[int], steps_per_quarter: int,
                   tempo_bpm: float, program: int, model_digest: Optional[str]) -> dict:
    return {
        'format_version': BUNDLE_FORMAT_VERSION,
        'cps': bundle.cps,
        'max_events_per_melody': bundle.max_events_per_melody,
        'steps_per_quarter': steps_per_quarter,
        'tempo_bpm': tempo_bpm,
        'program': program,
        'model_digest': model_digest,
        'total_bits': bundle.total_bits,
        'melodies': [
            {
                'file': melody_file_name(index),
                'events': len(melody),
                'embedded_bits': bundle.bit_counts[index],
                'data_notes': bundle.data_notes[index],
                'size_bytes': file_sizes[index],
            }
            for index, melody in enumerate(bundle.melodies)
        ],
    }


def _prepare_target(directory: Path):
    if directory.exists():
        if not directory.is_dir():
            raise ValidationError(f"Output path exists and is not a directory: {directory}")
        if any(directory.iterdir()):
            raise ValidationError(f"Output directory is not empty: {directory}")
        directory.rmdir()
    directory.parent.mkdir(parents=True, exist_ok=True)


def commit_staged_directory(write_contents, directory) -> None:
    """Fill a staging directory via write_contents(path) and rename it into place"""
    target = Path(directory)
    _prepare_target(target)
    stage = Path(tempfile.mkdtemp(dir=target.parent, prefix=f'.{target.name}.stage-'))
    try:
        write_contents(stage)
        os.replace(stage, target)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise


def write_json(path, document) -> None:
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write('\n')


def write_bundle(bundle: StegoBundle, directory, steps_per_quarter: int = 4, tempo_bpm: float = 120.0,
                 program: int = 0, model_digest: Optional[str] = None) -> dict:
    if not bundle.melodies:
        raise EmptyInput("Bundle has no melodies to write")
    rendered = [render_midi(m, tempo_bpm, program) for m in bundle.melodies]
    manifest = build_manifest(bundle, [len(r) for r in rendered], steps_per_quarter,
                              tempo_bpm, program, model_digest)

    def write_contents(stage: Path):
        for index, data in enumerate(rendered):
            (stage / melody_file_name(index)).write_bytes(data)
        write_json(stage / MANIFEST_NAME, manifest)

    commit_staged_directory(write_contents, directory)
    logger.info(f"Wrote bundle of {len(rendered)} melodies ({bundle.total_bits} bits) to {directory}")
    return manifest


def read_manifest(directory) -> Optional[dict]:
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        return None
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except (ValueError, UnicodeDecodeError) as e:
        logger.warning(f"Ignoring unreadable manifest {path}: {e}")
        return None


def list_bundle_files(directory) -> list[Path]:
    """Numbered melody files in embedding order; numbering must run 0, 1, 2, ... without gaps"""
    root = Path(directory)
    if not root.is_dir():
        raise DirectoryNotFound(f"Bundle directory not found: {directory}")
    numbered = sorted((int(p.stem), p) for p in root.iterdir()
                      if p.is_file() and MELODY_FILE_PATTERN.match(p.name))
    for expected, (index, path) in enumerate(numbered):
        if index != expected:
            raise MalformedMidi(f"Bundle numbering breaks at {path.name}: expected "
                                f"{melody_file_name(expected)}")
    return [p for _, p in numbered]


def read_bundle_files(files: Sequence, steps_per_quarter: int = 4, manifest: Optional[dict] = None,
                      validator: Optional[FileValidator] = None) -> StoredBundle:
    """Read an explicit ordered list of single-melody MIDI files"""
    if not files:
        raise EmptyInput("No bundle files given")
    validator = validator or FileValidator()
    cfg = QuantizationConfig(steps_per_quarter=steps_per_quarter, ignore_drums=False)
    stored = StoredBundle([], [], [], manifest)
    for path in files:
        result = validator.validate_file(str(path))
        if not result['valid']:
            raise MalformedMidi(f"{Path(path).name}: {result['error']}")
        data = Path(path).read_bytes()
        melodies = parse_and_extract(data, cfg)
        if len(melodies) != 1:
            raise MalformedMidi(f"{Path(path).name} holds {len(melodies)} melodies, expected exactly one")
        stored.melodies.append(melodies[0])
        stored.files.append(str(path))
        stored.file_sizes.append(len(data))
    return stored


def read_bundle(directory, steps_per_quarter: Optional[int] = None,
                validator: Optional[FileValidator] = None) -> StoredBundle:
    manifest = read_manifest(directory)
    if manifest and manifest.get('format_version') != BUNDLE_FORMAT_VERSION:
        logger.warning(f"Manifest format version {manifest.get('format_version')} differs from "
                       f"{BUNDLE_FORMAT_VERSION}; reading files only")
        manifest = None
    files = list_bundle_files(directory)
    if not files:
        raise EmptyInput(f"No melody files in {directory}")
    if steps_per_quarter is None:
        steps_per_quarter = (manifest or {}).get('steps_per_quarter', 4)
    stored = read_bundle_files(files, steps_per_quarter, manifest, validator)
    logger.info(f"Read {len(stored.melodies)} melodies from {directory}")
    return stored


def check_model_digest(stored: StoredBundle, digest: Optional[str]) -> bool:
    """Compare the manifest's model digest; a mismatch is only reported"""
    recorded = (stored.manifest or {}).get('model_digest')
    if not recorded or not digest or recorded == digest:
        return True
    logger.warning(f"Bundle was written with model {recorded[:12]}..., "
                   f"extracting with {digest[:12]}...; extraction will likely desync")
    return False
