from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from melostega.services.melody import MelodySequence, QuantizationConfig
from melostega.services.midi_io import parse_and_extract
from melostega.utils.error_handler import DirectoryNotFound, StegaError
from melostega.utils.file_validator import FileValidator

logger = logging.getLogger(__name__)


@dataclass
class Corpus:
    melodies: list[MelodySequence] = field(default_factory=list)
    files_parsed: int = 0
    skipped: int = 0
    skipped_files: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.melodies)

    def event_count(self) -> int:
        return sum(len(m) for m in self.melodies)


class CorpusLoader:
    """Turns a folder of MIDI files into training melodies"""

    def __init__(self, cfg: QuantizationConfig | None = None, validator: FileValidator | None = None):
        self.cfg = cfg or QuantizationConfig()
        self.validator = validator or FileValidator()

    def list_midi_files(self, directory) -> list[Path]:
        root = Path(directory)
        if not root.is_dir():
            raise DirectoryNotFound(f"Corpus directory not found: {directory}")

        files = [p for p in root.rglob('*') if p.is_file() and self.validator.is_allowed_file(p.name)]
        # lexicographic on the relative POSIX path, independent of filesystem order
        return sorted(files, key=lambda p: p.relative_to(root).as_posix())

    def load(self, directory) -> Corpus:
        corpus = Corpus()
        for path in self.list_midi_files(directory):
            validation_result = self.validator.validate_file(str(path))
            if not validation_result['valid']:
                self._skip(corpus, path, validation_result['error'])
                continue

            try:
                melodies = parse_and_extract(path.read_bytes(), self.cfg)
            except (StegaError, OSError) as e:
                self._skip(corpus, path, str(e))
                continue

            corpus.files_parsed += 1
            corpus.melodies.extend(melodies)

        logger.info(
            f"Loaded corpus from {directory}: {len(corpus.melodies)} melodies, "
            f"{corpus.event_count()} events, {corpus.files_parsed} files parsed, {corpus.skipped} skipped"
        )
        return corpus

    def _skip(self, corpus, path, reason):
        logger.warning(f"Skipping {path}: {reason}")
        corpus.skipped += 1
        corpus.skipped_files.append(str(path))


def load_corpus(directory, cfg: QuantizationConfig | None = None) -> Corpus:
    return CorpusLoader(cfg).load(directory)
