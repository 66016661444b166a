import pytest

from conftest import ONE_NOTE_SMF
from melostega.services.corpus import CorpusLoader, load_corpus
from melostega.services.melody import MelodySequence, QuantizationConfig
from melostega.utils.error_handler import DirectoryNotFound
from melostega.utils.file_validator import FileValidator


def test_empty_directory(tmp_path):
    corpus = load_corpus(tmp_path)
    assert corpus.melodies == []
    assert corpus.skipped == 0


def test_missing_directory(tmp_path):
    with pytest.raises(DirectoryNotFound):
        load_corpus(tmp_path / 'nope')


def test_corrupt_file_is_skipped(tmp_path):
    (tmp_path / 'a_good.mid').write_bytes(ONE_NOTE_SMF)
    (tmp_path / 'b_bad.mid').write_bytes(b'MThd garbage')
    corpus = load_corpus(tmp_path)
    assert corpus.melodies == [MelodySequence((62, 0, 0, 0, 1))]
    assert corpus.skipped == 1
    assert corpus.files_parsed == 1
    assert corpus.skipped_files[0].endswith('b_bad.mid')


def test_non_midi_files_ignored(tmp_path):
    (tmp_path / 'notes.txt').write_text('not music')
    (tmp_path / 'tune.MIDI').write_bytes(ONE_NOTE_SMF)
    corpus = load_corpus(tmp_path)
    assert len(corpus) == 1
    assert corpus.skipped == 0


def test_recursive_lexicographic_order(corpus_dir, toy_melodies):
    loader = CorpusLoader()
    names = [p.relative_to(corpus_dir).as_posix() for p in loader.list_midi_files(corpus_dir)]
    assert names == ['nested/tune_1.mid', 'tune_0.mid', 'tune_2.mid']
    corpus = loader.load(corpus_dir)
    assert corpus.melodies == [toy_melodies[1], toy_melodies[0], toy_melodies[2]]
    assert corpus.event_count() == sum(len(m) for m in toy_melodies)


def test_loading_twice_is_identical(corpus_dir):
    assert load_corpus(corpus_dir).melodies == load_corpus(corpus_dir).melodies


def test_oversized_file_skipped(tmp_path):
    (tmp_path / 'tune.mid').write_bytes(ONE_NOTE_SMF)
    corpus = CorpusLoader(QuantizationConfig(), FileValidator(max_file_size=10)).load(tmp_path)
    assert corpus.skipped == 1


def test_file_validator_reports(tmp_path):
    validator = FileValidator()
    empty = tmp_path / 'empty.mid'
    empty.write_bytes(b'')
    assert validator.validate_file(str(empty)) == {'valid': False, 'error': 'File is empty'}
    wrong = tmp_path / 'wrong.mid'
    wrong.write_bytes(b'RIFF....')
    assert not validator.validate_file(str(wrong))['valid']
    good = tmp_path / 'good.mid'
    good.write_bytes(ONE_NOTE_SMF)
    assert validator.validate_file(str(good)) == {'valid': True, 'size_bytes': len(ONE_NOTE_SMF)}
    assert validator.get_file_info(str(good))['size_bits'] == len(ONE_NOTE_SMF) * 8
