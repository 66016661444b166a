import logging
import os

from melostega.services.midi_io import write_bytes_atomic
from melostega.services.neural_model import WEIGHTS_MAGIC, NeuralModel, load_weights_bytes
from melostega.services.ngram_model import MODEL_MAGIC, load_model_bytes
from melostega.utils.error_handler import BadMagic, ValidationError
from melostega.utils.security import security_manager

logger = logging.getLogger(__name__)


def model_from_bytes(data):
    """Decode either model file kind by its magic tag"""
    magic = bytes(data[:4])
    if magic == MODEL_MAGIC:
        return load_model_bytes(data)
    if magic == WEIGHTS_MAGIC:
        return NeuralModel(load_weights_bytes(data))
    raise BadMagic(f"Unrecognized model file (magic {magic!r})")


def load_model(path):
    if not path:
        raise ValidationError("A model file is required (--model)")
    with open(path, 'rb') as fh:
        data = fh.read()
    model = model_from_bytes(data)
    logger.info(f"Loaded {type(model).__name__} from {path} ({len(data)} bytes)")
    return model


def save_model(model, path):
    data = model.to_bytes()
    write_bytes_atomic(path, data)
    logger.info(f"Saved {type(model).__name__} to {path} ({len(data)} bytes)")
    return len(data)


def model_digest(path):
    """SHA-256 of the model file, recorded in bundle manifests"""
    if not path or not os.path.isfile(path):
        return None
    return security_manager.hash_file(path)
