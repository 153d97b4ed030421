"""Edge dictionary: tokenizer, codebook quantization, losses, training stage."""

from .codebook import Codebook, quantize
from .losses import ALPHA_DEFAULT, DictLossParts, dict_loss, straight_through
from .tokenizer import (
    Detokenizer,
    ResidualBlock,
    Tokenizer,
    boundary_to_tensor,
    detokenize,
    reconstruction_probability,
    tokenize,
)
from .training import (
    DictionaryArtifacts,
    DictTrainConfig,
    DivergenceError,
    evaluate_dictionary,
    load_dictionary,
    save_dictionary,
    train_dictionary,
)

__all__ = [
    "Codebook", "quantize", "ALPHA_DEFAULT", "DictLossParts", "dict_loss",
    "straight_through", "Detokenizer", "ResidualBlock", "Tokenizer",
    "boundary_to_tensor", "detokenize", "reconstruction_probability", "tokenize",
    "DictionaryArtifacts", "DictTrainConfig", "DivergenceError",
    "evaluate_dictionary", "load_dictionary", "save_dictionary", "train_dictionary",
]
