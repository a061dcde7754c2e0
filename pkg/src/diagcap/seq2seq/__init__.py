"""Transformer encoder-decoder captioning with a hand-written backward pass."""

from .decode import greedy_decode
from .model import EncoderDecoder, ModelConfig, decode_logits, encode, token_nll
from .train import Adam, TrainConfig, TrainingError, TrainResult, batch_loss, train
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .vocab import Vocabulary

__all__ = [
    "Adam",
    "CheckpointError",
    "EncoderDecoder",
    "ModelConfig",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "Vocabulary",
    "batch_loss",
    "decode_logits",
    "encode",
    "greedy_decode",
    "load_checkpoint",
    "save_checkpoint",
    "token_nll",
    "train",
]
