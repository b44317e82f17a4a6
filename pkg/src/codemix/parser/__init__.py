"""Biaffine graph-based dependency parser."""

from .estimator import BiaffineParser, EncoderState, ScoreTensor, assign_labels
from .model import ParserVocab
from .mst import chu_liu_edmonds, decode_mst
from .serialization import load_model, save_model

__all__ = [
    "BiaffineParser",
    "EncoderState",
    "ParserVocab",
    "ScoreTensor",
    "assign_labels",
    "chu_liu_edmonds",
    "decode_mst",
    "load_model",
    "save_model",
]
