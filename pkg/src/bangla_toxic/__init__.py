"""Bi-LSTM cyberbullying detection for Bangla comments, in plain numpy."""

from .dataset import LabeledComment, kfold, load_dataset, split, synth_corpus
from .evaluation import ConfusionMatrix, MetricsReport, accuracy, confusion, evaluate, f_score, precision, recall
from .network import ModelConfig, ModelParams, init_params, load_params, model_backward, model_forward, save_params
from .optim import TrainConfig, cross_validate, train
from .text import clean_text, preprocess, stem, tokenize
from .vocab import Vocabulary, build_vocabulary, pad, sequence

__all__ = [
    "ConfusionMatrix", "LabeledComment", "MetricsReport", "ModelConfig", "ModelParams", "TrainConfig",
    "Vocabulary", "accuracy", "build_vocabulary", "clean_text", "confusion", "cross_validate", "evaluate",
    "f_score", "init_params", "kfold", "load_dataset", "load_params", "model_backward", "model_forward",
    "pad", "precision", "preprocess", "recall", "save_params", "sequence", "split", "stem", "synth_corpus",
    "tokenize", "train",
]

__version__ = "0.1.0"
