"""Dictionary-backed entity normalization with sparse + dense synonym retrieval."""
from .corpus import (
    CorpusError,
    Dictionary,
    EmptyMentionError,
    MentionRecord,
    load_dictionary,
    load_queries,
    load_substitution_map,
    merge_train_to_dictionary,
    normalize_text,
    preprocess_mention,
    split_composite,
)
from .dense import EncoderConfig, ReferenceEncoder, load_checkpoint, save_checkpoint
from .evaluation import EvalReport, acc_at_k, evaluate
from .retrieval import SynonymIndex, compose_from_scores, recall_at_k, topk_ids
from .scorer import HybridWeight, score
from .sparse import TfIdfModel, encode_sparse, fit_tfidf, sparse_score
from .training import TrainConfig, TrainState, train

__version__ = "0.1.0"

__all__ = [
    "acc_at_k",
    "compose_from_scores",
    "CorpusError",
    "Dictionary",
    "EmptyMentionError",
    "encode_sparse",
    "EncoderConfig",
    "EvalReport",
    "evaluate",
    "fit_tfidf",
    "HybridWeight",
    "load_checkpoint",
    "load_dictionary",
    "load_queries",
    "load_substitution_map",
    "MentionRecord",
    "merge_train_to_dictionary",
    "normalize_text",
    "preprocess_mention",
    "recall_at_k",
    "ReferenceEncoder",
    "save_checkpoint",
    "score",
    "sparse_score",
    "split_composite",
    "SynonymIndex",
    "TfIdfModel",
    "topk_ids",
    "train",
    "TrainConfig",
    "TrainState",
]
