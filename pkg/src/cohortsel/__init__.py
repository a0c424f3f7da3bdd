"""cohortsel: per-criterion cohort selection over clinical text.

Four feature families (NER keywords, TF-IDF, gazetteer windows, trigger-word
contexts) plus a document-level bag-of-n-grams classifier feed a weighted
soft-voting ensemble of logistic regression, linear SVM, and gradient-boosted
trees, one binary classifier per eligibility criterion.
"""

from .corpus import (
    MET,
    NOT_MET,
    Document,
    NerSpan,
    Token,
    dictionary_ner,
    load_corpus,
    load_gold,
    load_ner_annotations,
    tokenize,
)
from .errors import ConfigError, DataError
from .features import FeatureSpace, SparseVec, TfidfModel, assemble, fit_tfidf, tfidf_vector
from .pipeline import PipelineConfig, TrainedPipeline, load_config, train_pipeline
from .schema import LabelConfig, LabelSchema, default_schema
from .synth import generate_synthetic
from .tuner import EvalReport, grid_search_weights, micro_f1, stratified_kfold

__version__ = "0.1.0"

__all__ = [
    "MET",
    "NOT_MET",
    "ConfigError",
    "DataError",
    "Document",
    "EvalReport",
    "FeatureSpace",
    "LabelConfig",
    "LabelSchema",
    "NerSpan",
    "PipelineConfig",
    "SparseVec",
    "TfidfModel",
    "Token",
    "TrainedPipeline",
    "assemble",
    "default_schema",
    "dictionary_ner",
    "fit_tfidf",
    "generate_synthetic",
    "grid_search_weights",
    "load_config",
    "load_corpus",
    "load_gold",
    "load_ner_annotations",
    "micro_f1",
    "stratified_kfold",
    "tfidf_vector",
    "tokenize",
    "train_pipeline",
    "__version__",
]
