"""Depression detection from tweet histories: semantic tweet clustering
plus a two-branch hierarchical attention model fused into a binary
classifier, with attention-based narrative explanations.
"""

__version__ = "0.1.0"

from .clustering import (
    ClusterAssignment,
    HdbscanClusterer,
    HdbscanParams,
    KMeansClusterer,
    assign_dataset,
    hdbscan_fit,
    kmeans_fit,
    sentence_embed,
    tune_clustering,
)
from .data import (
    Dataset,
    FoldSplit,
    TweetRecord,
    UserRecord,
    filter_min_tweets,
    kfold_split,
    load_jsonl,
    write_jsonl,
)
from .explain import NarrativeReport, build_report, export_report, rank_clusters, temporal_profile, tweet_salience
from .metrics import ConfusionCounts, CrossValReport, Metrics, confusion, cross_validate, prf1_accuracy
from .model import (
    ModelDims,
    ModelParams,
    NarrationDepClassifier,
    TrainConfig,
    forward_user,
    load_checkpoint,
    predict_user,
    save_checkpoint,
    train,
)
from .numerics import adam_step, affine, finite_diff_check, masked_softmax, rng_stream, xavier_init
from .synth import synth_generate, synth_theme_mixture, synth_two_signal, synth_variable_density
from .trace import AttentionTrace

__all__ = [
    "AttentionTrace",
    "ClusterAssignment",
    "ConfusionCounts",
    "CrossValReport",
    "Dataset",
    "FoldSplit",
    "HdbscanClusterer",
    "HdbscanParams",
    "KMeansClusterer",
    "Metrics",
    "ModelDims",
    "ModelParams",
    "NarrationDepClassifier",
    "NarrativeReport",
    "TrainConfig",
    "TweetRecord",
    "UserRecord",
    "adam_step",
    "affine",
    "assign_dataset",
    "build_report",
    "confusion",
    "cross_validate",
    "export_report",
    "filter_min_tweets",
    "finite_diff_check",
    "forward_user",
    "hdbscan_fit",
    "kfold_split",
    "kmeans_fit",
    "load_checkpoint",
    "load_jsonl",
    "masked_softmax",
    "predict_user",
    "prf1_accuracy",
    "rank_clusters",
    "rng_stream",
    "save_checkpoint",
    "sentence_embed",
    "synth_generate",
    "synth_theme_mixture",
    "synth_two_signal",
    "synth_variable_density",
    "temporal_profile",
    "train",
    "tune_clustering",
    "tweet_salience",
    "write_jsonl",
    "xavier_init",
]
