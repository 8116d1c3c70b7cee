from .features import FeatureConfig, FeatureStats, extract_features, fit_feature_stats
from .cluster import (SemanticTokens, SemanticVocab, fit_kmeans, load_vocab, save_vocab,
                      tokenize, read_token_file, write_token_file, FRAME_RATE_HZ)

__all__ = [
    "FeatureConfig", "FeatureStats", "extract_features", "fit_feature_stats",
    "SemanticVocab", "SemanticTokens", "fit_kmeans", "tokenize",
    "save_vocab", "load_vocab", "read_token_file", "write_token_file",
    "FRAME_RATE_HZ",
]
