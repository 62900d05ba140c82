"""Closed-set speaker identification over enrolled galleries.

The pipeline: WAV audio -> MFCC+deltas with energy VAD -> background-GMM
sufficient statistics -> MAP-adapted mean supervector -> PPCA-compressed
i-vector -> centered, length-normalized embedding -> Gaussian PLDA
scoring against a precomputed enrollment index -> best-utterance-per-
speaker top-k ranking.
"""

from .audio import AudioClip, FeatureConfig, decode_wav, extract_features
from .embedding import IVector, PpcaModel, center_and_normalize, \
    extract_ivector, train_ppca
from .errors import VoicerankError
from .gallery import Gallery, RankedResult, ingest_metadata, rank_speakers
from .gmm import DiagonalGmm, SuffStats, compute_stats, map_adapt_means, \
    train_ubm
from .pipeline import IdentificationEngine, TimingReport
from .plda import IdentificationIndex, PldaModel, build_index, \
    score_all, score_pairwise, train_plda

__version__ = "1.0.0"

__all__ = [
    "AudioClip", "FeatureConfig", "decode_wav", "extract_features",
    "IVector", "PpcaModel", "center_and_normalize", "extract_ivector",
    "train_ppca", "VoicerankError", "Gallery", "RankedResult",
    "ingest_metadata", "rank_speakers", "DiagonalGmm", "SuffStats",
    "compute_stats", "map_adapt_means", "train_ubm",
    "IdentificationEngine", "TimingReport", "IdentificationIndex",
    "PldaModel", "build_index", "score_all", "score_pairwise",
    "train_plda", "__version__",
]
