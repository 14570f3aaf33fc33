"""Online topic clustering of timestamped headline streams with a
self-exciting temporal prior, plus interaction analytics and a synthetic
ground-truth generator."""

from .corpus import Document, RawRecord, Vocabulary, build_vocabulary, curate, tokenize
from .inference import InferenceConfig, InferenceResult, estimate_alpha, run
from .lang_model import ClusterWordCounts, ThetaPrior, doc_log_likelihood
from .temporal import RBFKernel, intensity, kernel_eval, lambda0_heuristic, preset

__all__ = [
    "Document", "RawRecord", "Vocabulary", "build_vocabulary", "curate", "tokenize",
    "InferenceConfig", "InferenceResult", "estimate_alpha", "run",
    "ClusterWordCounts", "ThetaPrior", "doc_log_likelihood",
    "RBFKernel", "intensity", "kernel_eval", "lambda0_heuristic", "preset",
]

__version__ = "0.1.0"
