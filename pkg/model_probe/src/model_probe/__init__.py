"""Neural scorer companion: centroid and span-mask record export."""

__version__ = "0.1.0"

from .probe import (
    ProbeConfig,
    ProbeError,
    export_centroids,
    export_lm_records,
    load_scorer,
    read_mask_plans,
    score_sentence,
    sentence_embeddings,
    span_corruption_pair,
)

__all__ = [
    "__version__",
    "ProbeConfig",
    "ProbeError",
    "load_scorer",
    "sentence_embeddings",
    "export_centroids",
    "read_mask_plans",
    "span_corruption_pair",
    "score_sentence",
    "export_lm_records",
]
