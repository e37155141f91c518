"""Language-pair similarity features and cross-lingual transfer prediction.

The package measures how similar two languages are (corpus statistics,
typological property overlap, embedding centroids, language-model
scores), fits an interpretable linear meta-regression over observed
transfer results, and predicts zero-shot and n-shot task scores plus
the best source language for a target.
"""

__version__ = "0.1.0"

from .corpus import (
    Corpus,
    CorpusStats,
    char_ngrams,
    compute_corpus_stats,
    load_corpora,
    read_corpus,
    tokenize,
)
from .lm import (
    LMMetrics,
    LMRecord,
    MaskPlan,
    aggregate_lm_records,
    generate_mask_plan,
    plan_corpus_masks,
)
from .regression import (
    Dataset,
    RegressionModel,
    Scaler,
    TransferObservation,
    assemble_dataset,
    correlation_report,
    fit_model,
    lasso_fit,
    lolo_cv,
    minmax_scale,
    pearson,
    pearson_pvalue,
    rfe,
    rmse,
    zero_shot_dataset,
)
from .similarity import (
    EmbeddingCentroid,
    PairFeatureVector,
    build_feature_table,
    centroid_cosine,
    jsd,
    lexical_similarity,
    morph_similarity,
    ordered_pairs,
    sentlen_ratio,
    vocab_ratio,
)
from .transfer import (
    FewShotCurve,
    SourceRanking,
    a_src,
    alpha_dataset,
    builtin_model,
    fit_alpha,
    predict_n_shot,
    predict_zero_shot,
    rank_sources,
)
from .typology import PropertySet, TypologyDB, iou_similarity, load_typology_db

__all__ = [
    "__version__",
    "Corpus",
    "CorpusStats",
    "tokenize",
    "char_ngrams",
    "compute_corpus_stats",
    "read_corpus",
    "load_corpora",
    "PropertySet",
    "TypologyDB",
    "load_typology_db",
    "iou_similarity",
    "EmbeddingCentroid",
    "PairFeatureVector",
    "jsd",
    "lexical_similarity",
    "morph_similarity",
    "vocab_ratio",
    "sentlen_ratio",
    "centroid_cosine",
    "ordered_pairs",
    "build_feature_table",
    "MaskPlan",
    "LMRecord",
    "LMMetrics",
    "generate_mask_plan",
    "plan_corpus_masks",
    "aggregate_lm_records",
    "TransferObservation",
    "Dataset",
    "Scaler",
    "RegressionModel",
    "assemble_dataset",
    "zero_shot_dataset",
    "minmax_scale",
    "pearson",
    "pearson_pvalue",
    "correlation_report",
    "lasso_fit",
    "rfe",
    "fit_model",
    "lolo_cv",
    "rmse",
    "FewShotCurve",
    "SourceRanking",
    "builtin_model",
    "predict_zero_shot",
    "fit_alpha",
    "predict_n_shot",
    "rank_sources",
    "a_src",
    "alpha_dataset",
]
