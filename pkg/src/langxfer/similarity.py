"""Pairwise language similarity features.

Each ordered (source, target) pair gets a feature vector combining
corpus-derived measures (lexical divergence, morphological ratio,
vocabulary and sentence-length ratios), typological overlap, embedding
centroid cosine, language-model scores and the source in-language task
score. Two of the features are max-normalized over the *supplied* pair
set, so the pair set itself is part of the computation:

* lex   = 1 - jsd(src, tgt) / max over pairs of jsd
* morph = (ttr_tgt / ttr_src) / max over pairs of the same ratio
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import CorpusStats
from .lm import LMMetrics
from .typology import TypologyDB, iou_similarity

__all__ = [
    "FEATURE_COLUMNS",
    "PairFeatureVector",
    "EmbeddingCentroid",
    "InvalidDistributionError",
    "DegenerateNormalizationError",
    "DegenerateEmbeddingError",
    "MissingLanguageError",
    "jsd",
    "lexical_similarity",
    "morph_similarity",
    "vocab_ratio",
    "sentlen_ratio",
    "centroid_cosine",
    "ordered_pairs",
    "build_feature_table",
    "write_feature_table",
    "read_feature_table",
    "load_centroids",
    "write_centroids",
]

Pair = tuple[str, str]

# Column order of the feature-table CSV (after task,source,target).
FEATURE_COLUMNS = (
    "lex",
    "morph",
    "phono",
    "synt",
    "emb",
    "v_r",
    "sent_len",
    "lm_l_src",
    "lm_l_tgt",
    "lm_em_src",
    "lm_em_tgt",
    "s_src",
)

_DIST_TOLERANCE = 1e-6


class InvalidDistributionError(ValueError):
    """Input map is not a probability distribution."""


class DegenerateNormalizationError(ValueError):
    """Max-normalization impossible because every divergence is zero."""


class DegenerateEmbeddingError(ValueError):
    """Embedding centroid with zero norm."""


class MissingLanguageError(ValueError):
    """A pair references a language without corpus statistics."""


@dataclass(frozen=True)
class PairFeatureVector:
    """All predictors for one (task, source, target) pair.

    Features that could not be computed (no typology entry, no centroid,
    no LM metrics, no source score) are None, never silently zero.
    """

    task: str
    source: str
    target: str
    lex: Optional[float] = None
    morph: Optional[float] = None
    phono: Optional[float] = None
    synt: Optional[float] = None
    emb: Optional[float] = None
    v_r: Optional[float] = None
    sent_len: Optional[float] = None
    lm_l_src: Optional[float] = None
    lm_l_tgt: Optional[float] = None
    lm_em_src: Optional[float] = None
    lm_em_tgt: Optional[float] = None
    s_src: Optional[float] = None

    def feature(self, name: str) -> Optional[float]:
        if name not in FEATURE_COLUMNS:
            raise KeyError(f"unknown feature {name!r}")
        return getattr(self, name)

    def features(self) -> dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in FEATURE_COLUMNS}


@dataclass(frozen=True)
class EmbeddingCentroid:
    """Mean sentence-embedding vector for one language."""

    language: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=float)
        object.__setattr__(self, "vector", vec)
        if vec.ndim != 1 or vec.size == 0:
            raise ValueError(f"centroid for {self.language!r} must be a 1-d vector")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"centroid for {self.language!r} has non-finite entries")


def _check_distribution(dist: Mapping[str, float], name: str) -> None:
    total = math.fsum(dist.values())
    if abs(total - 1.0) > _DIST_TOLERANCE:
        raise InvalidDistributionError(
            f"{name} sums to {total!r}, expected 1 within {_DIST_TOLERANCE}"
        )
    if any(v < 0 for v in dist.values()):
        raise InvalidDistributionError(f"{name} has negative probabilities")


def jsd(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    """Jensen-Shannon divergence with base-2 logs, bounded by [0, 1].

    Computed over the union support; zero-probability terms contribute
    nothing, so the value is finite even for disjoint supports (where it
    reaches exactly 1).
    """
    _check_distribution(p, "p")
    _check_distribution(q, "q")
    terms = []
    for key in p.keys() | q.keys():
        pi = p.get(key, 0.0)
        qi = q.get(key, 0.0)
        mi = 0.5 * (pi + qi)
        if pi > 0:
            terms.append(0.5 * pi * math.log2(pi / mi))
        if qi > 0:
            terms.append(0.5 * qi * math.log2(qi / mi))
    return min(1.0, max(0.0, math.fsum(terms)))


def lexical_similarity(pair_jsds: Mapping[Pair, float]) -> dict[Pair, float]:
    """Map each pair's divergence to 1 - jsd / max over the supplied pairs."""
    if not pair_jsds:
        raise ValueError("no pairs supplied")
    max_jsd = max(pair_jsds.values())
    if max_jsd <= 0.0:
        raise DegenerateNormalizationError(
            "all pairwise divergences are zero; lexical similarity undefined"
        )
    return {pair: 1.0 - value / max_jsd for pair, value in pair_jsds.items()}


def morph_similarity(
    ttrs: Mapping[str, float], pairs: Sequence[Pair]
) -> dict[Pair, float]:
    """Type-token-ratio quotient ttr_tgt/ttr_src, normalized by the pair-set max."""
    if not pairs:
        raise ValueError("no pairs supplied")
    for lang, ttr in ttrs.items():
        if ttr <= 0:
            raise ValueError(f"TTR for {lang!r} must be positive, got {ttr}")
    ratios = {(src, tgt): ttrs[tgt] / ttrs[src] for src, tgt in pairs}
    k = max(ratios.values())
    return {pair: ratio / k for pair, ratio in ratios.items()}


def vocab_ratio(stats_src: CorpusStats, stats_tgt: CorpusStats) -> float:
    """Target vocabulary size divided by source vocabulary size."""
    if stats_src.vocab_size == 0:
        raise ZeroDivisionError(f"source {stats_src.language!r} has empty vocabulary")
    return stats_tgt.vocab_size / stats_src.vocab_size


def sentlen_ratio(stats_src: CorpusStats, stats_tgt: CorpusStats) -> float:
    """Target average sentence length divided by the source's."""
    if stats_src.avg_sent_len == 0:
        raise ZeroDivisionError(
            f"source {stats_src.language!r} has zero average sentence length"
        )
    return stats_tgt.avg_sent_len / stats_src.avg_sent_len


def centroid_cosine(a: EmbeddingCentroid, b: EmbeddingCentroid) -> float:
    """Cosine of two language centroids, clipped to [-1, 1]."""
    if a.vector.shape != b.vector.shape:
        raise ValueError(
            f"centroid dimensions differ: {a.language!r} has {a.vector.size}, "
            f"{b.language!r} has {b.vector.size}"
        )
    norm_a = float(np.linalg.norm(a.vector))
    norm_b = float(np.linalg.norm(b.vector))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateEmbeddingError(
            f"zero-norm centroid for {a.language if norm_a == 0 else b.language!r}"
        )
    if np.array_equal(a.vector, b.vector):
        return 1.0
    return float(np.clip(np.dot(a.vector, b.vector) / (norm_a * norm_b), -1.0, 1.0))


def ordered_pairs(languages: Sequence[str], include_self: bool = False) -> list[Pair]:
    """All ordered (source, target) pairs; self-pairs only on request."""
    return [
        (src, tgt)
        for src in languages
        for tgt in languages
        if include_self or src != tgt
    ]


def build_feature_table(
    task: str,
    pairs: Sequence[Pair],
    stats: Mapping[str, CorpusStats],
    typology: Optional[TypologyDB] = None,
    centroids: Optional[Mapping[str, EmbeddingCentroid]] = None,
    lm_metrics: Optional[Mapping[str, LMMetrics]] = None,
    source_scores: Optional[Mapping[str, float]] = None,
) -> list[PairFeatureVector]:
    """One feature vector per ordered pair, sorted by (task, source, target).

    Corpus statistics are mandatory for every language in the pair set;
    typology, centroids, LM metrics and source scores are optional and
    produce absent features where missing. The lex and morph
    normalizations are computed over exactly the supplied pair set.
    """
    if not pairs:
        raise ValueError("no pairs supplied")
    langs = {lang for pair in pairs for lang in pair}
    missing = sorted(lang for lang in langs if lang not in stats)
    if missing:
        raise MissingLanguageError(
            f"no corpus statistics for language(s): {', '.join(missing)}"
        )

    pair_list = sorted(set(pairs))
    pair_jsds = {
        (src, tgt): jsd(stats[src].ngram_dist, stats[tgt].ngram_dist)
        for src, tgt in pair_list
    }
    try:
        lex = lexical_similarity(pair_jsds)
    except DegenerateNormalizationError:
        warnings.warn(
            "all pairwise n-gram divergences are zero; "
            "setting lexical similarity to 1 for every pair",
            stacklevel=2,
        )
        lex = {pair: 1.0 for pair in pair_list}
    ttrs = {lang: stats[lang].ttr for lang in langs}
    morph = morph_similarity(ttrs, pair_list)

    rows = []
    for src, tgt in pair_list:
        phono = synt = None
        if typology is not None:
            src_ph = typology.get(src, "phonological")
            tgt_ph = typology.get(tgt, "phonological")
            if src_ph is not None and tgt_ph is not None:
                phono = iou_similarity(src_ph, tgt_ph)
            src_sy = typology.get(src, "syntactic")
            tgt_sy = typology.get(tgt, "syntactic")
            if src_sy is not None and tgt_sy is not None:
                synt = iou_similarity(src_sy, tgt_sy)

        emb = None
        if centroids is not None and src in centroids and tgt in centroids:
            emb = centroid_cosine(centroids[src], centroids[tgt])

        lm_src = lm_metrics.get(src) if lm_metrics else None
        lm_tgt = lm_metrics.get(tgt) if lm_metrics else None

        rows.append(
            PairFeatureVector(
                task=task,
                source=src,
                target=tgt,
                lex=lex[(src, tgt)],
                morph=morph[(src, tgt)],
                phono=phono,
                synt=synt,
                emb=emb,
                v_r=vocab_ratio(stats[src], stats[tgt]),
                sent_len=sentlen_ratio(stats[src], stats[tgt]),
                lm_l_src=lm_src.lm_l if lm_src else None,
                lm_l_tgt=lm_tgt.lm_l if lm_tgt else None,
                lm_em_src=lm_src.lm_em if lm_src else None,
                lm_em_tgt=lm_tgt.lm_em if lm_tgt else None,
                s_src=source_scores.get(src) if source_scores else None,
            )
        )
    rows.sort(key=lambda row: (row.task, row.source, row.target))
    return rows


# ---------------------------------------------------------------------------
# File formats


def _format_cell(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def write_feature_table(
    rows: Iterable[PairFeatureVector],
    path: str | Path,
    metadata: Optional[Mapping[str, object]] = None,
) -> None:
    """Write the feature-table CSV; absent features become empty fields."""
    lines = [f"# {key}={value}" for key, value in (metadata or {}).items()]
    lines.append("task,source,target," + ",".join(FEATURE_COLUMNS))
    for row in rows:
        cells = [row.task, row.source, row.target]
        cells += [_format_cell(getattr(row, name)) for name in FEATURE_COLUMNS]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_feature_table(path: str | Path) -> list[PairFeatureVector]:
    """Read a feature-table CSV produced by :func:`write_feature_table`."""
    path = Path(path)
    lines = [
        l for l in path.read_text(encoding="utf-8").splitlines()
        if l.strip() and not l.startswith("#")
    ]
    if not lines:
        raise ValueError(f"{path}: empty feature table")
    header = lines[0].split(",")
    expected = ["task", "source", "target", *FEATURE_COLUMNS]
    if header != expected:
        raise ValueError(f"{path}: unexpected header {header!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(expected):
            raise ValueError(f"{path}:{lineno}: expected {len(expected)} fields")
        values = {
            name: (float(cell) if cell != "" else None)
            for name, cell in zip(FEATURE_COLUMNS, cells[3:])
        }
        rows.append(
            PairFeatureVector(task=cells[0], source=cells[1], target=cells[2], **values)
        )
    return rows


def load_centroids(path: str | Path) -> dict[str, EmbeddingCentroid]:
    """Load a centroid TSV of ``lang \\t v1,v2,...,vd`` rows.

    ``#`` lines carry provenance metadata and are skipped. All vectors
    must share one dimension.
    """
    path = Path(path)
    centroids: dict[str, EmbeddingCentroid] = {}
    dim: Optional[int] = None
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = raw.split("\t")
        if len(fields) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'lang<TAB>v1,v2,...'")
        lang = fields[0].strip()
        vector = np.array([float(x) for x in fields[1].split(",")], dtype=float)
        if dim is None:
            dim = vector.size
        elif vector.size != dim:
            raise ValueError(
                f"{path}:{lineno}: centroid for {lang!r} has dimension "
                f"{vector.size}, expected {dim}"
            )
        centroids[lang] = EmbeddingCentroid(language=lang, vector=vector)
    return centroids


def write_centroids(
    centroids: Mapping[str, EmbeddingCentroid],
    path: str | Path,
    metadata: Optional[Mapping[str, object]] = None,
) -> None:
    lines = [f"# {key}={value}" for key, value in (metadata or {}).items()]
    for lang in sorted(centroids):
        vec = ",".join(f"{x:.8e}" for x in centroids[lang].vector)
        lines.append(f"{lang}\t{vec}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
