"""Span-mask planning and language-model score aggregation.

This side of the pipeline never runs a neural model. It decides which
token spans of each sentence get masked (deterministically, from a
seed), and it folds externally produced per-sentence scoring records
into two per-language metrics:

* ``lm_l``  mean per-sentence sum of masked-token log-likelihoods
* ``lm_em`` fraction of sentences whose masked spans were all
  reproduced exactly by greedy decoding
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import Corpus, tokenize

__all__ = [
    "MaskPlan",
    "LMRecord",
    "LMMetrics",
    "DEFAULT_MASK_DENSITY",
    "DEFAULT_MEAN_SPAN_LEN",
    "generate_mask_plan",
    "plan_corpus_masks",
    "aggregate_lm_records",
    "write_mask_plans",
    "read_mask_plans",
    "write_lm_records",
    "read_lm_records",
]

# Matches the usual span-corruption pre-training noise settings.
DEFAULT_MASK_DENSITY = 0.15
DEFAULT_MEAN_SPAN_LEN = 3


@dataclass(frozen=True)
class MaskPlan:
    """Masked spans for one sentence: (start token index, length) pairs.

    Spans are sorted, within bounds at generation time, and separated by
    at least one unmasked token (adjacent spans would merge).
    """

    sentence_id: int
    spans: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "spans", tuple((int(s), int(l)) for s, l in self.spans))
        prev_end = None
        for start, length in self.spans:
            if start < 0 or length < 1:
                raise ValueError(f"invalid span ({start}, {length})")
            if prev_end is not None and start <= prev_end:
                raise ValueError("spans must be sorted and non-adjacent")
            prev_end = start + length

    @property
    def masked_token_count(self) -> int:
        return sum(length for _, length in self.spans)


@dataclass(frozen=True)
class LMRecord:
    """One scored sentence: summed masked-token log-likelihood and span EM."""

    language: str
    sentence_id: int
    loglik: float
    all_spans_exact: bool

    def __post_init__(self) -> None:
        if not math.isfinite(self.loglik) or self.loglik > 0:
            raise ValueError(
                f"loglik must be finite and <= 0, got {self.loglik!r} "
                f"({self.language}#{self.sentence_id})"
            )


@dataclass(frozen=True)
class LMMetrics:
    language: str
    lm_l: float
    lm_em: float
    n_sentences: int


def _span_lengths(rng: np.random.Generator, budget: int, mean_span_len: int) -> list[int]:
    """Split the masked-token budget into span lengths around the mean."""
    n_spans = max(1, int(math.floor(budget / mean_span_len + 0.5)))
    n_spans = min(n_spans, budget)
    if n_spans == 1:
        return [budget]
    # Uniform composition of `budget` into n_spans positive parts.
    cuts = np.sort(rng.choice(budget - 1, size=n_spans - 1, replace=False)) + 1
    bounds = np.concatenate(([0], cuts, [budget]))
    return list(np.diff(bounds).astype(int))


def generate_mask_plan(
    tokens: Sequence[str],
    seed: int | Sequence[int],
    density: float = DEFAULT_MASK_DENSITY,
    mean_span_len: int = DEFAULT_MEAN_SPAN_LEN,
    sentence_id: int = 0,
) -> MaskPlan:
    """Deterministic span plan for one tokenized sentence.

    Masks ``max(1, round(density * len(tokens)))`` tokens, split into
    spans whose count targets ``budget / mean_span_len``, placed
    uniformly at random with at least one unmasked token between spans.
    Identical (tokens, seed) inputs give identical plans on every
    platform (PCG64 stream).
    """
    if not 0.0 < density < 1.0:
        raise ValueError(f"density must lie in (0, 1), got {density}")
    if mean_span_len < 1:
        raise ValueError(f"mean_span_len must be >= 1, got {mean_span_len}")
    n_tokens = len(tokens)
    if n_tokens < 1:
        raise ValueError("cannot plan masks for an empty sentence")

    rng = np.random.default_rng(seed)
    budget = min(n_tokens, max(1, int(math.floor(density * n_tokens + 0.5))))
    lengths = _span_lengths(rng, budget, mean_span_len)
    # Non-adjacency needs a free token between consecutive spans.
    max_spans = n_tokens - budget + 1
    while len(lengths) > max_spans:
        lengths[-2] += lengths[-1]
        lengths.pop()

    k = len(lengths)
    slack = n_tokens - budget - (k - 1)
    # Distribute the slack over the k+1 gaps (before, between, after)
    # as a uniform composition into non-negative parts.
    if slack > 0:
        dividers = np.sort(rng.choice(slack + k, size=k, replace=False))
        gaps = np.diff(np.concatenate(([-1], dividers, [slack + k]))) - 1
    else:
        gaps = np.zeros(k + 1, dtype=int)

    spans = []
    position = int(gaps[0])
    for i, length in enumerate(lengths):
        spans.append((position, int(length)))
        position += int(length) + 1 + int(gaps[i + 1])
    return MaskPlan(sentence_id=sentence_id, spans=tuple(spans))


def _sentence_seed(seed: int, language: str, sentence_id: int) -> list[int]:
    # crc32 keeps the per-language stream stable across platforms.
    return [seed, zlib.crc32(language.encode("utf-8")), sentence_id]


def plan_corpus_masks(
    corpus: Corpus,
    seed: int,
    density: float = DEFAULT_MASK_DENSITY,
    mean_span_len: int = DEFAULT_MEAN_SPAN_LEN,
) -> list[MaskPlan]:
    """Mask plans for every sentence of a corpus that has tokens."""
    plans = []
    for sentence_id, sentence in enumerate(corpus.sentences):
        tokens = tokenize(sentence)
        if not tokens:
            continue
        plans.append(
            generate_mask_plan(
                tokens,
                seed=_sentence_seed(seed, corpus.language, sentence_id),
                density=density,
                mean_span_len=mean_span_len,
                sentence_id=sentence_id,
            )
        )
    return plans


def aggregate_lm_records(records: Iterable[LMRecord]) -> dict[str, LMMetrics]:
    """Per-language means over scoring records.

    Summation order is pinned by (language, sentence_id), so the result
    does not depend on record order.
    """
    records = sorted(records, key=lambda r: (r.language, r.sentence_id))
    if not records:
        raise ValueError("no scoring records supplied")
    by_lang: dict[str, list[LMRecord]] = {}
    for record in records:
        by_lang.setdefault(record.language, []).append(record)
    metrics = {}
    for lang, recs in by_lang.items():
        metrics[lang] = LMMetrics(
            language=lang,
            lm_l=math.fsum(r.loglik for r in recs) / len(recs),
            lm_em=sum(1 for r in recs if r.all_spans_exact) / len(recs),
            n_sentences=len(recs),
        )
    return metrics


# ---------------------------------------------------------------------------
# File formats

_MASK_PLAN_HEADER = "lang,sentence_id,start,length"
_LM_RECORDS_HEADER = "lang,sentence_id,loglik,all_spans_exact"


def _metadata_lines(metadata: Mapping[str, object]) -> list[str]:
    return [f"# {key}={value}" for key, value in metadata.items()]


def _parse_metadata(lines: Iterable[str]) -> dict[str, str]:
    meta = {}
    for line in lines:
        body = line.lstrip("# ").strip()
        if "=" in body:
            key, value = body.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


def write_mask_plans(
    plans: Mapping[str, Sequence[MaskPlan]],
    path: str | Path,
    density: float,
    mean_span_len: int,
    seed: int,
) -> None:
    """Mask-plan CSV: one row per span, with generation parameters on top."""
    lines = _metadata_lines(
        {"density": density, "mean_span_len": mean_span_len, "seed": seed}
    )
    lines.append(_MASK_PLAN_HEADER)
    for lang in sorted(plans):
        for plan in sorted(plans[lang], key=lambda p: p.sentence_id):
            for start, length in plan.spans:
                lines.append(f"{lang},{plan.sentence_id},{start},{length}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mask_plans(path: str | Path) -> tuple[dict[str, list[MaskPlan]], dict[str, str]]:
    """Read a mask-plan CSV back into per-language plans plus its metadata."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    comments = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if l and not l.startswith("#")]
    if not body or body[0] != _MASK_PLAN_HEADER:
        raise ValueError(f"{path}: expected header {_MASK_PLAN_HEADER!r}")
    spans: dict[tuple[str, int], list[tuple[int, int]]] = {}
    for lineno, line in enumerate(body[1:], start=2):
        cells = line.split(",")
        if len(cells) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 fields")
        lang, sid, start, length = cells
        spans.setdefault((lang, int(sid)), []).append((int(start), int(length)))
    plans: dict[str, list[MaskPlan]] = {}
    for (lang, sid), pair_list in sorted(spans.items()):
        plans.setdefault(lang, []).append(
            MaskPlan(sentence_id=sid, spans=tuple(sorted(pair_list)))
        )
    return plans, _parse_metadata(comments)


def write_lm_records(
    records: Iterable[LMRecord],
    path: str | Path,
    metadata: Optional[Mapping[str, object]] = None,
) -> None:
    """LM-records CSV with booleans as 0/1 and ``# key=value`` metadata."""
    lines = _metadata_lines(metadata or {})
    lines.append(_LM_RECORDS_HEADER)
    for record in sorted(records, key=lambda r: (r.language, r.sentence_id)):
        lines.append(
            f"{record.language},{record.sentence_id},"
            f"{record.loglik:.6f},{int(record.all_spans_exact)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_lm_records(path: str | Path) -> tuple[list[LMRecord], dict[str, str]]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    comments = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if l and not l.startswith("#")]
    if not body or body[0] != _LM_RECORDS_HEADER:
        raise ValueError(f"{path}: expected header {_LM_RECORDS_HEADER!r}")
    records = []
    for lineno, line in enumerate(body[1:], start=2):
        cells = line.split(",")
        if len(cells) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 fields")
        if cells[3] not in ("0", "1"):
            raise ValueError(f"{path}:{lineno}: all_spans_exact must be 0 or 1")
        records.append(
            LMRecord(
                language=cells[0],
                sentence_id=int(cells[1]),
                loglik=float(cells[2]),
                all_spans_exact=cells[3] == "1",
            )
        )
    return records, _parse_metadata(comments)
