"""Run a pretrained encoder-decoder over per-language corpora.

Two exports, in the exact file formats the feature toolkit ingests:

* centroids TSV: per language, the mean over k sentence embeddings,
  each sentence embedding being the attention-masked mean of encoder
  hidden states (layer configurable, final layer by default);
* LM records CSV: per planned sentence, the summed log-likelihood of
  the masked tokens under teacher forcing, plus an exact-match flag
  telling whether greedy decoding reproduced every masked span.

Mask plans are consumed from the toolkit's ``mask-plan`` output rather
than re-sampled, so both sides agree on spans by construction. Given
fixed weights, inputs and seed, outputs are byte-identical across runs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

__all__ = [
    "ProbeConfig",
    "ProbeError",
    "load_scorer",
    "read_corpus_lines",
    "sentence_embeddings",
    "export_centroids",
    "read_mask_plans",
    "span_corruption_pair",
    "score_sentence",
    "export_lm_records",
]

_MASK_PLAN_HEADER = "lang,sentence_id,start,length"
_LM_RECORDS_HEADER = "lang,sentence_id,loglik,all_spans_exact"


class ProbeError(ValueError):
    """Bad probe input: missing files, id mismatches, unusable model."""


@dataclass(frozen=True)
class ProbeConfig:
    model: str
    corpora_dir: Path
    out_dir: Path
    masks_path: Optional[Path] = None
    k: int = 64
    layer: int = -1
    seed: int = 0
    languages: Optional[tuple[str, ...]] = None
    batch_size: int = 16


def load_scorer(model_ref: str):
    """Tokenizer and seq2seq model in eval mode; errors wrap as ProbeError."""
    from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_ref)
        model = AutoModelForSeq2SeqLM.from_pretrained(model_ref)
    except Exception as exc:
        raise ProbeError(f"cannot load model {model_ref!r}: {exc}") from exc
    model.eval()
    # unknown tokens map to unk, not None, so compare against it explicitly
    sentinel = tokenizer.convert_tokens_to_ids("<extra_id_0>")
    if sentinel is None or sentinel == tokenizer.unk_token_id:
        raise ProbeError(
            f"tokenizer for {model_ref!r} lacks <extra_id_*> span sentinels"
        )
    return tokenizer, model


def _sentinel_ids(tokenizer, count: int) -> list[int]:
    """Ids for <extra_id_0>..<extra_id_{count-1}>; error if any is missing."""
    ids = [
        tokenizer.convert_tokens_to_ids(f"<extra_id_{i}>") for i in range(count)
    ]
    unk = tokenizer.unk_token_id
    if any(tok_id is None or tok_id == unk for tok_id in ids) or len(set(ids)) != count:
        raise ProbeError(
            f"tokenizer provides fewer than {count} span sentinels; "
            "the sentence has too many masked spans"
        )
    return ids


def read_corpus_lines(path: Path) -> list[str]:
    lines = path.read_text(encoding="utf-8").splitlines()
    return [line for line in lines if line.strip()]


def _corpus_files(config: ProbeConfig) -> dict[str, Path]:
    directory = Path(config.corpora_dir)
    if not directory.is_dir():
        raise ProbeError(f"corpora directory not found: {directory}")
    if config.languages:
        files = {lang: directory / f"{lang}.txt" for lang in config.languages}
        missing = [str(p) for p in files.values() if not p.is_file()]
        if missing:
            raise ProbeError(f"missing corpus file(s): {', '.join(missing)}")
        return files
    files = {p.stem: p for p in sorted(directory.glob("*.txt"))}
    if not files:
        raise ProbeError(f"no <lang>.txt corpora in {directory}")
    return files


# ---------------------------------------------------------------------------
# Centroids


@torch.no_grad()
def sentence_embeddings(
    tokenizer,
    model,
    sentences: Sequence[str],
    layer: int = -1,
    batch_size: int = 16,
) -> np.ndarray:
    """Attention-masked mean of encoder hidden states per sentence."""
    encoder = model.get_encoder()
    chunks = []
    for start in range(0, len(sentences), batch_size):
        batch = list(sentences[start : start + batch_size])
        encoded = tokenizer(batch, return_tensors="pt", padding=True)
        out = encoder(
            input_ids=encoded.input_ids,
            attention_mask=encoded.attention_mask,
            output_hidden_states=True,
        )
        hidden = out.hidden_states[layer]
        mask = encoded.attention_mask.unsqueeze(-1).to(hidden.dtype)
        pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
        chunks.append(pooled.to(torch.float64).numpy())
    return np.concatenate(chunks, axis=0)


def export_centroids(config: ProbeConfig, tokenizer=None, model=None) -> Path:
    """One centroid row per language: mean over the first k sentences."""
    if tokenizer is None or model is None:
        tokenizer, model = load_scorer(config.model)
    torch.manual_seed(config.seed)
    files = _corpus_files(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "centroids.tsv"

    lines = [
        f"# model={config.model}",
        f"# k={config.k}",
        f"# layer={config.layer}",
        "# pooling=encoder_hidden_mean",
        f"# seed={config.seed}",
    ]
    for lang in sorted(files):
        sentences = read_corpus_lines(files[lang])
        if config.k > len(sentences):
            raise ProbeError(
                f"k={config.k} exceeds corpus size {len(sentences)} for {lang!r}"
            )
        sample = sentences[: config.k]
        vectors = sentence_embeddings(
            tokenizer, model, sample, layer=config.layer,
            batch_size=config.batch_size,
        )
        centroid = vectors.mean(axis=0)
        lines.append(lang + "\t" + ",".join(f"{x:.8e}" for x in centroid))
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out_path


# ---------------------------------------------------------------------------
# LM records


def read_mask_plans(path: Path) -> tuple[dict[str, dict[int, list[tuple[int, int]]]], dict[str, str]]:
    """Read the mask-plan CSV contract: lang,sentence_id,start,length."""
    path = Path(path)
    if not path.is_file():
        raise ProbeError(f"mask-plan file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    meta = {}
    for line in lines:
        if line.startswith("#") and "=" in line:
            key, value = line.lstrip("# ").split("=", 1)
            meta[key.strip()] = value.strip()
    body = [l for l in lines if l and not l.startswith("#")]
    if not body or body[0] != _MASK_PLAN_HEADER:
        raise ProbeError(f"{path}: expected header {_MASK_PLAN_HEADER!r}")
    plans: dict[str, dict[int, list[tuple[int, int]]]] = {}
    for lineno, line in enumerate(body[1:], start=2):
        cells = line.split(",")
        if len(cells) != 4:
            raise ProbeError(f"{path}:{lineno}: expected 4 fields")
        lang, sid, start, length = cells
        plans.setdefault(lang, {}).setdefault(int(sid), []).append(
            (int(start), int(length))
        )
    for by_sentence in plans.values():
        for spans in by_sentence.values():
            spans.sort()
    return plans, meta


def span_corruption_pair(
    words: Sequence[str], spans: Sequence[tuple[int, int]]
) -> tuple[str, str, list[list[str]]]:
    """Sentinel-corrupted input text, gold target text and gold span words."""
    input_parts: list[str] = []
    target_parts: list[str] = []
    gold_spans: list[list[str]] = []
    cursor = 0
    for i, (start, length) in enumerate(spans):
        sentinel = f"<extra_id_{i}>"
        input_parts.extend(words[cursor:start])
        input_parts.append(sentinel)
        masked = list(words[start : start + length])
        gold_spans.append(masked)
        target_parts.append(sentinel)
        target_parts.extend(masked)
        cursor = start + length
    input_parts.extend(words[cursor:])
    target_parts.append(f"<extra_id_{len(spans)}>")
    return " ".join(input_parts), " ".join(target_parts), gold_spans


def _segments_by_sentinel(
    ids: Sequence[int], sentinel_ids: list[int], eos_id: Optional[int]
) -> Optional[list[list[int]]]:
    """Token runs between consecutive sentinels; None if sentinels are off."""
    if eos_id is not None and eos_id in ids:
        ids = ids[: list(ids).index(eos_id)]
    positions = []
    for sentinel in sentinel_ids:
        ids_list = list(ids)
        if sentinel not in ids_list:
            return None
        pos = ids_list.index(sentinel)
        if positions and pos <= positions[-1]:
            return None
        positions.append(pos)
    segments = []
    for i in range(len(positions) - 1):
        segments.append(list(ids[positions[i] + 1 : positions[i + 1]]))
    return segments


@torch.no_grad()
def score_sentence(
    tokenizer, model, words: Sequence[str], spans: Sequence[tuple[int, int]]
) -> tuple[float, bool]:
    """Masked-token log-likelihood sum and greedy exact-match for one sentence."""
    input_text, target_text, _ = span_corruption_pair(words, spans)
    encoded = tokenizer(input_text, return_tensors="pt")
    target = tokenizer(target_text, return_tensors="pt")
    target_ids = target.input_ids

    sentinel_ids = _sentinel_ids(tokenizer, len(spans) + 1)
    special = set(sentinel_ids)
    for tok_id in (tokenizer.pad_token_id, tokenizer.eos_token_id):
        if tok_id is not None:
            special.add(tok_id)

    out = model(
        input_ids=encoded.input_ids,
        attention_mask=encoded.attention_mask,
        labels=target_ids,
    )
    logprobs = torch.log_softmax(out.logits[0].to(torch.float64), dim=-1)
    flat = target_ids[0]
    token_logprobs = logprobs[torch.arange(flat.size(0)), flat]
    content = torch.tensor(
        [int(tok_id) not in special for tok_id in flat.tolist()], dtype=torch.bool
    )
    loglik = float(token_logprobs[content].sum())
    # log-softmax can round to a hair above 0 for near-certain tokens
    loglik = min(loglik, 0.0)

    generated = model.generate(
        input_ids=encoded.input_ids,
        attention_mask=encoded.attention_mask,
        max_new_tokens=int(flat.size(0)) + 8,
        do_sample=False,
        num_beams=1,
    )[0].tolist()
    if generated and generated[0] == model.config.decoder_start_token_id:
        generated = generated[1:]
    gold_segments = _segments_by_sentinel(
        flat.tolist(), sentinel_ids, tokenizer.eos_token_id
    )
    pred_segments = _segments_by_sentinel(
        generated, sentinel_ids, tokenizer.eos_token_id
    )
    exact = pred_segments is not None and pred_segments == gold_segments
    return loglik, exact


def export_lm_records(config: ProbeConfig, tokenizer=None, model=None) -> Path:
    """Score every planned sentence; abort on any plan/corpus mismatch."""
    if config.masks_path is None:
        raise ProbeError("no mask-plan file given")
    if tokenizer is None or model is None:
        tokenizer, model = load_scorer(config.model)
    torch.manual_seed(config.seed)
    plans, plan_meta = read_mask_plans(Path(config.masks_path))
    files = _corpus_files(config)

    records = []
    for lang in sorted(plans):
        if lang not in files:
            raise ProbeError(f"mask plan references {lang!r} with no corpus file")
        sentences = read_corpus_lines(files[lang])
        for sentence_id in sorted(plans[lang]):
            if sentence_id >= len(sentences):
                raise ProbeError(
                    f"mask plan references {lang!r} sentence {sentence_id}, "
                    f"but the corpus has {len(sentences)} sentences"
                )
            words = sentences[sentence_id].split()
            spans = plans[lang][sentence_id]
            if not spans:
                warnings.warn(
                    f"no spans planned for {lang!r} sentence {sentence_id}; skipped",
                    stacklevel=2,
                )
                continue
            if any(start + length > len(words) for start, length in spans):
                raise ProbeError(
                    f"mask plan spans exceed {lang!r} sentence {sentence_id} "
                    f"({len(words)} tokens)"
                )
            loglik, exact = score_sentence(tokenizer, model, words, spans)
            records.append((lang, sentence_id, loglik, exact))

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "lm_records.csv"
    lines = []
    for key in ("density", "mean_span_len", "seed"):
        if key in plan_meta:
            lines.append(f"# {key}={plan_meta[key]}")
    lines.append(f"# model={config.model}")
    lines.append(_LM_RECORDS_HEADER)
    for lang, sentence_id, loglik, exact in records:
        lines.append(f"{lang},{sentence_id},{loglik:.6f},{int(exact)}")
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out_path
