"""Corpus ingestion and per-language text statistics.

Everything downstream (lexical divergence, morphological richness,
vocabulary and sentence-length ratios) is computed from the numbers
gathered here. Tokens are Unicode-whitespace-delimited; character
n-grams are taken over raw lines, whitespace included, with no
lowercasing or punctuation stripping.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

__all__ = [
    "Corpus",
    "CorpusStats",
    "EmptyCorpusError",
    "DEFAULT_TOKEN_BUDGET",
    "tokenize",
    "char_ngrams",
    "compute_corpus_stats",
    "read_corpus",
    "load_corpora",
]

# TTR is length-sensitive, so cross-language comparisons need a fixed
# measurement budget. 100k tokens is the default cap; pass token_budget
# explicitly to change it.
DEFAULT_TOKEN_BUDGET = 100_000


class EmptyCorpusError(ValueError):
    """No tokens left to measure after token-budget truncation."""


@dataclass(frozen=True)
class Corpus:
    """One language's text, one sentence per entry.

    ``token_budget``, when set, caps how many tokens the statistics are
    computed over (the longest sentence prefix whose token total stays
    within the budget).
    """

    language: str
    sentences: tuple[str, ...]
    token_budget: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.language or self.language != self.language.lower():
            raise ValueError(
                f"language code must be non-empty and lowercase, got {self.language!r}"
            )
        if not self.sentences:
            raise ValueError(f"corpus {self.language!r} has no sentences")
        if self.token_budget is not None and self.token_budget < 1:
            raise ValueError("token_budget must be a positive token count")


@dataclass(frozen=True)
class CorpusStats:
    """Measured statistics for one language.

    ``ngram_dist`` maps each observed character n-gram to its relative
    frequency; entries are strictly positive and sum to 1. Instances are
    immutable and safe to share across threads.
    """

    language: str
    ngram_dist: dict[str, float]
    ttr: float
    vocab_size: int
    avg_sent_len: float
    token_count: int


def tokenize(line: str) -> list[str]:
    """Split a line on Unicode whitespace runs; never yields empty tokens."""
    return line.split()


def char_ngrams(line: str, n: int) -> list[str]:
    """All contiguous character windows of length ``n`` over the raw line."""
    if n < 1:
        raise ValueError(f"n-gram length must be >= 1, got {n}")
    return [line[i : i + n] for i in range(len(line) - n + 1)]


def _measured_prefix(corpus: Corpus) -> tuple[list[str], list[list[str]], int]:
    """Longest sentence prefix whose token total fits the corpus budget."""
    budget = corpus.token_budget
    sentences: list[str] = []
    token_lists: list[list[str]] = []
    total = 0
    for sent in corpus.sentences:
        tokens = tokenize(sent)
        if budget is not None and total + len(tokens) > budget:
            break
        sentences.append(sent)
        token_lists.append(tokens)
        total += len(tokens)
    return sentences, token_lists, total


def compute_corpus_stats(corpus: Corpus, n: int = 3) -> CorpusStats:
    """Measure n-gram distribution, TTR, vocabulary size and sentence length.

    Deterministic: identical input bytes produce identical stats, including
    the insertion order of ``ngram_dist``.
    """
    if n < 1:
        raise ValueError(f"n-gram length must be >= 1, got {n}")
    sentences, token_lists, token_count = _measured_prefix(corpus)
    if token_count == 0:
        raise EmptyCorpusError(
            f"corpus {corpus.language!r} has no tokens within the "
            f"token budget ({corpus.token_budget!r})"
        )

    vocab: set[str] = set()
    for tokens in token_lists:
        vocab.update(tokens)

    gram_counts: Counter[str] = Counter()
    for sent in sentences:
        gram_counts.update(char_ngrams(sent, n))
    if not gram_counts:
        raise ValueError(
            f"corpus {corpus.language!r} has no character {n}-grams "
            "(every measured line is shorter than n)"
        )
    total_grams = sum(gram_counts.values())
    ngram_dist = {gram: count / total_grams for gram, count in gram_counts.items()}

    return CorpusStats(
        language=corpus.language,
        ngram_dist=ngram_dist,
        ttr=len(vocab) / token_count,
        vocab_size=len(vocab),
        avg_sent_len=token_count / len(sentences),
        token_count=token_count,
    )


def read_corpus(
    path: str | Path,
    language: Optional[str] = None,
    token_budget: Optional[int] = None,
) -> Corpus:
    """Read a ``<lang>.txt`` corpus file, one sentence per line.

    Blank lines are dropped. The language code defaults to the file stem.
    """
    path = Path(path)
    lang = language if language is not None else path.stem
    lines = path.read_text(encoding="utf-8").splitlines()
    sentences = [line for line in lines if line.strip()]
    return Corpus(language=lang, sentences=tuple(sentences), token_budget=token_budget)


def load_corpora(
    directory: str | Path,
    languages: list[str],
    token_budget: Optional[int] = None,
) -> dict[str, Corpus]:
    """Load ``<lang>.txt`` for every requested language from a directory."""
    directory = Path(directory)
    corpora: dict[str, Corpus] = {}
    for lang in languages:
        path = directory / f"{lang}.txt"
        if not path.is_file():
            raise FileNotFoundError(f"no corpus file for language {lang!r}: {path}")
        corpora[lang] = read_corpus(path, language=lang, token_budget=token_budget)
    return corpora
