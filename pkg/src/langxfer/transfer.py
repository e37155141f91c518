"""Applying fitted models: zero-shot scores, few-shot curves, rankings.

Few-shot growth follows a log law in the number of target-language
samples: predicted score = s0 + alpha * ln(n + 1). The natural log is
used internally; alpha * ln(10) is the per-decade gain (the slope per
10x increase in data), reported alongside for readability.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .regression import (
    CVResult,
    Dataset,
    RegressionModel,
    Scaler,
    TransferObservation,
    default_feature_names,
)
from .similarity import PairFeatureVector

__all__ = [
    "FewShotCurve",
    "RankEntry",
    "SourceRanking",
    "Prediction",
    "SCORE_RANGE",
    "BUILTIN_TASKS",
    "N_SHOT_GRID",
    "builtin_model",
    "predict_zero_shot",
    "fit_alpha",
    "predict_n_shot",
    "per_decade_gain",
    "rank_sources",
    "a_src",
    "gold_best_sources",
    "cv_best_source_accuracy",
    "alpha_dataset",
    "write_curves",
    "read_curves",
]

# Task scores are percentages; predictions outside this range are
# flagged but never clipped.
SCORE_RANGE = (0.0, 100.0)

# The sample-count grid used for emitted prediction curves.
N_SHOT_GRID = (0, 10, 30, 50, 100, 250)

# Published zero-shot models over min-max scaled features.
_BUILTIN = {
    "qa": (
        -65.38,
        {"s_src": 0.62, "synt": 56.49, "phono": 156.4, "morph": -29.73,
         "lm_em_tgt": 129.3},
    ),
    "ner": (
        -42.8,
        {"s_src": 1.07, "synt": 14.63, "lm_em_tgt": 68.22, "lex": 4.09},
    ),
    "xnli": (
        27.62,
        {"s_src": 0.64, "phono": 10.12, "morph": -1.2, "lm_em_tgt": 46.87,
         "lex": 1.2},
    ),
}

BUILTIN_TASKS = tuple(sorted(_BUILTIN))


@dataclass(frozen=True)
class FewShotCurve:
    """Log-law score curve for one (task, source, target) pair."""

    task: str
    source: str
    target: str
    s0: float
    alpha: float


@dataclass(frozen=True)
class Prediction:
    score: float
    out_of_range: bool


@dataclass(frozen=True)
class RankEntry:
    source: str
    score: float
    out_of_range: bool


@dataclass(frozen=True)
class SourceRanking:
    """Candidate sources for one target, best first; ties sort by code."""

    task: str
    target: str
    n: int
    entries: tuple[RankEntry, ...]

    @property
    def best(self) -> str:
        return self.entries[0].source


def builtin_model(task: str) -> RegressionModel:
    """The published zero-shot model for qa, ner or xnli.

    The scaler is the identity, so inputs must already be scaled to
    [0, 1] (source score divided by 100, similarities as-is).
    """
    if task not in _BUILTIN:
        raise KeyError(
            f"unknown task {task!r}; built-in models exist for {BUILTIN_TASKS}"
        )
    intercept, coefficients = _BUILTIN[task]
    return RegressionModel(
        task=task,
        kind="zero_shot",
        intercept=intercept,
        coefficients=dict(coefficients),
        scaler=Scaler.identity(list(coefficients)),
        lam=0.0,
        metadata={"origin": "published"},
    )


def _out_of_range(score: float) -> bool:
    return not SCORE_RANGE[0] <= score <= SCORE_RANGE[1]


def predict_zero_shot(
    model: RegressionModel, features: PairFeatureVector | Mapping[str, Optional[float]]
) -> Prediction:
    """Linear zero-shot prediction; never clipped, range flagged."""
    if isinstance(features, PairFeatureVector):
        features = features.features()
    score = model.raw_score(features)
    return Prediction(score=score, out_of_range=_out_of_range(score))


def fit_alpha(
    observations: Sequence[TransferObservation], s0: float
) -> FewShotCurve:
    """Least-squares slope of (score - s0) against ln(n+1), through the origin."""
    few_shot = [obs for obs in observations if obs.n > 0]
    if not few_shot:
        raise ValueError("need at least one observation with n > 0")
    keys = {(obs.task, obs.source, obs.target) for obs in few_shot}
    if len(keys) > 1:
        raise ValueError(f"observations span multiple pairs: {sorted(keys)}")
    task, source, target = next(iter(keys))
    x = np.log([obs.n + 1.0 for obs in few_shot])
    y = np.array([obs.score - s0 for obs in few_shot])
    alpha = float((x @ y) / (x @ x))
    return FewShotCurve(task=task, source=source, target=target, s0=s0, alpha=alpha)


def predict_n_shot(curve: FewShotCurve, n: int) -> float:
    """Score after n target-language samples: s0 + alpha * ln(n+1)."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return curve.s0 + curve.alpha * math.log(n + 1.0)


def per_decade_gain(curve: FewShotCurve) -> float:
    """Score gain per 10x increase in samples (alpha * ln 10)."""
    return curve.alpha * math.log(10.0)


def rank_sources(
    model: RegressionModel,
    target: str,
    candidates: Iterable[PairFeatureVector],
    n: int = 0,
    curves: Optional[Mapping[tuple[str, str], FewShotCurve]] = None,
    include_self: bool = False,
) -> SourceRanking:
    """Rank candidate source languages for a target, best first.

    At n=0 each candidate is scored by the zero-shot model. For n>0 the
    model's zero-shot prediction is composed with the candidate's curve
    slope: score = predicted_s0 + alpha * ln(n+1). Candidates with
    incomplete features (or, for n>0, no curve) are skipped with a
    warning; ties order lexicographically by source code.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    entries = []
    task = model.task
    for row in candidates:
        if row.target != target:
            continue
        if row.source == target and not include_self:
            continue
        task = row.task or task
        try:
            prediction = predict_zero_shot(model, row)
        except Exception as exc:  # incomplete features
            warnings.warn(
                f"skipping candidate {row.source!r}: {exc}", stacklevel=2
            )
            continue
        score = prediction.score
        if n > 0:
            curve = (curves or {}).get((row.source, target))
            if curve is None:
                warnings.warn(
                    f"skipping candidate {row.source!r}: no few-shot curve "
                    f"for ({row.source}, {target})",
                    stacklevel=2,
                )
                continue
            score = score + curve.alpha * math.log(n + 1.0)
        entries.append(RankEntry(row.source, score, _out_of_range(score)))
    if not entries:
        raise ValueError(f"no scoreable candidate sources for target {target!r}")
    entries.sort(key=lambda e: (-e.score, e.source))
    return SourceRanking(task=task, target=target, n=n, entries=tuple(entries))


def a_src(predicted: Mapping[str, str], gold: Mapping[str, str]) -> float:
    """Fraction of targets whose predicted best source matches the observed one."""
    if set(predicted) != set(gold):
        raise ValueError(
            f"target sets differ: {sorted(set(predicted) ^ set(gold))}"
        )
    if not predicted:
        raise ValueError("no targets to score")
    hits = sum(1 for target in predicted if predicted[target] == gold[target])
    return hits / len(predicted)


def gold_best_sources(
    observations: Sequence[TransferObservation], n: int = 0
) -> dict[str, str]:
    """Observed best source per target at a given n (ties: smallest code)."""
    best: dict[str, tuple[float, str]] = {}
    for obs in observations:
        if obs.n != n or obs.source == obs.target:
            continue
        incumbent = best.get(obs.target)
        candidate = (obs.score, obs.source)
        if (
            incumbent is None
            or candidate[0] > incumbent[0]
            or (candidate[0] == incumbent[0] and candidate[1] < incumbent[1])
        ):
            best[obs.target] = candidate
    return {target: source for target, (score, source) in best.items()}


def cv_best_source_accuracy(cv_result: CVResult) -> float:
    """A_src over CV folds, using each fold's own predictions as the ranking."""
    predicted: dict[str, str] = {}
    gold: dict[str, str] = {}
    for fold in cv_result.folds:
        order = sorted(
            range(len(fold.test_sources)),
            key=lambda i: (-fold.predictions[i], fold.test_sources[i]),
        )
        gold_order = sorted(
            range(len(fold.test_sources)),
            key=lambda i: (-fold.golds[i], fold.test_sources[i]),
        )
        predicted[fold.target] = fold.test_sources[order[0]]
        gold[fold.target] = fold.test_sources[gold_order[0]]
    return a_src(predicted, gold)


def alpha_dataset(
    features: Sequence[PairFeatureVector],
    observations: Sequence[TransferObservation],
    feature_names: Optional[Sequence[str]] = None,
) -> Dataset:
    """One row per pair with y = fitted slope and s0 as an extra feature.

    Pairs need a zero-shot observation (the curve anchor) and at least
    one n>0 observation; others are excluded and counted.
    """
    by_key = {(row.task, row.source, row.target): row for row in features}
    grouped: dict[tuple[str, str, str], list[TransferObservation]] = {}
    for obs in observations:
        grouped.setdefault((obs.task, obs.source, obs.target), []).append(obs)

    if feature_names is None:
        joined = [by_key[key] for key in grouped if key in by_key]
        feature_names = default_feature_names(joined)
    pair_names = tuple(feature_names)
    names = ("s0",) + pair_names

    kept_X, kept_y, srcs, tgts, s_scores = [], [], [], [], []
    excluded = 0
    tasks = set()
    for key in sorted(grouped):
        obs_list = grouped[key]
        zero = [o for o in obs_list if o.n == 0]
        few = [o for o in obs_list if o.n > 0]
        row = by_key.get(key)
        if not zero or not few or row is None:
            excluded += 1
            continue
        values = [row.feature(name) for name in pair_names]
        if any(v is None for v in values):
            excluded += 1
            continue
        s0 = zero[0].score
        curve = fit_alpha(few, s0=s0)
        kept_X.append([s0, *values])
        kept_y.append(curve.alpha)
        srcs.append(key[1])
        tgts.append(key[2])
        s_scores.append(
            zero[0].source_score if zero[0].source_score is not None else math.nan
        )
        tasks.add(key[0])
    if not kept_y:
        raise ValueError("no pair has both a zero-shot anchor and n>0 observations")
    if len(tasks) > 1:
        raise ValueError(f"observations span multiple tasks: {sorted(tasks)}")
    return Dataset(
        task=next(iter(tasks)),
        feature_names=names,
        X=np.array(kept_X, dtype=float),
        y=np.array(kept_y, dtype=float),
        n_shots=np.zeros(len(kept_y), dtype=int),
        sources=tuple(srcs),
        targets=tuple(tgts),
        source_scores=np.array(s_scores, dtype=float),
        n_excluded=excluded,
    )


# ---------------------------------------------------------------------------
# Curve file

_CURVES_HEADER = "task,source,target,s0,alpha"


def write_curves(curves: Iterable[FewShotCurve], path: str | Path) -> None:
    lines = [_CURVES_HEADER]
    for curve in sorted(curves, key=lambda c: (c.task, c.source, c.target)):
        lines.append(
            f"{curve.task},{curve.source},{curve.target},"
            f"{curve.s0:.6f},{curve.alpha:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_curves(path: str | Path) -> list[FewShotCurve]:
    path = Path(path)
    lines = [
        l for l in path.read_text(encoding="utf-8").splitlines()
        if l.strip() and not l.startswith("#")
    ]
    if not lines or lines[0] != _CURVES_HEADER:
        raise ValueError(f"{path}: expected header {_CURVES_HEADER!r}")
    curves = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != 5:
            raise ValueError(f"{path}:{lineno}: expected 5 fields")
        curves.append(
            FewShotCurve(
                task=cells[0],
                source=cells[1],
                target=cells[2],
                s0=float(cells[3]),
                alpha=float(cells[4]),
            )
        )
    return curves
