"""Statistical engine: scaling, correlation, Lasso, RFE and grouped CV.

The regression pipeline is deliberately small and fully deterministic:

* min-max scale every feature to [0, 1] (constant columns map to 0),
* fit an L1-penalized least-squares model by cyclic coordinate descent,
* recursively eliminate the feature with the smallest absolute
  coefficient until ``k_keep`` remain,
* evaluate with leave-one-target-language-out cross-validation, where
  scaling is refit inside every training fold so held-out rows never
  touch the scaler.

The Lasso objective is ``(1/2m) * ||y - b0 - X b||^2 + lambda * ||b||_1``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats as scipy_stats

from . import __version__ as _tool_version
from .similarity import FEATURE_COLUMNS, PairFeatureVector

__all__ = [
    "TransferObservation",
    "Dataset",
    "Scaler",
    "RegressionModel",
    "CorrelationRow",
    "FoldResult",
    "CVResult",
    "UndefinedCorrelationError",
    "DegenerateSplitError",
    "IncompleteFeaturesError",
    "DEFAULT_LAMBDA",
    "DEFAULT_K_KEEP",
    "N_TRANSFORMS",
    "read_observations",
    "write_observations",
    "assemble_dataset",
    "zero_shot_dataset",
    "default_feature_names",
    "minmax_scale",
    "pearson",
    "pearson_pvalue",
    "correlation_report",
    "write_correlation_report",
    "lasso_fit",
    "lambda_max",
    "rfe",
    "fit_model",
    "lolo_cv",
    "rmse",
    "save_model",
    "load_model",
]

# lambda acts as tie-breaking regularization on scaled data; the per-task
# k_keep defaults mirror the built-in models' selected-set sizes.
DEFAULT_LAMBDA = 1e-3
DEFAULT_K_KEEP = {"qa": 5, "ner": 4, "xnli": 5}

_CD_TOL = 1e-8
_CD_MAX_SWEEPS = 10_000

N_TRANSFORMS = ("n", "log(n+1)", "log2(n+1)")


class UndefinedCorrelationError(ValueError):
    """Pearson correlation of a constant vector."""


class DegenerateSplitError(ValueError):
    """A cross-validation fold with an empty training or test side."""


class IncompleteFeaturesError(ValueError):
    """A prediction request missing one of the model's selected features."""


@dataclass(frozen=True)
class TransferObservation:
    """One measured transfer result.

    ``n`` is the number of target-language fine-tuning samples (0 for
    zero-shot), ``score`` the target-language task score and
    ``source_score`` the source's in-language score.
    """

    task: str
    source: str
    target: str
    n: int
    score: float
    source_score: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n}")


@dataclass(frozen=True)
class Dataset:
    """Design matrix plus aligned metadata for one task.

    Rows whose feature vectors were incomplete are dropped during
    assembly; ``n_excluded`` reports how many.
    """

    task: str
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    n_shots: np.ndarray
    sources: tuple[str, ...]
    targets: tuple[str, ...]
    source_scores: np.ndarray
    n_excluded: int = 0

    def __post_init__(self) -> None:
        m = len(self.y)
        if not (self.X.shape == (m, len(self.feature_names))
                and len(self.sources) == m
                and len(self.targets) == m
                and len(self.n_shots) == m
                and len(self.source_scores) == m):
            raise ValueError("dataset arrays have inconsistent shapes")

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, index: Sequence[int]) -> "Dataset":
        index = list(index)
        return replace(
            self,
            X=self.X[index],
            y=self.y[index],
            n_shots=self.n_shots[index],
            sources=tuple(self.sources[i] for i in index),
            targets=tuple(self.targets[i] for i in index),
            source_scores=self.source_scores[index],
            n_excluded=0,
        )

    def row_features(self, i: int) -> dict[str, float]:
        return dict(zip(self.feature_names, self.X[i]))


@dataclass(frozen=True)
class Scaler:
    """Per-feature (min, max) learned on training data.

    ``transform`` maps x to (x - min) / (max - min); constant features
    map to 0. The same object is reused at inference time, so values
    outside the observed range extrapolate linearly.
    """

    mins: dict[str, float]
    maxs: dict[str, float]

    @classmethod
    def fit(cls, X: np.ndarray, feature_names: Sequence[str]) -> "Scaler":
        return cls(
            mins={name: float(X[:, j].min()) for j, name in enumerate(feature_names)},
            maxs={name: float(X[:, j].max()) for j, name in enumerate(feature_names)},
        )

    @classmethod
    def identity(cls, feature_names: Sequence[str]) -> "Scaler":
        return cls(
            mins={name: 0.0 for name in feature_names},
            maxs={name: 1.0 for name in feature_names},
        )

    def transform_value(self, name: str, value: float) -> float:
        lo, hi = self.mins[name], self.maxs[name]
        if hi <= lo:
            return 0.0
        return (value - lo) / (hi - lo)

    def transform(self, X: np.ndarray, feature_names: Sequence[str]) -> np.ndarray:
        out = np.empty_like(np.asarray(X, dtype=float))
        for j, name in enumerate(feature_names):
            lo, hi = self.mins[name], self.maxs[name]
            out[:, j] = 0.0 if hi <= lo else (X[:, j] - lo) / (hi - lo)
        return out

    def to_dict(self) -> dict[str, dict[str, float]]:
        return {"min": dict(self.mins), "max": dict(self.maxs)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, float]]) -> "Scaler":
        return cls(mins=dict(data["min"]), maxs=dict(data["max"]))


@dataclass(frozen=True)
class RegressionModel:
    """A fitted (or built-in) linear model over scaled features."""

    task: str
    kind: str  # "zero_shot" or "alpha"
    intercept: float
    coefficients: dict[str, float]
    scaler: Scaler
    lam: float
    metadata: dict = field(default_factory=dict)

    def raw_score(self, features: Mapping[str, Optional[float]]) -> float:
        """Intercept plus coefficient-weighted scaled features, unclipped."""
        score = self.intercept
        for name, coef in self.coefficients.items():
            value = features.get(name)
            if value is None or not math.isfinite(value):
                raise IncompleteFeaturesError(
                    f"feature {name!r} required by the {self.task}/{self.kind} "
                    "model is missing"
                )
            score += coef * self.scaler.transform_value(name, value)
        return score


# ---------------------------------------------------------------------------
# Observations file


def read_observations(path: str | Path) -> list[TransferObservation]:
    """Read the observations CSV ``task,source,target,n,score,source_score``."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    body = [l for l in lines if l.strip() and not l.startswith("#")]
    header = "task,source,target,n,score,source_score"
    if not body or body[0] != header:
        raise ValueError(f"{path}: expected header {header!r}")
    observations = []
    for lineno, line in enumerate(body[1:], start=2):
        cells = line.split(",")
        if len(cells) != 6:
            raise ValueError(f"{path}:{lineno}: expected 6 fields")
        observations.append(
            TransferObservation(
                task=cells[0],
                source=cells[1],
                target=cells[2],
                n=int(cells[3]),
                score=float(cells[4]),
                source_score=float(cells[5]) if cells[5] != "" else None,
            )
        )
    return observations


def write_observations(
    observations: Iterable[TransferObservation], path: str | Path
) -> None:
    lines = ["task,source,target,n,score,source_score"]
    for obs in observations:
        s_src = "" if obs.source_score is None else f"{obs.source_score:.6f}"
        lines.append(
            f"{obs.task},{obs.source},{obs.target},{obs.n},{obs.score:.6f},{s_src}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Dataset assembly


def default_feature_names(
    rows: Sequence[PairFeatureVector],
) -> tuple[str, ...]:
    """Feature columns that are present in at least one supplied row."""
    return tuple(
        name
        for name in FEATURE_COLUMNS
        if any(row.feature(name) is not None for row in rows)
    )


def assemble_dataset(
    features: Sequence[PairFeatureVector],
    observations: Sequence[TransferObservation],
    feature_names: Optional[Sequence[str]] = None,
    zero_shot_only: bool = False,
) -> Dataset:
    """Join observations onto feature rows by (task, source, target).

    Rows missing any requested feature are excluded (counted in
    ``n_excluded``), never imputed. With ``zero_shot_only`` only n=0
    observations are kept.
    """
    by_key = {(row.task, row.source, row.target): row for row in features}
    selected = [o for o in observations if not (zero_shot_only and o.n > 0)]
    if feature_names is None:
        joined = [by_key[k] for o in selected
                  if (k := (o.task, o.source, o.target)) in by_key]
        feature_names = default_feature_names(joined)
    names = tuple(feature_names)

    tasks = {obs.task for obs in selected}
    if len(tasks) > 1:
        raise ValueError(f"observations span multiple tasks: {sorted(tasks)}")

    kept_X, kept_y, kept_n, srcs, tgts, s_scores = [], [], [], [], [], []
    excluded = 0
    for obs in selected:
        row = by_key.get((obs.task, obs.source, obs.target))
        if row is None:
            excluded += 1
            continue
        values = [row.feature(name) for name in names]
        if any(v is None for v in values):
            excluded += 1
            continue
        kept_X.append(values)
        kept_y.append(obs.score)
        kept_n.append(obs.n)
        srcs.append(obs.source)
        tgts.append(obs.target)
        if obs.source_score is not None:
            s_scores.append(obs.source_score)
        elif row.s_src is not None:
            s_scores.append(row.s_src)
        else:
            s_scores.append(math.nan)
    if not kept_y:
        raise ValueError("no observation joined a complete feature row")
    return Dataset(
        task=next(iter(tasks)) if tasks else "",
        feature_names=names,
        X=np.array(kept_X, dtype=float),
        y=np.array(kept_y, dtype=float),
        n_shots=np.array(kept_n, dtype=int),
        sources=tuple(srcs),
        targets=tuple(tgts),
        source_scores=np.array(s_scores, dtype=float),
        n_excluded=excluded,
    )


def zero_shot_dataset(
    features: Sequence[PairFeatureVector],
    observations: Sequence[TransferObservation],
    feature_names: Optional[Sequence[str]] = None,
) -> Dataset:
    """Dataset of n=0 rows only, for fitting zero-shot models."""
    return assemble_dataset(
        features, observations, feature_names=feature_names, zero_shot_only=True
    )


def minmax_scale(dataset: Dataset) -> tuple[Dataset, Scaler]:
    """Scale every feature of a dataset to [0, 1] and keep the scaler."""
    if len(dataset) == 0:
        raise ValueError("cannot scale an empty dataset")
    scaler = Scaler.fit(dataset.X, dataset.feature_names)
    scaled = replace(dataset, X=scaler.transform(dataset.X, dataset.feature_names))
    return scaled, scaler


# ---------------------------------------------------------------------------
# Correlation analysis


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d vectors of equal length")
    if x.size < 3:
        raise ValueError(f"need at least 3 points, got {x.size}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.dot(xc, xc))
    sy = float(np.dot(yc, yc))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("correlation of a constant vector")
    r = float(np.dot(xc, yc) / math.sqrt(sx * sy))
    return max(-1.0, min(1.0, r))


def pearson_pvalue(r: float, n: int) -> float:
    """Two-tailed p-value for a sample correlation r over n points.

    Uses t = r * sqrt(n - 2) / sqrt(1 - r^2) against Student-t with
    n - 2 degrees of freedom.
    """
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if not -1.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [-1, 1], got {r}")
    if abs(r) == 1.0:
        return 0.0
    if r == 0.0:
        return 1.0
    t = r * math.sqrt(n - 2) / math.sqrt(1.0 - r * r)
    return float(2.0 * scipy_stats.t.sf(abs(t), n - 2))


@dataclass(frozen=True)
class CorrelationRow:
    task: str
    block: str  # "feature" or "n_transform"
    predictor: str
    r: float
    p_value: float
    significant: bool


def correlation_report(
    dataset: Dataset,
    feature_names: Optional[Sequence[str]] = None,
    alpha: float = 0.05,
) -> list[CorrelationRow]:
    """Bivariate correlations with two-tailed significance stars.

    Two blocks are produced. The ``feature`` block correlates each
    feature with the zero-shot cross-lingual gap (score minus source
    score) over n=0 rows. The ``n_transform`` block correlates the raw
    score with n, log(n+1) and log^2(n+1) over all rows. Constant
    predictors are omitted with a warning.
    """
    rows: list[CorrelationRow] = []
    if feature_names is None:
        feature_names = [n for n in dataset.feature_names if n != "s_src"]

    zero_mask = (dataset.n_shots == 0) & np.isfinite(dataset.source_scores)
    gap = dataset.y[zero_mask] - dataset.source_scores[zero_mask]
    for name in feature_names:
        j = dataset.feature_names.index(name)
        x = dataset.X[zero_mask, j]
        try:
            r = pearson(x, gap)
        except (UndefinedCorrelationError, ValueError) as exc:
            warnings.warn(f"feature {name!r} omitted from report: {exc}", stacklevel=2)
            continue
        p = pearson_pvalue(r, x.size)
        rows.append(CorrelationRow(dataset.task, "feature", name, r, p, p <= alpha))

    n = dataset.n_shots.astype(float)
    transforms = {
        "n": n,
        "log(n+1)": np.log(n + 1.0),
        "log2(n+1)": np.log(n + 1.0) ** 2,
    }
    for label in N_TRANSFORMS:
        x = transforms[label]
        try:
            r = pearson(x, dataset.y)
        except (UndefinedCorrelationError, ValueError) as exc:
            warnings.warn(f"transform {label!r} omitted from report: {exc}", stacklevel=2)
            continue
        p = pearson_pvalue(r, x.size)
        rows.append(CorrelationRow(dataset.task, "n_transform", label, r, p, p <= alpha))
    return rows


def write_correlation_report(rows: Iterable[CorrelationRow], path: str | Path) -> None:
    """Report CSV; ``display`` holds the percentage form, starred when significant."""
    lines = ["task,block,predictor,r,p_value,significant,display"]
    for row in rows:
        display = f"{100.0 * row.r:.1f}" + ("*" if row.significant else "")
        lines.append(
            f"{row.task},{row.block},{row.predictor},{row.r:.6f},"
            f"{row.p_value:.6f},{int(row.significant)},{display}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Lasso by cyclic coordinate descent


def _soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def lasso_fit(
    X: np.ndarray, y: np.ndarray, lam: float = DEFAULT_LAMBDA
) -> tuple[float, np.ndarray]:
    """Minimize (1/2m)||y - b0 - Xb||^2 + lam*||b||_1.

    Cyclic coordinate descent with soft-thresholding on mean-centered
    data; the intercept is recovered afterwards. Stops when the largest
    coefficient change in a sweep falls below 1e-8, or after 10,000
    sweeps. Fully deterministic.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError("X must be (m, d) and y must be (m,) with matching m")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("X and y must be finite")

    m, d = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean

    col_sq = (Xc * Xc).sum(axis=0) / m  # z_j
    beta = np.zeros(d)
    residual = yc.copy()

    for _ in range(_CD_MAX_SWEEPS):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            # rho_j = (1/m) x_j . (residual with feature j added back)
            rho = (Xc[:, j] @ residual) / m + col_sq[j] * old
            new = _soft_threshold(rho, lam) / col_sq[j]
            if new != old:
                residual += Xc[:, j] * (old - new)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < _CD_TOL:
            break

    intercept = float(y_mean - x_mean @ beta)
    return intercept, beta


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest lambda at which every Lasso coefficient is zero."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m = X.shape[0]
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    return float(np.abs(Xc.T @ yc).max() / m)


def rfe(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    lam: float = DEFAULT_LAMBDA,
    k_keep: Optional[int] = None,
    task: str = "",
    kind: str = "zero_shot",
    scaler: Optional[Scaler] = None,
    extra_metadata: Optional[Mapping[str, object]] = None,
) -> RegressionModel:
    """Recursive feature elimination down to ``k_keep`` features.

    Refits the Lasso after each drop and removes the feature with the
    smallest absolute coefficient; exact ties break lexicographically by
    feature name, smallest first. ``X`` is assumed already scaled.
    """
    names = list(feature_names)
    if k_keep is None:
        k_keep = len(names)
    if not 1 <= k_keep <= len(names):
        raise ValueError(
            f"k_keep must lie in [1, {len(names)}], got {k_keep}"
        )
    active = list(range(len(names)))
    eliminated: list[str] = []
    while True:
        intercept, beta = lasso_fit(X[:, active], y, lam)
        if len(active) <= k_keep:
            break
        magnitudes = np.abs(beta)
        smallest = magnitudes.min()
        tied = [names[active[j]] for j in range(len(active))
                if magnitudes[j] == smallest]
        drop_name = min(tied)
        drop_pos = next(
            j for j in range(len(active)) if names[active[j]] == drop_name
        )
        eliminated.append(drop_name)
        del active[drop_pos]

    coefficients = {names[idx]: float(beta[j]) for j, idx in enumerate(active)}
    metadata = {
        "k_keep": k_keep,
        "elimination_order": eliminated,
        "n_rows": int(X.shape[0]),
        **(dict(extra_metadata) if extra_metadata else {}),
    }
    return RegressionModel(
        task=task,
        kind=kind,
        intercept=float(intercept),
        coefficients=coefficients,
        scaler=scaler if scaler is not None else Scaler.identity(names),
        lam=lam,
        metadata=metadata,
    )


def fit_model(
    dataset: Dataset,
    lam: float = DEFAULT_LAMBDA,
    k_keep: Optional[int] = None,
    kind: str = "zero_shot",
) -> RegressionModel:
    """Scale the dataset, then run Lasso + RFE; the scaler is stored."""
    scaled, scaler = minmax_scale(dataset)
    return rfe(
        scaled.X,
        scaled.y,
        dataset.feature_names,
        lam=lam,
        k_keep=k_keep,
        task=dataset.task,
        kind=kind,
        scaler=scaler,
        extra_metadata={"n_excluded": dataset.n_excluded},
    )


# ---------------------------------------------------------------------------
# Cross-validation


def rmse(pred: Sequence[float], gold: Sequence[float]) -> float:
    """Root mean squared error."""
    pred = np.asarray(pred, dtype=float)
    gold = np.asarray(gold, dtype=float)
    if pred.shape != gold.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("pred and gold must be equal-length non-empty vectors")
    return float(np.sqrt(np.mean((pred - gold) ** 2)))


@dataclass(frozen=True)
class FoldResult:
    target: str
    rmse: float
    model: RegressionModel
    train_index: tuple[int, ...]
    test_index: tuple[int, ...]
    predictions: np.ndarray
    golds: np.ndarray
    test_sources: tuple[str, ...]


@dataclass(frozen=True)
class CVResult:
    folds: tuple[FoldResult, ...]
    mean_rmse: float

    def fold(self, target: str) -> FoldResult:
        for fold in self.folds:
            if fold.target == target:
                return fold
        raise KeyError(target)


def lolo_cv(
    dataset: Dataset,
    lam: float = DEFAULT_LAMBDA,
    k_keep: Optional[int] = None,
    kind: str = "zero_shot",
) -> CVResult:
    """Leave-one-target-language-out cross-validation.

    One fold per distinct target language. Scaling and fitting see only
    the training rows of each fold; the reported mean is the unweighted
    mean of the per-fold RMSEs.
    """
    targets = sorted(set(dataset.targets))
    if len(targets) < 2:
        raise DegenerateSplitError(
            f"need at least 2 distinct target languages, got {len(targets)}"
        )
    folds = []
    for held_out in targets:
        test_idx = [i for i, t in enumerate(dataset.targets) if t == held_out]
        train_idx = [i for i, t in enumerate(dataset.targets) if t != held_out]
        if not train_idx:
            raise DegenerateSplitError(f"empty training set for fold {held_out!r}")
        train = dataset.subset(train_idx)
        model = fit_model(train, lam=lam, k_keep=k_keep, kind=kind)
        preds = np.array(
            [model.raw_score(dataset.row_features(i)) for i in test_idx]
        )
        golds = dataset.y[test_idx]
        folds.append(
            FoldResult(
                target=held_out,
                rmse=rmse(preds, golds),
                model=model,
                train_index=tuple(train_idx),
                test_index=tuple(test_idx),
                predictions=preds,
                golds=golds,
                test_sources=tuple(dataset.sources[i] for i in test_idx),
            )
        )
    mean_rmse = float(np.mean([fold.rmse for fold in folds]))
    return CVResult(folds=tuple(folds), mean_rmse=mean_rmse)


# ---------------------------------------------------------------------------
# Model file


def save_model(model: RegressionModel, path: str | Path) -> None:
    """Serialize a model (with scaler and fit provenance) as JSON."""
    payload = {
        "tool": "langxfer",
        "tool_version": _tool_version,
        "task": model.task,
        "kind": model.kind,
        "intercept": model.intercept,
        "lambda": model.lam,
        "coefficients": model.coefficients,
        "scaler": model.scaler.to_dict(),
        "metadata": model.metadata,
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(path: str | Path) -> RegressionModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return RegressionModel(
        task=payload["task"],
        kind=payload["kind"],
        intercept=float(payload["intercept"]),
        coefficients={k: float(v) for k, v in payload["coefficients"].items()},
        scaler=Scaler.from_dict(payload["scaler"]),
        lam=float(payload["lambda"]),
        metadata=dict(payload.get("metadata", {})),
    )
