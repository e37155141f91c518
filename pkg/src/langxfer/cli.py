"""Command-line surface: file-based, reproducible pipeline runs.

Subcommands: features, correlate, fit, cv, predict, rank, mask-plan.
Exit codes: 0 success, 1 internal error, 2 user/input error. Re-running
any command with identical inputs and seed writes byte-identical files.

Options may come from the command line or from a flat ``key = value``
config file (``--config``); explicit flags win over config values.
"""

from __future__ import annotations

import argparse
import math
import sys
import traceback
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .corpus import compute_corpus_stats, load_corpora
from .lm import (
    DEFAULT_MASK_DENSITY,
    DEFAULT_MEAN_SPAN_LEN,
    aggregate_lm_records,
    plan_corpus_masks,
    read_lm_records,
    write_mask_plans,
)
from .regression import (
    DEFAULT_K_KEEP,
    DEFAULT_LAMBDA,
    assemble_dataset,
    correlation_report,
    fit_model,
    load_model,
    lolo_cv,
    read_observations,
    save_model,
    write_correlation_report,
    zero_shot_dataset,
)
from .similarity import (
    FEATURE_COLUMNS,
    build_feature_table,
    load_centroids,
    ordered_pairs,
    read_feature_table,
    write_feature_table,
)
from .transfer import (
    N_SHOT_GRID,
    alpha_dataset,
    builtin_model,
    cv_best_source_accuracy,
    predict_zero_shot,
    rank_sources,
    read_curves,
)
from .typology import load_typology_db

_USER_ERRORS = (
    ValueError,
    KeyError,
    FileNotFoundError,
    IsADirectoryError,
    NotADirectoryError,
    PermissionError,
)

# Hard defaults applied after the config merge; every configurable flag
# is declared with default=None so "not given on the command line" is
# distinguishable from an explicit value.
_FALLBACKS = {
    "seed": 0,
    "out": ".",
    "kind": "zero_shot",
    "lam": DEFAULT_LAMBDA,
    "k_keep": None,
    "token_budget": None,
    "ngram": 3,
    "n": 0,
    "density": DEFAULT_MASK_DENSITY,
    "mean_span_len": DEFAULT_MEAN_SPAN_LEN,
}

_INT_KEYS = {"seed", "k_keep", "token_budget", "ngram", "n", "mean_span_len"}
_FLOAT_KEYS = {"lam", "density"}
_BOOL_KEYS = {"include_self", "plot_data", "allow_self"}

# Config keys whose argparse destination is spelled differently.
_CONFIG_DEST = {"lambda": "lam"}


def _load_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` config file; # comments and blanks ignored."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    if getattr(args, "config", None):
        for key, raw in _load_config(args.config).items():
            dest = _CONFIG_DEST.get(key, key.replace("-", "_"))
            if not hasattr(args, dest) or getattr(args, dest) is not None:
                continue
            if dest in _INT_KEYS:
                value: object = int(raw)
            elif dest in _FLOAT_KEYS:
                value = float(raw)
            elif dest in _BOOL_KEYS:
                value = raw.lower() in ("1", "true", "yes")
            else:
                value = raw
            setattr(args, dest, value)
    for dest, fallback in _FALLBACKS.items():
        if hasattr(args, dest) and getattr(args, dest) is None:
            setattr(args, dest, fallback)
    for dest in _BOOL_KEYS:
        if hasattr(args, dest) and getattr(args, dest) is None:
            setattr(args, dest, False)
    return args


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ValueError(f"missing required option(s): {flags}")


def _resolve_model(ref: str):
    if ref.startswith("builtin:"):
        return builtin_model(ref.split(":", 1)[1])
    path = Path(ref)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {ref}")
    return load_model(path)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _langs(args) -> list[str]:
    _require(args, "langs")
    langs = [l.strip() for l in args.langs.split(",") if l.strip()]
    if not langs:
        raise ValueError("empty language list")
    return langs


def _source_scores(observations, task: str) -> dict[str, float]:
    scores: dict[str, float] = {}
    for obs in observations:
        if obs.task != task:
            continue
        if obs.source_score is not None:
            scores.setdefault(obs.source, obs.source_score)
        if obs.source == obs.target and obs.n == 0:
            scores.setdefault(obs.source, obs.score)
    return scores


def _filter_task(rows, task: str, what: str):
    kept = [r for r in rows if r.task == task]
    if not kept:
        raise ValueError(f"no {what} rows for task {task!r}")
    return kept


def _input_file(path: str, what: str) -> str:
    if not Path(path).is_file():
        raise FileNotFoundError(f"{what} file not found: {path}")
    return path


# ---------------------------------------------------------------------------
# Subcommands


def cmd_features(args) -> int:
    _require(args, "task", "corpora")
    langs = _langs(args)
    corpora = load_corpora(args.corpora, langs, token_budget=args.token_budget)
    stats = {lang: compute_corpus_stats(c, n=args.ngram) for lang, c in corpora.items()}

    typology = None
    if args.typology:
        typology = load_typology_db(_input_file(args.typology, "typology"))
    centroids = None
    if args.centroids:
        centroids = load_centroids(_input_file(args.centroids, "centroids"))
    lm_metrics = None
    if args.lm_records:
        records, _meta = read_lm_records(_input_file(args.lm_records, "LM records"))
        lm_metrics = aggregate_lm_records(records)
    source_scores = None
    if args.observations:
        observations = read_observations(_input_file(args.observations, "observations"))
        source_scores = _source_scores(observations, args.task)

    pairs = ordered_pairs(langs, include_self=args.include_self)
    rows = build_feature_table(
        args.task,
        pairs,
        stats,
        typology=typology,
        centroids=centroids,
        lm_metrics=lm_metrics,
        source_scores=source_scores,
    )
    out_path = _out_dir(args) / f"features_{args.task}.csv"
    write_feature_table(rows, out_path, metadata={"seed": args.seed})

    print(f"wrote {out_path} ({len(rows)} rows)")
    gaps = {
        name: count
        for name in FEATURE_COLUMNS
        if (count := sum(1 for r in rows if r.feature(name) is None))
    }
    if gaps:
        print("absent feature counts: " + ", ".join(f"{k}={v}" for k, v in gaps.items()))
    return 0


def cmd_correlate(args) -> int:
    _require(args, "task", "features", "observations")
    features = _filter_task(
        read_feature_table(_input_file(args.features, "feature table")),
        args.task, "feature",
    )
    observations = _filter_task(
        read_observations(_input_file(args.observations, "observations")),
        args.task, "observation",
    )
    dataset = assemble_dataset(features, observations)
    rows = correlation_report(dataset)
    out_path = _out_dir(args) / f"correlation_{args.task}.csv"
    write_correlation_report(rows, out_path)
    print(f"wrote {out_path}")
    print(f"{'block':<12} {'predictor':<12} {'r x100':>8}  p-value")
    for row in rows:
        star = "*" if row.significant else ""
        print(
            f"{row.block:<12} {row.predictor:<12} {100 * row.r:>7.1f}{star:<1}  "
            f"{row.p_value:.4f}"
        )
    if dataset.n_excluded:
        print(f"excluded rows (missing features or unjoined): {dataset.n_excluded}")
    return 0


def _build_dataset(args):
    features = _filter_task(
        read_feature_table(_input_file(args.features, "feature table")),
        args.task, "feature",
    )
    observations = _filter_task(
        read_observations(_input_file(args.observations, "observations")),
        args.task, "observation",
    )
    if args.kind == "zero_shot":
        return zero_shot_dataset(features, observations)
    return alpha_dataset(features, observations)


def _k_keep(args, dataset) -> Optional[int]:
    if args.k_keep is not None:
        return args.k_keep
    default = DEFAULT_K_KEEP.get(args.task)
    if default is not None:
        return min(default, len(dataset.feature_names))
    return None


def cmd_fit(args) -> int:
    _require(args, "task", "features", "observations")
    dataset = _build_dataset(args)
    model = fit_model(dataset, lam=args.lam, k_keep=_k_keep(args, dataset), kind=args.kind)
    model.metadata["seed"] = args.seed
    out_path = _out_dir(args) / f"model_{args.task}_{args.kind}.json"
    save_model(model, out_path)
    print(f"wrote {out_path}")
    print(f"rows used: {len(dataset)} (excluded: {dataset.n_excluded})")
    print(f"intercept: {model.intercept:.4f}")
    for name, coef in sorted(model.coefficients.items()):
        print(f"  {name:<12} {coef:>10.4f}")
    return 0


def cmd_cv(args) -> int:
    _require(args, "task", "features", "observations")
    dataset = _build_dataset(args)
    result = lolo_cv(dataset, lam=args.lam, k_keep=_k_keep(args, dataset), kind=args.kind)
    accuracy = cv_best_source_accuracy(result) if args.kind == "zero_shot" else None

    lines = [f"# seed={args.seed}", "fold_target,rmse,n_test"]
    for fold in result.folds:
        lines.append(f"{fold.target},{fold.rmse:.6f},{len(fold.test_index)}")
    lines.append(f"mean,{result.mean_rmse:.6f},{len(dataset)}")
    if accuracy is not None:
        lines.append(f"a_src,{accuracy:.6f},{len(result.folds)}")
    out_path = _out_dir(args) / f"cv_{args.task}_{args.kind}.csv"
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    print(f"wrote {out_path}")
    print("leave-one-target-language-out results")
    print(f"{'fold (target)':<14} RMSE")
    for fold in result.folds:
        print(f"{fold.target:<14} {fold.rmse:>8.3f}")
    print(f"{'mean':<14} {result.mean_rmse:>8.3f}")
    if accuracy is not None:
        print(f"A_src top-1 source language prediction accuracy: {accuracy:.3f}")
    return 0


def _pair_curves(args, task: str):
    _require(args, "curves")
    return {
        (c.source, c.target): c
        for c in read_curves(_input_file(args.curves, "curve"))
        if c.task == task
    }


def cmd_predict(args) -> int:
    _require(args, "task", "model", "features", "source", "target")
    model = _resolve_model(args.model)
    features = _filter_task(
        read_feature_table(_input_file(args.features, "feature table")),
        args.task, "feature",
    )
    rows = [r for r in features if r.source == args.source and r.target == args.target]
    if not rows:
        raise ValueError(f"no feature row for pair ({args.source}, {args.target})")
    prediction = predict_zero_shot(model, rows[0])
    score = prediction.score
    curve = None
    if args.n > 0 or args.plot_data:
        curve = _pair_curves(args, args.task).get((args.source, args.target))
        if curve is None:
            raise ValueError(
                f"no few-shot curve for pair ({args.source}, {args.target})"
            )
    if args.n > 0:
        score += curve.alpha * math.log(args.n + 1.0)
    flag = " (out of metric range)" if not 0 <= score <= 100 else ""
    print(
        f"{args.task} {args.source}->{args.target} n={args.n}: "
        f"predicted score {score:.3f}{flag}"
    )

    if args.plot_data:
        lines = [f"# seed={args.seed}", "task,source,target,n,predicted_score"]
        for n in N_SHOT_GRID:
            point = prediction.score + curve.alpha * math.log(n + 1.0)
            lines.append(f"{args.task},{args.source},{args.target},{n},{point:.6f}")
        out_path = _out_dir(args) / f"curve_{args.task}_{args.source}_{args.target}.csv"
        out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {out_path} ({len(N_SHOT_GRID)} points)")
    return 0


def cmd_rank(args) -> int:
    _require(args, "task", "model", "features", "target")
    model = _resolve_model(args.model)
    features = _filter_task(
        read_feature_table(_input_file(args.features, "feature table")),
        args.task, "feature",
    )
    curves = _pair_curves(args, args.task) if args.n > 0 else None
    ranking = rank_sources(
        model,
        args.target,
        features,
        n=args.n,
        curves=curves,
        include_self=args.allow_self,
    )
    lines = [
        f"# seed={args.seed}",
        "task,target,n,rank,source,predicted_score,out_of_range",
    ]
    for rank, entry in enumerate(ranking.entries, start=1):
        lines.append(
            f"{ranking.task},{ranking.target},{ranking.n},{rank},"
            f"{entry.source},{entry.score:.6f},{int(entry.out_of_range)}"
        )
    out_path = _out_dir(args) / f"ranking_{args.task}_{args.target}_n{args.n}.csv"
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    print(f"wrote {out_path}")
    print(f"best sources for {args.target} (n={args.n}):")
    print(f"{'rank':<5} {'source':<8} predicted")
    for rank, entry in enumerate(ranking.entries, start=1):
        flag = " !" if entry.out_of_range else ""
        print(f"{rank:<5} {entry.source:<8} {entry.score:>9.3f}{flag}")
    return 0


def cmd_mask_plan(args) -> int:
    _require(args, "corpora")
    langs = _langs(args)
    corpora = load_corpora(args.corpora, langs)
    plans = {
        lang: plan_corpus_masks(
            corpus, seed=args.seed, density=args.density,
            mean_span_len=args.mean_span_len,
        )
        for lang, corpus in corpora.items()
    }
    out_path = _out_dir(args) / "mask_plan.csv"
    write_mask_plans(
        plans, out_path, density=args.density,
        mean_span_len=args.mean_span_len, seed=args.seed,
    )
    total = sum(len(p) for p in plans.values())
    print(f"wrote {out_path} ({total} sentence plans, {len(plans)} languages)")
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="run seed, recorded in outputs (default 0)")
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--out", default=None, help="output directory (default .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="langxfer",
        description="language similarity features and cross-lingual transfer prediction",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="compute the pairwise feature table")
    _add_common(p)
    p.add_argument("--task")
    p.add_argument("--corpora", help="directory of <lang>.txt files")
    p.add_argument("--langs", help="comma-separated language codes")
    p.add_argument("--typology", help="typology TSV (lang, class, property)")
    p.add_argument("--centroids", help="centroid TSV (lang, v1,...,vd)")
    p.add_argument("--lm-records", dest="lm_records", help="LM scoring records CSV")
    p.add_argument("--observations", help="observations CSV (for source scores)")
    p.add_argument("--token-budget", dest="token_budget", type=int)
    p.add_argument("--ngram", type=int)
    p.add_argument(
        "--include-self", dest="include_self", action="store_const", const=True,
        help="also emit source==target rows (excluded by default)",
    )
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("correlate", help="bivariate correlation report")
    _add_common(p)
    p.add_argument("--task")
    p.add_argument("--features")
    p.add_argument("--observations")
    p.set_defaults(func=cmd_correlate)

    for name, helptext in (
        ("fit", "fit a model on the full dataset"),
        ("cv", "leave-one-target-language-out cross-validation"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        p.add_argument("--task")
        p.add_argument("--features")
        p.add_argument("--observations")
        p.add_argument("--kind", choices=("zero_shot", "alpha"))
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--k-keep", dest="k_keep", type=int)
        p.set_defaults(func=cmd_fit if name == "fit" else cmd_cv)

    p = sub.add_parser("predict", help="predict one pair's transfer score")
    _add_common(p)
    p.add_argument("--task")
    p.add_argument("--model", help="model file or builtin:<task>")
    p.add_argument("--features")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--n", type=int)
    p.add_argument("--curves", help="few-shot curve CSV (needed when n > 0)")
    p.add_argument("--plot-data", dest="plot_data", action="store_const", const=True,
                   help="emit (n, score) curve points for external plotting")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("rank", help="rank source languages for a target")
    _add_common(p)
    p.add_argument("--task")
    p.add_argument("--model", help="model file or builtin:<task>")
    p.add_argument("--features")
    p.add_argument("--target")
    p.add_argument("--n", type=int)
    p.add_argument("--curves", help="few-shot curve CSV (needed when n > 0)")
    p.add_argument("--allow-self", dest="allow_self", action="store_const", const=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("mask-plan", help="emit deterministic span-mask plans")
    _add_common(p)
    p.add_argument("--corpora", help="directory of <lang>.txt files")
    p.add_argument("--langs", help="comma-separated language codes")
    p.add_argument("--density", type=float)
    p.add_argument("--mean-span-len", dest="mean_span_len", type=int)
    p.set_defaults(func=cmd_mask_plan)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args)
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
