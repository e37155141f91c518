"""model-probe command line: one-shot export of centroids and LM records."""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path
from typing import Optional, Sequence

from .probe import ProbeConfig, ProbeError, export_centroids, export_lm_records, load_scorer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="model-probe",
        description="export embedding centroids and span-mask scoring records",
    )
    parser.add_argument("--model", required=True, help="model id or local path")
    parser.add_argument("--corpora", required=True, help="directory of <lang>.txt files")
    parser.add_argument("--masks", help="mask-plan CSV (skip to export centroids only)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--k", type=int, default=64,
                        help="sentences per language centroid (default 64)")
    parser.add_argument("--layer", type=int, default=-1,
                        help="encoder hidden-state layer to pool (default final)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--langs", help="comma-separated language subset")
    parser.add_argument("--skip-centroids", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    languages = None
    if args.langs:
        languages = tuple(l.strip() for l in args.langs.split(",") if l.strip())
    config = ProbeConfig(
        model=args.model,
        corpora_dir=Path(args.corpora),
        out_dir=Path(args.out),
        masks_path=Path(args.masks) if args.masks else None,
        k=args.k,
        layer=args.layer,
        seed=args.seed,
        languages=languages,
    )
    try:
        tokenizer, model = load_scorer(config.model)
        if not args.skip_centroids:
            path = export_centroids(config, tokenizer, model)
            print(f"wrote {path}")
        if config.masks_path is not None:
            path = export_lm_records(config, tokenizer, model)
            print(f"wrote {path}")
        return 0
    except (ProbeError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
