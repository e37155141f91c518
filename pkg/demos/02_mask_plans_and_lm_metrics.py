"""Show the span-mask planning side and the LM metric aggregation side.

The library never runs a neural model: it plans which token spans an
external scorer should mask (deterministically from a seed), and folds
the scorer's per-sentence records back into per-language metrics.
"""

from pathlib import Path

from langxfer.corpus import Corpus, tokenize
from langxfer.lm import (
    LMRecord,
    aggregate_lm_records,
    generate_mask_plan,
    plan_corpus_masks,
    write_mask_plans,
)

SENTENCE = "the little steamboat whistled twice before leaving the old harbor town"
tokens = tokenize(SENTENCE)

print("=== single-sentence mask plans ===")
print(f"sentence ({len(tokens)} tokens): {SENTENCE}")
for seed in (0, 1, 2):
    plan = generate_mask_plan(tokens, seed=seed, density=0.3, mean_span_len=2)
    shown = list(tokens)
    for start, length in plan.spans:
        for i in range(start, start + length):
            shown[i] = "[" + shown[i] + "]"
    print(f"seed {seed}: spans={plan.spans}  ->  {' '.join(shown)}")

print("\nthe same seed always reproduces the same plan:")
again = generate_mask_plan(tokens, seed=1, density=0.3, mean_span_len=2)
print(f"seed 1 again: spans={again.spans}")

print("\n=== corpus-level planning ===")
corpus = Corpus(
    "en",
    (
        "a merchant counted coins beneath the lamplight",
        "rain fell softly on the tiled roofs",
        "the librarian closed the heavy oak door",
    ),
)
plans = plan_corpus_masks(corpus, seed=42)
for plan in plans:
    print(f"sentence {plan.sentence_id}: spans={plan.spans}")
out_dir = Path("demo_outputs")
out_dir.mkdir(exist_ok=True)
write_mask_plans({"en": plans}, out_dir / "mask_plan_demo.csv",
                 density=0.15, mean_span_len=3, seed=42)
print(f"wrote {out_dir / 'mask_plan_demo.csv'} (consumed by an external scorer)")

print("\n=== aggregating scorer records ===")
records = [
    LMRecord("en", 0, -4.21, True),
    LMRecord("en", 1, -7.95, False),
    LMRecord("en", 2, -2.10, True),
    LMRecord("fi", 0, -9.33, False),
    LMRecord("fi", 1, -6.48, False),
]
for lang, metrics in aggregate_lm_records(records).items():
    print(
        f"{lang}: mean log-likelihood={metrics.lm_l:.3f} "
        f"exact-match rate={metrics.lm_em:.2f} over {metrics.n_sentences} sentences"
    )
